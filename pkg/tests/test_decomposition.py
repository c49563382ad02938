import numpy as np
import pytest

from floquet_monodromy.bounds import DecayBound, EmptyRegion, bracket
from floquet_monodromy.conjugation import build_G
from floquet_monodromy.decomposition import (
    build_m0,
    build_m1,
    build_md,
    check_bound,
    constants_stable,
    first_order_column,
    first_order_correction,
    region_mask,
    residual_m2,
    theorem_bound,
)
from floquet_monodromy.potential import FourierPotential
from floquet_monodromy.propagator import PERIOD, ModeGrid, monodromy

from conftest import H, p1_potential, random_potential

G8 = ModeGrid(8, 2)


class TestM0:
    def test_resonant_h(self):
        np.testing.assert_allclose(build_m0(G8, 1.0).entries, np.eye(17), atol=1e-12)

    def test_quarter(self):
        m0 = build_m0(G8, 4.0)
        assert m0[1, 1] == pytest.approx(-1j)
        assert m0[0, 1] == 0


class TestMd:
    def test_p1_entry(self):
        md = build_md(p1_potential(), G8, 1.0)
        assert md[-1, 1] == pytest.approx(-2j * np.pi)
        assert md[-2, 2] == 0 and md[1, 1] == 0

    def test_support_on_antidiagonal(self):
        md = build_md(p1_potential(), G8, H).entries
        J, K = np.meshgrid(G8.modes, G8.modes, indexing="ij")
        assert np.all(md[J != -K] == 0)

    def test_only_time_average_contributes(self):
        p = FourierPotential.from_modes({2: {1: 0.5, -1: 0.5}})
        assert np.max(np.abs(build_md(p, G8, H).entries)) <= 1e-15

    def test_needs_gauge(self):
        with pytest.raises(ValueError):
            build_md(FourierPotential.from_modes({0: {0: 1.0}}), G8, H)


class TestM1:
    def test_zero_where_squares_match(self):
        m1 = build_m1(p1_potential(), G8, H)
        assert m1[1, -1] == 0 and m1[2, 2] == 0

    def test_resonant_h_vanishes(self):
        assert build_m1(p1_potential(), G8, 1.0)[3, 1] == pytest.approx(0, abs=1e-14)

    def test_closed_form_value(self):
        val = build_m1(p1_potential(), G8, H)[3, 1]
        expect = 2 * (np.exp(-1j) - np.exp(-9j)) / (1 - 9)
        assert val == pytest.approx(expect, abs=1e-15)
        assert val == pytest.approx(-0.3629 + 0.1074j, abs=1e-4)


class TestFirstOrder:
    def test_free(self):
        col = first_order_column(FourierPotential.zero(), G8, 1.0, 3, PERIOD)
        np.testing.assert_allclose(col.amplitudes, np.eye(17)[3 + 8], atol=1e-12)

    def test_p1_mirror_component(self):
        col = first_order_column(p1_potential(), G8, 1.0, 1, PERIOD)
        assert col[-1] == pytest.approx(-2j * np.pi)

    def test_matches_explicit_assembly(self, M32):
        g = ModeGrid(32, 8)
        p = p1_potential()
        D = residual_m2(M32, p, g, H)
        for k0 in (1, -4, 7):
            psi = first_order_column(p, g, H, k0, PERIOD).amplitudes
            corr = first_order_correction(p, g, H, k0, PERIOD).amplitudes
            assert np.max(np.abs(psi - corr - D.explicit[:, 32 + k0])) <= 1e-13

    def test_correction_bound(self):
        p, g = p1_potential(), ModeGrid(32, 8)
        for k0 in range(-16, 17):
            c = first_order_correction(p, g, H, k0, PERIOD).amplitudes
            bound = 2 * np.pi * H * p.c_v / (bracket(k0) ** 2 * bracket(g.modes - k0) ** p.alpha)
            assert np.all(np.abs(c) <= bound)


class TestResidual:
    def test_free_residual_vanishes(self):
        g = ModeGrid(16, 4)
        D = residual_m2(monodromy(FourierPotential.zero(), H, g), FourierPotential.zero(), g, H)
        assert np.max(np.abs(D.m2.entries)) <= 1e-9

    def test_parts_sum_to_input(self, M32):
        D = residual_m2(M32, p1_potential(), ModeGrid(32, 8), H)
        np.testing.assert_allclose(D.total, M32.entries, rtol=0, atol=1e-15)
        np.testing.assert_allclose(np.abs(np.diag(D.m0.entries)), 1.0)

    def test_size_mismatch(self, M32):
        with pytest.raises(ValueError):
            residual_m2(M32, p1_potential(), ModeGrid(16, 4), H)

    def test_column_decays_with_offset(self, M32):
        D = residual_m2(M32, p1_potential(), ModeGrid(32, 8), H)
        col = np.abs(D.m2.entries[:, 32 + 8])
        off = np.abs(np.arange(-32, 33) - 8)
        bands = [col[(off >= a) & (off < a + 4)].max() for a in range(0, 16, 4)]
        assert all(b < a for a, b in zip(bands, bands[1:]))

    def test_p1_bound_fit(self, M32):
        D = residual_m2(M32, p1_potential(), ModeGrid(32, 8), H)
        r = check_bound(D.m2, theorem_bound(3, 0), 16)
        assert np.isfinite(r.c_min) and r.c_min > 0
        assert r.row_slope <= -1.5 and r.k0_slope <= -1.5

    def test_backward_adjoint(self, M32, M32_back):
        g, p = ModeGrid(32, 8), p1_potential()
        fwd = residual_m2(M32, p, g, H).m2.entries
        bwd = residual_m2(M32_back, p, g, H, period=-PERIOD).m2.entries
        assert np.max(np.abs(bwd - fwd.conj().T)) <= 1e-6


class TestCheckBound:
    def test_zero(self):
        r = check_bound(np.zeros((9, 9)), theorem_bound(3, 0), 4)
        assert r.c_min == 0 and r.row_slope is None and r.k0_slope is None

    def test_identity_flat_bound(self):
        r = check_bound(np.eye(9), DecayBound(c=1.0), 4)
        assert r.max_ratio == 1.0

    def test_negative_region(self):
        with pytest.raises(EmptyRegion):
            region_mask(4, -1)

    def test_mask_shape(self):
        with pytest.raises(ValueError):
            region_mask(4, np.ones((3, 3), bool))


def test_constants_stable():
    assert constants_stable(10.0, 11.9)
    assert not constants_stable(10.0, 13.0)
    assert constants_stable(0.0, 1e-13)
    assert not constants_stable(1.0, np.inf)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_first_order_identity_random(seed):
    p = random_potential(np.random.default_rng(seed))
    g = ModeGrid(16, 4)
    for h in (H, 1.7):
        m0, m1 = build_m0(g, h).entries, build_m1(p, g, h).entries
        G = build_G(p, g).entries
        assert np.max(np.abs(m1 - (m0 @ G - G @ m0))) <= 1e-12
