"""Explicit part of the monodromy operator and its residual.

``M = M0 + Md + M1 + M2`` where

* ``M0_jk = delta_jk e^{(T/ih) k^2}``,
* ``Md_{-k,k} = e^{(T/ih) k^2} / (ih) * int_0^T v_{-2k}``,
* ``M1_jk = v_{j-k}(0) (e^{(T/ih)k^2} - e^{(T/ih)j^2}) / (k^2 - j^2)`` off ``j^2 = k^2``,

and ``M2`` is what is left.  ``T = 2*pi`` for the forward monodromy; the same
builders with ``T = -2*pi`` give the pieces of ``W(-2*pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bounds import NOISE_FLOOR, BoundFit, DecayBound, EmptyRegion, bracket, fit_bound
from .potential import FourierPotential, harmonic_integral
from .propagator import PERIOD, ModeGrid, OperatorMatrix, StateVector, free_phase

__all__ = [
    "Decomposition",
    "BoundReport",
    "build_m0",
    "build_md",
    "build_m1",
    "first_order_column",
    "first_order_correction",
    "residual_m2",
    "check_bound",
    "region_mask",
    "theorem_bound",
    "constants_stable",
    "coupling_at_zero",
]


def _require_gauge(p: FourierPotential):
    if not p.is_gauge_normalized():
        raise ValueError("expected a gauge-normalized potential (no k = 0 mode)")


def build_m0(grid: ModeGrid, h: float, period: float = PERIOD) -> OperatorMatrix:
    return OperatorMatrix(np.diag(free_phase(grid.modes, period, h)), "M0")


def build_md(p: FourierPotential, grid: ModeGrid, h: float, period: float = PERIOD) -> OperatorMatrix:
    _require_gauge(p)
    K = grid.K
    out = np.zeros((grid.size, grid.size), dtype=complex)
    m = p.harmonics
    for k in grid.modes:
        tab = p.coeffs.get(int(-2 * k))
        if tab is None:
            continue
        integral = harmonic_integral(tab, m, 0.0, period)
        out[K - k, K + k] = free_phase(k, period, h) / (1j * h) * integral
    return OperatorMatrix(out, "Md")


def coupling_at_zero(p: FourierPotential, grid: ModeGrid) -> np.ndarray:
    """``v_{j-k}(0)`` on the grid."""
    d = grid.modes[:, None] - grid.modes[None, :]
    out = np.zeros(d.shape, dtype=complex)
    for q in p.modes:
        out[d == q] = p.table(q).sum()
    return out


def build_m1(p: FourierPotential, grid: ModeGrid, h: float, period: float = PERIOD) -> OperatorMatrix:
    k = grid.modes.astype(float)
    den = k[None, :] ** 2 - k[:, None] ** 2  # k^2 - j^2
    e = free_phase(k, period, h)
    num = coupling_at_zero(p, grid) * (e[None, :] - e[:, None])
    out = np.zeros_like(num)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return OperatorMatrix(out, "M1")


def first_order_column(p: FourierPotential, grid: ModeGrid, h: float, k0: int, t: float) -> StateVector:
    """Closed-form solution of the single-source system started at ``delta_{k k0}``.

    Only the ``j = k0`` term of the coupling is kept, so every component is a
    sum of per-harmonic exponential integrals.
    """
    _require_gauge(p)
    K = grid.K
    if abs(k0) > K:
        raise IndexError("|k0| must not exceed K")
    m = p.harmonics
    psi = np.zeros(grid.size, dtype=complex)
    psi[K + k0] = free_phase(k0, t, h)
    for q in p.modes:
        k = k0 + q
        if abs(k) > K:
            continue
        omega = (k * k - k0 * k0) / h
        integral = harmonic_integral(p.table(q), m, omega, t)
        psi[K + k] += free_phase(k, t, h) / (1j * h) * integral
    return StateVector(psi, "lab", t)


def first_order_correction(p: FourierPotential, grid: ModeGrid, h: float, k0: int, t: float) -> StateVector:
    """Integration-by-parts remainder of the first-order column.

    ``-e^{(t/ih)k^2} int_0^t v'_{k-k0}(tau) e^{(tau/ih)(k0^2-k^2)} dtau / (k0^2-k^2)``,
    zero at ``k = +-k0``.
    """
    _require_gauge(p)
    K = grid.K
    m = p.harmonics
    out = np.zeros(grid.size, dtype=complex)
    for q in p.modes:
        k = k0 + q
        if abs(k) > K or k * k == k0 * k0:
            continue
        omega = (k * k - k0 * k0) / h
        dv = p.table(q) * (1j * m)
        integral = harmonic_integral(dv, m, omega, t)
        out[K + k] = -free_phase(k, t, h) * integral / (k0 * k0 - k * k)
    return StateVector(out, "lab", t)


@dataclass(frozen=True)
class Decomposition:
    m0: OperatorMatrix
    md: OperatorMatrix
    m1: OperatorMatrix
    m2: OperatorMatrix
    h: float
    period: float = PERIOD

    @property
    def explicit(self) -> np.ndarray:
        return self.m0.entries + self.md.entries + self.m1.entries

    @property
    def total(self) -> np.ndarray:
        return self.explicit + self.m2.entries


def residual_m2(
    M: OperatorMatrix, p: FourierPotential, grid: ModeGrid, h: float, period: float = PERIOD
) -> Decomposition:
    if M.entries.shape != (grid.size, grid.size):
        raise ValueError("monodromy and grid sizes differ")
    m0 = build_m0(grid, h, period)
    md = build_md(p, grid, h, period)
    m1 = build_m1(p, grid, h, period)
    m2 = M.entries - m0.entries - md.entries - m1.entries
    return Decomposition(m0, md, m1, OperatorMatrix(m2, "M2"), h, period)


# ---------------------------------------------------------------------------
# bound checks


def theorem_bound(alpha: float, beta: float, c: float = 1.0) -> DecayBound:
    """Template ``c e^{-beta|j-k|} / (<j><k><j-k>^{alpha-1})``."""
    return DecayBound(c=c, b=beta, p=1.0, q=1.0, r=max(alpha - 1.0, 0.0))


def region_mask(K: int, region) -> np.ndarray:
    """2-D mask from a half-width (``|j|, |k| <= region``) or an explicit mask."""
    n = 2 * K + 1
    if isinstance(region, (int, np.integer)):
        if region < 0:
            raise EmptyRegion("negative half-width")
        m = np.abs(np.arange(-K, K + 1)) <= region
        return m[:, None] & m[None, :]
    mask = np.asarray(region, dtype=bool)
    if mask.shape != (n, n):
        raise ValueError("region mask has the wrong shape")
    return mask


@dataclass
class BoundReport:
    c_min: float
    max_ratio: float
    row_slope: float | None
    k0_slope: float | None
    fit: BoundFit

    def to_dict(self) -> dict:
        return {
            "c_min": self.c_min,
            "max_ratio": self.max_ratio,
            "row_slope": self.row_slope,
            "k0_slope": self.k0_slope,
            "fit_slopes": self.fit.slopes,
            "n_entries": self.fit.n_entries,
            "witness": list(self.fit.witness) if self.fit.witness else None,
        }


def _slope(x, y):
    if x.size < 3 or np.ptp(x) == 0:
        return None
    return float(np.polyfit(x, y, 1)[0])


def check_bound(M, bound: DecayBound, region) -> BoundReport:
    """Compare ``|M_jk|`` with ``bound`` over ``region``.

    Besides the worst ratio and the minimal constant, two regressions are
    reported:

    * ``row_slope``: ``log(|M_jk| <j>^p <k>^q e^{b|j-k|})`` against
      ``log<j-k>`` over off-diagonal entries (decay along rows);
    * ``k0_slope``: the column envelope ``max_k |M_{k,k0}| <k-k0>^r e^{b|k-k0|}``
      against ``log<k0>`` (decay with the column index).

    Entries below ``1e-14`` are left out of both regressions.
    """
    a = M.entries if isinstance(M, OperatorMatrix) else np.asarray(M)
    K = (a.shape[0] - 1) // 2
    modes = np.arange(-K, K + 1)
    mask = region_mask(K, region)
    fit = fit_bound(a, modes, modes, bound, mask)
    max_ratio = fit.c_min / bound.c if bound.c > 0 else (np.inf if fit.c_min > 0 else 0.0)

    J, C = np.meshgrid(modes, modes, indexing="ij")
    mag = np.abs(a)
    off = mask & (J != C) & (mag > NOISE_FLOOR)
    norm = mag * bracket(J) ** bound.p * bracket(C) ** bound.q * np.exp(bound.b * np.abs(J - C))
    row_slope = _slope(np.log(bracket(J - C)[off]), np.log(norm[off]))

    col = mag * bracket(J - C) ** bound.r * np.exp(bound.b * np.abs(J - C))
    col = np.where(mask, col, 0.0)
    env = col.max(axis=0)
    keep = env > NOISE_FLOOR
    k0_slope = _slope(np.log(bracket(modes[keep])), np.log(env[keep]))
    return BoundReport(fit.c_min, float(max_ratio), row_slope, k0_slope, fit)


def constants_stable(c_a: float, c_b: float, tol: float = 0.2, floor: float = 1e-12) -> bool:
    """True when two fitted constants differ by at most ``tol`` (relative)."""
    if not (np.isfinite(c_a) and np.isfinite(c_b)):
        return False
    if max(c_a, c_b) <= floor:
        return True
    return abs(c_b - c_a) <= tol * max(c_a, c_b)
