import numpy as np
import pytest

from floquet_monodromy import FourierPotential, IntegratorConfig, ModeGrid, monodromy
from floquet_monodromy.propagator import PERIOD

H = 2 * np.pi


def p1_potential():
    """V = 2 cos(2x) (1 + cos t): modes +-2 with harmonics {0: 1, +-1: 1/2}."""
    return FourierPotential.from_modes({2: {0: 1.0, 1: 0.5, -1: 0.5}}, alpha=3, beta=0, gamma=2, c_v=54)


def random_potential(rng, kmax=4, mt=2, alpha=3.0):
    """Admissible random potential without a k = 0 mode."""
    modes = {}
    for k in range(1, kmax + 1):
        tab = {}
        for m in range(-mt, mt + 1):
            z = (rng.normal() + 1j * rng.normal()) / (1 + k) ** alpha
            tab[m] = z
        modes[k] = tab
    p = FourierPotential.from_modes(modes, alpha=alpha, beta=0.0, gamma=2, c_v=1.0)
    from floquet_monodromy import verify_class

    need = verify_class(p, strict=False).minimal_c_v
    return FourierPotential.from_modes(modes, alpha=alpha, beta=0.0, gamma=2, c_v=need * 1.01)


@pytest.fixture(scope="session")
def p1():
    return p1_potential()


@pytest.fixture(scope="session")
def grid32():
    return ModeGrid(32, 8)


@pytest.fixture(scope="session")
def grid48():
    return ModeGrid(48, 8)


@pytest.fixture(scope="session")
def M32(p1, grid32):
    return monodromy(p1, H, grid32)


@pytest.fixture(scope="session")
def M48(p1, grid48):
    return monodromy(p1, H, grid48)


@pytest.fixture(scope="session")
def M32_half_dt(p1, grid32):
    dt = IntegratorConfig().step(H, 32) / 2
    return monodromy(p1, H, grid32, IntegratorConfig(dt=dt))


@pytest.fixture(scope="session")
def M32_split(p1, grid32):
    return monodromy(p1, H, grid32, IntegratorConfig(method="split"))


@pytest.fixture(scope="session")
def M32_back(p1, grid32):
    return monodromy(p1, H, grid32, period=-PERIOD)


