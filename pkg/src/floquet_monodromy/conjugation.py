"""Generator ``G`` of the first unitary conjugation and its powers.

``G_jk = v_{j-k}(0) / (j^2 - k^2)`` (zero when ``j^2 = k^2``) is
anti-selfadjoint for a real potential, so ``S = e^{-G}`` is unitary and
``S* M S`` removes the explicit first-order term ``M1``: algebraically
``M1 = M0 G - G M0`` entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .bounds import DecayBound, bracket, empirical_cnu, fit_bound
from .decomposition import coupling_at_zero, region_mask
from .potential import FourierPotential
from .propagator import ModeGrid, OperatorMatrix

__all__ = [
    "Generator",
    "NotSkew",
    "build_G",
    "exp_skew",
    "exp_remainder",
    "conjugate",
    "power_decay_check",
    "GnReport",
]


class NotSkew(ValueError):
    """Matrix is not anti-selfadjoint to the required tolerance."""


@dataclass(frozen=True)
class Generator:
    G: OperatorMatrix

    @property
    def entries(self) -> np.ndarray:
        return self.G.entries

    @property
    def skew_defect(self) -> float:
        a = self.G.entries
        return float(np.max(np.abs(a + a.conj().T))) if a.size else 0.0


def build_G(p: FourierPotential, grid: ModeGrid) -> Generator:
    if not p.is_gauge_normalized():
        raise ValueError("expected a gauge-normalized potential (no k = 0 mode)")
    k = grid.modes.astype(float)
    den = k[:, None] ** 2 - k[None, :] ** 2
    v0 = coupling_at_zero(p, grid)
    out = np.zeros_like(v0)
    nz = den != 0
    out[nz] = v0[nz] / den[nz]
    return Generator(OperatorMatrix(out, "G"))


def exp_skew(gen: Generator | np.ndarray, sign: int = 1, tol: float = 1e-10) -> OperatorMatrix:
    """``e^{sign * G}`` through the eigendecomposition of the Hermitian ``iG``."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    a = gen.entries if isinstance(gen, Generator) else np.asarray(gen, dtype=complex)
    if a.size and np.max(np.abs(a + a.conj().T)) > tol:
        raise NotSkew("G + G* exceeds tolerance")
    H = 1j * a
    H = 0.5 * (H + H.conj().T)
    w, Q = eigh(H)
    # G = -iH, so e^{sG} = Q diag(e^{-i s w}) Q*
    E = (Q * np.exp(-1j * sign * w)) @ Q.conj().T
    defect = np.max(np.abs(E @ E.conj().T - np.eye(E.shape[0])))
    if defect > 1e-10:
        raise ArithmeticError(f"exponential lost unitarity ({defect:.2e})")
    return OperatorMatrix(E, "exp(+G)" if sign > 0 else "exp(-G)")


def exp_remainder(gen: Generator, sign: int = 1) -> OperatorMatrix:
    """``G^{+-} = e^{+-G} - I -+ G``."""
    E = exp_skew(gen, sign).entries
    R = E - np.eye(E.shape[0]) - sign * gen.entries
    return OperatorMatrix(R, "G+" if sign > 0 else "G-")


def conjugate(M: OperatorMatrix, S: OperatorMatrix) -> OperatorMatrix:
    """``S* M S``."""
    a, s = M.entries, S.entries
    if a.shape != s.shape:
        raise ValueError("dimension mismatch")
    return OperatorMatrix(s.conj().T @ a @ s, "N")


@dataclass
class GnReport:
    constants: list[float]
    lemma_bounds: list[float]
    ratios: list[float | None]
    c_alpha: float
    within_lemma: bool
    geometric: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "constants": self.constants,
            "lemma_bounds": self.lemma_bounds,
            "growth_ratios": self.ratios,
            "c_alpha": self.c_alpha,
            "within_lemma": self.within_lemma,
            "geometric": self.geometric,
            **self.extra,
        }


def power_decay_check(
    gen: Generator,
    n_max: int = 6,
    *,
    c_v: float,
    alpha: float,
    beta: float = 0.0,
    c_alpha: float | None = None,
    region: int | None = None,
) -> GnReport:
    """Minimal constants of ``G^n`` against the two power-bound shapes, ``n = 1..n_max``.

    ``n = 1`` uses the weight ``(<j> + <k>) <j-k>^alpha e^{beta|j-k|}``;
    ``n >= 2`` uses ``<j><k><j-k>^alpha e^{beta|j-k|}``.  Growth is called
    geometric when every ratio ``C_{n+1}/C_n`` (``n >= 2``) stays below
    ``3 c_v c_alpha``, the per-step factor of the analytic bound.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if c_alpha is None:
        c_alpha = empirical_cnu(alpha, beta, 32)
    a = gen.entries
    K = (a.shape[0] - 1) // 2
    modes = np.arange(-K, K + 1)
    mask = region_mask(K, K // 2 if region is None else region)
    J, C = np.meshgrid(modes, modes, indexing="ij")
    decay = np.exp(beta * np.abs(J - C)) * bracket(J - C) ** alpha
    w1 = (bracket(J) + bracket(C)) * decay
    shape_n = DecayBound(b=beta, p=1.0, q=1.0, r=alpha)

    constants, bounds = [], []
    P = np.eye(a.shape[0], dtype=complex)
    for n in range(1, n_max + 1):
        P = P @ a
        if n == 1:
            constants.append(float(np.max((np.abs(P) * w1)[mask])))
            bounds.append(3.0 * c_v)
        else:
            constants.append(fit_bound(P, modes, modes, shape_n, mask).c_min)
            bounds.append((3.0 * c_v) ** n * c_alpha ** (n - 1))
    ratios: list[float | None] = [
        constants[i + 1] / constants[i] if constants[i] > 0 else None for i in range(len(constants) - 1)
    ]
    step = 3.0 * c_v * c_alpha
    geometric = all(r is None or r <= step for r in ratios[1:])
    within = all(c <= b * (1 + 1e-12) for c, b in zip(constants, bounds))
    return GnReport(constants, bounds, ratios, float(c_alpha), within, geometric, {"step_factor": step})
