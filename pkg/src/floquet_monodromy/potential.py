"""Time-periodic potentials stored as finite space-time Fourier tables.

``V(x, t) = sum_k v_k(t) e^{ikx}`` with ``v_k(t) = sum_m v_{k,m} e^{imt}``.
Only ``k >= 0`` is supplied by the user; negative modes come from the
reality condition ``v_{-k,-m} = conj(v_{k,m})``.  Because every ``v_k`` is a
trigonometric polynomial, all time integrals used downstream have closed
forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .bounds import bracket

__all__ = [
    "FourierPotential",
    "GaugePhase",
    "ClassReport",
    "ClassViolation",
    "eval_coefficient",
    "eval_derivative",
    "gauge_normalize",
    "verify_class",
    "harmonic_integral",
]


class ClassViolation(ValueError):
    """The declared ``c_v`` is too small for the potential's coefficients."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


def _harmonic_array(table: Mapping[int, complex], mt: int) -> np.ndarray:
    out = np.zeros(2 * mt + 1, dtype=complex)
    for m, c in table.items():
        out[int(m) + mt] = complex(c)
    return out


@dataclass(frozen=True)
class FourierPotential:
    """Potential with space modes ``k`` and time harmonics ``m in [-mt, mt]``.

    ``coeffs[k]`` is a length ``2*mt + 1`` complex array indexed by ``m + mt``.
    Use :meth:`from_modes` rather than the raw constructor.
    """

    coeffs: Mapping[int, np.ndarray]
    mt: int
    alpha: float = 0.0
    beta: float = 0.0
    gamma: int = 2
    c_v: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.gamma < 0 or int(self.gamma) != self.gamma:
            raise ValueError("gamma must be a non-negative integer")
        if self.c_v <= 0:
            raise ValueError("c_v must be > 0")
        for k, arr in self.coeffs.items():
            if arr.shape != (2 * self.mt + 1,):
                raise ValueError(f"mode {k}: harmonic table has wrong length")
            if -k not in self.coeffs or not np.allclose(
                self.coeffs[-k], np.conj(arr[::-1]), rtol=0, atol=1e-13
            ):
                raise ValueError(f"mode {k}: coefficients violate v_(-k,-m) = conj(v_(k,m))")
        object.__setattr__(self, "coeffs", MappingProxyType(dict(self.coeffs)))

    @classmethod
    def from_modes(
        cls,
        modes: Mapping[int, Mapping[int, complex]],
        alpha: float = 0.0,
        beta: float = 0.0,
        gamma: int = 2,
        c_v: float = 1.0,
    ) -> "FourierPotential":
        """Build from ``{k: {m: v_km}}`` with ``k >= 0``.

        Negative modes are derived.  A ``k = 0`` table must already satisfy
        ``v_{0,-m} = conj(v_{0,m})``.
        """
        if any(int(k) < 0 for k in modes):
            raise ValueError("supply only k >= 0; negative modes are derived")
        mt = max((abs(int(m)) for tab in modes.values() for m in tab), default=0)
        coeffs: dict[int, np.ndarray] = {}
        for k, tab in modes.items():
            k = int(k)
            arr = _harmonic_array(tab, mt)
            if not np.any(arr):
                continue
            coeffs[k] = arr
            if k:
                coeffs[-k] = np.conj(arr[::-1])
        return cls(coeffs, mt, alpha, beta, gamma, c_v)

    @classmethod
    def zero(cls, **meta) -> "FourierPotential":
        return cls({}, 0, **meta)

    @property
    def harmonics(self) -> np.ndarray:
        return np.arange(-self.mt, self.mt + 1)

    @property
    def modes(self) -> list[int]:
        return sorted(self.coeffs)

    @property
    def max_mode(self) -> int:
        return max((abs(k) for k in self.coeffs), default=0)

    def table(self, k: int) -> np.ndarray:
        arr = self.coeffs.get(int(k))
        if arr is None:
            return np.zeros(2 * self.mt + 1, dtype=complex)
        return arr

    def mean(self, k: int) -> complex:
        """Time average of ``v_k`` (the ``m = 0`` harmonic)."""
        return complex(self.table(k)[self.mt])

    def coefficient(self, k: int, t):
        return eval_coefficient(self, k, t)

    def derivative(self, k: int, order: int, t):
        return eval_derivative(self, k, order, t)

    def is_gauge_normalized(self) -> bool:
        return 0 not in self.coeffs


def eval_derivative(p: FourierPotential, k: int, order: int, t):
    """``d^order/dt^order v_k(t)``, exact term by term; ``t`` may be an array."""
    if order < 0:
        raise ValueError("order must be >= 0")
    arr = p.coeffs.get(int(k))
    t_arr = np.asarray(t, dtype=float)
    if arr is None:
        return np.zeros(t_arr.shape, dtype=complex)[()]
    m = p.harmonics
    c = arr * (1j * m) ** order if order else arr
    phase = np.exp(1j * np.multiply.outer(t_arr, m))
    return (phase @ c)[()]


def eval_coefficient(p: FourierPotential, k: int, t):
    """``v_k(t)``; zero for modes absent from the table."""
    return eval_derivative(p, k, 0, t)


def harmonic_integral(c: np.ndarray, m: np.ndarray, omega: float, t: float, tol: float = 1e-9) -> complex:
    """``int_0^t (sum_m c_m e^{im tau}) e^{i omega tau} d tau`` in closed form.

    Near-resonant harmonics (``|m + omega| < tol``) use the second-order
    expansion ``t + i (m + omega) t^2 / 2``.
    """
    w = m + omega
    out = np.empty(w.shape, dtype=complex)
    small = np.abs(w) < tol
    out[small] = t + 0.5j * w[small] * t * t
    wb = w[~small]
    out[~small] = np.expm1(1j * wb * t) / (1j * wb)
    return complex(np.dot(c, out))


@dataclass(frozen=True)
class GaugePhase:
    """Scalar gauge removed from the space average ``v_0``.

    ``antiderivative`` holds the time harmonics of
    ``int_0^t (v_0(tau) - v00) dtau`` (periodic by construction).
    """

    v00: float
    antiderivative: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=complex))

    @property
    def harmonics(self) -> np.ndarray:
        mt = (self.antiderivative.size - 1) // 2
        return np.arange(-mt, mt + 1)

    def primitive(self, t):
        t_arr = np.asarray(t, dtype=float)
        vals = np.exp(1j * np.multiply.outer(t_arr, self.harmonics)) @ self.antiderivative
        return vals.real[()]

    def multiplier(self, t, h: float):
        """Factor relating the original and normalized wave functions at ``t``.

        ``psi = psi_normalized * exp((v00 t + primitive(t)) / (ih))``.
        """
        t_arr = np.asarray(t, dtype=float)
        return np.exp((self.v00 * t_arr + self.primitive(t_arr)) / (1j * h))[()]


def gauge_normalize(p: FourierPotential) -> tuple[FourierPotential, GaugePhase]:
    """Drop the ``k = 0`` mode, recording its average and periodic primitive."""
    a0 = p.coeffs.get(0)
    if a0 is None:
        return p, GaugePhase(0.0, np.zeros(2 * p.mt + 1, dtype=complex))
    m = p.harmonics
    v00 = float(a0[p.mt].real)
    prim = np.zeros_like(a0)
    nz = m != 0
    prim[nz] = a0[nz] / (1j * m[nz])
    prim[p.mt] = -prim[nz].sum()
    coeffs = {k: v for k, v in p.coeffs.items() if k != 0}
    used = [np.abs(m[np.abs(v) > 0]) for v in coeffs.values()]
    mt = max((int(u.max()) for u in used if u.size), default=0)
    coeffs = {k: v[p.mt - mt : p.mt + mt + 1] for k, v in coeffs.items()}
    q = FourierPotential(coeffs, mt, p.alpha, p.beta, p.gamma, p.c_v)
    return q, GaugePhase(v00, prim)


@dataclass
class ClassReport:
    norms: dict[int, float]
    ratios: dict[int, float]
    minimal_c_v: float
    declared_c_v: float
    grid_size: int

    @property
    def passed(self) -> bool:
        return all(r <= 1.0 for r in self.ratios.values())


def verify_class(p: FourierPotential, grid_size: int = 1024, strict: bool = True) -> ClassReport:
    """Check ``||v_k||_{C^gamma} <= c_v e^{-beta|k|} / <k>^alpha`` for every stored mode.

    The ``C^gamma`` norm is the largest sup norm of derivatives of order
    ``0..gamma``, sampled on a uniform grid of ``grid_size`` points.
    """
    t = 2 * np.pi * np.arange(grid_size) / grid_size
    norms, ratios = {}, {}
    c_needed = 0.0
    for k in p.modes:
        nrm = max(float(np.max(np.abs(eval_derivative(p, k, s, t)))) for s in range(p.gamma + 1))
        scale = np.exp(p.beta * abs(k)) * bracket(k) ** p.alpha
        norms[k] = nrm
        ratios[k] = nrm * scale / p.c_v
        c_needed = max(c_needed, nrm * scale)
    report = ClassReport(norms, ratios, float(c_needed), p.c_v, grid_size)
    if strict and not report.passed:
        worst = max(ratios, key=ratios.get)
        raise ClassViolation(
            f"mode {worst} exceeds the class bound by a factor {ratios[worst]:.4g}"
            f" (minimal c_v = {c_needed:.6g})",
            report,
        )
    return report
