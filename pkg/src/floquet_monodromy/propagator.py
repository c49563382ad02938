"""Fundamental solution of the truncated mode system.

Modes ``|k| <= K`` obey

    ih psi_k' = k^2 psi_k + sum_j v_{k-j}(t) psi_j .

Two fixed-step integrators are provided:

* ``rk4``: classical Runge-Kutta in the rotating frame
  ``psi_k = e^{(t/ih) k^2} phi_k``, which removes the stiff diagonal;
* ``split``: Strang splitting in the lab frame (exact kinetic phase, potential
  exponentiated at the step midpoint), optionally composed to fourth order
  with the symmetric triple jump.

All columns are propagated together as one ``(2K+1) x (2K+1)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .potential import FourierPotential

__all__ = [
    "ModeGrid",
    "OperatorMatrix",
    "StateVector",
    "IntegratorConfig",
    "StepSizeTooLarge",
    "rotating_rhs",
    "propagate",
    "propagate_column",
    "monodromy",
    "unitarity_defect",
    "free_monodromy",
    "resonant_pairs",
    "PERIOD",
    "free_phase",
]

PERIOD = 2 * math.pi


class StepSizeTooLarge(ValueError):
    """The time step violates ``dt <= eta h / K^2``."""


@dataclass(frozen=True)
class ModeGrid:
    """Truncation ``|k| <= K`` with a middle block ``|k| <= N``."""

    K: int
    N: int = 1

    def __post_init__(self):
        if self.K < 1 or not (1 <= self.N < self.K):
            raise ValueError("ModeGrid needs K >= 1 and 1 <= N < K")

    @property
    def size(self) -> int:
        return 2 * self.K + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def index(self, k):
        k = np.asarray(k)
        if np.any(np.abs(k) > self.K):
            raise IndexError("mode outside the grid")
        return (k + self.K)[()]

    def mode(self, i):
        return (np.asarray(i) - self.K)[()]

    def block(self, half: int) -> np.ndarray:
        """Boolean mask of modes ``|k| <= half``."""
        return np.abs(self.modes) <= half

    @property
    def middle(self) -> np.ndarray:
        return self.block(self.N)

    @property
    def interior(self) -> np.ndarray:
        return self.block(self.K // 2)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex matrix indexed by mode pairs ``(j, k)``."""

    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2 == 0:
            raise ValueError("OperatorMatrix must be square with odd size 2K+1")
        if not np.all(np.isfinite(a)):
            raise ValueError("OperatorMatrix entries must be finite")
        object.__setattr__(self, "entries", a)

    @property
    def K(self) -> int:
        return (self.entries.shape[0] - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    def __getitem__(self, jk):
        j, k = jk
        return self.entries[j + self.K, k + self.K]

    def block(self, half: int) -> np.ndarray:
        """Sub-array over ``|j|, |k| <= half``."""
        s = slice(self.K - half, self.K + half + 1)
        return self.entries[s, s]

    def relabel(self, label: str) -> "OperatorMatrix":
        return OperatorMatrix(self.entries, label)


@dataclass(frozen=True)
class StateVector:
    """Amplitudes ``psi_k`` (lab) or ``phi_k`` (rotating) for ``|k| <= K``."""

    amplitudes: np.ndarray
    frame: str = "lab"
    t: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.size % 2 == 0:
            raise ValueError("StateVector needs odd length 2K+1")
        if self.frame not in ("lab", "rotating"):
            raise ValueError("frame must be 'lab' or 'rotating'")
        object.__setattr__(self, "amplitudes", a)

    @property
    def K(self) -> int:
        return (self.amplitudes.size - 1) // 2

    def __getitem__(self, k):
        return self.amplitudes[k + self.K]

    def to_rotating(self, h: float) -> "StateVector":
        if self.frame == "rotating":
            return self
        k = np.arange(-self.K, self.K + 1)
        return StateVector(free_phase(k, self.t, h).conj() * self.amplitudes, "rotating", self.t)

    def to_lab(self, h: float) -> "StateVector":
        if self.frame == "lab":
            return self
        k = np.arange(-self.K, self.K + 1)
        return StateVector(free_phase(k, self.t, h) * self.amplitudes, "lab", self.t)


def free_phase(k, t, h):
    """``e^{(t/ih) k^2}``."""
    k = np.asarray(k, dtype=float)
    return np.exp(-1j * t * k * k / h)


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator settings.

    ``dt = None`` selects ``eta * h / K**2``.  ``split_order`` (2 or 4) only
    affects the ``split`` method.
    """

    method: str = "rk4"
    dt: float | None = None
    eta: float = 0.5
    margin: int | None = None
    split_order: int = 4

    def __post_init__(self):
        if self.method not in ("rk4", "split"):
            raise ValueError("method must be 'rk4' or 'split'")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.split_order not in (2, 4):
            raise ValueError("split_order must be 2 or 4")

    def step(self, h: float, K: int) -> float:
        limit = self.eta * h / K**2
        if self.dt is None:
            return limit
        if self.dt > limit * (1 + 1e-12):
            raise StepSizeTooLarge(f"dt = {self.dt:.4g} exceeds eta*h/K^2 = {limit:.4g}")
        return self.dt

    def n_steps(self, h: float, K: int, duration: float) -> int:
        # round up so the realised step never exceeds the safety limit
        return max(1, math.ceil(abs(duration) / self.step(h, K) - 1e-9))


def _stored_modes(p: FourierPotential, K: int) -> list[int]:
    return [q for q in p.modes if 0 < abs(q) <= 2 * K or q == 0]


def rotating_rhs(p: FourierPotential, h: float, t: float, phi):
    """``phi'`` in the rotating frame; ``phi`` is a StateVector or an array.

    Arrays may be 1-D (one state) or 2-D (states as columns).  Only stored
    potential modes are visited.
    """
    if isinstance(phi, StateVector):
        if phi.frame != "rotating":
            raise ValueError("rotating_rhs expects a rotating-frame state")
        return StateVector(rotating_rhs(p, h, t, phi.amplitudes), "rotating", t)
    phi = np.asarray(phi, dtype=complex)
    n = phi.shape[0]
    K = (n - 1) // 2
    k = np.arange(-K, K + 1)
    out = np.zeros_like(phi)
    for q in _stored_modes(p, K):
        vq = p.coefficient(q, t)
        if vq == 0:
            continue
        # out[k] += v_q e^{(t/ih)((k-q)^2 - k^2)} phi[k-q]
        if q >= 0:
            dst, src = slice(q, n), slice(0, n - q)
        else:
            dst, src = slice(0, n + q), slice(-q, n)
        kk = k[dst]
        ph = np.exp(-1j * t * ((kk - q) ** 2 - kk**2) / h)
        if phi.ndim == 2:
            ph = ph[:, None]
        out[dst] += vq * ph * phi[src]
    return out / (1j * h)


def _rk4(p, h, Phi, t0, t1, steps):
    dt = (t1 - t0) / steps
    for s in range(steps):
        t = t0 + s * dt
        a = rotating_rhs(p, h, t, Phi)
        b = rotating_rhs(p, h, t + dt / 2, Phi + (dt / 2) * a)
        c = rotating_rhs(p, h, t + dt / 2, Phi + (dt / 2) * b)
        d = rotating_rhs(p, h, t + dt, Phi + dt * c)
        Phi = Phi + (dt / 6) * (a + 2 * b + 2 * c + d)
    return Phi


def _potential_matrix(p: FourierPotential, K: int, t: float) -> np.ndarray:
    n = 2 * K + 1
    B = np.zeros((n, n), dtype=complex)
    for q in _stored_modes(p, K):
        if abs(q) < n:
            B += p.coefficient(q, t) * np.eye(n, k=-q)
    return B


_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_TRIPLE_JUMP = (_W1, 1.0 - 2.0 * _W1, _W1)


def _split(p, h, Psi, t0, t1, steps, order):
    n = Psi.shape[0]
    K = (n - 1) // 2
    k2 = np.arange(-K, K + 1, dtype=float) ** 2
    dt = (t1 - t0) / steps
    fractions = _TRIPLE_JUMP if order == 4 else (1.0,)

    def strang(t, tau, Psi):
        half = np.exp(-0.5j * tau * k2 / h)[:, None]
        Psi = half * Psi
        w, Q = eigh(_potential_matrix(p, K, t + tau / 2))
        Psi = Q @ (np.exp(-1j * tau * w / h)[:, None] * (Q.conj().T @ Psi))
        return half * Psi

    for s in range(steps):
        t = t0 + s * dt
        for f in fractions:
            Psi = strang(t, f * dt, Psi)
            t += f * dt
    return Psi


def _evolve(p, h, K, Psi0, t0, t1, cfg):
    """Evolve lab-frame columns ``Psi0`` (2-D) from ``t0`` to ``t1``."""
    if t1 == t0:
        return Psi0.copy()
    steps = cfg.n_steps(h, K, t1 - t0)
    if cfg.method == "rk4":
        k = np.arange(-K, K + 1)
        Phi = free_phase(k, t0, h).conj()[:, None] * Psi0
        Phi = _rk4(p, h, Phi, t0, t1, steps)
        return free_phase(k, t1, h)[:, None] * Phi
    return _split(p, h, Psi0, t0, t1, steps, cfg.split_order)


def propagate(
    p: FourierPotential,
    h: float,
    grid: ModeGrid,
    t1: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    t0: float = 0.0,
) -> OperatorMatrix:
    """Lab-frame propagator from ``t0`` to ``t1`` (``t1 < t0`` runs backwards)."""
    Psi = _evolve(p, h, grid.K, np.eye(grid.size, dtype=complex), t0, t1, cfg)
    return OperatorMatrix(Psi, "W")


def propagate_column(
    p: FourierPotential,
    h: float,
    k0: int,
    t1: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    K: int = 32,
) -> StateVector:
    """Solution with ``psi_k(0) = delta_{k k0}``, returned in the lab frame at ``t1``."""
    if abs(k0) > K:
        raise IndexError("|k0| must not exceed K")
    e = np.zeros((2 * K + 1, 1), dtype=complex)
    e[k0 + K, 0] = 1.0
    return StateVector(_evolve(p, h, K, e, 0.0, t1, cfg)[:, 0], "lab", t1)


def monodromy(
    p: FourierPotential,
    h: float,
    grid: ModeGrid,
    cfg: IntegratorConfig = IntegratorConfig(),
    period: float = PERIOD,
) -> OperatorMatrix:
    """``W(period)``; use ``period = -2*pi`` for the backward monodromy."""
    if not p.is_gauge_normalized():
        raise ValueError("monodromy expects a gauge-normalized potential (no k = 0 mode)")
    return propagate(p, h, grid, period, cfg).relabel("M" if period > 0 else "M-")


def free_monodromy(grid: ModeGrid, h: float, period: float = PERIOD) -> np.ndarray:
    """Exact ``diag(e^{(period/ih) k^2})`` for ``V = 0``."""
    return np.diag(free_phase(grid.modes, period, h))


def unitarity_defect(M: OperatorMatrix | np.ndarray, margin: int = 0) -> float:
    """``max |M*M - I|`` over modes ``|j|, |k| <= K - margin``."""
    a = M.entries if isinstance(M, OperatorMatrix) else np.asarray(M)
    n = a.shape[0]
    K = (n - 1) // 2
    if not 0 <= margin < K + 1:
        raise ValueError("margin must satisfy 0 <= margin <= K")
    gram = a.conj().T @ a - np.eye(n)
    s = slice(margin, n - margin)
    return float(np.max(np.abs(gram[s, s])))


def resonant_pairs(h: float, K: int, tol: float = 1e-12) -> list[tuple[int, int]]:
    """Pairs ``0 <= j < k <= K`` whose free phases ``e^{2pi k^2/(ih)}`` coincide."""
    k = np.arange(K + 1)
    ph = free_phase(k, PERIOD, h)
    out = []
    for a in range(K + 1):
        close = np.nonzero(np.abs(ph[a + 1 :] - ph[a]) < tol)[0]
        out.extend((a, a + 1 + int(b)) for b in close)
    return out
