"""Approximate diagonalization of the middle block of the conjugated monodromy.

Step 1 replaces the nearly orthonormal middle-block columns ``w_{-N..N}`` by an
orthonormal set ``u_m`` without the bad error growth of plain Gram-Schmidt:
each ``u_m`` is made orthogonal to a whole window of other columns at once,
processing ``m = N, -N, N-1, -(N-1), ..., 1, -1, 0``.

Step 2 diagonalizes the resulting unitary ``U``, embeds the eigenbasis into the
full grid (identity outside the block) and splits the conjugated operator
into diagonal, ``Md``-type and small remainder parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from .bounds import bracket, empirical_cnu, fit_bound
from .decomposition import build_md, theorem_bound
from .potential import FourierPotential
from .propagator import ModeGrid, OperatorMatrix, free_phase, PERIOD

__all__ = [
    "GramReport",
    "StepRecord",
    "BlockOrthogonalization",
    "DiagonalForm",
    "BlockTooLarge",
    "SingularGram",
    "NotUnitary",
    "NTooSmall",
    "epsilon_envelope",
    "gram",
    "gs_step",
    "elimination_order",
    "orthonormalize",
    "step_bound_ratios",
    "require_admissible",
    "diagonalize_unitary",
    "embed_block",
    "assemble_theorem2",
]


class BlockTooLarge(ValueError):
    """Middle block exceeds a third of the truncation."""


class SingularGram(np.linalg.LinAlgError):
    """A sub-Gram system is numerically singular."""


class NotUnitary(ValueError):
    """Input to the diagonalization is not unitary to tolerance."""


class NTooSmall(RuntimeError):
    """The middle block is too small for the orthogonalization estimates."""


def epsilon_envelope(N: int, c: float, c_nu: float, alpha: float, beta: float) -> np.ndarray:
    """``eps_{jk} = c^2 c_nu e^{-beta|j-k|} / (<j><k>(N+1)^2 <j-k>^{alpha-1})`` on ``|j|,|k| <= N``."""
    j = np.arange(-N, N + 1)
    J, K = np.meshgrid(j, j, indexing="ij")
    d = J - K
    return (
        c * c * c_nu * np.exp(-beta * np.abs(d))
        / (bracket(J) * bracket(K) * (N + 1) ** 2 * bracket(d) ** (alpha - 1.0))
    )


@dataclass
class GramReport:
    E: np.ndarray
    eps: np.ndarray
    lemma_eee_ok: bool
    c: float
    c_nu: float
    eee_ratio: float
    envelope_ratio: float
    direct_gap: float

    @property
    def envelope_ok(self) -> bool:
        return self.envelope_ratio <= 1.0

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "c_nu": self.c_nu,
            "eee_ratio": self.eee_ratio,
            "lemma_eee_ok": self.lemma_eee_ok,
            "envelope_ratio": self.envelope_ratio,
            "envelope_ok": self.envelope_ok,
            "max_abs_E": float(np.max(np.abs(self.E))),
            "max_eps_diag": float(np.max(np.diag(self.eps))),
            "direct_gap": self.direct_gap,
        }


def gram(
    Nfull: OperatorMatrix,
    grid: ModeGrid,
    *,
    alpha: float,
    beta: float = 0.0,
    c: float | None = None,
    c_nu: float | None = None,
) -> GramReport:
    """Gram defect of the middle-block columns and its envelope.

    ``E_{j'j''} = <w_{j'}, w_{j''}> - delta`` is evaluated from the rows
    ``|k| > N`` of the full columns (unitarity moves the defect there).  When
    ``c`` is not given it is fitted on exactly those entries, which are the
    only ones the envelope estimate uses.
    """
    N, K = grid.N, grid.K
    if 3 * N > K:
        raise BlockTooLarge(f"N = {N} exceeds K/3 = {K / 3:.3g}")
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    a = Nfull.entries
    mid = grid.middle
    tail = a[np.ix_(~mid, mid)]
    E = -(tail.conj().T @ tail)
    block = a[np.ix_(mid, mid)]
    direct = block.conj().T @ block - np.eye(2 * N + 1)
    if c is None:
        modes = grid.modes
        region = (~mid)[:, None] & mid[None, :]
        c = fit_bound(a, modes, modes, theorem_bound(alpha, beta), region).c_min
    if c_nu is None:
        c_nu = empirical_cnu(alpha - 1.0, beta, 32)
    eps = epsilon_envelope(N, c, c_nu, alpha, beta)
    if np.all(eps > 0):
        eee = float(np.max((eps @ eps) / eps))
        env = float(np.max(np.abs(E) / eps))
    else:
        eee = 0.0
        env = 0.0 if not np.any(np.abs(E) > 1e-13) else np.inf
    return GramReport(
        E, eps, eee <= 0.5, float(c), float(c_nu), eee, env, float(np.max(np.abs(E - direct)))
    )


def gs_step(A: np.ndarray, a_next: np.ndarray, cond_limit: float = 1e12):
    """Orthogonalize ``a_next`` against the columns of ``A`` in one solve.

    Returns ``(b, lam, sigma)`` with ``b = (a_next - A lam) / (1 + sigma)``,
    ``|b| = 1`` and ``A* b = 0``.  ``lam`` solves ``(I + E) lam = mu`` with
    ``I + E = A* A`` and ``mu = A* a_next``.
    """
    if A.shape[1]:
        G = A.conj().T @ A
        if np.linalg.cond(G) > cond_limit:
            raise SingularGram("sub-Gram matrix is numerically singular")
        lam = np.linalg.solve(G, A.conj().T @ a_next)
        b = a_next - A @ lam
    else:
        lam = np.zeros(0, dtype=complex)
        b = a_next.copy()
    nb = np.linalg.norm(b)
    if nb == 0:
        raise SingularGram("column lies in the span of the previous ones")
    return b / nb, lam, float(nb - 1.0)


def elimination_order(N: int) -> list[int]:
    order = []
    for m in range(N, 0, -1):
        order += [m, -m]
    return order + [0]


@dataclass
class StepRecord:
    m: int
    window: list[int]
    lambdas: np.ndarray
    sigma: float


@dataclass
class BlockOrthogonalization:
    U: np.ndarray
    Wprime: np.ndarray
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def N(self) -> int:
        return (self.U.shape[0] - 1) // 2

    @property
    def orthonormality_defect(self) -> float:
        return float(np.max(np.abs(self.U.conj().T @ self.U - np.eye(self.U.shape[0]))))

    @property
    def max_sigma(self) -> float:
        return max((abs(s.sigma) for s in self.steps), default=0.0)


def orthonormalize(W: np.ndarray, cond_limit: float = 1e12) -> BlockOrthogonalization:
    """Orthonormal ``U`` close to the columns of the ``(2N+1)``-square block ``W``.

    ``u_m`` is orthogonal to ``w_j`` for ``-|m| <= j < |m|``, ``j != m``.
    """
    W = np.asarray(W, dtype=complex)
    n = W.shape[0]
    if W.shape != (n, n) or n % 2 == 0:
        raise ValueError("W must be square with odd size 2N+1")
    N = (n - 1) // 2
    U = np.zeros_like(W)
    steps = []
    for m in elimination_order(N):
        window = [j for j in range(-abs(m), abs(m)) if j != m]
        A = W[:, [j + N for j in window]]
        u, lam, sigma = gs_step(A, W[:, m + N], cond_limit)
        U[:, m + N] = u
        steps.append(StepRecord(m, window, lam, sigma))
    return BlockOrthogonalization(U, U - W, steps)


def step_bound_ratios(orth: BlockOrthogonalization, eps: np.ndarray) -> dict[str, float]:
    """Worst ratios of ``|lambda'_j|`` to ``2 eps_{jm}`` and of ``|sigma'|`` to its bound."""
    N = orth.N
    lam_ratio, sig_ratio = 0.0, 0.0
    for st in orth.steps:
        m = st.m + N
        idx = np.array([j + N for j in st.window], dtype=int)
        if idx.size:
            lam_ratio = max(lam_ratio, float(np.max(_ratio(np.abs(st.lambdas), 2 * eps[idx, m]))))
            bound = eps[m, m] + np.sum(2 * eps[idx, m] * (1 + eps[idx, idx]))
        else:
            bound = eps[m, m]
        sig_ratio = max(sig_ratio, float(_ratio(abs(st.sigma), bound)))
    return {"lambda_ratio": lam_ratio, "sigma_ratio": sig_ratio}


def _ratio(x, bound, floor: float = 1e-13):
    # a vanishing envelope is met by values at rounding level
    x, bound = np.asarray(x, dtype=float), np.asarray(bound, dtype=float)
    safe = np.where(bound > 0, bound, 1.0)
    return np.where(bound > 0, x / safe, np.where(x <= floor, 0.0, np.inf))


def require_admissible(g: GramReport, orth: BlockOrthogonalization):
    """Raise :class:`NTooSmall` unless the envelope conditions hold."""
    problems = []
    if not g.lemma_eee_ok:
        problems.append(f"sum eps eps / eps = {g.eee_ratio:.3g} > 1/2")
    if np.max(np.diag(g.eps)) >= 0.5:
        problems.append("eps_jj >= 1/2")
    if orth.max_sigma >= 0.5:
        problems.append(f"|sigma'| = {orth.max_sigma:.3g} >= 1/2")
    if problems:
        raise NTooSmall("; ".join(problems))


def diagonalize_unitary(U: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Unitary ``Uhat`` and unit-modulus ``d`` with ``Uhat* U Uhat = diag(d)``.

    Uses the complex Schur form, which for a normal matrix is diagonal with a
    unitary change of basis (degenerate clusters included).  Eigenvalues are
    projected to the unit circle and sorted by decreasing phase.
    """
    U = np.asarray(U, dtype=complex)
    n = U.shape[0]
    if np.max(np.abs(U.conj().T @ U - np.eye(n))) > tol:
        raise NotUnitary("U*U - I exceeds tolerance")
    T, Z = schur(U, output="complex")
    d = np.diag(T).copy()
    d = d / np.abs(d)
    order = np.argsort(-np.angle(d), kind="stable")
    Z, d = Z[:, order], d[order]
    resid = np.max(np.abs(Z.conj().T @ U @ Z - np.diag(d)))
    if resid > tol:
        raise NotUnitary(f"diagonalization residual {resid:.2e} (U not normal?)")
    return Z, d


def embed_block(Uhat: np.ndarray, grid: ModeGrid) -> np.ndarray:
    out = np.eye(grid.size, dtype=complex)
    mid = grid.middle
    out[np.ix_(mid, mid)] = Uhat
    return out


@dataclass
class DiagonalForm:
    d: np.ndarray
    Uhat: np.ndarray
    tilde0: OperatorMatrix
    tilded: OperatorMatrix
    tildec: OperatorMatrix
    regions: dict[str, dict]
    conjugated: OperatorMatrix

    @property
    def middle_sup(self) -> float:
        return self.regions["middle"]["sup"]


def _region_fit(a, weight, mask):
    if not mask.any():
        return {"sup": 0.0, "c_hat": 0.0, "n_entries": 0}
    mag = np.abs(a)[mask]
    return {
        "sup": float(mag.max()),
        "c_hat": float(np.max(mag * weight[mask])),
        "n_entries": int(mask.sum()),
    }


def assemble_theorem2(
    Nfull: OperatorMatrix,
    Uhat: np.ndarray,
    d: np.ndarray,
    grid: ModeGrid,
    h: float,
    p: FourierPotential,
    *,
    region: int | None = None,
) -> DiagonalForm:
    """Conjugate by the embedded eigenbasis and split into the three parts.

    Regional constants are fitted on ``|j|, |k| <= region`` (default ``K//2``):

    * middle (both ``|j|, |k| <= N``): ``sup |tildec| (N+1)^2``;
    * ``|k| <= N < |j|``: weight ``e^{beta(|j|-N)} <j>^2`` (and symmetrically);
    * both outside: the ``1/(<j><k><j-k>^{alpha-1})`` template.
    """
    K, N = grid.K, grid.N
    alpha, beta = p.alpha, p.beta
    Ue = embed_block(Uhat, grid)
    Nt = Ue.conj().T @ Nfull.entries @ Ue
    mid = grid.middle
    diag = free_phase(grid.modes, PERIOD, h).astype(complex)
    diag[mid] = d
    tilde0 = np.diag(diag)
    tilded = build_md(p, grid, h).entries.copy()
    tilded[np.ix_(mid, mid)] = 0.0
    tildec = Nt - tilde0 - tilded

    modes = grid.modes
    J, C = np.meshgrid(modes, modes, indexing="ij")
    inner = np.abs(modes) <= (K // 2 if region is None else region)
    box = inner[:, None] & inner[None, :]
    inJ, inC = mid[:, None], mid[None, :]
    regions = {
        "middle": _region_fit(tildec, np.full(J.shape, (N + 1.0) ** 2), box & inJ & inC),
        "rows_out": _region_fit(
            tildec, np.exp(beta * (np.abs(J) - N)) * bracket(J) ** 2, box & ~inJ & inC
        ),
        "cols_out": _region_fit(
            tildec, np.exp(beta * (np.abs(C) - N)) * bracket(C) ** 2, box & inJ & ~inC
        ),
        "both_out": _region_fit(
            tildec, theorem_bound(alpha, beta).weight(J, C), box & ~inJ & ~inC
        ),
    }
    return DiagonalForm(
        diag,
        Ue,
        OperatorMatrix(tilde0, "tildeM0"),
        OperatorMatrix(tilded, "tildeMd"),
        OperatorMatrix(tildec, "tildeMc"),
        regions,
        OperatorMatrix(Nt, "tildeN"),
    )
