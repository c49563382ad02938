"""Decay-bound templates, bound fitting and brute-force lemma oracles.

Every estimate in this package has the shape

    |A_jk| <= c * exp(-b|j-k|) / (<j>^p <k>^q <j-k>^r),   <x> = |x| + 1,

so a single :class:`DecayBound` covers them all.  :func:`fit_bound` returns
the smallest admissible ``c`` over a region together with least-squares
exponents, which is how the analytic constants (existence-only) are made
concrete.

The lemma scans are exhaustive over a finite index box and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

__all__ = [
    "bracket",
    "DecayBound",
    "BoundFit",
    "LemmaReport",
    "EmptyRegion",
    "DivergentTail",
    "fit_bound",
    "ineq1_ratio",
    "ineq2_ratio",
    "check_ineq1",
    "check_ineq2",
    "tech1_ratio",
    "empirical_cnu",
    "check_tech1",
]

#: entries below this magnitude are treated as numerical noise in regressions
NOISE_FLOOR = 1e-14


class EmptyRegion(ValueError):
    """The region selected for a fit or check contains no entries."""


class DivergentTail(RuntimeError):
    """A truncated lattice sum did not settle when the range was doubled."""


def bracket(x):
    """Japanese bracket ``<x> = |x| + 1`` (elementwise)."""
    return np.abs(x) + 1.0


@dataclass(frozen=True)
class DecayBound:
    """Template ``c e^{-b|j-k|} <j>^{-p} <k>^{-q} <j-k>^{-r}``."""

    c: float = 1.0
    b: float = 0.0
    p: float = 0.0
    q: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        for name in ("c", "b", "p", "q", "r"):
            if getattr(self, name) < 0:
                raise ValueError(f"DecayBound.{name} must be >= 0")

    def weight(self, j, k):
        """Reciprocal of the bound with ``c = 1``."""
        j = np.asarray(j, dtype=float)
        k = np.asarray(k, dtype=float)
        d = j - k
        return (
            np.exp(self.b * np.abs(d))
            * bracket(j) ** self.p
            * bracket(k) ** self.q
            * bracket(d) ** self.r
        )

    def evaluate(self, j, k):
        return self.c / self.weight(j, k)

    def with_c(self, c: float) -> "DecayBound":
        return replace(self, c=float(c))


@dataclass
class BoundFit:
    """Outcome of :func:`fit_bound`.

    ``slopes`` holds least-squares coefficients of ``log|entry|`` on
    ``log<j>``, ``log<k>``, ``log<j-k>`` (and ``|j-k|`` when the template has
    an exponential rate).  For data matching the template exactly they equal
    ``-p, -q, -r, -b``.
    """

    c_min: float
    slopes: dict[str, float | None]
    n_entries: int
    n_fitted: int
    witness: tuple[int, int] | None


def _as_region(entries, rows, cols, mask):
    entries = np.asarray(entries)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    if entries.shape != (rows.size, cols.size):
        raise ValueError("entries shape does not match row/column modes")
    J, K = np.meshgrid(rows, cols, indexing="ij")
    if mask is None:
        mask = np.ones(entries.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyRegion("region selects no entries")
    return np.abs(entries)[mask], J[mask], K[mask]


def fit_bound(entries, rows, cols, template: DecayBound, mask=None) -> BoundFit:
    """Fit the free constant of ``template`` to ``entries`` over ``mask``.

    ``entries`` is a 2-D array whose rows and columns carry the mode numbers
    ``rows`` and ``cols``.  The template's own ``c`` is ignored.
    """
    mag, j, k = _as_region(entries, rows, cols, mask)
    scaled = mag * template.weight(j, k)
    i = int(np.argmax(scaled))
    c_min = float(scaled[i])
    witness = (int(j[i]), int(k[i])) if c_min > 0 else None

    keep = mag > NOISE_FLOOR
    names = ["j", "k", "offset"]
    slopes: dict[str, float | None] = {n: None for n in names}
    if template.b > 0:
        names.append("rate")
        slopes["rate"] = None
    if keep.sum() > len(names):
        jj, kk = j[keep], k[keep]
        cols_ = [np.log(bracket(jj)), np.log(bracket(kk)), np.log(bracket(jj - kk))]
        if template.b > 0:
            cols_.append(np.abs(jj - kk).astype(float))
        cols_.append(np.ones(jj.size))
        A = np.column_stack(cols_)
        coef, *_ = np.linalg.lstsq(A, np.log(mag[keep]), rcond=None)
        for n, c in zip(names, coef):
            slopes[n] = float(c)
    return BoundFit(c_min, slopes, int(mag.size), int(keep.sum()), witness)


# ---------------------------------------------------------------------------
# lemma oracles


@dataclass
class LemmaReport:
    lemma: str
    scan_range: int
    worst_ratio: float
    witness: tuple[int, ...] | None
    constant: float
    passed: bool
    extra: dict[str, Any] = field(default_factory=dict)

    def recheck(self) -> float:
        """Re-evaluate the ratio at the recorded witness."""
        if self.witness is None:
            return 0.0
        if self.lemma == "ineq1":
            return float(ineq1_ratio(*self.witness))
        if self.lemma == "ineq2":
            return float(ineq2_ratio(*self.witness))
        if self.lemma == "tech1":
            s, m = self.witness
            return tech1_ratio(s, m, self.extra["nu"], self.extra["beta"], self.scan_range)
        raise ValueError(f"unknown lemma {self.lemma!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "lemma": self.lemma,
            "scan_range": self.scan_range,
            "worst_ratio": self.worst_ratio,
            "witness": list(self.witness) if self.witness is not None else None,
            "constant": self.constant,
            "passed": self.passed,
            "extra": self.extra,
        }


def ineq1_ratio(k, l):
    """LHS/RHS of ``1/|k^2-l^2| <= 3/(<k>+<l>)``."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    return (bracket(k) + bracket(l)) / (3.0 * np.abs(k * k - l * l))


def ineq2_ratio(k0, k, j):
    """LHS/RHS of ``1/(|k0^2-j^2| |k^2-j^2|) <= 12/<k0>^2``."""
    k0 = np.asarray(k0, dtype=float)
    k = np.asarray(k, dtype=float)
    j = np.asarray(j, dtype=float)
    return bracket(k0) ** 2 / (12.0 * np.abs(k0 * k0 - j * j) * np.abs(k * k - j * j))


def _check_range(rng: int):
    if int(rng) != rng or rng < 2:
        raise ValueError("scan range must be an integer >= 2")


def check_ineq1(rng: int) -> LemmaReport:
    """Scan ``|k|, |l| <= rng`` with ``k != +-l``."""
    _check_range(rng)
    n = np.arange(-rng, rng + 1)
    k, l = np.meshgrid(n, n, indexing="ij")
    ok = np.abs(k) != np.abs(l)
    ratio = np.zeros(k.shape)
    ratio[ok] = ineq1_ratio(k[ok], l[ok])
    i = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst = float(ratio[i])
    return LemmaReport("ineq1", rng, worst, (int(k[i]), int(l[i])), worst, worst <= 1.0)


def check_ineq2(rng: int) -> LemmaReport:
    """Scan ``|k0|, |k|, |j| <= rng`` with ``j != +-k0`` and ``j != +-k``."""
    _check_range(rng)
    n = np.arange(-rng, rng + 1)
    sq = (n * n).astype(float)
    # |k0^2 - j^2| and |k^2 - j^2| as (k0, j) and (k, j) tables
    d = np.abs(sq[:, None] - sq[None, :])
    with np.errstate(divide="ignore"):
        inv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    # ratio[k0, k, j] = <k0>^2 / 12 * inv[k0, j] * inv[k, j]
    ratio = (bracket(n) ** 2 / 12.0)[:, None, None] * inv[:, None, :] * inv[None, :, :]
    i = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst = float(ratio[i])
    witness = (int(n[i[0]]), int(n[i[1]]), int(n[i[2]]))
    return LemmaReport("ineq2", rng, worst, witness, worst, worst <= 1.0)


def _tech1_terms(s, nu, beta, rng):
    k = np.arange(-4 * rng, 4 * rng + 1)
    d = np.asarray(s)[:, None] - k[None, :]
    return np.exp(-beta * np.abs(d)) / bracket(d) ** nu


def tech1_ratio(s: int, m: int, nu: float, beta: float, rng: int) -> float:
    """Truncated lattice sum at ``(s, m)`` divided by ``e^{-b|s-m|}/<s-m>^nu``."""
    a = _tech1_terms([s], nu, beta, rng)[0]
    b = _tech1_terms([m], nu, beta, rng)[0]
    d = s - m
    return float(np.dot(a, b) * bracket(d) ** nu * np.exp(beta * abs(d)))


def _cnu_scan(nu: float, beta: float, rng: int):
    s = np.arange(-rng, rng + 1)
    A = _tech1_terms(s, nu, beta, rng)
    S = A @ A.T
    d = s[:, None] - s[None, :]
    ratio = S * bracket(d) ** nu * np.exp(beta * np.abs(d))
    i = np.unravel_index(np.argmax(ratio), ratio.shape)
    # |k| > 4 rng forces both brackets >= 3 rng + 1
    tail = 2.0 * (3.0 * rng) ** (1.0 - 2.0 * nu) / (2.0 * nu - 1.0) * (2.0 * rng + 1.0) ** nu
    return float(ratio[i]), (int(s[i[0]]), int(s[i[1]])), tail


def empirical_cnu(nu: float, beta: float, rng: int, tol: float = 0.01) -> float:
    """Empirical constant of the convolution estimate for ``<.>^{-nu}`` weights.

    Maximises the truncated sum (``|k| <= 4 rng``) times ``<s-m>^nu e^{b|s-m|}``
    over ``|s|, |m| <= rng``.  Raises :class:`DivergentTail` when doubling the
    range moves the value by ``tol`` (relative) or more.
    """
    if nu <= 1:
        raise ValueError("nu must exceed 1")
    if rng < 1:
        raise ValueError("range must be >= 1")
    c, _, _ = _cnu_scan(nu, beta, rng)
    c2, _, _ = _cnu_scan(nu, beta, 2 * rng)
    if abs(c2 - c) >= tol * c:
        raise DivergentTail(f"c_nu drifts {abs(c2 - c) / c:.2%} between range {rng} and {2 * rng}")
    return c


def check_tech1(nu: float, beta: float, rng: int, tol: float = 0.01) -> LemmaReport:
    c, witness, tail = _cnu_scan(nu, beta, rng)
    c2, _, _ = _cnu_scan(nu, beta, 2 * rng)
    drift = abs(c2 - c) / c
    return LemmaReport(
        "tech1",
        rng,
        c,
        witness,
        c,
        bool(np.isfinite(c) and drift < tol),
        {"nu": nu, "beta": beta, "doubled_range_value": c2, "drift": drift, "tail_bound": tail},
    )
