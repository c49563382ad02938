"""Run configuration: JSON text in, validated :class:`RunConfig` out."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .potential import FourierPotential
from .propagator import IntegratorConfig, ModeGrid, resonant_pairs

__all__ = ["ConfigError", "RunConfig", "parse_potential", "load_config", "potential_to_dict"]

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


def _num(obj: dict, key: str, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{key!r} must be a number")
    if kind is int and int(val) != val:
        raise ConfigError(f"{key!r} must be an integer")
    return kind(val)


def parse_potential(spec: dict) -> FourierPotential:
    """``{"modes": [{"k": 2, "harmonics": [{"m": 0, "re": 1, "im": 0}, ...]}], "alpha": ...}``."""
    if not isinstance(spec, dict):
        raise ConfigError("potential must be an object")
    modes: dict[int, dict[int, complex]] = {}
    for rec in spec.get("modes", []):
        try:
            k = int(rec["k"])
            tab = modes.setdefault(k, {})
            for hrm in rec.get("harmonics", []):
                m = int(hrm["m"])
                tab[m] = tab.get(m, 0) + complex(float(hrm.get("re", 0.0)), float(hrm.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad potential mode record {rec!r}: {exc}") from None
    try:
        return FourierPotential.from_modes(
            modes,
            alpha=_num(spec, "alpha", 0.0),
            beta=_num(spec, "beta", 0.0),
            gamma=_num(spec, "gamma", 2, int),
            c_v=_num(spec, "c_v", 1.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def potential_to_dict(p: FourierPotential) -> dict:
    modes = []
    for k in p.modes:
        if k < 0:
            continue
        tab = p.table(k)
        harm = [
            {"m": int(m), "re": float(c.real), "im": float(c.imag)}
            for m, c in zip(p.harmonics, tab)
            if c != 0
        ]
        modes.append({"k": int(k), "harmonics": harm})
    return {"modes": modes, "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "c_v": p.c_v}


@dataclass
class RunConfig:
    h: float
    potential: FourierPotential
    K: int
    N: int
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    margin: int | None = None
    refine: int = 16
    out: str | None = None
    csv: str | None = None

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigError("h must be positive")
        if self.K < 2:
            raise ConfigError("K must be >= 2")
        if not 1 <= self.N or 3 * self.N > self.K:
            raise ConfigError(f"N = {self.N} must satisfy 1 <= N <= K/3 (K = {self.K})")
        if self.margin is None:
            self.margin = self.integrator.margin if self.integrator.margin is not None else self.K // 2
        if not 0 <= self.margin < self.K:
            raise ConfigError("margin must satisfy 0 <= margin < K")
        if self.refine < 0:
            raise ConfigError("refine must be >= 0")
        limit = self.integrator.eta * self.h / self.K**2
        if self.integrator.dt is not None and self.integrator.dt > limit * (1 + 1e-12):
            raise ConfigError(f"dt = {self.integrator.dt:.4g} exceeds eta*h/K^2 = {limit:.4g}")

    @property
    def grid(self) -> ModeGrid:
        return ModeGrid(self.K, self.N)

    @property
    def interior(self) -> int:
        return self.K // 2

    def with_K(self, K: int) -> "RunConfig":
        """Same run on a different truncation.

        The step follows ``eta h / K^2`` unless a pinned ``dt`` is still
        admissible; ``N`` is capped at ``K // 3`` and the margin at ``K // 2``.
        """
        integ = self.integrator
        if integ.dt is not None and integ.dt > integ.eta * self.h / K**2:
            integ = IntegratorConfig(integ.method, None, integ.eta, integ.margin, integ.split_order)
        N = max(1, min(self.N, K // 3))
        return RunConfig(
            self.h, self.potential, K, N, integ, min(self.margin, K // 2), self.refine, self.out, self.csv
        )

    def resonances(self) -> list[tuple[int, int]]:
        return resonant_pairs(self.h, self.K)

    def to_dict(self) -> dict[str, Any]:
        i = self.integrator
        return {
            "h": self.h,
            "potential": potential_to_dict(self.potential),
            "K": self.K,
            "N": self.N,
            "integrator": {"method": i.method, "dt": i.dt, "eta": i.eta, "split_order": i.split_order},
            "margin": self.margin,
            "refine": self.refine,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        integ_raw = raw.get("integrator", {}) or {}
        try:
            integ = IntegratorConfig(
                method=integ_raw.get("method", "rk4"),
                dt=integ_raw.get("dt"),
                eta=float(integ_raw.get("eta", 0.5)),
                margin=integ_raw.get("margin"),
                split_order=int(integ_raw.get("split_order", 4)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad integrator settings: {exc}") from None
        if "potential" not in raw:
            raise ConfigError("missing required key 'potential'")
        margin = raw.get("margin")
        if margin is not None and (isinstance(margin, bool) or int(margin) != margin):
            raise ConfigError("'margin' must be an integer")
        output = raw.get("output", {}) or {}
        cfg = cls(
            h=_num(raw, "h"),
            potential=parse_potential(raw["potential"]),
            K=_num(raw, "K", kind=int),
            N=_num(raw, "N", kind=int),
            integrator=integ,
            margin=None if margin is None else int(margin),
            refine=_num(raw, "refine", 16, int),
            out=output.get("json"),
            csv=output.get("csv"),
        )
        pairs = cfg.resonances()
        if pairs:
            log.warning(
                "h = %.6g makes %d pairs of free phases coincide (e.g. k = %d, %d); "
                "M1 and G lose their generic structure",
                cfg.h,
                len(pairs),
                *pairs[0],
            )
        return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return RunConfig.from_dict(raw)
