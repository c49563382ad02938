"""JSON reports and per-operator CSV dumps."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import DecayBound

__all__ = ["DecompositionReport", "to_jsonable", "write_operator_csv", "read_operator_csv", "sibling"]

CSV_COLUMNS = ("j", "k", "re", "im", "bound", "ratio")


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; NaN becomes ``None``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) else x
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


@dataclass
class DecompositionReport:
    """Per-check blocks, each carrying its own ``passed`` flag."""

    command: str
    config: dict[str, Any] = field(default_factory=dict)
    blocks: dict[str, dict[str, Any]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(b.get("passed", True) for b in self.blocks.values())

    def add(self, name: str, passed: bool, **values) -> dict:
        block = to_jsonable({"passed": bool(passed), **values})
        self.blocks[name] = block
        return block

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "passed": self.passed,
            "config": to_jsonable(self.config),
            "blocks": self.blocks,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DecompositionReport":
        raw = json.loads(text)
        return cls(raw["command"], raw.get("config", {}), raw.get("blocks", {}))

    def summary_lines(self) -> list[str]:
        return [f"{'PASS' if b.get('passed', True) else 'FAIL'}  {name}" for name, b in self.blocks.items()]


def sibling(path: str | Path, tag: str) -> Path:
    """``out.csv`` -> ``out.<tag>.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}.{tag}{p.suffix or '.csv'}")


def write_operator_csv(
    path: str | Path,
    entries: np.ndarray,
    template: DecayBound | None = None,
    mask: np.ndarray | None = None,
) -> None:
    """Rows ``j,k,re,im,bound,ratio`` for every selected entry.

    ``bound`` is ``template`` evaluated at ``(j, k)`` (``1`` without a
    template) and ``ratio = |entry| / bound``.  Floats are written with 17
    significant digits so the file round-trips exactly.
    """
    a = np.asarray(entries)
    K = (a.shape[0] - 1) // 2
    modes = np.arange(-K, K + 1)
    if mask is None:
        mask = np.ones(a.shape, dtype=bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r, j in enumerate(modes):
            for c, k in enumerate(modes):
                if not mask[r, c]:
                    continue
                z = a[r, c]
                b = float(template.evaluate(j, k)) if template is not None else 1.0
                ratio = abs(z) / b if b > 0 else (0.0 if z == 0 else math.inf)
                w.writerow([int(j), int(k), f"{z.real:.17g}", f"{z.imag:.17g}", f"{b:.17g}", f"{ratio:.17g}"])


def read_operator_csv(path: str | Path) -> tuple[np.ndarray, dict[tuple[int, int], tuple[complex, float, float]]]:
    """Inverse of :func:`write_operator_csv`: a dense array plus per-entry records."""
    rows = {}
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            j, k = int(rec["j"]), int(rec["k"])
            rows[(j, k)] = (complex(float(rec["re"]), float(rec["im"])), float(rec["bound"]), float(rec["ratio"]))
    K = max(max(abs(j), abs(k)) for j, k in rows) if rows else 0
    a = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    for (j, k), (z, _, _) in rows.items():
        a[j + K, k + K] = z
    return a, rows
