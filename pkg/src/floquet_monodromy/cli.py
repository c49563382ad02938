"""Command-line entry point: ``floquet-monodromy <command> ...``.

Exit codes: 0 when every check passes, 1 on a failed check, 2 on invalid
input.  ``FLOQUET_THREADS`` caps the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .pipeline import run_converge, run_decompose, run_diagonalize, run_lemmas
from .report import DecompositionReport, sibling, write_operator_csv

log = logging.getLogger("floquet_monodromy")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _threads():
    raw = os.environ.get("FLOQUET_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise ConfigError("FLOQUET_THREADS must be a positive integer") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def _emit(rep: DecompositionReport, out: str | None) -> int:
    for line in rep.summary_lines():
        print(line, file=sys.stderr)
    if out:
        Path(out).write_text(rep.to_json() + "\n")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "out", None) is None and cfg.out:
        args.out = cfg.out
    if getattr(args, "csv", None) is None and cfg.csv:
        args.csv = cfg.csv
    return cfg


def cmd_decompose(args) -> int:
    cfg = _config(args)
    res = run_decompose(cfg)
    if args.csv:
        ch = res.chain
        write_operator_csv(args.csv, ch.D.m2.entries, res.template)
        write_operator_csv(sibling(args.csv, "sms"), ch.sms_residual, res.sms_template)
        write_operator_csv(sibling(args.csv, "monodromy"), ch.M.entries)
        if res.refined is not None:
            write_operator_csv(sibling(args.csv, "refined"), res.refined.m2.entries, res.template)
        if res.backward is not None:
            write_operator_csv(sibling(args.csv, "backward"), res.backward.m2.entries, res.template)
    return _emit(res.report, args.out)


def cmd_diagonalize(args) -> int:
    cfg = _config(args)
    res = run_diagonalize(cfg)
    if res.error is not None:
        print(f"error: {type(res.error).__name__}: {res.error}", file=sys.stderr)
    if args.csv and res.form is not None:
        mid = cfg.grid.middle
        write_operator_csv(args.csv, res.form.tildec.entries)
        write_operator_csv(sibling(args.csv, "middle_before"), res.W)
        write_operator_csv(sibling(args.csv, "middle_after"), res.form.conjugated.entries[np.ix_(mid, mid)])
        write_operator_csv(sibling(args.csv, "wprime"), res.U - res.W, res.wprime_template)
    return _emit(res.report, args.out)


def cmd_lemmas(args) -> int:
    cfg = load_config(args.config) if args.config else None
    return _emit(run_lemmas(args.range, cfg), args.out)


def _k_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad K list {text!r}") from None


def cmd_converge(args) -> int:
    cfg = _config(args)
    rep, _ = run_converge(cfg, _k_list(args.K))
    return _emit(rep, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="floquet-monodromy", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="monodromy, explicit decomposition and residual bounds")
    d.add_argument("--config", required=True)
    d.add_argument("--out")
    d.add_argument("--csv")
    d.set_defaults(func=cmd_decompose)

    g = sub.add_parser("diagonalize", help="orthogonalize and diagonalize the middle block")
    g.add_argument("--config", required=True)
    g.add_argument("--out")
    g.add_argument("--csv")
    g.set_defaults(func=cmd_diagonalize)

    lm = sub.add_parser("lemmas", help="brute-force scans of the lattice-sum inequalities")
    lm.add_argument("--range", type=int, required=True)
    lm.add_argument("--out")
    lm.add_argument("--config", help="optional run config for the generator-power check")
    lm.set_defaults(func=cmd_lemmas)

    c = sub.add_parser("converge", help="truncation convergence over a list of K")
    c.add_argument("--config", required=True)
    c.add_argument("--K", required=True, help="comma-separated ascending list, e.g. 32,48,64")
    c.add_argument("--out")
    c.set_defaults(func=cmd_converge)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        with _threads():
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
