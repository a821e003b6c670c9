"""Command line entry point: ``platesim run | ladder | plot``.

Exit status: 0 completed, 2 halted (blow-up or hyperbolicity loss), 1 configuration or solver failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import load_config
from .errors import ConfigError, PlatesimError
from .records import RunRecord

log = logging.getLogger("platesim")


def _combine(codes) -> int:
    codes = list(codes)
    if 1 in codes:
        return 1
    return 2 if 2 in codes else 0


def _run_one(config: str, out: str | None, overrides: list[str]) -> tuple[int, str]:
    from .scenarios import safe_run

    try:
        cfg = load_config(config, overrides)
    except ConfigError as exc:
        return 1, f"{config}: configuration error: {exc}"
    rec = safe_run(cfg, out)
    line = f"{config}: {rec.scenario} {rec.halt_reason} -> {rec.output_dir}"
    if rec.message:
        line += f" ({rec.message})"
    return rec.exit_code, line


def cmd_run(args) -> int:
    configs = args.config
    if len(configs) == 1:
        code, line = _run_one(configs[0], args.out, args.override)
        print(line)
        return code
    # batch: one isolated output directory per config
    base = Path(args.out) if args.out else None
    outs = [str(base / Path(c).stem) if base else None for c in configs]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_run_one, configs, outs, [args.override] * len(configs)))
    for _, line in results:
        print(line)
    return _combine(code for code, _ in results)


def cmd_ladder(args) -> int:
    from .scenarios import run_ladder

    try:
        cfg = load_config(args.config, args.override)
        rec = run_ladder(cfg, args.halvings, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PlatesimError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    lad = rec.ladder or {}
    for dt, r in zip(lad.get("dt", []), lad.get("residual", [])):
        print(f"dt={dt:.6g} identity_residual={r:.6e}")
    for i, q in enumerate(lad.get("ratio", [])):
        print(f"ratio[{i}]={q:.4f}")
    return rec.exit_code


def cmd_plot(args) -> int:
    from .plots import emit_plots

    try:
        rec = RunRecord.load(args.record)
        files = emit_plots(rec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="platesim", description="Thermoelastic plate simulator and energy diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the scenario of one or more configs")
    r.add_argument("--config", required=True, nargs="+", help="YAML config file(s); several run as a batch")
    r.add_argument("--out", help="output directory (batch: parent of one directory per config)")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE", help="e.g. scheme.dt=5e-4")
    r.add_argument("--jobs", type=int, default=None, help="worker processes for batch runs")
    r.set_defaults(func=cmd_run)

    lad = sub.add_parser("ladder", help="dt-halving convergence study of the identity residual")
    lad.add_argument("--config", required=True)
    lad.add_argument("--halvings", type=int, required=True)
    lad.add_argument("--out")
    lad.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    lad.set_defaults(func=cmd_ladder)

    pl = sub.add_parser("plot", help="(re)emit SVG plots for a saved record")
    pl.add_argument("--record", required=True, help="path to record.json")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
