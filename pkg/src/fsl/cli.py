"""Command-line front end: ``fsl build | norm | verify | decompose | apply | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import (
    ConfigError, RunConfig, load_json, operator_from_config, read_vector, space_from_config, weight_from_config,
)

log = logging.getLogger("fsl")


def _common(p: argparse.ArgumentParser, weight: bool = False) -> None:
    p.add_argument("--space", default="grid1d", help="space JSON path or builtin name (grid1d, grid2d)")
    p.add_argument("--operator", default=None, help="operator JSON path")
    if weight:
        p.add_argument("--weight", default=None, help="weight JSON path")


def _write(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _setup(args):
    sp = space_from_config(args.space)
    op = operator_from_config(sp, args.operator)
    w = weight_from_config(sp, getattr(args, "weight", None))
    return sp, op, w


# ---------------------------------------------------------------- subcommands


def cmd_build(args) -> int:
    from .space import build_dyadic_cubes, default_levels, estimate_doubling

    sp, op, _ = _setup(args)
    tree = build_dyadic_cubes(sp, *default_levels(sp))
    out = {"space": sp.meta if sp.meta.get("type") == "grid" else {"type": "graph", "n": sp.n_points},
           "n_points": sp.n_points, "diameter": sp.diameter, "doubling": estimate_doubling(sp).to_dict(),
           "spectrum": {"lambda_min_pos": op.lambda_min_pos, "lambda_max": op.lambda_max,
                        "kernel_dim": op.kernel_dim},
           "cubes": tree.to_dict()}
    _write(args.out, _dump(out))
    return 0


def cmd_norm(args) -> int:
    from .norms import NormParams, besov_norm, triebel_norm

    sp, op, w = _setup(args)
    f = read_vector(args.input, sp.n_points)
    params = NormParams(alpha=args.alpha, p=args.p, q=args.q, weight=w, lambda_exp=args.lam, flavor=args.flavor)
    fn = besov_norm if args.kind == "B" else triebel_norm
    val = fn(op, f, params)
    _write(args.out, _dump({"kind": args.kind, "alpha": args.alpha, "p": args.p, "q": args.q,
                            "flavor": args.flavor, "lambda": args.lam, "value": float(val.value)}))
    return 0


def cmd_verify(args) -> int:
    from .baseline import BaselineStore
    from .suites import dumps_report, emit_plot_data, run_suite

    cfg = RunConfig.from_sources(space=args.space, operator=args.operator, suites=args.suite, samples=args.samples,
                                 seed=args.seed, band=args.band, baseline_dir=args.baseline_dir,
                                 report=args.report, csv=args.csv, rebaseline=args.rebaseline)
    report = run_suite(cfg, BaselineStore(cfg.baseline_dir))
    if cfg.report:
        _write(cfg.report, dumps_report(report))
    if cfg.csv:
        _write(cfg.csv, emit_plot_data(report))
    for c in report["checks"]:
        tag = "PASS" if c["pass"] else "FAIL"
        if not c["gating"]:
            tag += " (info)"
        print(f"{tag:12s} {c['suite']:14s} {c['check']}" + (f"  [{c['reason']}]" if c.get("reason") else ""))
    print("overall:", "PASS" if report["pass"] else "FAIL")
    return 0 if report["pass"] else 1


def cmd_decompose(args) -> int:
    from .atoms import atomic_decompose, reconstruct

    sp, op, w = _setup(args)
    f = read_vector(args.input, sp.n_points)
    dec = atomic_decompose(op, f, M=args.M, p=args.p, w=w, truncate=args.truncate)
    _, res = reconstruct(op, dec)
    out = dec.to_dict(dense=args.dense)
    out["params"]["alpha"] = args.alpha
    out["residual"] = res
    _write(args.out, _dump(out))
    return 0


def cmd_apply(args) -> int:
    from .apps import fractional_power, laplace_type_multiplier, symbol_from_config

    sp, op, _ = _setup(args)
    f = read_vector(args.input, sp.n_points)
    if args.op == "fractional":
        if args.s is None:
            raise ConfigError("--s is required for --op fractional")
        g = fractional_power(op, f, args.s)
    else:
        if args.symbol is None:
            raise ConfigError("--symbol is required for --op multiplier")
        try:
            mprof = symbol_from_config(load_json(args.symbol))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad symbol: {e}") from e
        g = laplace_type_multiplier(op, mprof, f)
    _write(args.out, "".join(f"{v!r}\n" for v in np.asarray(g, dtype=float).tolist()))
    return 0


def cmd_report(args) -> int:
    from .suites import emit_plot_data

    try:
        report = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"report not found: {args.report}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.report}: invalid JSON") from e
    if args.csv:
        _write(args.csv, emit_plot_data(report))
    checks = report.get("checks", [])
    for c in checks:
        r = c["ratios"]
        print(f"{'PASS' if c['pass'] else 'FAIL'}  {c['check']:34s} min={r['min']!r} max={r['max']!r}")
    print(f"{sum(c['pass'] for c in checks)}/{len(checks)} checks pass")
    return 0 if report.get("pass", True) else 1


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    from .suites import SUITE_CHOICES

    ap = argparse.ArgumentParser(prog="fsl", description="Spectral Besov/Triebel-Lizorkin toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("build", help="build a space and describe geometry, spectrum and cubes")
    _common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("norm", help="evaluate a Besov or Triebel-Lizorkin norm")
    _common(p, weight=True)
    p.add_argument("--kind", choices=("B", "F"), default="F")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--flavor", default="dyadic", choices=("dyadic", "continuous", "peetre", "g-function", "lusin"))
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("verify", help="run verification suites")
    _common(p)
    p.add_argument("--suite", action="append", choices=SUITE_CHOICES, default=None)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--band", type=int, default=16)
    p.add_argument("--report", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--baseline-dir", default=None)
    p.add_argument("--rebaseline", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("decompose", help="atomic decomposition of an input field")
    _common(p, weight=True)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--dense", action="store_true", help="store b vectors")
    p.add_argument("--truncate", action="store_true", help="mask b to the support ball")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("apply", help="apply L^{s/2} or a Laplace-type multiplier")
    _common(p)
    p.add_argument("--op", choices=("fractional", "multiplier"), required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--symbol", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("report", help="summarize a report and emit plot CSV")
    p.add_argument("report")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(args, "suite", False) is None:
        args.suite = ["all"]
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"fsl: error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"fsl: invalid input: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
