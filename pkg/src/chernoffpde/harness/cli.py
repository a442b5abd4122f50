"""Command line interface.

Exit codes: 0 success, 1 invalid problem (or a failed audit / check),
2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..chernoff import ChernoffConfig, solve
from ..fields import validate_coefficients
from ..grid import GridFunction
from ..reference import feynman_kac
from .experiments import closed_form_oracle, run_audits, run_convergence, run_mc_check, run_tangency
from .problem import ProblemError, load_problem

log = logging.getLogger("chernoffpde")


def _out_dir(args, spec) -> Path:
    out = Path(args.out or spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(spec, args):
    out = _out_dir(args, spec)
    n = spec.n_list[-1]
    gf = solve(ChernoffConfig(spec.t, n, spec.grid, spec.mode, spec.budget, spec.extension), spec.u0, spec.coeffs, args.threads)
    gf.to_csv(out / "solution.csv", {"problem": spec.source})
    print(f"wrote {out / 'solution.csv'} (n={n}, wandering radius {gf.metadata.get('wandering_radius', 'n/a')})")
    return 0


def cmd_converge(spec, args):
    out = _out_dir(args, spec)
    report = run_convergence(spec, args.threads)
    report.to_csv(out / "convergence.csv")
    report.times_csv(out / "convergence_times.csv")
    for n, e in zip(report.ns, report.errors):
        print(f"n={n:<6d} error={e:.6e}")
    print(f"fitted order: {report.order if report.order is not None else 'not reported'}")
    return 0


def cmd_tangency(spec, args):
    out = _out_dir(args, spec)
    report = run_tangency(spec)
    report.to_csv(out / "tangency.csv")
    for t, r in zip(report.ts, report.residuals):
        print(f"t={t:<10g} residual={r:.6e}")
    return 0


def cmd_audit(spec, args):
    out = _out_dir(args, spec)
    report = run_audits(spec, args.threads)
    report.to_text(out / "audits.txt")
    for line in report.lines:
        print(line)
    return 0 if report.passed else 1


def cmd_oracle(spec, args):
    out = _out_dir(args, spec)
    o = spec.oracles
    if o.selected == "monte_carlo":
        rows = ["x," + "mean,stderr"]
        for x in o.points:
            est = feynman_kac(spec.t, x, spec.coeffs, spec.u0, o.paths, o.steps, o.seed, args.threads)
            rows.append(f"{';'.join(map(repr, x))},{est.mean!r},{est.stderr!r}")
        (out / "oracle.csv").write_text("\n".join(rows) + "\n")
    elif o.selected == "exact_tree":
        cfg = ChernoffConfig(spec.t, spec.n_list[-1], spec.grid, "exact", spec.budget, spec.extension)
        solve(cfg, spec.u0, spec.coeffs).to_csv(out / "oracle.csv", {"oracle": "exact_tree"})
    else:
        exact = closed_form_oracle(spec)(spec.t)
        gf = GridFunction(spec.grid, exact(spec.grid.points()), spec.extension)
        gf.to_csv(out / "oracle.csv", {"oracle": "closed_form", "t": spec.t})
    print(f"wrote {out / 'oracle.csv'}")
    return 0


def cmd_mc_check(spec, args):
    out = _out_dir(args, spec)
    report = run_mc_check(spec, args.threads)
    report.to_csv(out / "mc_check.csv")
    for r in report.rows:
        print(f"x={r['x']} n={r['n']} diff={r['diff']:.3e} tol={r['tolerance']:.3e} {'PASS' if r['pass'] else 'FAIL'}")
    return 0 if report.passed else 1


def cmd_validate(spec, args):
    report = validate_coefficients(spec.coeffs, spec.grid)
    print(f"ellipticity kappa = {report.ellipticity_kappa!r}")
    print(f"c <= 0 on sample  = {report.c_nonpositive}")
    for name, b in report.bound_estimates.items():
        print(f"sup|{name}| ~ {b!r}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "tangency": cmd_tangency,
    "audit": cmd_audit,
    "oracle": cmd_oracle,
    "mc-check": cmd_mc_check,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chernoffpde", description="Chernoff translation-operator parabolic solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--problem", required=True, help="TOML problem file")
        p.add_argument("--out", default=None, help="output directory (default: [output].dir)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--seed", type=int, default=None, help="override the Monte Carlo seed")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        spec = load_problem(args.problem)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ProblemError("--seed must be an unsigned 64-bit integer")
            spec = spec.with_seed(args.seed)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](spec, args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # reported, not raised: the exit code is the contract
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
