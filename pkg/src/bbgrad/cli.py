"""Command-line interface.

Subcommands: run (single trace), table (termination counts), spread
(mesh-independence defect from a table CSV), sandwich (coarse-vs-fine count
check), spectral-sweep (rate constants and half-lives). Each invocation
writes CSV plus a manifest into --out; report paths also render figures.
Exit code is 0 on success and 1 on any solver failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .bb import StepRule
from .errors import BBGradError


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def _ints(text):
    return tuple(int(x) for x in text.split(","))


def _rules(text):
    return tuple(StepRule(x.strip().upper()) for x in text.split(","))


def _add_common(parser):
    parser.add_argument("--problem", choices=harness.PROBLEMS, help="back-end to run")
    parser.add_argument(
        "--rule", type=_rules, help="step rule(s): BB1, BB2, ABB (comma separated)"
    )
    parser.add_argument("--beta", type=_floats, help="control cost value(s)")
    parser.add_argument("--eps", type=_floats, help="termination tolerance(s), decreasing")
    parser.add_argument("--level", type=_ints, help="discretization level(s)")
    parser.add_argument(
        "--dt", type=_floats, help="time step(s), zipped with --level where applicable"
    )
    parser.add_argument("--config", type=Path, help="key=value experiment file")
    parser.add_argument("--out", type=Path, help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="seed for randomized pieces")
    parser.add_argument("--max-iter", type=int, help="iteration cap (default 10000)")
    parser.add_argument(
        "--no-figure", action="store_true", help="skip figure rendering"
    )


def _resolve_spec(args, default_problem=None):
    values = {}
    if args.config:
        values.update(harness.parse_config_file(args.config))
    if args.problem:
        values["problem"] = args.problem
    if args.rule:
        values["rules"] = args.rule
    if args.beta:
        values["betas"] = args.beta
    if args.eps:
        values["epsilons"] = args.eps
    if args.level:
        dts = args.dt if args.dt else (None,) * len(args.level)
        if len(dts) != len(args.level):
            raise ValueError("--dt list must match --level list")
        values["levels"] = tuple(zip(dts, args.level))
    elif args.dt:
        raise ValueError("--dt requires --level")
    if args.out:
        values["out_dir"] = args.out
    if args.seed is not None:
        values["seed"] = args.seed
    if args.max_iter is not None:
        values["max_iter"] = args.max_iter
    if "problem" not in values:
        if default_problem is None:
            raise ValueError("--problem (or a config file) is required")
        values["problem"] = default_problem
    values.setdefault("out_dir", Path("out"))
    values.setdefault("rules", (StepRule.BB1,))
    if args.no_figure:
        values["figures"] = False
    return harness.ExperimentSpec(**values)


def _cmd_run(args):
    spec = _resolve_spec(args)
    if args.objective:
        spec = replace(spec, record_objective=True)
    trace, csv_path = harness.run_single(spec)
    print(f"wrote {csv_path} ({len(trace.records)} iterations, {trace.reason})")
    return 0


def _cmd_table(args):
    spec = _resolve_spec(args)
    rows = harness.build_table(spec)
    csv_path = harness.write_table(spec, rows)
    failed = [r for r in rows if r.reason.startswith("error")]
    print(f"wrote {csv_path} ({len(rows)} rows, {len(failed)} failed)")
    return 1 if failed else 0


def _cmd_spread(args):
    rows = harness.read_table(args.table)
    report = harness.spread(rows)
    out_dir = args.out or Path("out")
    csv_path = harness.write_spread(report, out_dir)
    harness.write_simple_manifest(
        out_dir / "manifest.txt", {"command": "spread", "table": args.table}
    )
    for row in report:
        ell = "n/a" if row.ell is None else row.ell
        print(f"{row.problem} {row.rule} beta={row.beta:g} eps={row.eps:g}: ell={ell}")
    print(f"wrote {csv_path}")
    return 0


def _cmd_sandwich(args):
    rows = harness.read_table(args.table)
    report = harness.sandwich_check(
        rows, args.reference_level, slack=args.slack, ell_bound=args.ell_bound
    )
    out_dir = args.out or Path("out")
    csv_path = harness.write_sandwich(report, out_dir)
    harness.write_simple_manifest(
        out_dir / "manifest.txt",
        {
            "command": "sandwich",
            "table": args.table,
            "reference_level": args.reference_level,
            "slack": args.slack,
            "ell_bound": args.ell_bound,
        },
    )
    violations = [r for r in report if r.violation]
    print(f"wrote {csv_path} ({len(report)} comparisons, {len(violations)} violations)")
    return 0


def _cmd_sweep(args):
    shifts = args.beta or (1.5, 0.5, 0.05)
    ns = tuple(2**l for l in (args.level or (5, 6, 7)))
    rule = args.rule[0] if args.rule else StepRule.BB1
    rows = harness.spectral_sweep(shifts, ns, rule=rule, seed=args.seed or 0)
    out_dir = args.out or Path("out")
    csv_path = harness.write_sweep(rows, out_dir)
    harness.write_simple_manifest(
        out_dir / "manifest.txt",
        {
            "command": "spectral-sweep",
            "shifts": ",".join(harness.fmt(s) for s in shifts),
            "ns": ",".join(str(n) for n in ns),
            "rule": rule.value,
            "seed": args.seed or 0,
        },
    )
    print(f"wrote {csv_path} ({len(rows)} instances)")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bbgrad",
        description="Barzilai-Borwein gradient experiments for quadratic and "
        "PDE-constrained control problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single run, trace CSV + convergence figure")
    _add_common(p_run)
    p_run.add_argument(
        "--objective", action="store_true", help="record the objective per iteration"
    )
    p_run.set_defaults(func=_cmd_run)

    p_table = sub.add_parser("table", help="termination-count table over a grid")
    _add_common(p_table)
    p_table.set_defaults(func=_cmd_table)

    p_spread = sub.add_parser("spread", help="mesh-independence spread from a table CSV")
    p_spread.add_argument("--table", type=Path, required=True, help="table CSV path")
    p_spread.add_argument("--out", type=Path, help="output directory")
    p_spread.set_defaults(func=_cmd_spread)

    p_sand = sub.add_parser("sandwich", help="coarse-vs-finest count comparison")
    p_sand.add_argument("--table", type=Path, required=True, help="table CSV path")
    p_sand.add_argument(
        "--reference-level", type=int, required=True, help="finest level (limit proxy)"
    )
    p_sand.add_argument("--slack", type=int, default=1, help="allowed excess above reference")
    p_sand.add_argument(
        "--ell-bound", type=int, default=6, help="allowed shortfall below reference"
    )
    p_sand.add_argument("--out", type=Path, help="output directory")
    p_sand.set_defaults(func=_cmd_sandwich)

    p_sweep = sub.add_parser(
        "spectral-sweep", help="rate constants and half-lives over synthetic spectra"
    )
    p_sweep.add_argument("--beta", type=_floats, help="cluster shift(s)")
    p_sweep.add_argument("--level", type=_ints, help="truncation exponent(s), n = 2**level")
    p_sweep.add_argument("--rule", type=_rules, help="step rule (first entry used)")
    p_sweep.add_argument("--seed", type=int, help="seed for random component masses")
    p_sweep.add_argument("--out", type=Path, help="output directory")
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BBGradError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
