"""Command line entry point: ``mmlm {gen,run,suite,summarize}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench.instances import InstanceSpec, generate_instance, load_spec, save_spec
from .bench.runner import SOLVERS, SuiteConfig, global_suite, local_suite, run_comparison, run_single
from .bench.traces import TraceFormatError, summarize, write_summary
from .solvers import SolverConfig


def _cmd_gen(args):
    spec = load_spec(args.spec)
    inst = generate_instance(spec)
    save_spec(spec, args.out)
    info = dict(spec.to_dict(), f_x0=inst.problem.objective(inst.x0), lipschitz_bound=inst.lipschitz_bound)
    print(json.dumps(info))
    return 0


def _cmd_run(args):
    spec = load_spec(args.instance)
    config = SolverConfig(tol=args.tol, eta_report=args.eta, max_seconds=args.timeout, max_outer=args.max_outer)
    result = run_single(spec, args.solver, config, args.inner, args.trace)
    out = result.meta(args.tol, args.eta)
    if result.report is not None:
        out["certified_epsilon"] = result.report.certificate.certified_epsilon
        out["final_f"] = result.report.trace[-1].f_value
    print(json.dumps(out))
    return 0 if result.status != "failed" else 1


def _cmd_suite(args):
    base = global_suite() if args.kind == "global" else local_suite()
    suite = SuiteConfig.load(args.config, base) if args.config else base
    if args.seeds is not None:
        suite.seeds = args.seeds
    results = run_comparison(suite, args.out_dir, jobs=args.jobs)
    (Path(args.out_dir) / "suite.json").write_text(json.dumps(suite.to_dict(), indent=2) + "\n")
    counts = {}
    for r in results:
        counts.setdefault(r.solver, {}).setdefault(r.status, 0)
        counts[r.solver][r.status] += 1
    print(json.dumps(counts))
    return 0


def _cmd_summarize(args):
    try:
        rows = summarize(args.in_dir)
    except TraceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    write_summary(rows, args.out)
    print(f"{len(rows)} summary rows written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmlm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="validate an instance spec and write its normalized form")
    p.add_argument("--spec", required=True, help="JSON with d, n, m, sigma_noise, seed, x0_mode")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("run", help="solve one instance and write its trace")
    p.add_argument("--instance", required=True)
    p.add_argument("--solver", choices=SOLVERS, default="proposed")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--eta", type=float, default=1e6)
    p.add_argument("--inner", default="fixed:10", help="fixed:T, target:RHO or exact[:TOL]")
    p.add_argument("--timeout", type=float, default=100.0)
    p.add_argument("--max-outer", type=int, default=1_000_000)
    p.add_argument("--trace", default=None, help="trace CSV path (a .json sidecar is written next to it)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("suite", help="run a preset comparison suite")
    p.add_argument("kind", choices=("global", "local"))
    p.add_argument("--config", default=None, help="JSON overrides for the preset")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seeds", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_suite)

    p = sub.add_parser("summarize", help="aggregate trace files into a summary CSV")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
