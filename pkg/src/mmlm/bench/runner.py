"""Solver-comparison runs over seeded instances."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

from ..errors import NumericalError
from ..solvers import SolveReport, SolverConfig, hybrid_lm_solve, lm_solve, pg_baseline_solve
from ..subproblem import Exact, FixedIterations, StationarityTarget, StoppingRule
from .instances import InstanceSpec, generate_instance
from .traces import pivot_times, summarize, write_meta, write_summary, write_trace

__all__ = [
    "SOLVERS",
    "parse_inner",
    "inner_label",
    "RunResult",
    "SuiteConfig",
    "global_suite",
    "local_suite",
    "solve",
    "run_single",
    "run_comparison",
]

logger = logging.getLogger(__name__)

SOLVERS = ("proposed", "fan", "kyf", "pg")


def parse_inner(text: str) -> tuple[StoppingRule, Optional[float]]:
    """Parse the ``--inner`` option: ``fixed:T``, ``target:RHO`` or ``exact[:TOL]``.

    Returns the stopping rule and, for ``target``, the factor ``rho``.
    """
    name, _, arg = text.strip().partition(":")
    name = name.lower()
    if name == "fixed":
        return FixedIterations(int(arg) if arg else 10), None
    if name == "target":
        return StationarityTarget(), float(arg) if arg else 1.0
    if name == "exact":
        return (Exact(float(arg)) if arg else Exact()), None
    raise ValueError(f"unknown inner rule {text!r}; use fixed:T, target:RHO or exact[:TOL]")


def inner_label(text: str) -> str:
    return text.strip().lower().replace(":", "-")


def solve(solver: str, problem, x0, config: SolverConfig) -> SolveReport:
    if solver == "proposed":
        return lm_solve(problem, x0, config)
    if solver == "pg":
        return pg_baseline_solve(problem, x0, config)
    if solver == "fan":
        return hybrid_lm_solve(problem, x0, config, delta=1.0)
    if solver == "kyf":
        return hybrid_lm_solve(problem, x0, config, delta=2.0)
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")


@dataclass
class RunResult:
    spec: InstanceSpec
    solver: str
    inner: str
    status: str
    elapsed_s: float
    F_evals: int
    J_evals: int
    outer_iterations: int
    report: Optional[SolveReport] = None
    error: Optional[str] = None

    @property
    def evals(self) -> int:
        return self.F_evals + self.J_evals

    def meta(self, tol: float, eta: float) -> dict:
        return dict(
            instance=self.spec.to_dict(),
            solver=self.solver,
            inner=self.inner,
            status=self.status,
            elapsed_s=self.elapsed_s,
            F_evals=self.F_evals,
            J_evals=self.J_evals,
            outer_iterations=self.outer_iterations,
            tol=tol,
            eta=eta,
            error=self.error,
        )


def run_single(
    spec: InstanceSpec,
    solver: str,
    config: SolverConfig,
    inner: str = "fixed:10",
    trace_path=None,
) -> RunResult:
    """Generate the instance, solve it, optionally write trace and metadata.

    ``inner`` is the textual inner rule; it overrides ``config.inner_rule``
    (and ``config.rho`` for ``target``).  Numerical failures are caught and
    reported with status ``failed``.
    """
    rule, rho = parse_inner(inner)
    config = replace(config, inner_rule=rule, rho=rho if rho is not None else config.rho)
    instance = generate_instance(spec)
    problem = instance.problem
    start = time.perf_counter()
    report, error, trace = None, None, []
    try:
        report = solve(solver, problem, instance.x0, config)
        status = report.status.value
        trace = report.trace
    except NumericalError as exc:
        status, error, trace = "failed", str(exc), exc.trace
        logger.warning("%s on seed %d failed: %s", solver, spec.seed, exc)
    elapsed = time.perf_counter() - start
    result = RunResult(
        spec=spec,
        solver=solver,
        inner=inner_label(inner),
        status=status,
        elapsed_s=elapsed,
        F_evals=problem.n_residual_evals,
        J_evals=problem.n_jacobian_evals,
        outer_iterations=sum(r.accepted for r in trace),
        report=report,
        error=error,
    )
    if trace_path is not None:
        trace_path = Path(trace_path)
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        write_trace(trace_path, trace)
        write_meta(trace_path.with_suffix(".json"), result.meta(config.tol, config.eta_report))
    return result


@dataclass
class SuiteConfig:
    """A grid of instance shapes x seeds x solvers x inner rules.

    ``instances`` hold everything but the seed; seeds ``0 .. seeds-1`` are
    substituted in turn.
    """

    name: str = "global"
    instances: List[InstanceSpec] = field(default_factory=list)
    seeds: int = 10
    solvers: Sequence[str] = SOLVERS
    inner: Sequence[str] = ("fixed:10",)
    tol: float = 1e-3
    eta: float = 1e6
    timeout: float = 100.0
    M0: float = 1.0
    alpha: float = 2.0
    beta: float = 0.9
    max_outer: int = 1_000_000

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            M0=self.M0,
            alpha=self.alpha,
            beta=self.beta,
            eta_report=self.eta,
            tol=self.tol,
            max_outer=self.max_outer,
            max_seconds=self.timeout,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["solvers"], data["inner"] = list(self.solvers), list(self.inner)
        return data

    @classmethod
    def from_dict(cls, data: dict, base: "SuiteConfig | None" = None) -> "SuiteConfig":
        """Build from JSON data; missing keys fall back to ``base``."""
        base = base or cls()
        data = dict(data)
        if "instances" in data:
            data["instances"] = [InstanceSpec.from_dict(s) for s in data["instances"]]
        for key in ("solvers", "inner"):
            if key in data and isinstance(data[key], str):
                data[key] = [data[key]]
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown suite config keys: {sorted(unknown)}")
        suite = replace(base, **data)
        for s in suite.solvers:
            if s not in SOLVERS:
                raise ValueError(f"unknown solver {s!r}")
        for text in suite.inner:
            parse_inner(text)
        return suite

    @classmethod
    def load(cls, path, base: "SuiteConfig | None" = None) -> "SuiteConfig":
        return cls.from_dict(json.loads(Path(path).read_text()), base)


def global_suite() -> SuiteConfig:
    """Nonzero-residual comparison of all four solvers from ``x0 = 0``."""
    return SuiteConfig(
        name="global",
        instances=[InstanceSpec(d=100, n=200, m=1, sigma_noise=0.1)],
        seeds=10,
        solvers=SOLVERS,
        inner=("fixed:10",),
    )


def local_suite() -> SuiteConfig:
    """Zero-residual runs of the proposed method started near a solution."""
    return SuiteConfig(
        name="local",
        instances=[InstanceSpec(d=100, n=100, m=1, sigma_noise=0.0, x0_mode="near_solution", x0_radius=0.1)],
        seeds=10,
        solvers=("proposed",),
        inner=("target:1", "fixed:10", "fixed:100"),
        tol=1e-9,
        max_outer=200,
    )


def run_name(spec: InstanceSpec, solver: str, inner: str) -> str:
    return (
        f"d{spec.d}_n{spec.n}_m{spec.m}_s{spec.sigma_noise:g}_{spec.x0_mode}"
        f"_seed{spec.seed}__{solver}__{inner_label(inner)}"
    )


def run_comparison(suite: SuiteConfig, out_dir=None, jobs: int = 1) -> List[RunResult]:
    """Run every (instance, seed, solver, inner rule) combination.

    With ``out_dir``, one trace CSV plus JSON sidecar is written per run, and
    ``summary.csv`` / ``table.csv`` aggregate them.
    """
    config = suite.solver_config()
    tasks = []
    for template in suite.instances:
        for seed in range(suite.seeds):
            spec = replace(template, seed=seed)
            for solver in suite.solvers:
                for inner in suite.inner:
                    tasks.append((spec, solver, inner))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    def work(task):
        spec, solver, inner = task
        path = out_dir / f"{run_name(spec, solver, inner)}.csv" if out_dir is not None else None
        result = run_single(spec, solver, config, inner, path)
        logger.info("%s seed=%d %s: %s in %.2fs, %d evals", solver, spec.seed, inner, result.status, result.elapsed_s, result.evals)
        return result

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    if out_dir is not None:
        rows = summarize(out_dir)
        write_summary(rows, out_dir / "summary.csv")
        _write_table(pivot_times(rows, tuple(suite.solvers)), out_dir / "table.csv", suite.solvers)
    return results


def _write_table(rows, path, solvers):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["d", "n", "m", *solvers])
        writer.writeheader()
        writer.writerows(rows)
