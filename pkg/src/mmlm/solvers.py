"""Outer solvers: majorization-minimization LM, projected gradient, hybrid LM.

All three share the same termination test, evaluated at every new iterate
``x_k`` before any subproblem work: stop when ``||F_k||`` is (numerically)
zero or when the gradient mapping ``||G_eta(x_k)||`` is at most ``tol``.
Each solver evaluates ``J`` once per iterate and ``F`` once per trial point;
the residual at an accepted trial point is reused as ``F_{k+1}``.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import InfeasiblePointError, NumericalError
from .model import MAJORIZATION_RTOL, LMModel, solve_exact_unconstrained, spectral_norm
from .problem import ResidualProblem, Unconstrained
from .stationarity import StationarityReport, certify
from .subproblem import (
    Exact,
    FixedIterations,
    InnerResult,
    StationarityTarget,
    StoppingRule,
    accelerated_pg,
    subproblem_stationarity,
)

__all__ = [
    "Status",
    "SolverConfig",
    "IterationRecord",
    "SolveReport",
    "lm_solve",
    "pg_baseline_solve",
    "hybrid_lm_solve",
    "ZERO_RESIDUAL_TOL",
]

logger = logging.getLogger(__name__)

ZERO_RESIDUAL_TOL = 1e-14


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_OUTER = "max_outer_reached"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class SolverConfig:
    """Parameters shared by all outer solvers.

    ``M0``, ``alpha`` and ``beta`` drive the backtracking estimate: ``M`` for
    the LM method, the curvature guess for projected gradient.  ``beta = 1``
    disables the shrink after successful iterations.  ``max_outer`` caps the
    number of trials (successful and unsuccessful).
    """

    M0: float = 1.0
    alpha: float = 2.0
    beta: float = 0.9
    eta_report: float = 1e6
    tol: float = 1e-3
    inner_rule: StoppingRule = field(default_factory=lambda: FixedIterations(10))
    rho: float = 1.0
    max_outer: int = 100_000
    max_seconds: float = math.inf

    def __post_init__(self):
        if not self.M0 > 0:
            raise ValueError("M0 must be positive")
        if not self.alpha > 1:
            raise ValueError("alpha must exceed 1")
        if not 0 < self.beta <= 1:
            raise ValueError("beta must lie in (0, 1]")
        if not (self.eta_report > 0 and self.tol > 0 and self.max_seconds > 0):
            raise ValueError("eta_report, tol and max_seconds must be positive")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")


@dataclass
class IterationRecord:
    """One trial of an outer solver, or the final state (``terminal=True``).

    ``f_value``, ``norm_F`` and ``norm_G_eta`` describe the current iterate
    ``x_k``; ``accepted`` says whether the trial moved it.
    """

    k: int
    f_value: float
    norm_F: float
    norm_G_eta: float
    M_current: float
    lambda_k: Optional[float]
    accepted: bool
    inner_iterations: int
    cumulative_F_evals: int
    cumulative_J_evals: int
    elapsed_seconds: float
    terminal: bool = False


@dataclass
class SolveReport:
    status: Status
    x_final: np.ndarray
    certificate: StationarityReport
    trace: List[IterationRecord]
    unsuccessful_count: int
    x_last: np.ndarray
    stall_count: int = 0

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    @property
    def outer_iterations(self) -> int:
        """Number of accepted moves."""
        return sum(r.accepted for r in self.trace)

    @property
    def max_M(self) -> float:
        return max((r.M_current for r in self.trace), default=math.nan)


class _Run:
    """Bookkeeping shared by the outer loops."""

    def __init__(self, problem: ResidualProblem, x0, config: SolverConfig):
        x0 = np.asarray(x0, dtype=np.float64)
        if not problem.is_feasible(x0):
            raise InfeasiblePointError("starting point is not feasible; project it first")
        self.problem = problem
        self.config = config
        self.start = time.perf_counter()
        self.F0 = problem.n_residual_evals
        self.J0 = problem.n_jacobian_evals
        self.trace: List[IterationRecord] = []
        self.trials = 0
        self.x = x0.copy()
        self.F = problem.residual(self.x)
        self._set_point(self.x, self.F)

    def _set_point(self, x, F):
        self.x, self.F = x, F
        self.f = 0.5 * float(F @ F)
        self.norm_F = math.sqrt(2.0 * self.f)
        if not math.isfinite(self.f):
            raise NumericalError("non-finite objective at iterate", self.trace)

    def elapsed(self) -> float:
        return time.perf_counter() - self.start

    def evaluate_derivatives(self):
        """Evaluate ``J_k`` and the gradient mapping; return the stop status."""
        cfg = self.config
        self.J = self.problem.jacobian(self.x)
        if not np.all(np.isfinite(self.J)):
            raise NumericalError("non-finite Jacobian at iterate", self.trace)
        self.grad = self.J.T @ self.F
        eta = cfg.eta_report
        self.point = self.problem.feasible_set.project(self.x - self.grad / eta)
        self.norm_G = eta * float(np.linalg.norm(self.x - self.point))
        if self.norm_F <= ZERO_RESIDUAL_TOL or self.norm_G <= cfg.tol:
            return Status.CONVERGED
        return self.budget_status()

    def budget_status(self):
        if self.trials >= self.config.max_outer:
            return Status.MAX_OUTER
        if self.elapsed() > self.config.max_seconds:
            return Status.TIMEOUT
        return None

    def record(self, k, M, lam, accepted, inner_iterations, terminal=False):
        self.trace.append(
            IterationRecord(
                k=k,
                f_value=self.f,
                norm_F=self.norm_F,
                norm_G_eta=self.norm_G,
                M_current=M,
                lambda_k=lam,
                accepted=accepted,
                inner_iterations=inner_iterations,
                cumulative_F_evals=self.problem.n_residual_evals - self.F0,
                cumulative_J_evals=self.problem.n_jacobian_evals - self.J0,
                elapsed_seconds=self.elapsed(),
                terminal=terminal,
            )
        )
        if not terminal:
            self.trials += 1

    def finish(self, status, k, M, unsuccessful, stalls=0) -> SolveReport:
        self.record(k, M, None, False, 0, terminal=True)
        cert = certify(self.problem, self.x, self.config.eta_report, grad=self.grad)
        logger.debug("finished with %s after %d iterations, |G|=%.3e", status.value, k, self.norm_G)
        return SolveReport(
            status=status,
            x_final=cert.point,
            certificate=cert,
            trace=self.trace,
            unsuccessful_count=unsuccessful,
            x_last=self.x.copy(),
            stall_count=stalls,
        )


def _solve_subproblem(model: LMModel, problem: ResidualProblem, rule: StoppingRule) -> InnerResult:
    feasible_set = problem.feasible_set
    if isinstance(rule, Exact) and isinstance(feasible_set, Unconstrained):
        y = solve_exact_unconstrained(model)
        m_y = model.value(y)
        if m_y > model.f_k:
            y, m_y = model.x_k.copy(), model.f_k
        return InnerResult(y, 1, m_y, subproblem_stationarity(model, feasible_set, y))
    return accelerated_pg(model, feasible_set, rule)


def _resolve_rule(rule: StoppingRule, rho: float, mu: float, norm_F: float) -> StoppingRule:
    if isinstance(rule, StationarityTarget):
        return replace(rule, epsilon=rho * mu * norm_F)
    return rule


def lm_solve(problem: ResidualProblem, x0, config: SolverConfig | None = None) -> SolveReport:
    """Levenberg-Marquardt with damping ``mu_k = M * ||F_k||`` chosen by majorization.

    A trial point ``y_k`` from the inner solver is accepted when
    ``f(y_k) <= m(y_k)``; the estimate ``M`` then shrinks by ``beta``.
    Otherwise ``M`` grows by ``alpha`` and the subproblem is re-solved with
    the same ``F_k`` and ``J_k``.

    Parameters
    ----------
    problem : ResidualProblem
    x0 : array_like
        Feasible starting point.
    config : SolverConfig, optional

    Returns
    -------
    SolveReport
        ``x_final`` is the projected-gradient point of the last iterate, which
        carries the ``2 * ||G_eta||`` stationarity certificate.
    """
    cfg = config or SolverConfig()
    run = _Run(problem, x0, cfg)
    M = cfg.M0
    k = 0
    unsuccessful = 0
    while True:
        status = run.evaluate_derivatives()
        if status is not None:
            return run.finish(status, k, M, unsuccessful)
        jac_norm = spectral_norm(run.J)
        while True:
            mu = M * run.norm_F
            model = LMModel(run.x, run.F, run.J, mu, jac_norm=jac_norm)
            rule = _resolve_rule(cfg.inner_rule, cfg.rho, mu, run.norm_F)
            inner = _solve_subproblem(model, problem, rule)
            F_y = problem.residual(inner.y)
            f_y = 0.5 * float(F_y @ F_y)
            if not math.isfinite(f_y):
                raise NumericalError("non-finite objective at trial point", run.trace)
            m_y = inner.model_value_at_y
            accepted = f_y <= m_y + MAJORIZATION_RTOL * (1.0 + m_y)
            run.record(k, M, mu if accepted else None, accepted, inner.inner_iterations)
            if accepted:
                run._set_point(inner.y, F_y)
                M *= cfg.beta
                k += 1
                break
            M *= cfg.alpha
            unsuccessful += 1
            status = run.budget_status()
            if status is not None:
                return run.finish(status, k, M, unsuccessful)


def pg_baseline_solve(problem: ResidualProblem, x0, config: SolverConfig | None = None) -> SolveReport:
    """Projected gradient with a backtracked curvature estimate.

    The estimate starts at ``config.M0``, grows by ``alpha`` when the
    quadratic upper-bound test fails and shrinks by ``beta`` after a success.
    """
    cfg = config or SolverConfig()
    run = _Run(problem, x0, cfg)
    project = problem.feasible_set.project
    eta = cfg.M0
    k = 0
    unsuccessful = 0
    while True:
        status = run.evaluate_derivatives()
        if status is not None:
            return run.finish(status, k, eta, unsuccessful)
        while True:
            z = project(run.x - run.grad / eta)
            step = z - run.x
            F_z = problem.residual(z)
            f_z = 0.5 * float(F_z @ F_z)
            if not math.isfinite(f_z):
                raise NumericalError("non-finite objective at trial point", run.trace)
            bound = run.f + float(run.grad @ step) + 0.5 * eta * float(step @ step)
            accepted = f_z <= bound + MAJORIZATION_RTOL * (1.0 + abs(bound))
            run.record(k, eta, None, accepted, 0)
            if accepted:
                run._set_point(z, F_z)
                eta *= cfg.beta
                k += 1
                break
            eta *= cfg.alpha
            unsuccessful += 1
            status = run.budget_status()
            if status is not None:
                return run.finish(status, k, eta, unsuccessful)


def hybrid_lm_solve(
    problem: ResidualProblem,
    x0,
    config: SolverConfig | None = None,
    delta: float = 1.0,
    mu: float = 1.0,
    gamma_accept: float = 0.99995,
    sigma_armijo: float = 1e-4,
    beta_ls: float = 0.9,
    min_step: float = 2.0**-60,
) -> SolveReport:
    """Constrained LM safeguarded by a projected-gradient Armijo search.

    The damping is ``mu * ||F_k||**delta`` (``delta=1``: Fan, ``delta=2``:
    Kanzow-Yamashita-Fukushima).  The LM point is taken when it cuts the
    residual norm by the factor ``gamma_accept``; otherwise a projected
    gradient step with step size ``beta_ls**l`` is taken, ``l`` being the
    smallest integer giving sufficient decrease.

    Step sizes below ``min_step`` (the equivalent of 60 halvings) are not
    tried.  If none passes the Armijo test, the smallest tried step is used
    when it still lowers ``f`` (counted in ``stall_count``); if not, the run
    stops as ``MAX_OUTER``.
    """
    if not 0 < delta <= 2:
        raise ValueError("delta must lie in (0, 2]")
    if not (mu > 0 and 0 < gamma_accept < 1 and 0 < sigma_armijo < 1 and 0 < beta_ls < 1 and 0 < min_step <= 1):
        raise ValueError("invalid hybrid LM parameters")
    cfg = config or SolverConfig()
    run = _Run(problem, x0, cfg)
    project = problem.feasible_set.project
    k = 0
    rejected = 0
    stalls = 0
    while True:
        status = run.evaluate_derivatives()
        if status is not None:
            return run.finish(status, k, mu, rejected, stalls)
        lam = mu * run.norm_F**delta
        model = LMModel(run.x, run.F, run.J, lam)
        rule = _resolve_rule(cfg.inner_rule, cfg.rho, lam, run.norm_F)
        inner = _solve_subproblem(model, problem, rule)
        F_y = problem.residual(inner.y)
        norm_F_y = float(np.linalg.norm(F_y))
        if not math.isfinite(norm_F_y):
            raise NumericalError("non-finite objective at trial point", run.trace)
        if norm_F_y <= gamma_accept * run.norm_F:
            run.record(k, mu, lam, True, inner.inner_iterations)
            run._set_point(inner.y, F_y)
            k += 1
            continue
        run.record(k, mu, None, False, inner.inner_iterations)
        rejected += 1

        t = 1.0
        z = F_z = None
        found = False
        while t >= min_step:
            z = project(run.x - t * run.grad)
            F_z = problem.residual(z)
            f_z = 0.5 * float(F_z @ F_z)
            if math.isfinite(f_z) and f_z <= run.f + sigma_armijo * float(run.grad @ (z - run.x)):
                found = True
                break
            t *= beta_ls
        if not found:
            stalls += 1
            if not (math.isfinite(f_z) and f_z < run.f):
                logger.debug("Armijo search stalled at k=%d without decrease", k)
                return run.finish(Status.MAX_OUTER, k, mu, rejected, stalls)
        run.record(k, mu, None, True, 0)
        run._set_point(z, F_z)
        k += 1
