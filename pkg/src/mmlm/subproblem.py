"""Inexact solvers for the convexly constrained LM subproblem.

Both solvers use the fixed step ``1 / (||J_k||**2 + lam)``.  The accelerated
solver works on the step ``u = x - x_k`` and restarts its momentum whenever
the model value goes up, so its iterates are monotone.  Its first iterate is
the plain projected-gradient step from ``x_k``; hence every result decreases
the model at least as much as one projected-gradient step does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import NumericalError
from .model import LMModel
from .problem import ConvexSet

__all__ = [
    "FixedIterations",
    "StationarityTarget",
    "Exact",
    "StoppingRule",
    "InnerResult",
    "pg_single_step",
    "accelerated_pg",
    "subproblem_stationarity",
]


@dataclass(frozen=True)
class FixedIterations:
    iterations: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("FixedIterations needs at least one iteration")


@dataclass(frozen=True)
class StationarityTarget:
    """Stop once the iterate is ``epsilon``-stationary for the subproblem.

    ``max_iter`` defaults to ``10 * d`` when left as ``None``.
    """

    epsilon: float = 0.0
    max_iter: Optional[int] = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass(frozen=True)
class Exact:
    """Solve to relative stationarity ``tol * (1 + ||grad m(x_k)||)``."""

    tol: float = 1e-12
    max_iter: int = 200_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")


StoppingRule = Union[FixedIterations, StationarityTarget, Exact]


@dataclass(frozen=True)
class InnerResult:
    y: np.ndarray
    inner_iterations: int
    model_value_at_y: float
    certified_stationarity: Optional[float]


def subproblem_stationarity(model: LMModel, feasible_set: ConvexSet, y) -> float:
    """Exact normal-cone stationarity residual of ``y`` for the subproblem."""
    return feasible_set.normal_cone_distance(y, model.gradient(y))


def pg_single_step(model: LMModel, feasible_set: ConvexSet) -> InnerResult:
    eta = model.lipschitz
    y = feasible_set.project(model.x_k - model.grad_k / eta)
    m_y = model.value(y)
    if m_y > model.f_k:
        # only reachable through rounding when y is (numerically) x_k
        y, m_y = model.x_k.copy(), model.f_k
    return InnerResult(y=y, inner_iterations=1, model_value_at_y=m_y, certified_stationarity=None)


def accelerated_pg(model: LMModel, feasible_set: ConvexSet, rule: StoppingRule) -> InnerResult:
    """Accelerated projected gradient on the model with function-value restart.

    The iteration budget and stopping test come from ``rule``:

    * ``FixedIterations(T)``: exactly ``T`` iterations.
    * ``StationarityTarget(eps)``: until the iterate is ``eps``-stationary,
      at most ``max_iter`` (default ``10 * d``) iterations.  If the cap is
      hit the returned certificate is ``None``.
    * ``Exact(tol)``: until stationarity drops below ``tol * (1 + ||grad m(x_k)||)``.
    """
    eta = model.lipschitz
    # Iterate on the step u = x - x_k over the translated set.  Near a solution
    # the step is far smaller than the spacing of floats around x_k, so
    # working in x directly would quantize it; here x_k + u is rounded once.
    steps = feasible_set.shifted(model.x_k)
    project = steps.project

    if isinstance(rule, FixedIterations):
        max_iter, target = rule.iterations, None
    elif isinstance(rule, StationarityTarget):
        max_iter = rule.max_iter if rule.max_iter is not None else 10 * model.dim
        target = rule.epsilon
    elif isinstance(rule, Exact):
        max_iter = rule.max_iter
        target = rule.tol * (1.0 + float(np.linalg.norm(model.grad_k)))
    else:
        raise TypeError(f"unsupported stopping rule {rule!r}")
    max_iter = max(int(max_iter), 1)

    u = np.zeros(model.dim)
    m_u, grad_u = model.f_k, model.grad_k
    v, t = u, 1.0
    grad_v = grad_u
    iterations = 0
    stationarity = None
    while iterations < max_iter:
        u_new = project(v - grad_v / eta)
        m_new, grad_new = model.step_value_and_gradient(u_new)
        iterations += 1
        if not math.isfinite(m_new):
            raise NumericalError("non-finite model value in inner solver")
        if t == 1.0 and np.array_equal(u_new, u):
            # the plain step no longer moves: u is numerically optimal
            if target is not None:
                stationarity = steps.normal_cone_distance(u, grad_u)
            break
        if m_new > m_u and t != 1.0:
            # function-value restart: drop the step and the momentum.  A plain
            # step (t == 1) cannot increase the model beyond rounding, so it
            # is always taken; this keeps progress when values stagnate.
            v, t, grad_v = u, 1.0, grad_u
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        v = u_new + ((t - 1.0) / t_next) * (u_new - u)
        u, m_u, grad_u, t = u_new, m_new, grad_new, t_next
        if target is not None:
            stationarity = steps.normal_cone_distance(u, grad_u)
            if stationarity <= target:
                break
        grad_v = model.step_value_and_gradient(v)[1]
    else:
        if target is not None:
            stationarity = None

    if target is None:
        stationarity = steps.normal_cone_distance(u, grad_u)
    # restarts keep iterates monotone up to rounding; the final safeguard
    # below guarantees the result never exceeds m(x_k)
    y = feasible_set.project(model.x_k + u)
    m_y = model.value(y)
    if m_y > model.f_k:
        y, m_y = model.x_k.copy(), model.f_k
    return InnerResult(y=y, inner_iterations=iterations, model_value_at_y=m_y, certified_stationarity=stationarity)
