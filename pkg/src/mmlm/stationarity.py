"""Projected-gradient step, gradient mapping and stationarity certificates.

All functions accept an optional precomputed gradient ``grad`` so that callers
which already hold ``J(x).T @ F(x)`` do not pay for another evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePointError
from .problem import ResidualProblem

__all__ = [
    "StationarityReport",
    "prox_step",
    "gradient_mapping",
    "decrease_measure",
    "certify",
]


@dataclass(frozen=True)
class StationarityReport:
    """``point`` is ``certified_epsilon``-stationary, given ``eta >= L_f``."""

    point: np.ndarray
    certified_epsilon: float
    eta: float


def _prepare(problem: ResidualProblem, x, eta: float, grad):
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    x = np.asarray(x, dtype=np.float64)
    if not problem.is_feasible(x):
        raise InfeasiblePointError("x is not feasible")
    if grad is None:
        grad = problem.gradient(x)
    return x, np.asarray(grad, dtype=np.float64)


def prox_step(problem: ResidualProblem, x, eta: float, grad=None) -> np.ndarray:
    """Return ``proj_C(x - grad f(x) / eta)``."""
    x, grad = _prepare(problem, x, eta, grad)
    return problem.feasible_set.project(x - grad / eta)


def gradient_mapping(problem: ResidualProblem, x, eta: float, grad=None) -> np.ndarray:
    x, grad = _prepare(problem, x, eta, grad)
    return eta * (x - problem.feasible_set.project(x - grad / eta))


def decrease_measure(problem: ResidualProblem, x, eta: float, grad=None) -> float:
    """Optimal decrease of the linearized proximal step problem at ``x``.

    The inner minimizer is the projected-gradient point, so no QP is solved.
    """
    x, grad = _prepare(problem, x, eta, grad)
    step = problem.feasible_set.project(x - grad / eta) - x
    value = -(float(grad @ step) + 0.5 * eta * float(step @ step))
    # rounding can push an exact zero slightly negative
    return max(value, 0.0)


def certify(problem: ResidualProblem, x, eta: float, grad=None) -> StationarityReport:
    """Certify ``P_eta(x)`` as ``2 * ||G_eta(x)||``-stationary.

    The certificate is only valid when ``eta`` dominates the gradient
    Lipschitz constant on the sublevel set; this is not checked.
    """
    x, grad = _prepare(problem, x, eta, grad)
    point = problem.feasible_set.project(x - grad / eta)
    g_map = eta * (x - point)
    return StationarityReport(point=point, certified_epsilon=2.0 * float(np.linalg.norm(g_map)), eta=float(eta))
