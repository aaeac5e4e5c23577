"""The damped Gauss-Newton model and its majorization test."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg

from .errors import DimensionError, NumericalError
from .problem import ResidualProblem

__all__ = [
    "LMModel",
    "spectral_norm",
    "solve_exact_unconstrained",
    "majorization_holds",
    "majorization_test",
    "MAJORIZATION_RTOL",
]

MAJORIZATION_RTOL = 1e-12


def spectral_norm(J, max_iter: int = 500, tol: float = 1e-12) -> float:
    """Largest singular value of ``J`` by power iteration on ``J.T @ J``.

    Stops once the Rayleigh quotient changes by less than ``tol`` relative.
    The start vector is drawn from a fixed seed so results are reproducible.
    """
    J = np.asarray(J, dtype=np.float64)
    if J.ndim != 2:
        raise DimensionError("spectral_norm expects a 2-D array")
    if J.size == 0:
        return 0.0
    v = np.random.default_rng(0x5EED).standard_normal(J.shape[1])
    v /= np.linalg.norm(v)
    rayleigh = 0.0
    for _ in range(max_iter):
        w = J.T @ (J @ v)
        new_rayleigh = float(v @ w)
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        if abs(new_rayleigh - rayleigh) <= tol * new_rayleigh:
            rayleigh = new_rayleigh
            break
        rayleigh = new_rayleigh
    # one more product: ||J v|| for the final unit vector is the sharper estimate
    return float(max(np.sqrt(rayleigh), np.linalg.norm(J @ v)))


@dataclass(frozen=True)
class LMModel:
    """``m(x) = 0.5 * ||F_k + J_k (x - x_k)||**2 + 0.5 * lam * ||x - x_k||**2``.

    Build it with :meth:`from_problem` to evaluate ``F_k`` and ``J_k`` at the
    linearization point, or directly from arrays already in hand.
    ``jac_norm`` may carry a precomputed ``||J_k||``; otherwise it is computed
    on first use.
    """

    x_k: np.ndarray
    F_k: np.ndarray
    J_k: np.ndarray
    lam: float
    jac_norm: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        x_k = np.asarray(self.x_k, dtype=np.float64)
        F_k = np.asarray(self.F_k, dtype=np.float64)
        J_k = np.asarray(self.J_k, dtype=np.float64)
        if J_k.shape != (F_k.shape[0], x_k.shape[0]):
            raise DimensionError(f"J_k has shape {J_k.shape}, expected {(F_k.shape[0], x_k.shape[0])}")
        if not self.lam > 0:
            raise ValueError(f"damping parameter must be positive, got {self.lam}")
        if not (np.all(np.isfinite(F_k)) and np.all(np.isfinite(J_k)) and np.isfinite(self.lam)):
            raise NumericalError("non-finite data in LM model")
        object.__setattr__(self, "x_k", x_k)
        object.__setattr__(self, "F_k", F_k)
        object.__setattr__(self, "J_k", J_k)
        object.__setattr__(self, "lam", float(self.lam))

    @classmethod
    def from_problem(cls, problem: ResidualProblem, x_k, lam: float) -> "LMModel":
        return cls(x_k, problem.residual(x_k), problem.jacobian(x_k), lam)

    def with_damping(self, lam: float) -> "LMModel":
        """Same linearization, different damping; reuses ``||J_k||``."""
        return LMModel(self.x_k, self.F_k, self.J_k, lam, jac_norm=self.jacobian_norm)

    @property
    def dim(self) -> int:
        return self.x_k.shape[0]

    @cached_property
    def jacobian_norm(self) -> float:
        return self.jac_norm if self.jac_norm is not None else spectral_norm(self.J_k)

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant ``||J_k||**2 + lam`` of the model gradient."""
        return self.jacobian_norm**2 + self.lam

    @cached_property
    def f_k(self) -> float:
        return 0.5 * float(self.F_k @ self.F_k)

    @cached_property
    def grad_k(self) -> np.ndarray:
        return self.J_k.T @ self.F_k

    def _step(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.x_k.shape:
            raise DimensionError(f"x has shape {x.shape}, expected {self.x_k.shape}")
        return x - self.x_k

    def value(self, x) -> float:
        return self.step_value(self._step(x))

    def gradient(self, x) -> np.ndarray:
        return self.step_value_and_gradient(self._step(x))[1]

    def value_and_gradient(self, x) -> tuple[float, np.ndarray]:
        return self.step_value_and_gradient(self._step(x))

    # The step-coordinate versions take u = x - x_k directly.  Near a
    # solution u is far below the resolution of x, so inner solvers work here.

    def step_value(self, u) -> float:
        r = self.F_k + self.J_k @ u
        return 0.5 * float(r @ r) + 0.5 * self.lam * float(u @ u)

    def step_value_and_gradient(self, u) -> tuple[float, np.ndarray]:
        r = self.F_k + self.J_k @ u
        return 0.5 * float(r @ r) + 0.5 * self.lam * float(u @ u), self.J_k.T @ r + self.lam * u


def solve_exact_unconstrained(model: LMModel) -> np.ndarray:
    """Minimizer of the model over all of R^d via a Cholesky solve."""
    H = model.J_k.T @ model.J_k
    H[np.diag_indices_from(H)] += model.lam
    try:
        factor = linalg.cho_factor(H, lower=True, check_finite=True)
        u = linalg.cho_solve(factor, -model.grad_k)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"normal equations could not be factorized: {exc}") from exc
    return model.x_k + u


def majorization_test(problem: ResidualProblem, model: LMModel, y) -> tuple[bool, np.ndarray]:
    """Check ``f(y) <= m(y)`` (with relative slack) and return ``F(y)``.

    Exactly one residual evaluation is spent; the caller can reuse ``F(y)``.
    """
    F_y = problem.residual(y)
    f_y = 0.5 * float(F_y @ F_y)
    m_y = model.value(y)
    if not np.isfinite(f_y):
        raise NumericalError("non-finite objective at trial point")
    return f_y <= m_y + MAJORIZATION_RTOL * (1.0 + m_y), F_y


def majorization_holds(problem: ResidualProblem, model: LMModel, y) -> bool:
    return majorization_test(problem, model, y)[0]
