"""Constrained nonlinear least-squares problems and their feasible sets."""

from __future__ import annotations

import threading
from typing import Callable

import numpy as np

from .errors import DimensionError, InfeasiblePointError

__all__ = [
    "ConvexSet",
    "Unconstrained",
    "Box",
    "Ball",
    "NonnegativeOrthant",
    "ResidualProblem",
]

FEASIBILITY_TOL = 1e-10
ACTIVE_TOL = 1e-12


def _as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError(f"{name} must be a 1-D array, got shape {x.shape}")
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"{name} has length {x.shape[0]}, expected {dim}")
    return x


class ConvexSet:
    """Closed convex set with an exact Euclidean projection.

    Subclasses also provide the exact distance from ``-g`` to the normal cone,
    which is the stationarity residual used throughout the solvers.
    """

    dim: int | None = None

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = self._check(x)
        return bool(np.linalg.norm(x - self.project(x)) <= tol * (1.0 + np.linalg.norm(x)))

    def normal_cone_distance(self, x, g) -> float:
        """Return ``min ||g + v||`` over ``v`` in the normal cone at ``x``."""
        x = self._check(x)
        g = _as_vector(g, x.shape[0], "g")
        if not self.contains(x):
            raise InfeasiblePointError("normal_cone_distance needs a feasible point")
        return float(self._cone_distance(x, g))

    def _cone_distance(self, x: np.ndarray, g: np.ndarray) -> float:
        raise NotImplementedError

    def shifted(self, x) -> "ConvexSet":
        """The translated set ``{u : x + u in C}``.

        Subclasses override this with an exact closed form; the generic
        fallback goes through :meth:`project` and rounds at the scale of ``x``.
        """
        return _Translated(self, self._check(x))

    def _check(self, x) -> np.ndarray:
        return _as_vector(x, self.dim)


class _Translated(ConvexSet):
    def __init__(self, base: ConvexSet, offset: np.ndarray):
        self.base = base
        self.offset = offset
        self.dim = offset.shape[0]

    def project(self, u) -> np.ndarray:
        u = self._check(u)
        return self.base.project(self.offset + u) - self.offset

    def _cone_distance(self, u, g):
        return self.base._cone_distance(self.offset + u, g)


class Unconstrained(ConvexSet):
    def project(self, x) -> np.ndarray:
        return self._check(x).copy()

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        self._check(x)
        return True

    def _cone_distance(self, x, g):
        return np.linalg.norm(g)

    def shifted(self, x) -> "ConvexSet":
        return self

    def __repr__(self):
        return "Unconstrained()"


class NonnegativeOrthant(ConvexSet):
    def project(self, x) -> np.ndarray:
        return np.maximum(self._check(x), 0.0)

    def _cone_distance(self, x, g):
        active = x <= ACTIVE_TOL
        r = np.where(active & (g > 0), 0.0, g)
        return np.linalg.norm(r)

    def shifted(self, x) -> "ConvexSet":
        x = self._check(x)
        return Box(-x, np.full_like(x, np.inf))

    def __repr__(self):
        return "NonnegativeOrthant()"


class Box(ConvexSet):
    """Axis-aligned box ``lower <= x <= upper``; bounds may be infinite."""

    def __init__(self, lower, upper):
        lower = _as_vector(lower, name="lower")
        upper = _as_vector(upper, lower.shape[0], "upper")
        if np.any(lower > upper):
            raise ValueError("Box requires lower <= upper componentwise")
        self.lower = lower
        self.upper = upper
        self.dim = lower.shape[0]

    @classmethod
    def symmetric(cls, dim: int, radius: float = 1.0) -> "Box":
        """The cube ``[-radius, radius]^dim``."""
        return cls(np.full(dim, -radius), np.full(dim, radius))

    def project(self, x) -> np.ndarray:
        return np.clip(self._check(x), self.lower, self.upper)

    def _cone_distance(self, x, g):
        with np.errstate(invalid="ignore"):
            at_upper = np.isfinite(self.upper) & (np.abs(x - self.upper) <= ACTIVE_TOL * (1.0 + np.abs(self.upper)))
            at_lower = np.isfinite(self.lower) & (np.abs(x - self.lower) <= ACTIVE_TOL * (1.0 + np.abs(self.lower)))
        cancel = (at_upper & (g < 0)) | (at_lower & (g > 0))
        return np.linalg.norm(np.where(cancel, 0.0, g))

    def shifted(self, x) -> "ConvexSet":
        x = self._check(x)
        return Box(self.lower - x, self.upper - x)

    def __repr__(self):
        return f"Box(dim={self.dim})"


class Ball(ConvexSet):
    """Euclidean ball ``||x - center|| <= radius``."""

    def __init__(self, center, radius: float):
        self.center = _as_vector(center, name="center")
        if not radius > 0:
            raise ValueError("Ball radius must be positive")
        self.radius = float(radius)
        self.dim = self.center.shape[0]

    def project(self, x) -> np.ndarray:
        x = self._check(x)
        offset = x - self.center
        dist = np.linalg.norm(offset)
        if dist <= self.radius:
            return x.copy()
        return self.center + offset * (self.radius / dist)

    def _cone_distance(self, x, g):
        offset = x - self.center
        dist = np.linalg.norm(offset)
        if dist < self.radius * (1.0 - ACTIVE_TOL) or dist == 0.0:
            return np.linalg.norm(g)
        normal = offset / dist
        radial = float(g @ normal)
        return np.linalg.norm(g + max(0.0, -radial) * normal)

    def shifted(self, x) -> "ConvexSet":
        return Ball(self.center - self._check(x), self.radius)

    def __repr__(self):
        return f"Ball(dim={self.dim}, radius={self.radius})"


class ResidualProblem:
    """Minimize ``0.5 * ||F(x)||**2`` over a convex set.

    Parameters
    ----------
    residual_fn : callable
        Maps a length-``dim_d`` array to the length-``dim_n`` residual ``F(x)``.
    jacobian_fn : callable
        Maps a length-``dim_d`` array to the ``(dim_n, dim_d)`` Jacobian ``J(x)``.
    dim_d, dim_n : int
        Number of variables and residuals.
    feasible_set : ConvexSet, optional
        Defaults to :class:`Unconstrained`.

    Every call to :meth:`residual` or :meth:`jacobian` bumps the matching
    counter; the solvers report these counts as their cost metric.
    """

    def __init__(
        self,
        residual_fn: Callable[[np.ndarray], np.ndarray],
        jacobian_fn: Callable[[np.ndarray], np.ndarray],
        dim_d: int,
        dim_n: int,
        feasible_set: ConvexSet | None = None,
    ):
        if dim_d < 1 or dim_n < 1:
            raise ValueError("dimensions must be positive")
        self.residual_fn = residual_fn
        self.jacobian_fn = jacobian_fn
        self.dim_d = int(dim_d)
        self.dim_n = int(dim_n)
        self.feasible_set = feasible_set if feasible_set is not None else Unconstrained()
        if self.feasible_set.dim is not None and self.feasible_set.dim != self.dim_d:
            raise DimensionError("feasible set dimension does not match dim_d")
        self._lock = threading.Lock()
        self._n_residual = 0
        self._n_jacobian = 0

    @property
    def n_residual_evals(self) -> int:
        return self._n_residual

    @property
    def n_jacobian_evals(self) -> int:
        return self._n_jacobian

    def reset_counters(self) -> None:
        with self._lock:
            self._n_residual = 0
            self._n_jacobian = 0

    def residual(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim_d)
        F = np.asarray(self.residual_fn(x), dtype=np.float64)
        with self._lock:
            self._n_residual += 1
        if F.shape != (self.dim_n,):
            raise DimensionError(f"residual_fn returned shape {F.shape}, expected ({self.dim_n},)")
        return F

    def jacobian(self, x) -> np.ndarray:
        x = _as_vector(x, self.dim_d)
        J = np.asarray(self.jacobian_fn(x), dtype=np.float64)
        with self._lock:
            self._n_jacobian += 1
        if J.shape != (self.dim_n, self.dim_d):
            raise DimensionError(
                f"jacobian_fn returned shape {J.shape}, expected ({self.dim_n}, {self.dim_d})"
            )
        return J

    def objective(self, x) -> float:
        F = self.residual(x)
        return 0.5 * float(F @ F)

    def gradient(self, x) -> np.ndarray:
        return self.jacobian(x).T @ self.residual(x)

    def project(self, x) -> np.ndarray:
        return self.feasible_set.project(_as_vector(x, self.dim_d))

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        return self.feasible_set.contains(_as_vector(x, self.dim_d), tol)
