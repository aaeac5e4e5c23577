"""Seeded random quadratic residual family on the cube ``[-1, 1]^d``.

Residual ``i`` is ``q_i(x) - q_i(x_star) - gamma_i`` with
``q_i(x) = ||A_i x||**2 / (2m) + <b_i, x>``.

Random draws use ``numpy.random.Generator(PCG64(seed))`` in a fixed order:
``A`` (shape ``(n, m, d)``, C order), ``b`` (shape ``(n, d)``), the standard
normals scaled into ``gamma``, the selector and uniform arrays for
``x_star``, and finally the start-point perturbation ``u`` (only drawn for the
near-solution start).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from ..problem import Box, ResidualProblem

__all__ = ["InstanceSpec", "Instance", "generate_instance", "load_spec", "save_spec"]

X0_MODES = ("zero", "near_solution")


@dataclass(frozen=True)
class InstanceSpec:
    d: int
    n: int
    m: int
    sigma_noise: float = 0.1
    seed: int = 0
    x0_mode: str = "zero"
    x0_radius: float = 0.1

    def __post_init__(self):
        if min(self.d, self.n, self.m) < 1:
            raise ValueError("d, n and m must be positive")
        if self.sigma_noise < 0:
            raise ValueError("sigma_noise must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.x0_mode not in X0_MODES:
            raise ValueError(f"x0_mode must be one of {X0_MODES}")
        if self.x0_radius < 0:
            raise ValueError("x0_radius must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceSpec":
        data = dict(data)
        mode = data.get("x0_mode", "zero")
        # accept {"near_solution": r} as a compact form
        if isinstance(mode, dict):
            (name, radius), = mode.items()
            data["x0_mode"], data["x0_radius"] = name, float(radius)
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)

    @property
    def shape_key(self) -> tuple:
        return (self.d, self.n, self.m)


def save_spec(spec: InstanceSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def load_spec(path) -> InstanceSpec:
    return InstanceSpec.from_dict(json.loads(Path(path).read_text()))


class Instance:
    """Realized data for an :class:`InstanceSpec` plus its residual problem."""

    def __init__(self, spec, A, b, gamma, x_star, x0):
        self.spec = spec
        self.A = A
        self.b = b
        self.gamma = gamma
        self.x_star = x_star
        self.x0 = x0
        self._A_flat = A.reshape(spec.n * spec.m, spec.d)
        self._Ax_star = self._Ax(x_star)
        self.problem = ResidualProblem(
            self.residual, self.jacobian, spec.d, spec.n, Box.symmetric(spec.d)
        )

    def _Ax(self, x):
        return (self._A_flat @ x).reshape(self.spec.n, self.spec.m)

    def residual(self, x) -> np.ndarray:
        """Evaluated in the factored form
        ``<A_i (x - x*), A_i (x + x*)> / (2m) + <b_i, x - x*> - gamma_i``,
        which avoids cancelling two large quadratics near ``x_star``.
        ``A_i (x + x*)`` is formed as ``A_i (x - x*) + 2 A_i x*``, so each
        evaluation makes a single pass over ``A``.
        """
        x = np.asarray(x, dtype=np.float64)
        diff = x - self.x_star
        A_diff = self._Ax(diff)
        quad = np.einsum("ij,ij->i", A_diff, A_diff + 2.0 * self._Ax_star) / (2.0 * self.spec.m)
        return quad + self.b @ diff - self.gamma

    def jacobian(self, x) -> np.ndarray:
        """Rows ``(A_i^T A_i x) / m + b_i`` from two batched products, O(mnd)."""
        Ax = self._Ax(np.asarray(x, dtype=np.float64))
        return np.einsum("imd,im->id", self.A, Ax) / self.spec.m + self.b

    @cached_property
    def lipschitz_bound(self) -> float:
        """Certified Lipschitz constant of ``J`` on all of R^d.

        ``J(y) - J(x)`` has rows ``(y - x)^T A_i^T A_i / m``, so its spectral
        norm is at most ``sqrt(sum_i ||A_i||_2**4) / m * ||y - x||``.
        """
        sq = np.array([np.linalg.norm(Ai, 2) ** 2 for Ai in self.A])
        return float(np.sqrt(np.sum(sq**2)) / self.spec.m)


def generate_instance(spec: InstanceSpec) -> Instance:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    d, n, m = spec.d, spec.n, spec.m
    A = rng.standard_normal((n, m, d))
    b = rng.standard_normal((n, d))
    gamma = spec.sigma_noise * rng.standard_normal(n)
    if spec.sigma_noise == 0:
        gamma = np.zeros(n)
    selector = rng.random(d)
    uniform = rng.uniform(-1.0, 1.0, d)
    x_star = np.where(selector < 0.25, 1.0, np.where(selector < 0.5, -1.0, uniform))
    if spec.x0_mode == "zero":
        x0 = np.zeros(d)
    else:
        u = rng.uniform(-spec.x0_radius, spec.x0_radius, d)
        x0 = np.clip(x_star + u, -1.0, 1.0)
    return Instance(spec, A, b, gamma, x_star, x0)
