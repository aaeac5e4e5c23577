import numpy as np
import pytest

from mmlm import Box, ResidualProblem, Unconstrained
from mmlm.bench import InstanceSpec, generate_instance


def affine_problem(A, b, feasible_set=None):
    """F(x) = A x + b."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return ResidualProblem(lambda x: A @ x + b, lambda x: A, A.shape[1], A.shape[0], feasible_set)


def half_square_problem(feasible_set=None):
    """1-D F(x) = x, so f(x) = x**2 / 2."""
    return affine_problem([[1.0]], [0.0], feasible_set)


def central_difference(fun, x, h):
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.atleast_1d(fun(x + e)) - np.atleast_1d(fun(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_instance():
    return generate_instance(InstanceSpec(d=8, n=12, m=3, sigma_noise=0.1, seed=3))


@pytest.fixture
def unit_box_1d():
    return Box([-1.0], [1.0])


@pytest.fixture
def free():
    return Unconstrained()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
