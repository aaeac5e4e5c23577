import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mmlm import Ball, Box, DimensionError, InfeasiblePointError, NonnegativeOrthant, ResidualProblem, Unconstrained
from mmlm.bench import InstanceSpec, generate_instance

from conftest import affine_problem, central_difference

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vec3 = arrays(np.float64, 3, elements=finite)

SETS = [
    Unconstrained(),
    NonnegativeOrthant(),
    Box([-1.0, 0.0, -2.0], [1.0, 0.5, 3.0]),
    Ball([0.5, -0.5, 1.0], 2.0),
]


class TestProjection:
    def test_box(self):
        np.testing.assert_array_equal(Box.symmetric(2).project([2.0, -0.5]), [1.0, -0.5])

    def test_unconstrained_is_identity(self):
        x = np.array([3.0, -7.0, 1e9])
        np.testing.assert_array_equal(Unconstrained().project(x), x)

    def test_ball(self):
        np.testing.assert_allclose(Ball([0.0, 0.0], 1.0).project([3.0, 4.0]), [0.6, 0.8], rtol=1e-15)

    def test_orthant(self):
        np.testing.assert_array_equal(NonnegativeOrthant().project([-1.0, 2.0]), [0.0, 2.0])

    def test_box_rejects_crossed_bounds(self):
        with pytest.raises(ValueError):
            Box([1.0], [0.0])

    def test_ball_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            Ball([0.0], 0.0)

    @pytest.mark.parametrize("C", SETS, ids=repr)
    @given(x=vec3)
    def test_idempotent(self, C, x):
        p = C.project(x)
        np.testing.assert_allclose(C.project(p), p, atol=1e-12 * (1 + np.linalg.norm(p)))
        assert C.contains(p)

    @pytest.mark.parametrize("C", SETS, ids=repr)
    @given(x=vec3, y=vec3)
    def test_nonexpansive(self, C, x, y):
        d = np.linalg.norm(C.project(x) - C.project(y))
        assert d <= np.linalg.norm(x - y) * (1 + 1e-12) + 1e-12

    @pytest.mark.parametrize("C", SETS, ids=repr)
    @given(x=vec3, z=vec3)
    def test_variational_inequality(self, C, x, z):
        # <x - P(x), c - P(x)> <= 0 for every c in C
        p = C.project(x)
        c = C.project(z)
        scale = (1 + np.linalg.norm(x)) * (1 + np.linalg.norm(z))
        assert float((x - p) @ (c - p)) <= 1e-9 * scale


class TestNormalConeDistance:
    def test_interior(self):
        assert Box.symmetric(1).normal_cone_distance([0.0], [-2.0]) == 2.0

    def test_upper_bound_cancels_descent_outward(self):
        assert Box.symmetric(1).normal_cone_distance([1.0], [-2.0]) == 0.0

    def test_upper_bound_keeps_inward_gradient(self):
        assert Box.symmetric(1).normal_cone_distance([1.0], [2.0]) == 2.0

    def test_ball_boundary(self):
        C = Ball([0.0, 0.0], 1.0)
        # g = -(2, 1) at (1, 0): the radial part is cancelled, the tangential stays
        assert C.normal_cone_distance([1.0, 0.0], [-2.0, -1.0]) == pytest.approx(1.0)
        assert C.normal_cone_distance([1.0, 0.0], [2.0, 0.0]) == pytest.approx(2.0)

    def test_infeasible_point_raises(self):
        with pytest.raises(InfeasiblePointError):
            Box.symmetric(1).normal_cone_distance([2.0], [1.0])

    @pytest.mark.parametrize("C", SETS, ids=repr)
    @given(x=vec3, g=vec3)
    def test_bounded_by_gradient_norm(self, C, x, g):
        p = C.project(x)
        assert C.normal_cone_distance(p, g) <= np.linalg.norm(g) * (1 + 1e-12)

    @pytest.mark.parametrize("C", SETS, ids=repr)
    @given(x=vec3, g=vec3)
    def test_matches_shifted_set(self, C, x, g):
        # the translated set describes the same geometry in step coordinates
        p = C.project(x)
        S = C.shifted(p)
        assert S.contains(np.zeros(3))
        assert S.normal_cone_distance(np.zeros(3), g) == pytest.approx(C.normal_cone_distance(p, g), abs=1e-9 * (1 + np.linalg.norm(g)))


class TestResidualProblem:
    def test_identity_residual(self):
        P = affine_problem([[1.0]], [0.0])
        np.testing.assert_array_equal(P.residual([3.0]), [3.0])
        assert P.objective([1.0]) == 0.5
        np.testing.assert_array_equal(P.gradient([3.0]), [3.0])

    def test_zero_residual(self):
        P = affine_problem([[1.0, 2.0]], [-3.0])
        assert P.objective([1.0, 1.0]) == 0.0
        np.testing.assert_array_equal(P.gradient([1.0, 1.0]), [0.0, 0.0])

    def test_counters(self):
        P = affine_problem(np.eye(2), np.zeros(2))
        P.residual([1.0, 1.0])
        P.gradient([1.0, 1.0])
        assert (P.n_residual_evals, P.n_jacobian_evals) == (2, 1)
        P.reset_counters()
        assert (P.n_residual_evals, P.n_jacobian_evals) == (0, 0)

    def test_counters_are_thread_safe(self):
        P = affine_problem(np.eye(2), np.zeros(2))
        threads = [threading.Thread(target=lambda: [P.residual(np.ones(2)) for _ in range(500)]) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert P.n_residual_evals == 4000

    def test_wrong_input_length(self):
        with pytest.raises(DimensionError):
            affine_problem(np.eye(2), np.zeros(2)).residual([1.0])

    def test_wrong_residual_shape(self):
        P = ResidualProblem(lambda x: np.zeros(3), lambda x: np.zeros((2, 2)), 2, 2)
        with pytest.raises(DimensionError):
            P.residual(np.zeros(2))

    def test_wrong_jacobian_shape(self):
        P = ResidualProblem(lambda x: x, lambda x: np.eye(3), 2, 2)
        with pytest.raises(DimensionError):
            P.jacobian(np.zeros(2))

    def test_set_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            affine_problem(np.eye(2), np.zeros(2), Box.symmetric(3))

    def test_feasibility(self):
        P = affine_problem(np.eye(2), np.zeros(2), Box.symmetric(2))
        assert P.is_feasible([1.0, -1.0])
        assert not P.is_feasible([1.1, 0.0])


class TestInstanceObjective:
    def test_objective_matches_independent_summation(self, rng):
        inst = generate_instance(InstanceSpec(d=15, n=30, m=4, seed=11))
        x = rng.uniform(-1, 1, 15)
        F = inst.problem.residual(x)
        total = 0.0
        for value in F.tolist():
            total += value * value
        assert inst.problem.objective(x) == pytest.approx(0.5 * total, rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        inst = generate_instance(InstanceSpec(d=10, n=20, m=3, seed=seed))
        x = np.random.default_rng(seed).uniform(-1, 1, 10)
        h = 1e-6 * (1 + np.linalg.norm(x))
        fd = central_difference(inst.problem.objective, x, h).ravel()
        g = inst.problem.gradient(x)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)
