import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlm import DimensionError, LMModel, NumericalError, majorization_holds, solve_exact_unconstrained, spectral_norm
from mmlm.model import majorization_test
from mmlm.problem import ResidualProblem

from conftest import affine_problem, central_difference


def scalar_model(lam=1.0):
    return LMModel(np.array([1.0]), np.array([1.0]), np.array([[1.0]]), lam)


class TestModelValue:
    def test_at_linearization_point(self, small_instance, rng):
        x = rng.uniform(-1, 1, 8)
        model = LMModel.from_problem(small_instance.problem, x, 0.3)
        assert model.value(x) == pytest.approx(small_instance.problem.objective(x), rel=1e-15)

    def test_scalar_example(self):
        assert scalar_model().value([0.0]) == 0.5

    def test_damping_difference(self, rng):
        model = LMModel(rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal((4, 3)), 0.5)
        x = rng.standard_normal(3)
        u = x - model.x_k
        assert model.with_damping(2.0).value(x) - model.value(x) == pytest.approx(0.75 * u @ u, rel=1e-10)


class TestModelGradient:
    def test_at_linearization_point(self, small_instance, rng):
        x = rng.uniform(-1, 1, 8)
        model = LMModel.from_problem(small_instance.problem, x, 0.3)
        np.testing.assert_allclose(model.gradient(x), small_instance.problem.gradient(x), rtol=1e-12)

    def test_scalar_example(self):
        np.testing.assert_array_equal(scalar_model().gradient([0.0]), [-1.0])

    def test_finite_differences(self, rng):
        model = LMModel(rng.standard_normal(5), rng.standard_normal(7), rng.standard_normal((7, 5)), 0.7)
        x = rng.standard_normal(5)
        fd = central_difference(model.value, x, 1e-5).ravel()
        g = model.gradient(x)
        assert np.linalg.norm(g - fd) <= 1e-8 * np.linalg.norm(g)

    def test_step_coordinates_agree(self, rng):
        model = LMModel(rng.standard_normal(3), rng.standard_normal(4), rng.standard_normal((4, 3)), 0.5)
        u = rng.standard_normal(3)
        value, grad = model.step_value_and_gradient(u)
        assert value == pytest.approx(model.value(model.x_k + u), rel=1e-12)
        np.testing.assert_allclose(grad, model.gradient(model.x_k + u), rtol=1e-12)


class TestValidation:
    def test_nonpositive_damping(self):
        with pytest.raises(ValueError):
            scalar_model(lam=0.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            LMModel(np.zeros(2), np.zeros(3), np.zeros((3, 3)), 1.0)

    def test_non_finite(self):
        with pytest.raises(NumericalError):
            LMModel(np.zeros(1), np.array([np.nan]), np.ones((1, 1)), 1.0)

    def test_point_shape(self):
        with pytest.raises(DimensionError):
            scalar_model().value([0.0, 1.0])

    def test_lipschitz(self):
        model = LMModel(np.zeros(2), np.zeros(2), np.diag([3.0, -4.0]), 0.5)
        assert model.lipschitz == pytest.approx(16.5, rel=1e-12)


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(4)) == pytest.approx(1.0, rel=1e-12)

    def test_diagonal(self):
        assert spectral_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0, rel=1e-10)

    def test_zero(self):
        assert spectral_norm(np.zeros((3, 2))) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_svd(self, seed):
        J = np.random.default_rng(seed).standard_normal((20, 10))
        assert spectral_norm(J) == pytest.approx(np.linalg.svd(J, compute_uv=False)[0], rel=1e-6)

    def test_rejects_vectors(self):
        with pytest.raises(DimensionError):
            spectral_norm(np.ones(3))


class TestExactSolve:
    def test_scalar_example(self):
        np.testing.assert_allclose(solve_exact_unconstrained(scalar_model()), [0.5], rtol=1e-15)

    def test_huge_damping_barely_moves(self, rng):
        model = LMModel(rng.standard_normal(4), rng.standard_normal(6), rng.standard_normal((6, 4)), 1e12)
        step = solve_exact_unconstrained(model) - model.x_k
        assert np.linalg.norm(step) <= 1.01e-12 * np.linalg.norm(model.grad_k)

    def test_first_order_optimality(self, rng):
        model = LMModel(rng.standard_normal(6), rng.standard_normal(9), rng.standard_normal((9, 6)), 0.1)
        y = solve_exact_unconstrained(model)
        assert np.linalg.norm(model.gradient(y)) <= 1e-9


class TestMajorization:
    def test_at_linearization_point(self, small_instance, rng):
        x = rng.uniform(-1, 1, 8)
        model = LMModel.from_problem(small_instance.problem, x, 1e-8)
        assert majorization_holds(small_instance.problem, model, x)

    def test_square_residual_fails_with_small_damping(self):
        # F(x) = x**2: at x_k = 1 the exact minimizer is 2/(4.01) + 1 - 1 ~ 0.50125
        P = ResidualProblem(lambda x: x**2, lambda x: np.diag(2 * x), 1, 1)
        model = LMModel.from_problem(P, np.array([1.0]), 0.01)
        y = solve_exact_unconstrained(model)
        assert y[0] == pytest.approx(1 - 2 / 4.01, rel=1e-12)
        assert P.objective(y) == pytest.approx(3.16e-2, rel=1e-2)
        assert model.value(y) == pytest.approx(1.247e-3, rel=1e-3)
        assert not majorization_holds(P, model, y)

    def test_spends_one_residual_evaluation(self):
        P = affine_problem([[2.0]], [1.0])
        model = LMModel.from_problem(P, np.array([0.0]), 1.0)
        P.reset_counters()
        ok, F_y = majorization_test(P, model, np.array([-0.1]))
        assert ok and P.n_residual_evals == 1
        np.testing.assert_allclose(F_y, [0.8])

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), lam=st.floats(1e-6, 1e3), t=st.floats(0.0, 1.0))
    def test_affine_residual_always_majorized(self, seed, lam, t):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((5, 3))
        P = affine_problem(A, rng.standard_normal(5))
        model = LMModel.from_problem(P, rng.standard_normal(3), lam)
        # points between x_k and the model minimizer have m(y) <= m(x_k)
        y = model.x_k + t * (solve_exact_unconstrained(model) - model.x_k)
        assert majorization_holds(P, model, y)
