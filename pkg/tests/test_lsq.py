import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from djtransmon.errors import FitError
from djtransmon.lsq import levenberg_marquardt, numeric_jacobian


def test_rosenbrock():
    def fun(x):
        return np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])

    res = levenberg_marquardt(fun, [-1.2, 1.0], max_iter=500)
    np.testing.assert_allclose(res.x, [1, 1], atol=1e-6)
    assert res.converged


@given(st.integers(0, 2**31 - 1))
def test_linear_model_matches_lstsq(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(30, 3))
    y = a @ np.array([1.0, -2.0, 0.5]) + rng.normal(0, 0.1, 30)
    res = levenberg_marquardt(lambda x: a @ x - y, np.zeros(3))
    ref = np.linalg.lstsq(a, y, rcond=None)[0]
    np.testing.assert_allclose(res.x, ref, atol=1e-6)
    # covariance: s^2 (A^T A)^-1 with s^2 the reduced chi-square
    s2 = np.sum((a @ ref - y) ** 2) / (30 - 3)
    np.testing.assert_allclose(res.covariance(), s2 * np.linalg.inv(a.T @ a), rtol=1e-4)
    np.testing.assert_allclose(res.covariance(scale_by_residual=False), np.linalg.inv(a.T @ a), rtol=1e-4)


@given(st.integers(0, 2**31 - 1))
def test_cost_history_non_increasing(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 3, 40)
    y = 2.0 * np.exp(-t / 0.7) + rng.normal(0, 0.01, t.size)
    res = levenberg_marquardt(lambda x: x[0] * np.exp(-t / x[1]) - y, [1.0, 2.0])
    assert np.all(np.diff(res.history) <= 0)
    assert res.cost == res.history[-1]


def test_bounds_respected_and_reported():
    res = levenberg_marquardt(lambda x: x - 3.0, [0.0], bounds=([-1.0], [1.0]))
    assert res.x[0] == pytest.approx(1.0)
    assert res.at_bound[0]


def test_no_free_parameters():
    res = levenberg_marquardt(lambda x: np.array([1.0, 2.0]), np.zeros(0))
    assert res.converged and res.cost == pytest.approx(2.5)
    assert res.jac.shape == (2, 0)


def test_non_finite_start_raises():
    with pytest.raises(FitError):
        levenberg_marquardt(lambda x: np.array([np.nan]), [0.0])


def test_iteration_budget_raises():
    with pytest.raises(FitError) as exc:
        levenberg_marquardt(lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]]), [-1.2, 1.0], max_iter=2)
    assert "x" in exc.value.diagnostics


def test_rank_deficiency_detected():
    # only the sum of the parameters is constrained
    res = levenberg_marquardt(lambda x: np.array([x[0] + x[1] - 1.0, 2 * (x[0] + x[1]) - 2.0]), [0.3, 0.1])
    assert res.rank_deficient


def test_numeric_jacobian_flips_at_upper_bound():
    jac = numeric_jacobian(lambda x: x**2, np.array([1.0]), upper=np.array([1.0]))
    assert jac[0, 0] == pytest.approx(2.0, rel=1e-5)
