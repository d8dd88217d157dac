import numpy as np
import pytest

from src.core.errors import NotConverged
from src.core.solver import (RidgeSmoother, _CoordinateDescent, check_kkt, fit_elastic_net, fit_lasso,
                             fit_lasso_path, fit_ridge, lambda_max, penalized_objective, r_squared,
                             soft_threshold)
from src.models.results import LassoFit
from tests.conftest import make_dataset, sign_pattern_oracle


@pytest.mark.parametrize("z, lam, expected", [
    (0.5, 0.2, 0.3),
    (-0.1, 0.2, 0.0),
    (-0.5, 0.2, -0.3),
    (0.2, 0.2, 0.0),
    (1.5, 0.0, 1.5),
])
def test_soft_threshold(z, lam, expected):
    """Test the soft-thresholding operator on each branch"""
    assert soft_threshold(z, lam) == pytest.approx(expected, abs=1e-15)


def test_soft_threshold_vectorized():
    """Test soft-thresholding of an array"""
    np.testing.assert_allclose(soft_threshold(np.array([-1.0, 0.05, 2.0]), 0.5), [-0.5, 0.0, 1.5])


def test_soft_threshold_rejects_negative_threshold():
    """Test that a negative threshold is an error"""
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_single_column_closed_form():
    """Test the p=1 lasso against soft(z'y/n, lambda)"""
    dataset = make_dataset(50, 1, seed=4, n_signals=1, signal=0.7)
    Z, y = dataset.X, dataset.y
    lam = 0.2
    fit = fit_lasso(Z, y, lam)
    assert fit.coef[0] == pytest.approx(soft_threshold(Z[:, 0] @ y / 50, lam), abs=1e-12)


def test_above_lambda_max_gives_zero(small_dataset):
    """Test an empty active set at and above lambda-max"""
    Z, y = small_dataset.X, small_dataset.y
    lam = lambda_max(Z, y) * 1.0001
    fit = fit_lasso(Z, y, lam)
    assert fit.active == ()
    np.testing.assert_array_equal(fit.coef, np.zeros(Z.shape[1]))
    np.testing.assert_array_equal(fit.fitted, np.zeros(len(y)))


def test_lambda_max_value(small_dataset):
    """Test lambda-max = ||Z'y/n||_inf, scaled by 1/mix"""
    Z, y = small_dataset.X, small_dataset.y
    expected = np.max(np.abs(Z.T @ y)) / len(y)
    assert lambda_max(Z, y) == pytest.approx(expected)
    assert lambda_max(Z, y, mix=0.5) == pytest.approx(2 * expected)
    assert lambda_max(np.zeros((10, 0)), np.ones(10)) == 0.0


@pytest.mark.parametrize("seed", range(60))
def test_lasso_matches_sign_pattern_oracle(seed):
    """Test small random lasso problems against exhaustive enumeration"""
    rng = np.random.default_rng(seed)
    dataset = make_dataset(20, 3, seed=seed, n_signals=2, signal=0.5, rho=0.3)
    Z, y = dataset.X, dataset.y
    lam = rng.uniform(0.05, 0.95) * lambda_max(Z, y)
    fit = fit_lasso(Z, y, lam)
    assert fit.converged
    np.testing.assert_allclose(fit.coef, sign_pattern_oracle(Z, y, lam), atol=1e-6)


@pytest.mark.parametrize("seed", range(40))
def test_elastic_net_matches_sign_pattern_oracle(seed):
    """Test small elastic-net problems against exhaustive enumeration"""
    rng = np.random.default_rng(100 + seed)
    dataset = make_dataset(20, 2, seed=100 + seed, n_signals=1, signal=0.6)
    Z, y = dataset.X, dataset.y
    mix = rng.uniform(0.2, 0.9)
    lam = rng.uniform(0.05, 0.95) * lambda_max(Z, y, mix)
    fit = fit_elastic_net(Z, y, lam, mix)
    np.testing.assert_allclose(fit.coef, sign_pattern_oracle(Z, y, lam, mix), atol=1e-6)


def test_elastic_net_with_unit_mix_is_lasso(small_dataset):
    """Test that mix=1 reduces to the lasso"""
    Z, y = small_dataset.X, small_dataset.y
    lam = 0.3 * lambda_max(Z, y)
    np.testing.assert_allclose(fit_elastic_net(Z, y, lam, 1.0).coef, fit_lasso(Z, y, lam).coef, atol=1e-10)


def test_elastic_net_zero_above_scaled_lambda_max(small_dataset):
    """Test an empty elastic-net solution when lambda * mix exceeds ||Z'y/n||_inf"""
    Z, y = small_dataset.X, small_dataset.y
    fit = fit_elastic_net(Z, y, 1.0001 * lambda_max(Z, y, 0.4), 0.4)
    assert fit.active == ()


@pytest.mark.parametrize("mix", [0.0, 1.5])
def test_elastic_net_rejects_bad_mix(small_dataset, mix):
    """Test mix validation"""
    with pytest.raises(ValueError):
        fit_elastic_net(small_dataset.X, small_dataset.y, 0.1, mix)


def test_negative_lambda_rejected(small_dataset):
    """Test penalty validation"""
    with pytest.raises(ValueError):
        fit_lasso(small_dataset.X, small_dataset.y, -0.1)


def test_empty_design():
    """Test that a design without columns gives an empty converged fit"""
    fit = fit_lasso(np.zeros((10, 0)), np.arange(10.0), 0.1)
    assert fit.converged
    assert fit.coef.shape == (0,)
    np.testing.assert_array_equal(fit.fitted, np.zeros(10))


def test_sweeps_never_increase_objective(wide_dataset):
    """Test monotone descent of the penalized objective across sweeps"""
    Z, y = wide_dataset.X, wide_dataset.y
    lam = 0.2 * lambda_max(Z, y)
    solver = _CoordinateDescent(Z, y, lam, 1.0)
    coef = np.zeros(Z.shape[1])
    resid = y.copy()
    previous = penalized_objective(Z, y, coef, lam)
    for _ in range(30):
        solver.sweep(coef, resid, range(Z.shape[1]))
        current = penalized_objective(Z, y, coef, lam)
        assert current <= previous + 1e-12
        previous = current
    np.testing.assert_allclose(resid, y - Z @ coef, atol=1e-10)


def test_converged_fit_satisfies_kkt(wide_dataset):
    """Test the KKT check on converged fits"""
    Z, y = wide_dataset.X, wide_dataset.y
    for ratio in (0.8, 0.4, 0.2):
        fit = fit_lasso(Z, y, ratio * lambda_max(Z, y))
        assert fit.converged
        assert check_kkt(Z, y, fit)


def test_perturbed_fit_fails_kkt(small_dataset):
    """Test that moving an active coefficient by 10 tol breaks KKT"""
    Z, y = small_dataset.X, small_dataset.y
    fit = fit_lasso(Z, y, 0.3 * lambda_max(Z, y))
    j = fit.active[0]
    coef = fit.coef.copy()
    tol = 1e-7
    coef[j] += 10 * tol
    perturbed = LassoFit(fit.lam, coef, Z @ coef, fit.iterations, True, 0.0)
    report = check_kkt(Z, y, perturbed, tol=tol)
    assert not report
    assert report.max_violation > tol


def test_zero_fit_above_lambda_max_passes_kkt(small_dataset):
    """Test that the zero vector is optimal above lambda-max"""
    Z, y = small_dataset.X, small_dataset.y
    p = Z.shape[1]
    zero = LassoFit(lambda_max(Z, y), np.zeros(p), np.zeros(len(y)), 0, True, 0.0)
    assert check_kkt(Z, y, zero).ok


def test_check_kkt_dimension_mismatch(small_dataset):
    """Test that mismatched coefficients are rejected"""
    bad = LassoFit(0.1, np.zeros(3), np.zeros(small_dataset.n), 0, True, 0.0)
    with pytest.raises(ValueError):
        check_kkt(small_dataset.X, small_dataset.y, bad)


def test_sweep_limit_flags_and_raises(wide_dataset):
    """Test that running out of sweeps is flagged, and raised on demand"""
    Z, y = wide_dataset.X, wide_dataset.y
    fit = fit_lasso(Z, y, 0.05 * lambda_max(Z, y), max_sweeps=1)
    assert not fit.converged
    with pytest.raises(NotConverged):
        fit.require_converged()


def test_path_first_point_above_lambda_max(small_dataset):
    """Test the start of a path at lambda-max"""
    Z, y = small_dataset.X, small_dataset.y
    top = 1.0001 * lambda_max(Z, y)
    fits = fit_lasso_path(Z, y, [top, 0.5 * top, 0.1 * top])
    assert fits[0].active == ()
    assert fits[1].active and fits[2].active


def test_path_singleton_equals_single_fit(small_dataset):
    """Test a one-point path"""
    Z, y = small_dataset.X, small_dataset.y
    lam = 0.25 * lambda_max(Z, y)
    (fit,) = fit_lasso_path(Z, y, [lam])
    np.testing.assert_allclose(fit.coef, fit_lasso(Z, y, lam).coef, atol=1e-10)


def test_path_matches_cold_starts(wide_dataset):
    """Test that warm starts reach the same fitted values as cold starts"""
    Z, y = wide_dataset.X, wide_dataset.y
    grid = lambda_max(Z, y) * np.array([0.9, 0.6, 0.4, 0.25])
    for warm, lam in zip(fit_lasso_path(Z, y, grid), grid):
        cold = fit_lasso(Z, y, lam)
        np.testing.assert_allclose(warm.fitted, cold.fitted, atol=1e-8)


def test_random_warm_starts_reach_same_fit(wide_dataset, rng):
    """Test that the fitted values do not depend on the starting point"""
    Z, y = wide_dataset.X, wide_dataset.y
    lam = 0.3 * lambda_max(Z, y)
    reference = fit_lasso(Z, y, lam)
    for _ in range(3):
        warm = rng.normal(scale=0.5, size=Z.shape[1])
        fit = fit_lasso(Z, y, lam, warm=warm)
        np.testing.assert_allclose(fit.fitted, reference.fitted, atol=1e-8)


@pytest.mark.parametrize("grid", [[0.1, 0.2], [0.2, 0.2], [], [0.3, -0.1]])
def test_path_rejects_bad_grids(small_dataset, grid):
    """Test grid validation"""
    with pytest.raises(ValueError):
        fit_lasso_path(small_dataset.X, small_dataset.y, grid)


def test_warm_start_shape_checked(small_dataset):
    """Test that a wrong-size warm start is rejected"""
    with pytest.raises(ValueError):
        fit_lasso(small_dataset.X, small_dataset.y, 0.1, warm=np.zeros(2))


def test_r_squared():
    """Test R^2 for a perfect and an empty fit"""
    y = np.array([1.0, 2.0, 3.0, 6.0])
    assert r_squared(y, y) == pytest.approx(1.0)
    assert r_squared(y, np.full(4, y.mean())) == pytest.approx(0.0)


def _orthogonal_design(n, p, rng):
    raw = rng.standard_normal((n, p))
    raw -= raw.mean(axis=0)
    basis, _ = np.linalg.qr(raw)
    return basis * np.sqrt(n)


def test_ridge_orthogonal_closed_form(rng):
    """Test coef_j = (z_j'y/n)/(1 + lambda) for Z'Z/n = I"""
    Z = _orthogonal_design(40, 4, rng)
    y = rng.standard_normal(40)
    lam = 0.7
    fit = fit_ridge(Z, y, lam)
    np.testing.assert_allclose(fit.coef, (Z.T @ y / 40) / (1 + lam), atol=1e-12)
    assert fit.df == pytest.approx(4 / (1 + lam))
    np.testing.assert_allclose(fit.fitted, Z @ fit.coef)


def test_ridge_full_shrinkage(small_dataset):
    """Test coef -> 0 and df -> 0 as lambda grows"""
    fit = fit_ridge(small_dataset.X, small_dataset.y, 1e12)
    assert np.max(np.abs(fit.coef)) < 1e-9
    assert fit.df < 1e-9


def test_ridge_dual_matches_primal(rng):
    """Test that the n x n form agrees with the p x p form"""
    Z = rng.standard_normal((15, 30))
    y = rng.standard_normal(15)
    lam = 0.4
    dual = RidgeSmoother(Z, lam)
    assert dual.dual
    primal_coef = np.linalg.solve(Z.T @ Z / 15 + lam * np.eye(30), Z.T @ y / 15)
    np.testing.assert_allclose(dual.coef(y), primal_coef, atol=1e-10)
    np.testing.assert_allclose(dual.apply(y), Z @ primal_coef, atol=1e-10)


def test_ridge_woodbury_identity(rng):
    """Test (I - H)^-1 = I + (n lambda)^-1 Z Z'"""
    n, lam = 25, 0.3
    Z = rng.standard_normal((n, 8))
    smoother = RidgeSmoother(Z, lam)
    resid_operator = np.column_stack([smoother.residual(e) for e in np.eye(n)])
    inverse = np.eye(n) + Z @ Z.T / (n * lam)
    np.testing.assert_allclose(resid_operator @ inverse, np.eye(n), atol=1e-10)


def test_ridge_residual_contracts(rng):
    """Test ||(I - H)x||^2 <= x'(I - H)x"""
    Z = rng.standard_normal((30, 10))
    smoother = RidgeSmoother(Z, 0.5)
    for _ in range(5):
        x = rng.standard_normal(30)
        r = smoother.residual(x)
        assert r @ r <= x @ r + 1e-12


def test_ridge_rejects_non_positive_penalty(small_dataset):
    """Test penalty validation"""
    with pytest.raises(ValueError):
        RidgeSmoother(small_dataset.X, 0.0)
