import numpy as np
import pytest
from scipy.stats import norm

from src.core import score_test
from src.core.errors import RankDeficientActiveSet
from src.core.modes import Penalty, VarianceMode
from src.core.score_test import (ProjectionContext, classical_score_shift, classical_score_test,
                                 group_score_test, lasso_score_test, lasso_score_test_all,
                                 penalized_target, ridge_score_test, verify_sparsity_correspondence)
from src.core.solver import RidgeSmoother, fit_lasso, lambda_max
from src.core.threshold import scenario_params, two_variable_design
from src.models.dataset import Dataset, FeatureSplit, split
from tests.conftest import make_dataset


def test_empty_active_set_gives_simple_regression(small_dataset):
    """Test T = x'y/sqrt(n) with variance sigma2 above the null lambda-max"""
    fsplit = split(small_dataset, 0)
    y = small_dataset.y
    lam = 1.0001 * lambda_max(fsplit.Z, y)
    result = lasso_score_test(fsplit, y, lam, 2.5)
    assert result.active_size == 0
    assert result.t_stat == pytest.approx(fsplit.x @ y / np.sqrt(small_dataset.n), rel=1e-12)
    assert result.variance == pytest.approx(2.5, rel=1e-10)


def test_zero_lambda_gives_classical_score(small_dataset):
    """Test that lambda = 0 reproduces the multiple-regression score test"""
    y = small_dataset.y
    for j in (0, 4):
        fsplit = split(small_dataset, j)
        penalized = lasso_score_test(fsplit, y, 0.0, 1.3)
        classical = classical_score_test(fsplit.x, fsplit.Z, y, 1.3)
        assert penalized.t_stat == pytest.approx(classical.t_stat, abs=1e-8)
        assert penalized.variance == pytest.approx(classical.variance, rel=1e-8)
        assert penalized.p_value == pytest.approx(classical.p_value, rel=1e-6)


def test_single_feature_equals_simple_regression():
    """Test that d=1 reduces to the simple-regression score test"""
    dataset = make_dataset(30, 1, seed=8, n_signals=1, signal=0.4)
    (result,) = lasso_score_test_all(dataset, 0.1, 1.0)
    slr = classical_score_test(dataset.X[:, 0], np.zeros((30, 0)), dataset.y, 1.0)
    assert result.t_stat == pytest.approx(slr.t_stat, rel=1e-12)
    assert result.p_value == pytest.approx(slr.p_value, rel=1e-12)


def test_asymptotic_variance_below_conservative(wide_dataset):
    """Test 0 < x'(I - P_A)x/n <= 1 for every feature"""
    lam = 0.4 * lambda_max(wide_dataset.X, wide_dataset.y)
    asymptotic = lasso_score_test_all(wide_dataset, lam, 1.7, VarianceMode.ASYMPTOTIC)
    conservative = lasso_score_test_all(wide_dataset, lam, 1.7, VarianceMode.CONSERVATIVE)
    for a, c in zip(asymptotic, conservative):
        assert a.t_stat == pytest.approx(c.t_stat, abs=1e-12)
        assert 0 < a.variance <= c.variance * (1 + 1e-12)
        assert c.variance == 1.7
        assert a.p_value <= c.p_value * (1 + 1e-9)


def test_column_permutation_equivariance(small_dataset, rng):
    """Test that reordering the features reorders the results"""
    perm = rng.permutation(small_dataset.d)
    permuted = Dataset(small_dataset.X[:, perm], small_dataset.y,
                       tuple(small_dataset.names[k] for k in perm))
    lam = 0.2 * lambda_max(small_dataset.X, small_dataset.y)
    original = lasso_score_test_all(small_dataset, lam, 1.0)
    shuffled = lasso_score_test_all(permuted, lam, 1.0)
    for position, k in enumerate(perm):
        assert shuffled[position].name == original[k].name
        assert shuffled[position].t_stat == pytest.approx(original[k].t_stat, abs=1e-7)
        assert shuffled[position].variance == pytest.approx(original[k].variance, abs=1e-7)


def test_results_carry_metadata(small_dataset):
    """Test the per-feature fields and the serialized row"""
    results = lasso_score_test_all(small_dataset, 0.1, 1.0, VarianceMode.CONSERVATIVE)
    assert [r.feature for r in results] == list(range(small_dataset.d))
    row = results[2].as_row()
    assert row["feature"] == "x3"
    assert row["variance_mode"] == "conservative"
    assert row["lambda"] == 0.1
    assert 0.0 <= row["p_value"] <= 1.0


def test_invalid_inputs_rejected(small_dataset):
    """Test sigma2 and mode validation"""
    fsplit = split(small_dataset, 0)
    with pytest.raises(ValueError):
        lasso_score_test(fsplit, small_dataset.y, 0.1, 0.0)
    with pytest.raises(ValueError):
        lasso_score_test(fsplit, small_dataset.y, 0.1, 1.0, VarianceMode.RIDGE_MARGINAL)


def test_conservative_threshold_recovers_support(wide_dataset):
    """Test that p < 2 Phi(-sqrt(n) lambda / sigma) selects exactly the lasso support"""
    n, sigma2 = wide_dataset.n, 0.8
    lam = 0.35 * lambda_max(wide_dataset.X, wide_dataset.y)
    full = fit_lasso(wide_dataset.X, wide_dataset.y, lam)
    results = lasso_score_test_all(wide_dataset, lam, sigma2, VarianceMode.CONSERVATIVE, full_fit=full)
    boundary = 2.0 * norm.sf(np.sqrt(n) * lam / np.sqrt(sigma2))
    selected = {r.feature for r in results if r.p_value < boundary}
    assert selected == set(full.active)


def test_conservative_p_values_continuous_in_lambda(small_dataset):
    """Test that the score statistic has no jumps along the lambda path"""
    fsplit = split(small_dataset, 1)
    y = small_dataset.y
    top = lambda_max(fsplit.Z, y)

    def max_jump(k):
        grid = np.linspace(0.05, 1.0, k) * top
        t = [lasso_score_test(fsplit, y, lam, 1.0, VarianceMode.CONSERVATIVE).t_stat for lam in grid]
        return np.max(np.abs(np.diff(t)))

    coarse, fine = max_jump(20), max_jump(80)
    assert fine < coarse / 2


def test_correspondence_above_lambda_max(small_dataset):
    """Test empty support and |T_j| <= sqrt(n) lambda above the full lambda-max"""
    lam = 1.0001 * lambda_max(small_dataset.X, small_dataset.y)
    report = verify_sparsity_correspondence(small_dataset, lam)
    assert not any(report.in_support)
    assert not any(report.exceeds)
    assert report.all_agree
    assert report.threshold == pytest.approx(np.sqrt(small_dataset.n) * lam)


@pytest.mark.parametrize("seed", range(10))
def test_correspondence_random_instances(seed):
    """Test support versus threshold agreement on wide random problems"""
    rng = np.random.default_rng(seed)
    dataset = make_dataset(40, 60, seed=1000 + seed, n_signals=5, signal=0.8, rho=0.1)
    lam = rng.uniform(0.2, 0.9) * lambda_max(dataset.X, dataset.y)
    report = verify_sparsity_correspondence(dataset, lam)
    assert report.all_agree, report.disagreements


@pytest.mark.slow
def test_correspondence_two_hundred_instances():
    """Test support versus threshold agreement on 200 random (n=40, d=60) problems"""
    for seed in range(200):
        rng = np.random.default_rng(seed)
        dataset = make_dataset(40, 60, seed=5000 + seed, n_signals=int(rng.integers(0, 8)),
                               signal=0.7, rho=float(rng.uniform(0.0, 0.4)))
        lam = rng.uniform(0.2, 0.9) * lambda_max(dataset.X, dataset.y)
        report = verify_sparsity_correspondence(dataset, lam)
        assert report.all_agree, (seed, report.disagreements)


@pytest.mark.parametrize("mix", [0.5, 0.8])
def test_correspondence_elastic_net(small_dataset, mix):
    """Test the threshold sqrt(n) lambda mix for the elastic net"""
    lam = 0.3 * lambda_max(small_dataset.X, small_dataset.y, mix)
    report = verify_sparsity_correspondence(small_dataset, lam, Penalty.ELASTIC_NET, mix)
    assert report.threshold == pytest.approx(np.sqrt(small_dataset.n) * lam * mix)
    assert any(report.in_support)
    assert report.all_agree


def test_correspondence_rejects_ridge(small_dataset):
    """Test that the ridge penalty has no sparsity correspondence"""
    with pytest.raises(ValueError):
        verify_sparsity_correspondence(small_dataset, 0.1, Penalty.RIDGE)


def test_shift_with_empty_active_set(small_dataset):
    """Test a zero shift when nothing is active"""
    fsplit = split(small_dataset, 0)
    y = small_dataset.y
    shifted = classical_score_shift(fsplit, y, 1.0001 * lambda_max(fsplit.Z, y))
    assert shifted.shift == 0.0
    assert shifted.t_lambda == pytest.approx(fsplit.x @ y / np.sqrt(small_dataset.n))


def test_shift_at_zero_lambda(small_dataset):
    """Test a zero shift and the classical score at lambda = 0"""
    fsplit = split(small_dataset, 3)
    y = small_dataset.y
    shifted = classical_score_shift(fsplit, y, 0.0)
    assert shifted.shift == 0.0
    classical = classical_score_test(fsplit.x, fsplit.Z, y, 1.0)
    assert shifted.t_lambda == pytest.approx(classical.t_stat, abs=1e-8)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("ratio", [0.2, 0.5, 0.8])
def test_shift_identity_mid_path(seed, ratio):
    """Test T_lambda = T_A + sqrt(n) lambda sigma_xA' Sigma_A^-1 tau_A"""
    dataset = make_dataset(50, 10, seed=200 + seed, n_signals=4, signal=0.6, rho=0.3)
    for j in range(dataset.d):
        fsplit = split(dataset, j)
        lam = ratio * lambda_max(fsplit.Z, dataset.y)
        shifted = classical_score_shift(fsplit, dataset.y, lam)
        assert abs(shifted.gap) <= 1e-8 * (1 + abs(shifted.t_lambda))


def test_projection_context_rejects_duplicate_columns(rng):
    """Test a singular active-set Gram matrix"""
    z = rng.standard_normal(20)
    Z = np.column_stack([z, z, rng.standard_normal(20)])
    with pytest.raises(RankDeficientActiveSet):
        ProjectionContext(rng.standard_normal(20), Z, [0, 1])


def test_projection_context_rejects_large_active_set(rng):
    """Test |A| >= n"""
    Z = rng.standard_normal((5, 8))
    with pytest.raises(RankDeficientActiveSet) as info:
        ProjectionContext(rng.standard_normal(5), Z, range(5))
    assert info.value.active_size == 5


def test_projection_context_projects(rng):
    """Test that the residual is orthogonal to the active columns"""
    Z = rng.standard_normal((30, 6))
    x = rng.standard_normal(30)
    context = ProjectionContext(x, Z, [1, 4])
    np.testing.assert_allclose(Z[:, [1, 4]].T @ context.resid_x, 0.0, atol=1e-10)
    assert context.quadratic_form == pytest.approx(context.resid_x @ x)


def _raising_context(*args, **kwargs):
    raise RankDeficientActiveSet(7, 7)


def test_unusable_active_set_raises(small_dataset, monkeypatch):
    """Test that the asymptotic mode surfaces a singular active set"""
    monkeypatch.setattr(score_test, "ProjectionContext", _raising_context)
    with pytest.raises(RankDeficientActiveSet):
        lasso_score_test(split(small_dataset, 0), small_dataset.y, 0.05, 1.0)


def test_unusable_active_set_falls_back(small_dataset, monkeypatch, caplog):
    """Test the conservative fallback with a warning"""
    monkeypatch.setattr(score_test, "ProjectionContext", _raising_context)
    result = lasso_score_test(split(small_dataset, 0), small_dataset.y, 0.05, 1.4,
                              fallback_conservative=True)
    assert result.variance_mode is VarianceMode.CONSERVATIVE
    assert result.variance == 1.4
    assert "conservative" in caplog.text


def test_classical_test_rejects_too_many_adjustments(rng):
    """Test that adjusting for n or more columns is refused"""
    with pytest.raises(RankDeficientActiveSet):
        classical_score_test(rng.standard_normal(6), rng.standard_normal((6, 6)), rng.standard_normal(6), 1.0)


def test_ridge_large_penalty_limits(small_dataset):
    """Test that both ridge variances tend to sigma2 and T to x'y/sqrt(n)"""
    fsplit = split(small_dataset, 2)
    y = small_dataset.y
    for mode in (VarianceMode.RIDGE_CONDITIONAL, VarianceMode.RIDGE_MARGINAL):
        result = ridge_score_test(fsplit, y, 1e12, 0.9, mode)
        assert result.t_stat == pytest.approx(fsplit.x @ y / np.sqrt(small_dataset.n), rel=1e-6)
        assert result.variance == pytest.approx(0.9, rel=1e-6)
        assert result.active_size == small_dataset.d - 1


@pytest.mark.parametrize("dataset_name", ["small_dataset", "wide_dataset"])
def test_ridge_matches_mixed_model_score(dataset_name, request):
    """Test sigma2 * score / sqrt(n) against the explicit marginal covariance inverse"""
    dataset = request.getfixturevalue(dataset_name)
    n, lam, sigma2 = dataset.n, 0.25, 1.6
    fsplit = split(dataset, 0)
    covariance = np.eye(n) + fsplit.Z @ fsplit.Z.T / (n * lam)
    score = fsplit.x @ np.linalg.inv(covariance) @ dataset.y / sigma2
    result = ridge_score_test(fsplit, dataset.y, lam, sigma2)
    assert result.t_stat == pytest.approx(sigma2 * score / np.sqrt(n), rel=1e-9)


def test_ridge_conditional_below_marginal(wide_dataset):
    """Test x'(I - H)^2 x <= x'(I - H)x"""
    for j in range(0, wide_dataset.d, 7):
        fsplit = split(wide_dataset, j)
        smoother = RidgeSmoother(fsplit.Z, 0.5)
        conditional = ridge_score_test(fsplit, wide_dataset.y, 0.5, 1.0,
                                       VarianceMode.RIDGE_CONDITIONAL, smoother)
        marginal = ridge_score_test(fsplit, wide_dataset.y, 0.5, 1.0,
                                    VarianceMode.RIDGE_MARGINAL, smoother)
        assert conditional.t_stat == marginal.t_stat
        assert 0 < conditional.variance <= marginal.variance * (1 + 1e-12)
        assert marginal.variance <= 1.0 + 1e-12


def test_ridge_rejects_lasso_mode(small_dataset):
    """Test mode validation for the ridge test"""
    with pytest.raises(ValueError):
        ridge_score_test(split(small_dataset, 0), small_dataset.y, 1.0, 1.0, VarianceMode.ASYMPTOTIC)


def test_group_of_one_matches_lasso_decision(small_dataset):
    """Test that a single-column group reduces to the lasso score threshold"""
    fsplit = split(small_dataset, 0)
    y = small_dataset.y
    lam = 0.3 * lambda_max(small_dataset.X, y)
    group = group_score_test(fsplit.x, fsplit.Z, y, lam, 1.0)
    single = lasso_score_test(fsplit, y, lam, 1.0, VarianceMode.CONSERVATIVE)
    assert group.max_abs == pytest.approx(abs(single.t_stat), abs=1e-10)
    assert group.decision == (abs(single.t_stat) > np.sqrt(small_dataset.n) * lam)
    assert group.p_values[0] == pytest.approx(single.p_value, rel=1e-8)


def test_group_above_lambda_max_not_selected(small_dataset):
    """Test a false decision above the full lambda-max"""
    lam = 1.0001 * lambda_max(small_dataset.X, small_dataset.y)
    group = group_score_test(small_dataset.X[:, :3], small_dataset.X[:, 3:], small_dataset.y, lam, 1.0)
    assert not group.decision


def test_group_decision_matches_full_fit():
    """Test the infinity-norm decision against the full lasso support on 100 instances"""
    for seed in range(100):
        rng = np.random.default_rng(seed)
        dataset = make_dataset(40, 30, seed=300 + seed, n_signals=int(rng.integers(0, 6)),
                               signal=0.5, rho=0.2)
        lam = rng.uniform(0.2, 0.9) * lambda_max(dataset.X, dataset.y)
        full = fit_lasso(dataset.X, dataset.y, lam)
        group = group_score_test(dataset.X[:, :3], dataset.X[:, 3:], dataset.y, lam, 1.0)
        margin = group.max_abs - group.threshold
        if abs(margin) <= 1e-6:
            continue
        assert group.decision == bool(np.any(full.coef[:3] != 0)), seed


@pytest.mark.parametrize("gamma", [0.02, 0.3, 0.5, 0.8])
def test_penalized_target_of_threshold_scenario(gamma, rng):
    """Test a_lambda = 0 and b_lambda = soft(rho alpha + beta, lambda) for the two-variable construction"""
    scenario = scenario_params(gamma, 0.2, 0.5, 200)
    x, z = two_variable_design(200, 0.5, rng)
    mean_y = scenario.alpha * x + scenario.beta * z
    a_lambda, b_lambda = penalized_target(x, z.reshape(-1, 1), mean_y, 0.2)
    assert a_lambda == pytest.approx(0.0, abs=1e-10)
    assert b_lambda[0] == pytest.approx(scenario.b_lambda, abs=1e-10)


def test_feature_split_used_directly(rng):
    """Test the score test on a hand-built split"""
    x, z = two_variable_design(100, 0.3, rng)
    y = 0.5 * z + rng.standard_normal(100)
    y -= y.mean()
    result = lasso_score_test(FeatureSplit(x, z.reshape(-1, 1), 0, "x"), y, 0.05, 1.0)
    assert result.name == "x"
    assert result.active_size == 1
    assert result.variance == pytest.approx(1.0 - 0.3 ** 2, rel=1e-10)
