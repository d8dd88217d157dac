"""
Exact thresholding analysis
Finite-sample type-I error of the two-variable lasso score test.

With x and z standardized, x'z/n = rho and y = alpha x + beta z + eps,
the null fit is b = soft(w, lambda) with w = z'y/n ~ N(rho alpha + beta, 1/n).
Writing u = z'eps/sqrt(n) and v = (x - rho z)'eps/sqrt(n), v is independent
of u (since (x - rho z)'z = 0) with variance 1 - rho^2, and
x'eps/sqrt(n) = rho u + v. Given w the statistic T is normal:

    w >= lambda:   sqrt(n)[(1 - rho^2) alpha + rho lambda] + v
    |w| < lambda:  sqrt(n)(alpha + rho beta) + rho sqrt(n)(w - m) + v
    w <= -lambda:  sqrt(n)[(1 - rho^2) alpha - rho lambda] + v

The residual variance is 1 throughout.
"""
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from src.core.errors import QuadratureNotConverged
from src.core.modes import LASSO_MODES, VarianceMode
from src.core.score_test import lasso_score_test
from src.core.solver import soft_threshold
from src.models.dataset import FeatureSplit
from src.models.results import ErrorCurvePoint, ThresholdScenario

logger = logging.getLogger(__name__)

# Integration range for w in standard deviations around its mean
TRUNCATION_SDS = 10.0
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8
QUAD_LIMIT = 200


def scenario_params(gamma: float, lam: float, rho: float, n: int) -> ThresholdScenario:
    """
    Choose (alpha, beta) so that a_lambda = 0 and Pr(z'y/n >= lambda) = gamma

    The middle case covers Phi(-2 sqrt(n) lambda) <= gamma <= 0.5, boundaries included.

    Args:
        gamma: Probability that the null coefficient is positive, in (0, 1)
        lam: Positive penalty level
        rho: Correlation x'z/n, in (-1, 1)
        n: Sample size

    Returns:
        ThresholdScenario
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")

    shift = norm.ppf(gamma) / np.sqrt(n)
    denom = 1.0 - rho * rho
    if gamma > 0.5:
        alpha = -rho * lam / denom
    elif gamma >= norm.cdf(-2.0 * np.sqrt(n) * lam):
        alpha = -rho * (shift + lam) / denom
    else:
        alpha = rho * lam / denom
    beta = shift + lam - rho * alpha

    b_lambda = soft_threshold(rho * alpha + beta, lam)
    a_lambda = alpha + rho * (beta - b_lambda)
    return ThresholdScenario(float(gamma), float(lam), float(rho), int(n), float(alpha),
                             float(beta), float(b_lambda), float(a_lambda))


def _branch_means(scenario: ThresholdScenario) -> Tuple[float, float, float]:
    """Means of T on the upper branch, the middle branch at w = m, and the lower branch"""
    root_n = np.sqrt(scenario.n)
    rho, alpha, lam = scenario.rho, scenario.alpha, scenario.lam
    upper = root_n * ((1.0 - rho * rho) * alpha + rho * lam)
    middle = root_n * (alpha + rho * scenario.beta)
    lower = root_n * ((1.0 - rho * rho) * alpha - rho * lam)
    return upper, middle, lower


def _two_sided_tail(mean, sd: float, cutoff: float):
    """Pr(|N(mean, sd^2)| > cutoff)"""
    return norm.sf((cutoff - mean) / sd) + norm.cdf((-cutoff - mean) / sd)


def _integrate(func, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    output = quad(func, lo, hi, full_output=1, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL,
                  limit=QUAD_LIMIT)
    if len(output) > 3:
        raise QuadratureNotConverged(f"Integral over [{lo:.4g}, {hi:.4g}]: {output[3]}")
    return float(output[0])


def exact_type1_error(scenario: ThresholdScenario, nominal_level: float,
                      mode: VarianceMode = VarianceMode.ASYMPTOTIC) -> ErrorCurvePoint:
    """
    Exact rejection probability of the two-variable lasso score test under a_lambda = 0

    Integrates the conditional two-sided tail probability of T given w
    against the density of w over the three thresholding regions. The
    estimated variance is 1 - rho^2 when z is active and 1 otherwise
    (ASYMPTOTIC), or 1 always (CONSERVATIVE).

    Args:
        scenario: The construction from scenario_params
        nominal_level: Two-sided level in (0, 0.5)
        mode: ASYMPTOTIC or CONSERVATIVE

    Returns:
        ErrorCurvePoint

    Raises:
        QuadratureNotConverged: If adaptive quadrature fails on any region
    """
    if not 0.0 < nominal_level < 0.5:
        raise ValueError(f"Nominal level must lie in (0, 0.5), got {nominal_level}")
    if mode not in LASSO_MODES:
        raise ValueError(f"Threshold analysis needs a lasso variance mode, got {mode.value}")

    root_n = np.sqrt(scenario.n)
    rho = scenario.rho
    sd = np.sqrt(1.0 - rho * rho)
    cutoff = norm.isf(nominal_level / 2.0)
    outer_cutoff = cutoff * (sd if mode is VarianceMode.ASYMPTOTIC else 1.0)
    upper_mean, middle_mean, lower_mean = _branch_means(scenario)

    # t = sqrt(n)(w - m) is standard normal; branch edges in t units
    m = scenario.mean_w
    t_upper = root_n * (scenario.lam - m)
    t_lower = root_n * (-scenario.lam - m)
    lo, hi = -TRUNCATION_SDS, TRUNCATION_SDS

    upper_reject = _two_sided_tail(upper_mean, sd, outer_cutoff)
    lower_reject = _two_sided_tail(lower_mean, sd, outer_cutoff)

    observed = _integrate(lambda t: upper_reject * norm.pdf(t), max(t_upper, lo), hi)
    observed += _integrate(lambda t: lower_reject * norm.pdf(t), lo, min(t_lower, hi))
    observed += _integrate(
        lambda t: _two_sided_tail(middle_mean + rho * t, sd, cutoff) * norm.pdf(t),
        max(t_lower, lo), min(t_upper, hi),
    )
    observed = float(min(max(observed, 0.0), 1.0))
    return ErrorCurvePoint(scenario.gamma, float(nominal_level), observed, mode, rho)


def relative_error_curve(gammas: Sequence[float], lam: float, rho: float, n: int,
                         levels: Sequence[float],
                         modes: Sequence[VarianceMode] = LASSO_MODES) -> List[ErrorCurvePoint]:
    """
    Exact type-I error over a gamma grid for every (level, mode) pair

    Returns:
        Points ordered by level, then mode, then gamma
    """
    scenarios = [scenario_params(g, lam, rho, n) for g in gammas]
    points = []
    for level in levels:
        for mode in modes:
            for scenario in scenarios:
                points.append(exact_type1_error(scenario, level, mode))
    logger.debug(f"Computed {len(points)} exact type-I error point(s) at rho={rho:g}")
    return points


def monte_carlo_type1_error(scenario: ThresholdScenario, levels: Sequence[float],
                            modes: Sequence[VarianceMode] = LASSO_MODES,
                            n_draws: int = 500000,
                            seed: int = 0) -> Dict[Tuple[float, VarianceMode], Tuple[float, float]]:
    """
    Monte-Carlo rejection rate of the two-step test

    Draws the sufficient statistics u = z'eps/sqrt(n) and v = (x - rho z)'eps/sqrt(n),
    soft-thresholds w = z'y/n, forms T and compares |T| / sqrt(v_hat)
    with the normal cutoff.

    Returns:
        {(level, mode): (estimate, standard error)}
    """
    rng = np.random.default_rng(seed)
    n, rho, lam = scenario.n, scenario.rho, scenario.lam
    root_n = np.sqrt(n)
    u = rng.standard_normal(n_draws)
    v = rng.standard_normal(n_draws) * np.sqrt(1.0 - rho * rho)

    w = scenario.mean_w + u / root_n
    b_hat = soft_threshold(w, lam)
    t_stat = (n * (scenario.alpha + rho * scenario.beta) + root_n * (v + rho * u)
              - n * rho * b_hat) / root_n
    active = b_hat != 0

    estimates = {}
    for level in levels:
        cutoff = norm.isf(level / 2.0)
        for mode in modes:
            if mode is VarianceMode.ASYMPTOTIC:
                v_hat = np.where(active, 1.0 - rho * rho, 1.0)
            else:
                v_hat = np.ones(n_draws)
            rate = float(np.mean(np.abs(t_stat) > cutoff * np.sqrt(v_hat)))
            estimates[(level, mode)] = (rate, float(np.sqrt(rate * (1.0 - rate) / n_draws)))
    return estimates


def two_variable_design(n: int, rho: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Centred x and z with x'x = z'z = n and x'z/n = rho exactly"""
    raw = rng.standard_normal((n, 2))
    raw -= raw.mean(axis=0)
    basis, _ = np.linalg.qr(raw)
    e1, e2 = basis[:, 0] * np.sqrt(n), basis[:, 1] * np.sqrt(n)
    return rho * e1 + np.sqrt(1.0 - rho * rho) * e2, e1


def simulate_null_statistics(scenario: ThresholdScenario, n_replications: int,
                             mode: VarianceMode = VarianceMode.ASYMPTOTIC,
                             seed: int = 0) -> np.ndarray:
    """
    Standardized lasso score statistics under the two-variable construction

    Each replication draws eps ~ N(0, I), forms y = alpha x + beta z + eps on a
    fixed design and runs the full lasso score test with sigma2 = 1.

    Returns:
        Array of t_stat / sqrt(variance), one per replication
    """
    rng = np.random.default_rng(seed)
    x, z = two_variable_design(scenario.n, scenario.rho, rng)
    mean_y = scenario.alpha * x + scenario.beta * z
    fsplit = FeatureSplit(x, z.reshape(-1, 1), 0, "x")

    z_scores = np.empty(n_replications)
    for k in range(n_replications):
        y = mean_y + rng.standard_normal(scenario.n)
        y -= y.mean()
        z_scores[k] = lasso_score_test(fsplit, y, scenario.lam, 1.0, mode).z_score
    return z_scores
