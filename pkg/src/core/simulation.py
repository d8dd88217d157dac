"""
Simulation harness
Type-I error and power of the penalized score test against the oracle,
simple and multiple linear regression score tests.
"""
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm

from src.core.errors import InputError, PenScoreError
from src.core.modes import Sigma2Method, SimulationMethod
from src.core.score_test import classical_score_test, lasso_score_test_all
from src.core.solver import fit_lasso_path
from src.core.variance import MIN_RCV_SAMPLES, resolve_sigma2
from src.models.dataset import Dataset, standardize
from src.models.study import MethodSummary, SimulationConfig, SimulationSummary

logger = logging.getLogger(__name__)

# (method, lambda or None) -> (false rejections, rejected signal share, support size)
ReplicationResult = Dict[Tuple[SimulationMethod, Optional[float]], Tuple[int, float, float]]


def replication_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replication index, keyed on (seed, index)"""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def generate_design(config: SimulationConfig, rng: np.random.Generator) -> Dataset:
    """
    Draw n rows from N_d(0, S) with S_jk = ar_base^|j - k| and standardize

    Columns follow the recursion x_1 ~ N(0, 1), x_j = r x_{j-1} + sqrt(1 - r^2) e_j.

    Returns:
        Dataset with a zero response
    """
    r = config.ar_base
    noise = rng.standard_normal((config.n, config.d))
    X = np.empty_like(noise)
    X[:, 0] = noise[:, 0]
    scale = np.sqrt(1.0 - r * r)
    for j in range(1, config.d):
        X[:, j] = r * X[:, j - 1] + scale * noise[:, j]
    names = [f"x{j + 1}" for j in range(config.d)]
    return standardize(X, np.zeros(config.n), names)


def generate_truth(config: SimulationConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Coefficient vector with n_signals entries equal to signal_value

    Positions are drawn from a stream keyed on (seed, d) unless rng is given,
    so every replication of a study shares them.
    """
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, config.d, 0x7275]))
    beta = np.zeros(config.d)
    if config.n_signals:
        positions = rng.choice(config.d, size=config.n_signals, replace=False)
        beta[positions] = config.signal_value
    return beta


def mlr_p_values(X: np.ndarray, y: np.ndarray, sigma2: float) -> np.ndarray:
    """
    Multiple-regression score p-values for every column at once

    With G = (X'X)^-1 and r_j = 1/G_jj, the statistic is b_j sqrt(r_j)/sigma.
    """
    try:
        factor = cho_factor(X.T @ X)
    except LinAlgError as e:
        raise PenScoreError(f"Multiple regression design is singular: {e}")
    coef = cho_solve(factor, X.T @ y)
    precision_diag = np.diag(cho_solve(factor, np.eye(X.shape[1])))
    z = coef / np.sqrt(precision_diag) / np.sqrt(sigma2)
    return 2.0 * norm.sf(np.abs(z))


def _tally(p_values: np.ndarray, signals: np.ndarray, cutoff: float) -> Tuple[int, float]:
    rejected = p_values < cutoff
    false_count = int(np.sum(rejected & ~signals))
    power = float(np.mean(rejected[signals])) if signals.any() else float("nan")
    return false_count, power


def run_replication(config: SimulationConfig, beta: np.ndarray, index: int) -> ReplicationResult:
    """
    One simulated dataset and every requested test on it

    Raises:
        PenScoreError: From the solver or variance estimator
    """
    rng = replication_rng(config.seed, index)
    design = generate_design(config, rng)
    raw_y = design.X @ beta + rng.standard_normal(config.n)
    dataset = design.with_response(raw_y)
    X, y = dataset.X, dataset.y
    signals = beta != 0
    methods = set(config.methods)

    sigma2 = resolve_sigma2(dataset, config.sigma2_method, fixed_value=1.0,
                            seed=int(rng.integers(2 ** 63)), folds=config.rcv_folds).value
    results: ReplicationResult = {}
    nan = float("nan")

    if SimulationMethod.PENALIZED_SCORE in methods:
        full_fits = fit_lasso_path(X, y, config.lambdas)
        for lam, full in zip(config.lambdas, full_fits):
            tests = lasso_score_test_all(dataset, lam, sigma2, config.variance_mode,
                                         fallback_conservative=config.fallback_conservative,
                                         full_fit=full)
            p_values = np.array([t.p_value for t in tests])
            results[(SimulationMethod.PENALIZED_SCORE, lam)] = \
                _tally(p_values, signals, config.cutoff) + (float(len(full.active)),)

    if SimulationMethod.ORACLE in methods:
        support = np.flatnonzero(signals)
        p_values = np.array([
            classical_score_test(X[:, j], X[:, support[support != j]], y, sigma2).p_value
            for j in range(config.d)
        ])
        results[(SimulationMethod.ORACLE, None)] = _tally(p_values, signals, config.cutoff) + (nan,)

    if SimulationMethod.SLR in methods:
        empty = np.zeros((config.n, 0))
        p_values = np.array([classical_score_test(X[:, j], empty, y, sigma2).p_value
                             for j in range(config.d)])
        results[(SimulationMethod.SLR, None)] = _tally(p_values, signals, config.cutoff) + (nan,)

    if SimulationMethod.MLR in methods and config.d < config.n:
        p_values = mlr_p_values(X, y, sigma2)
        results[(SimulationMethod.MLR, None)] = _tally(p_values, signals, config.cutoff) + (nan,)

    return results


def _safe_replication(config: SimulationConfig, beta: np.ndarray, index: int):
    try:
        return run_replication(config, beta, index), None
    except PenScoreError as e:
        return None, f"{type(e).__name__}: {e}"


def _summarize(method: SimulationMethod, lam: Optional[float],
               tallies: List[Tuple[int, float, float]]) -> MethodSummary:
    counts = np.array([t[0] for t in tallies], dtype=float)
    powers = np.array([t[1] for t in tallies], dtype=float)
    supports = np.array([t[2] for t in tallies], dtype=float)
    b = len(tallies)

    def mean_se(values):
        if np.all(np.isnan(values)):
            return float("nan"), float("nan")
        se = float(np.std(values, ddof=1) / np.sqrt(b)) if b > 1 else float("nan")
        return float(np.mean(values)), se

    efp, efp_se = mean_se(counts)
    power, power_se = mean_se(powers)
    mean_support = float(np.mean(supports)) if not np.all(np.isnan(supports)) else float("nan")
    lam = float("nan") if lam is None else lam
    return MethodSummary(method, lam, efp, efp_se, power, power_se, mean_support, b)


def check_sigma2_method(config: SimulationConfig):
    """
    Refuse a variance method that cannot work at the study dimensions

    Raises:
        InputError: MLR residual variance with d >= n - 1, or refitted
            cross-validation with n below its minimum
    """
    if config.sigma2_method is Sigma2Method.MLR_RESIDUAL and config.d >= config.n - 1:
        raise InputError(f"MLR residual variance needs d < n - 1, got n={config.n}, d={config.d}; "
                         f"use refitted cross-validation or a fixed value")
    if config.sigma2_method is Sigma2Method.REFITTED_CV and config.n < MIN_RCV_SAMPLES:
        raise InputError(f"Refitted cross-validation needs n >= {MIN_RCV_SAMPLES}, got n={config.n}")


def run_study(config: SimulationConfig) -> SimulationSummary:
    """
    Run every replication of a study and aggregate per method

    Replications run through joblib with config.n_jobs workers; each draws
    its own design and noise from a stream keyed on (seed, index). A
    replication that raises is logged and left out of the summary.

    Returns:
        SimulationSummary with EFP, power and their Monte-Carlo standard errors
    """
    check_sigma2_method(config)
    beta = generate_truth(config)
    skipped = []
    if SimulationMethod.MLR in config.methods and config.d >= config.n:
        logger.warning(f"Skipping multiple regression comparator: d={config.d} >= n={config.n}")
        skipped.append(SimulationMethod.MLR)

    logger.info(f"Running {config.n_replications} replication(s): n={config.n}, d={config.d}, "
                f"{config.n_signals} signal(s) of size {config.signal_value}")
    outcomes = Parallel(n_jobs=config.n_jobs)(
        delayed(_safe_replication)(config, beta, k) for k in range(config.n_replications)
    )

    collected: Dict[Tuple[SimulationMethod, Optional[float]], List] = {}
    failed = 0
    for k, (result, error) in enumerate(outcomes):
        if result is None:
            failed += 1
            logger.warning(f"Replication {k} aborted: {error}")
            continue
        for key, tally in result.items():
            collected.setdefault(key, []).append(tally)

    order = {m: i for i, m in enumerate(SimulationMethod)}
    keys = sorted(collected, key=lambda key: (order[key[0]], -(key[1] or 0.0)))
    summaries = tuple(_summarize(method, lam, collected[(method, lam)]) for method, lam in keys)
    completed = config.n_replications - failed
    logger.info(f"Study finished: {completed} completed, {failed} aborted")
    return SimulationSummary(config, summaries, completed, failed, tuple(skipped))
