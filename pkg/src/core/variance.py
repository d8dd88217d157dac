"""
Residual variance estimation
Multiple-regression residual variance and refitted cross-validation
"""
import logging
from typing import Optional, Tuple

import numpy as np
from sklearn.model_selection import KFold

from src.core.errors import (DegenerateZeroVariance, RankDeficient, SelectedSetTooLarge,
                             Underdetermined)
from src.core.modes import Sigma2Method
from src.core.solver import fit_lasso, fit_lasso_path, lambda_max
from src.models.dataset import Dataset
from src.models.results import Sigma2Estimate

logger = logging.getLogger(__name__)

# Residual sums of squares below this share of y'y count as an exact fit
DEGENERATE_RSS_RATIO = 1e-20
CV_GRID_SIZE = 30
CV_GRID_RATIO = 1e-2
MIN_RCV_SAMPLES = 20
# Looser solver settings for the selection fits; only supports and predictions are used
CV_SOLVER_OPTIONS = {"coef_tol": 1e-6, "kkt_tol": 1e-5, "max_sweeps": 5000}


def residual_variance(X: np.ndarray, y: np.ndarray, intercept_absorbed: bool = True) -> Tuple[float, int]:
    """
    Residual variance of the least-squares fit of y on X

    Args:
        X: n x d design, d may be 0
        y: Response (centred when intercept_absorbed)
        intercept_absorbed: Count one degree of freedom for the centring

    Returns:
        (||y - P_X y||^2 / df, df) with df = n - d - 1 (or n - d)

    Raises:
        Underdetermined: If no residual degrees of freedom remain
        DegenerateZeroVariance: If y lies in the column span of X
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    X = np.asarray(X, dtype=float).reshape(n, -1)
    d = X.shape[1]
    df = n - d - (1 if intercept_absorbed else 0)
    if df <= 0:
        raise Underdetermined(n, d)

    if d == 0:
        resid = y
    else:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        resid = y - X @ coef
    rss = float(resid @ resid)
    total = float(y @ y)
    if rss <= DEGENERATE_RSS_RATIO * total or total == 0.0:
        raise DegenerateZeroVariance(f"Residual sum of squares {rss:.3g} is zero to working precision")
    return rss / df, df


def estimate_sigma2_mlr(dataset: Dataset) -> Sigma2Estimate:
    """
    Residual variance from multiple linear regression on all features

    Returns:
        Sigma2Estimate with value ||y - P_X y||^2 / (n - d - 1)

    Raises:
        Underdetermined: If d >= n
        RankDeficient: If X does not have full column rank
        DegenerateZeroVariance: If y is fitted exactly
    """
    n, d = dataset.n, dataset.d
    if d >= n:
        raise Underdetermined(n, d)
    rank = np.linalg.matrix_rank(dataset.X)
    if rank < d:
        raise RankDeficient(f"Design has rank {rank} with {d} columns")
    value, df = residual_variance(dataset.X, dataset.y)
    return Sigma2Estimate(value, Sigma2Method.MLR_RESIDUAL, df)


def _centre(X: np.ndarray, y: np.ndarray):
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    return X - x_mean, y - y_mean, x_mean, y_mean


def _cv_lambda(X: np.ndarray, y: np.ndarray, folds: int) -> float:
    """Lambda minimizing K-fold prediction error over a log grid below lambda-max"""
    Xc, yc, _, _ = _centre(X, y)
    lam_max = lambda_max(Xc, yc)
    if lam_max <= 0:
        return 0.0
    grid = np.geomspace(lam_max, lam_max * CV_GRID_RATIO, CV_GRID_SIZE)

    errors = np.zeros(CV_GRID_SIZE)
    splitter = KFold(n_splits=min(folds, len(y)))
    for train, test in splitter.split(X):
        X_train, y_train, x_mean, y_mean = _centre(X[train], y[train])
        fits = fit_lasso_path(X_train, y_train, grid, **CV_SOLVER_OPTIONS)
        for k, fit in enumerate(fits):
            pred = (X[test] - x_mean) @ fit.coef + y_mean
            errors[k] += float(np.sum((y[test] - pred) ** 2))

    best = int(np.argmin(errors))
    logger.debug(f"Cross-validation picked lambda={grid[best]:.4g} ({best + 1}/{CV_GRID_SIZE})")
    return float(grid[best])


def _select(X: np.ndarray, y: np.ndarray, folds: int) -> np.ndarray:
    """Lasso support on one half-sample at the cross-validated lambda"""
    Xc, yc, _, _ = _centre(X, y)
    scale = np.sqrt(np.einsum("ij,ij->j", Xc, Xc) / len(y))
    scale[scale == 0] = 1.0
    Xs = Xc / scale
    lam = _cv_lambda(Xs, yc, folds)
    fit = fit_lasso(Xs, yc, lam, **CV_SOLVER_OPTIONS)
    return np.flatnonzero(fit.coef)


def _refit(X: np.ndarray, y: np.ndarray, support: np.ndarray) -> float:
    """OLS with intercept of y on the selected columns, residual variance"""
    n = len(y)
    if support.size >= n - 1:
        raise SelectedSetTooLarge(int(support.size), n)
    design = np.column_stack([np.ones(n), X[:, support]])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rss = float(resid @ resid)
    centred = y - y.mean()
    if rss <= DEGENERATE_RSS_RATIO * float(centred @ centred):
        raise DegenerateZeroVariance("Refitted half-sample is fitted exactly")
    return rss / (n - support.size - 1)


def estimate_sigma2_rcv(dataset: Dataset, folds: int = 10, seed: Optional[int] = None,
                        rng: Optional[np.random.Generator] = None) -> Sigma2Estimate:
    """
    Refitted cross-validation estimate of the residual variance

    Rows are permuted and split in half. On each half the lasso, with lambda
    chosen by K-fold cross-validation, selects a support; OLS of the other
    half's response on that support gives a residual variance. The estimate
    is the average of the two directions.

    Args:
        dataset: Standardized dataset with n >= 20
        folds: Number of cross-validation folds for lambda
        seed: Seed for the row partition (ignored when rng is given)
        rng: Optional generator for the row partition

    Returns:
        Sigma2Estimate

    Raises:
        SelectedSetTooLarge: If a support is too large to refit on the other half
    """
    n = dataset.n
    if n < MIN_RCV_SAMPLES:
        raise ValueError(f"Refitted cross-validation needs n >= {MIN_RCV_SAMPLES}, got {n}")
    if rng is None:
        rng = np.random.default_rng(seed)

    order = rng.permutation(n)
    halves = (np.sort(order[: n // 2]), np.sort(order[n // 2:]))
    return refitted_cv_from_halves(dataset.X, dataset.y, halves, folds)


def refitted_cv_from_halves(X: np.ndarray, y: np.ndarray, halves: Tuple[np.ndarray, np.ndarray],
                            folds: int = 10) -> Sigma2Estimate:
    """
    Refitted cross-validation on a given row partition

    Each half selects a support that is refitted on the other half; the
    result does not depend on the order of the two halves.

    Args:
        X: Standardized design
        y: Centred response
        halves: Two disjoint arrays of row indices
        folds: Number of cross-validation folds for lambda
    """
    values = []
    df_used = 0
    for select_rows, refit_rows in (halves, halves[::-1]):
        support = _select(X[select_rows], y[select_rows], folds)
        values.append(_refit(X[refit_rows], y[refit_rows], support))
        df_used += len(refit_rows) - support.size - 1
        logger.debug(f"Refitted cross-validation: {support.size} feature(s) selected")

    return Sigma2Estimate(float(np.mean(values)), Sigma2Method.REFITTED_CV, df_used)


def resolve_sigma2(dataset: Dataset, method: Sigma2Method, fixed_value: Optional[float] = None,
                   seed: Optional[int] = None, folds: int = 10) -> Sigma2Estimate:
    """
    Produce a residual variance by the requested method

    Args:
        dataset: Standardized dataset
        method: MLR_RESIDUAL, REFITTED_CV or FIXED
        fixed_value: The value for FIXED
        seed: Seed for REFITTED_CV
        folds: Cross-validation folds for REFITTED_CV
    """
    if method is Sigma2Method.FIXED:
        if fixed_value is None:
            raise ValueError("A fixed residual variance needs a value")
        return Sigma2Estimate(float(fixed_value), Sigma2Method.FIXED, 0)
    if method is Sigma2Method.MLR_RESIDUAL:
        return estimate_sigma2_mlr(dataset)
    return estimate_sigma2_rcv(dataset, folds=folds, seed=seed)
