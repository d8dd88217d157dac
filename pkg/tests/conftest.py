"""Shared fixtures and reference solvers for the PenScore tests"""
import itertools

import numpy as np
import pytest

from src.models.dataset import Dataset, standardize


def make_dataset(n, d, seed=0, n_signals=0, signal=1.0, noise=1.0, rho=0.0):
    """Standardized Gaussian dataset with optional equicorrelation and leading signals"""
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((n, 1))
    X = np.sqrt(1.0 - rho) * rng.standard_normal((n, d)) + np.sqrt(rho) * common
    beta = np.zeros(d)
    beta[:n_signals] = signal
    y = X @ beta + noise * rng.standard_normal(n)
    return standardize(X, y)


def sign_pattern_oracle(Z, y, lam, mix=1.0, tol=1e-9):
    """
    Exact elastic-net solution by enumerating all sign patterns (p <= 3)

    Returns the minimum-objective coefficient vector among the patterns whose
    stationarity, sign and inactive KKT conditions all hold.
    """
    n, p = Z.shape
    best, best_value = None, np.inf
    for pattern in itertools.product((-1, 0, 1), repeat=p):
        signs = np.array(pattern, dtype=float)
        active = np.flatnonzero(signs)
        coef = np.zeros(p)
        if active.size:
            Z_a = Z[:, active]
            gram = Z_a.T @ Z_a / n + lam * (1.0 - mix) * np.eye(active.size)
            coef[active] = np.linalg.solve(gram, Z_a.T @ y / n - lam * mix * signs[active])
            if not np.array_equal(np.sign(coef[active]), signs[active]):
                continue
        grad = Z.T @ (y - Z @ coef) / n
        inactive = np.setdiff1d(np.arange(p), active)
        if np.any(np.abs(grad[inactive]) > lam * mix + tol):
            continue
        value = (np.sum((y - Z @ coef) ** 2) / (2 * n) + lam * mix * np.abs(coef).sum()
                 + lam * (1.0 - mix) * 0.5 * coef @ coef)
        if value < best_value:
            best, best_value = coef, value
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_dataset() -> Dataset:
    """n=60, d=8 with three signals"""
    return make_dataset(60, 8, seed=11, n_signals=3, signal=0.8)


@pytest.fixture
def wide_dataset() -> Dataset:
    """n=40, d=60"""
    return make_dataset(40, 60, seed=5, n_signals=4, signal=1.0, rho=0.2)
