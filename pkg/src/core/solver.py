"""
Penalized regression solvers
Lasso / elastic net by cyclic coordinate descent, warm-started lambda paths,
KKT checks and ridge regression through a Cholesky factorization.

Objective convention (all lambda values use this scale):
    ||y - Z b||^2 / (2n) + lambda * [mix * ||b||_1 + (1 - mix) * ||b||_2^2 / 2]
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from src.models.results import KKTReport, LassoFit, RidgeFit

logger = logging.getLogger(__name__)

COEF_TOL = 1e-9
KKT_TOL = 1e-7
MAX_SWEEPS = 100000
# Polished active-set systems above this condition number are left alone
POLISH_MAX_COND = 1e12


def soft_threshold(z: float, lam: float) -> float:
    """
    Soft-thresholding operator sign(z) * max(|z| - lambda, 0)

    Args:
        z: Input value (scalar or array)
        lam: Non-negative threshold

    Returns:
        Thresholded value, exactly zero inside [-lambda, lambda]
    """
    if np.any(np.asarray(lam) < 0):
        raise ValueError(f"Threshold must be non-negative, got {lam}")
    result = np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)
    return float(result) if np.ndim(result) == 0 else result


def lambda_max(Z: np.ndarray, y: np.ndarray, mix: float = 1.0) -> float:
    """Smallest lambda at which the (elastic-net) solution is identically zero"""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(Z.T @ y)) / Z.shape[0] / mix)


def penalized_objective(Z: np.ndarray, y: np.ndarray, coef: np.ndarray,
                        lam: float, mix: float = 1.0) -> float:
    """Value of the elastic-net objective at coef"""
    resid = y - Z @ coef
    penalty = mix * np.abs(coef).sum() + (1.0 - mix) * 0.5 * (coef @ coef)
    return float(resid @ resid / (2 * len(y)) + lam * penalty)


def r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    """Proportion of the variance of y explained by fitted"""
    y = np.asarray(y, dtype=float)
    resid = y - fitted
    centred = y - y.mean()
    return float(1.0 - (resid @ resid) / (centred @ centred))


def _kkt_violations(Z, y, coef, lam, mix):
    n = Z.shape[0]
    grad = Z.T @ (y - Z @ coef) / n - lam * (1.0 - mix) * coef
    l1 = lam * mix
    active = coef != 0
    violation = np.where(active,
                         np.abs(grad - l1 * np.sign(coef)),
                         np.maximum(np.abs(grad) - l1, 0.0))
    return violation


def check_kkt(Z: np.ndarray, y: np.ndarray, fit: LassoFit, tol: float = KKT_TOL) -> KKTReport:
    """
    Check the Karush-Kuhn-Tucker conditions of a lasso / elastic-net fit

    Active j:   |z_j'(y - Zb)/n - lambda(1-mix) b_j - lambda mix sign(b_j)| <= tol
    Inactive j: |z_j'(y - Zb)/n| <= lambda mix + tol

    Args:
        Z: n x p design
        y: Response
        fit: The fit to check (its coef is used, not its fitted values)
        tol: Tolerance

    Returns:
        KKTReport with the pass flag and the largest violation
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != len(y) or Z.shape[1] != len(fit.coef):
        raise ValueError(f"Dimension mismatch: Z {Z.shape}, y {len(y)}, coef {len(fit.coef)}")
    if Z.shape[1] == 0:
        return KKTReport(True, 0.0)
    violation = _kkt_violations(Z, y, fit.coef, fit.lam, fit.mix)
    worst = int(np.argmax(violation))
    return KKTReport(bool(violation[worst] <= tol), float(violation[worst]), worst)


class _CoordinateDescent:
    """Cyclic coordinate descent with plain residual updates"""

    def __init__(self, Z, y, lam, mix):
        self.Z = np.asfortranarray(Z, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.n, self.p = self.Z.shape
        self.l1 = lam * mix
        self.l2 = lam * (1.0 - mix)
        self.col_scale = np.einsum("ij,ij->j", self.Z, self.Z) / self.n

    def sweep(self, coef, resid, indices):
        """One pass over indices; updates coef and resid in place, returns max change"""
        Z, n = self.Z, self.n
        max_change = 0.0
        for j in indices:
            scale = self.col_scale[j]
            if scale == 0.0:
                continue
            old = coef[j]
            z_j = Z[:, j]
            rho = z_j @ resid / n + scale * old
            new = np.sign(rho) * max(abs(rho) - self.l1, 0.0) / (scale + self.l2)
            if new != old:
                resid -= (new - old) * z_j
                coef[j] = new
                max_change = max(max_change, abs(new - old))
        return max_change

    def run(self, coef, coef_tol, kkt_tol, max_sweeps, lam, mix):
        resid = self.y - self.Z @ coef
        all_indices = range(self.p)
        sweeps = 0
        violation = np.inf
        while sweeps < max_sweeps:
            change = self.sweep(coef, resid, all_indices)
            sweeps += 1
            if change <= coef_tol:
                violation = float(np.max(_kkt_violations(self.Z, self.y, coef, lam, mix), initial=0.0))
                if violation <= kkt_tol:
                    return sweeps, True, violation
            # cycle on the active set until it settles, then re-check everything
            while sweeps < max_sweeps:
                active = np.flatnonzero(coef)
                if active.size == 0 or active.size == self.p:
                    break
                sweeps += 1
                if self.sweep(coef, resid, active) <= coef_tol:
                    break
        violation = float(np.max(_kkt_violations(self.Z, self.y, coef, lam, mix), initial=0.0))
        return sweeps, violation <= kkt_tol, violation


def _polish(Z, y, coef, lam, mix, kkt_tol):
    """Re-solve the active coordinates from the stationarity equations"""
    active = np.flatnonzero(coef)
    if active.size == 0 or active.size >= Z.shape[0]:
        return coef
    n = Z.shape[0]
    Z_a = Z[:, active]
    gram = Z_a.T @ Z_a / n + lam * (1.0 - mix) * np.eye(active.size)
    if np.linalg.cond(gram) > POLISH_MAX_COND:
        return coef
    signs = np.sign(coef[active])
    try:
        solved = np.linalg.solve(gram, Z_a.T @ y / n - lam * mix * signs)
    except np.linalg.LinAlgError:
        return coef
    if not np.array_equal(np.sign(solved), signs):
        return coef
    candidate = np.zeros_like(coef)
    candidate[active] = solved
    if np.max(_kkt_violations(Z, y, candidate, lam, mix)) > kkt_tol:
        return coef
    return candidate


def fit_elastic_net(Z: np.ndarray, y: np.ndarray, lam: float, mix: float = 1.0,
                    warm: Optional[np.ndarray] = None, coef_tol: float = COEF_TOL,
                    kkt_tol: float = KKT_TOL, max_sweeps: int = MAX_SWEEPS) -> LassoFit:
    """
    Fit the elastic net by cyclic coordinate descent

    Minimizes ||y - Zb||^2/(2n) + lambda[mix ||b||_1 + (1-mix) ||b||^2/2].
    Convergence needs both a max coefficient change <= coef_tol in a full sweep
    and a KKT residual <= kkt_tol. A fit that runs out of sweeps is returned
    with converged=False.

    Args:
        Z: n x p design (columns standardized so z_j'z_j = n)
        y: Response
        lam: Non-negative penalty level
        mix: L1 share of the penalty, in (0, 1]; 1 is the lasso
        warm: Optional starting coefficients
        coef_tol: Coefficient-change tolerance per sweep
        kkt_tol: KKT tolerance
        max_sweeps: Sweep budget

    Returns:
        LassoFit with exact zeros on inactive coordinates
    """
    if lam < 0:
        raise ValueError(f"Penalty level must be non-negative, got {lam}")
    if not 0.0 < mix <= 1.0:
        raise ValueError(f"Mixing parameter must lie in (0, 1], got {mix}")
    Z = np.asfortranarray(Z, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = Z.shape
    if p == 0:
        return LassoFit(lam, np.zeros(0), np.zeros(n), 0, True, 0.0, mix)

    coef = np.zeros(p) if warm is None else np.array(warm, dtype=float)
    if coef.shape != (p,):
        raise ValueError(f"Warm start has shape {coef.shape}, expected ({p},)")

    solver = _CoordinateDescent(Z, y, lam, mix)
    sweeps, converged, violation = solver.run(coef, coef_tol, kkt_tol, max_sweeps, lam, mix)
    if converged:
        coef = _polish(Z, y, coef, lam, mix, kkt_tol)
        violation = float(np.max(_kkt_violations(Z, y, coef, lam, mix)))
    else:
        logger.warning(f"Coordinate descent stopped after {sweeps} sweeps at lambda={lam:g} "
                       f"(KKT violation {violation:.3g})")

    return LassoFit(float(lam), coef, Z @ coef, sweeps, converged, violation, float(mix))


def fit_lasso(Z: np.ndarray, y: np.ndarray, lam: float, warm: Optional[np.ndarray] = None,
              **kwargs) -> LassoFit:
    """Lasso fit, ||y - Zb||^2/(2n) + lambda ||b||_1"""
    return fit_elastic_net(Z, y, lam, 1.0, warm=warm, **kwargs)


def fit_lasso_path(Z: np.ndarray, y: np.ndarray, lambdas: Sequence[float],
                   mix: float = 1.0, **kwargs) -> List[LassoFit]:
    """
    Fit a strictly decreasing lambda grid with warm starts

    Args:
        Z: n x p design
        y: Response
        lambdas: Strictly decreasing, non-negative penalty levels
        mix: L1 share of the penalty

    Returns:
        One LassoFit per grid point, in grid order
    """
    grid = np.asarray(lambdas, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("Lambda grid must be a non-empty sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) >= 0):
        raise ValueError("Lambda grid must be strictly decreasing and non-negative")

    fits = []
    warm = None
    for lam in grid:
        fit = fit_elastic_net(Z, y, float(lam), mix, warm=warm, **kwargs)
        fits.append(fit)
        warm = fit.coef
    return fits


class RidgeSmoother:
    """
    Ridge smoother H_Z = Z (lambda I + Z'Z/n)^-1 Z'/n

    Factorizes lambda I + Z'Z/n when p <= n, and the n x n dual form
    I + (n lambda)^-1 Z Z' = (I - H_Z)^-1 otherwise.
    """

    def __init__(self, Z: np.ndarray, lam: float):
        if not lam > 0:
            raise ValueError(f"Ridge penalty must be positive, got {lam}")
        self.Z = np.asarray(Z, dtype=float)
        self.lam = float(lam)
        self.n, self.p = self.Z.shape
        self.dual = self.p > self.n
        if self.p == 0:
            self._factor = None
            self.df = 0.0
            return
        if self.dual:
            gram = self.Z @ self.Z.T / self.n
            system = np.eye(self.n) + gram / self.lam
        else:
            gram = self.Z.T @ self.Z / self.n
            system = gram + self.lam * np.eye(self.p)
        self._factor = cho_factor(system)
        eigenvalues = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
        self.df = float(np.sum(eigenvalues / (eigenvalues + self.lam)))

    def coef(self, v: np.ndarray) -> np.ndarray:
        """(lambda I + Z'Z/n)^-1 Z'v/n"""
        if self.p == 0:
            return np.zeros(0)
        if self.dual:
            return self.Z.T @ cho_solve(self._factor, v) / (self.n * self.lam)
        return cho_solve(self._factor, self.Z.T @ v / self.n)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """H_Z v"""
        if self.p == 0:
            return np.zeros_like(v, dtype=float)
        return v - self.residual(v) if self.dual else self.Z @ self.coef(v)

    def residual(self, v: np.ndarray) -> np.ndarray:
        """(I - H_Z) v"""
        v = np.asarray(v, dtype=float)
        if self.p == 0:
            return v.copy()
        if self.dual:
            return cho_solve(self._factor, v)
        return v - self.Z @ self.coef(v)


def fit_ridge(Z: np.ndarray, y: np.ndarray, lam: float) -> RidgeFit:
    """
    Ridge regression, ||y - Zb||^2/(2n) + lambda ||b||^2/2

    Args:
        Z: n x p design
        y: Response
        lam: Positive penalty level

    Returns:
        RidgeFit with coef, fitted = H_Z y and df = trace(H_Z)
    """
    smoother = RidgeSmoother(Z, lam)
    coef = smoother.coef(np.asarray(y, dtype=float))
    return RidgeFit(float(lam), coef, smoother.Z @ coef, smoother.df)
