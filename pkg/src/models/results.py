"""
Result models
Value types produced by the solvers, tests, estimators and studies
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from src.core.errors import NotConverged
from src.core.modes import Sigma2Method, VarianceMode


@dataclass(frozen=True)
class LassoFit:
    """Lasso / elastic-net fit of y on Z at one penalty level"""

    lam: float
    coef: np.ndarray
    fitted: np.ndarray
    iterations: int
    converged: bool
    max_violation: float
    mix: float = 1.0

    @property
    def active(self) -> Tuple[int, ...]:
        """Indices with non-zero coefficients (exact zeros from soft-thresholding)"""
        return tuple(int(j) for j in np.flatnonzero(self.coef))

    @property
    def signs(self) -> np.ndarray:
        return np.sign(self.coef[list(self.active)])

    def require_converged(self) -> "LassoFit":
        """Return self, or raise NotConverged for a flagged fit"""
        if not self.converged:
            raise NotConverged(self.iterations, self.max_violation)
        return self


@dataclass(frozen=True)
class RidgeFit:
    """Ridge fit of y on Z with smoother degrees of freedom"""

    lam: float
    coef: np.ndarray
    fitted: np.ndarray
    df: float


@dataclass(frozen=True)
class KKTReport:
    """Outcome of a KKT check: pass flag and the largest violation"""

    ok: bool
    max_violation: float
    worst_index: int = -1

    def __bool__(self) -> bool:
        return self.ok


def two_sided_p_value(t_stat: float, variance: float) -> float:
    """2 * Phi(-|t| / sqrt(v)), computed through the upper tail for accuracy"""
    return float(2.0 * norm.sf(abs(t_stat) / np.sqrt(variance)))


@dataclass(frozen=True)
class ScoreTestResult:
    """Penalized score statistic for one feature with its reference variance"""

    feature: int
    lam: float
    t_stat: float
    variance: float
    variance_mode: VarianceMode
    active_size: int
    sigma2: float
    name: str = ""
    p_value: float = field(init=False)

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"Variance must be positive, got {self.variance}")
        object.__setattr__(self, "p_value", two_sided_p_value(self.t_stat, self.variance))

    @property
    def z_score(self) -> float:
        return self.t_stat / np.sqrt(self.variance)

    def as_row(self) -> Dict:
        return {
            "feature": self.name or str(self.feature),
            "lambda": self.lam,
            "t_stat": self.t_stat,
            "variance": self.variance,
            "variance_mode": self.variance_mode.value,
            "p_value": self.p_value,
            "active_size": self.active_size,
            "sigma2": self.sigma2,
        }


@dataclass(frozen=True)
class ShiftedScore:
    """Penalized score split into the classical score on the active set plus a shift"""

    t_lambda: float
    t_classical: float
    shift: float

    @property
    def gap(self) -> float:
        return self.t_lambda - (self.t_classical + self.shift)


@dataclass(frozen=True)
class SparsityReport:
    """Per-feature comparison of the full-fit support with the score-test threshold"""

    lam: float
    threshold: float
    in_support: Tuple[bool, ...]
    exceeds: Tuple[bool, ...]
    margins: Tuple[float, ...]
    ties: Tuple[bool, ...]
    names: Tuple[str, ...] = ()

    @property
    def agreements(self) -> Tuple[bool, ...]:
        return tuple(a == b for a, b in zip(self.in_support, self.exceeds))

    @property
    def all_agree(self) -> bool:
        """True when every non-tie feature agrees"""
        return all(agree or tie for agree, tie in zip(self.agreements, self.ties))

    @property
    def disagreements(self) -> List[int]:
        return [j for j, (agree, tie) in enumerate(zip(self.agreements, self.ties))
                if not agree and not tie]


@dataclass(frozen=True)
class GroupTestResult:
    """Group score vector with its infinity-norm decision"""

    t_vec: np.ndarray
    max_abs: float
    threshold: float
    sigma2: float = 1.0

    @property
    def decision(self) -> bool:
        return bool(self.max_abs > self.threshold)

    @property
    def p_values(self) -> np.ndarray:
        """Per-column two-sided p-values under the conservative variance"""
        return 2.0 * norm.sf(np.abs(self.t_vec) / np.sqrt(self.sigma2))


@dataclass(frozen=True)
class Sigma2Estimate:
    """Residual variance estimate"""

    value: float
    method: Sigma2Method
    df_used: int

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value > 0):
            raise ValueError(f"Residual variance must be positive and finite, got {self.value}")


@dataclass(frozen=True)
class ThresholdScenario:
    """Two-variable construction with a_lambda = 0 and Pr(z'y/n >= lambda) = gamma"""

    gamma: float
    lam: float
    rho: float
    n: int
    alpha: float
    beta: float
    b_lambda: float
    a_lambda: float

    @property
    def mean_w(self) -> float:
        """E[z'y/n] = rho * alpha + beta"""
        return self.rho * self.alpha + self.beta


@dataclass(frozen=True)
class ErrorCurvePoint:
    """Observed versus nominal type-I error at one gamma"""

    gamma: float
    nominal_level: float
    observed_level: float
    variance_mode: VarianceMode
    rho: float = float("nan")
    mc_estimate: Optional[float] = None
    mc_se: Optional[float] = None

    @property
    def relative_error(self) -> float:
        return self.observed_level / self.nominal_level

    def as_row(self) -> Dict:
        row = {
            "gamma": self.gamma,
            "rho": self.rho,
            "nominal_level": self.nominal_level,
            "variance_mode": self.variance_mode.value,
            "observed_level": self.observed_level,
            "relative_error": self.relative_error,
        }
        if self.mc_estimate is not None:
            row["mc_estimate"] = self.mc_estimate
            row["mc_se"] = self.mc_se
        return row
