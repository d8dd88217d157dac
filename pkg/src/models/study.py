"""
Simulation study models
Configuration and per-method summaries of type-I error and power studies
"""
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.core.modes import Sigma2Method, SimulationMethod, VarianceMode, parse_mode

DEFAULT_LAMBDAS = (0.6, 0.3, 0.1, 0.05)


@dataclass(frozen=True)
class SimulationConfig:
    """Settings of one simulation study"""

    n: int
    d: int
    n_signals: int = 10
    signal_value: float = 0.4
    ar_base: float = 0.5
    lambdas: Tuple[float, ...] = DEFAULT_LAMBDAS
    n_replications: int = 100
    seed: int = 0
    threshold: Optional[float] = None
    methods: Tuple[SimulationMethod, ...] = tuple(SimulationMethod)
    variance_mode: VarianceMode = VarianceMode.ASYMPTOTIC
    sigma2_method: Sigma2Method = Sigma2Method.REFITTED_CV
    fallback_conservative: bool = True
    rcv_folds: int = 10
    n_jobs: int = 1

    def __post_init__(self):
        if self.n < 2 or self.d < 1:
            raise ValueError(f"Need n >= 2 and d >= 1, got n={self.n}, d={self.d}")
        if not 0 <= self.n_signals <= self.d:
            raise ValueError(f"n_signals must lie in [0, d], got {self.n_signals}")
        if not -1.0 < self.ar_base < 1.0:
            raise ValueError(f"ar_base must lie in (-1, 1), got {self.ar_base}")
        if self.n_replications < 1:
            raise ValueError("Need at least one replication")
        if self.threshold is not None and not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        lambdas = tuple(sorted((float(v) for v in self.lambdas), reverse=True))
        if any(v < 0 for v in lambdas) or len(set(lambdas)) != len(lambdas):
            raise ValueError("Lambdas must be distinct and non-negative")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "methods", tuple(self.methods))

    @property
    def cutoff(self) -> float:
        """Significance cutoff, 1/d unless set"""
        return self.threshold if self.threshold is not None else 1.0 / self.d

    @property
    def n_null(self) -> int:
        return self.d - self.n_signals

    @classmethod
    def from_mapping(cls, values: Mapping) -> "SimulationConfig":
        """
        Build a config from plain values (TOML tables, command-line flags)

        Enum-valued keys accept their string values.
        """
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"Unknown simulation setting(s): {', '.join(sorted(unknown))}")
        kwargs = dict(values)
        if "methods" in kwargs:
            kwargs["methods"] = tuple(m if isinstance(m, SimulationMethod) else parse_mode(SimulationMethod, m)
                                      for m in kwargs["methods"])
        if isinstance(kwargs.get("variance_mode"), str):
            kwargs["variance_mode"] = parse_mode(VarianceMode, kwargs["variance_mode"])
        if isinstance(kwargs.get("sigma2_method"), str):
            kwargs["sigma2_method"] = parse_mode(Sigma2Method, kwargs["sigma2_method"])
        if "lambdas" in kwargs:
            kwargs["lambdas"] = tuple(kwargs["lambdas"])
        return cls(**kwargs)

    def to_dict(self) -> Dict:
        values = asdict(self)
        values["lambdas"] = list(self.lambdas)
        values["methods"] = [m.value for m in self.methods]
        values["variance_mode"] = self.variance_mode.value
        values["sigma2_method"] = self.sigma2_method.value
        return values


@dataclass(frozen=True)
class MethodSummary:
    """EFP and power of one method (at one lambda for the penalized test)"""

    method: SimulationMethod
    lam: float
    efp: float
    efp_se: float
    power: float
    power_se: float
    mean_support: float = float("nan")
    replications: int = 0

    def as_row(self) -> Dict:
        return {
            "method": self.method.value,
            "lambda": self.lam,
            "efp": self.efp,
            "efp_se": self.efp_se,
            "power": self.power,
            "power_se": self.power_se,
            "mean_support": self.mean_support,
        }


@dataclass(frozen=True)
class SimulationSummary:
    """Per-method results of a completed study"""

    config: SimulationConfig
    methods: Tuple[MethodSummary, ...]
    completed: int
    failed: int = 0
    skipped_methods: Tuple[SimulationMethod, ...] = field(default=())

    def get(self, method: SimulationMethod, lam: Optional[float] = None) -> MethodSummary:
        """Summary of a method; lam picks the penalized-test grid point"""
        for summary in self.methods:
            if summary.method is method and (lam is None or np.isclose(summary.lam, lam)):
                return summary
        raise KeyError(f"No results for {method.value}" + (f" at lambda={lam}" if lam is not None else ""))

    def as_rows(self) -> List[Dict]:
        return [summary.as_row() for summary in self.methods]

    def to_dict(self) -> Dict:
        return {
            "config": self.config.to_dict(),
            "completed": self.completed,
            "failed": self.failed,
            "skipped_methods": [m.value for m in self.skipped_methods],
            "nominal_efp": self.config.n_null * self.config.cutoff,
            "results": self.as_rows(),
        }
