"""
Test configuration modes
Variance modes, penalties, residual-variance estimators and simulation methods
"""
from enum import Enum
from typing import Dict, Iterable, Optional, Type, TypeVar


class VarianceMode(str, Enum):
    """Reference variance used to turn a score statistic into a p-value"""
    ASYMPTOTIC = "asymptotic"
    CONSERVATIVE = "conservative"
    RIDGE_CONDITIONAL = "ridge-conditional"
    RIDGE_MARGINAL = "ridge-marginal"


class Penalty(str, Enum):
    """Penalty applied to the nuisance coefficients"""
    LASSO = "lasso"
    ELASTIC_NET = "elastic-net"
    RIDGE = "ridge"


class Sigma2Method(str, Enum):
    """Residual variance estimators"""
    MLR_RESIDUAL = "mlr"
    REFITTED_CV = "rcv"
    FIXED = "fixed"


class SimulationMethod(str, Enum):
    """Testing procedures compared in a simulation study"""
    PENALIZED_SCORE = "penalized"
    ORACLE = "oracle"
    SLR = "slr"
    MLR = "mlr"


LASSO_MODES = (VarianceMode.ASYMPTOTIC, VarianceMode.CONSERVATIVE)
RIDGE_MODES = (VarianceMode.RIDGE_CONDITIONAL, VarianceMode.RIDGE_MARGINAL)


# Keyed by enum type first: members of different enums can share a value ("mlr")
MODE_DESCRIPTIONS: Dict[Type[Enum], Dict[Enum, str]] = {
    VarianceMode: {
        VarianceMode.ASYMPTOTIC: "sigma2 x'(I - P_A)x / n, projection on the lasso active set",
        VarianceMode.CONSERVATIVE: "sigma2, identical for every feature",
        VarianceMode.RIDGE_CONDITIONAL: "sigma2 x'(I - H)^2 x / n, coefficients held fixed",
        VarianceMode.RIDGE_MARGINAL: "sigma2 x'(I - H)x / n, random-effects marginal",
    },
    Penalty: {
        Penalty.LASSO: "L1 penalty",
        Penalty.ELASTIC_NET: "mix of L1 and squared L2 penalties",
        Penalty.RIDGE: "squared L2 penalty",
    },
    Sigma2Method: {
        Sigma2Method.MLR_RESIDUAL: "residual variance of multiple linear regression",
        Sigma2Method.REFITTED_CV: "refitted cross-validation on two half-samples",
        Sigma2Method.FIXED: "user-supplied value",
    },
    SimulationMethod: {
        SimulationMethod.PENALIZED_SCORE: "lasso-penalized score test",
        SimulationMethod.ORACLE: "classical score test adjusting for the true support",
        SimulationMethod.SLR: "simple linear regression score test",
        SimulationMethod.MLR: "multiple linear regression score test",
    },
}


E = TypeVar("E", bound=Enum)


def parse_mode(enum_type: Type[E], text: str) -> E:
    """
    Parse a command-line string into an enum member

    Accepts the member value ("asymptotic") or name ("ASYMPTOTIC"),
    case-insensitively, with '_' and '-' interchangeable.

    Args:
        enum_type: The Enum class to parse into
        text: The user-supplied string

    Returns:
        The matching member

    Raises:
        ValueError: If no member matches
    """
    key = text.strip().lower().replace("_", "-")
    for member in enum_type:
        if key in (member.value, member.name.lower().replace("_", "-")):
            return member
    choices = ", ".join(m.value for m in enum_type)
    raise ValueError(f"Unknown {enum_type.__name__} '{text}' (choose from {choices})")


def get_mode_description(mode: Enum) -> str:
    """
    Get a user-friendly description of a mode

    Args:
        mode: Any member of the enums above

    Returns:
        Description string
    """
    return MODE_DESCRIPTIONS.get(type(mode), {}).get(mode, "")


def describe_choices(enum_type: Type[E], members: Optional[Iterable[E]] = None,
                     default: Optional[E] = None) -> str:
    """Help text listing each member's value and description"""
    parts = []
    for member in members if members is not None else enum_type:
        text = f"{member.value} = {get_mode_description(member)}"
        if member is default:
            text += " (default)"
        parts.append(text)
    return "; ".join(parts)
