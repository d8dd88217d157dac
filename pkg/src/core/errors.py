"""
Exception hierarchy for PenScore
Library code raises these; the command-line layer turns them into exit codes
"""


class PenScoreError(Exception):
    """Base class for every error raised by PenScore"""
    pass


class InputError(PenScoreError):
    """Raised when input data violates the dataset conventions"""
    pass


class NonFiniteInput(InputError):
    """Raised when a design or response entry is NaN or infinite"""

    def __init__(self, where: str = "input"):
        super().__init__(f"Non-finite value found in {where}")
        self.where = where


class ZeroVarianceColumn(InputError):
    """Raised when a feature column is constant and cannot be standardized"""

    def __init__(self, column: int, name: str = None):
        label = f"{column} ({name})" if name else str(column)
        super().__init__(f"Column {label} has zero variance")
        self.column = column
        self.name = name


class IndexOutOfRange(InputError, IndexError):
    """Raised when a feature index does not exist in the dataset"""

    def __init__(self, index: int, size: int):
        super().__init__(f"Feature index {index} out of range for {size} feature(s)")
        self.index = index
        self.size = size


class CsvFormatError(InputError):
    """Raised when a CSV cell cannot be parsed as a number"""

    def __init__(self, row: int, column: str, value: str, path: str = None):
        location = f"{path}: " if path else ""
        super().__init__(f"{location}row {row}, column '{column}': cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class InvalidGridSpec(InputError):
    """Raised when a lambda grid specification cannot be parsed"""
    pass


class SolverError(PenScoreError):
    """Base class for penalized regression solver failures"""
    pass


class NotConverged(SolverError):
    """Raised when a coordinate-descent fit hit its sweep limit without satisfying KKT"""

    def __init__(self, iterations: int, max_violation: float = float("nan")):
        super().__init__(
            f"Solver did not converge after {iterations} sweeps "
            f"(max KKT violation {max_violation:.3g})"
        )
        self.iterations = iterations
        self.max_violation = max_violation


class LinearAlgebraError(PenScoreError):
    """Base class for singular or ill-posed linear systems"""
    pass


class RankDeficientActiveSet(LinearAlgebraError):
    """Raised when the active-set Gram matrix is singular or |A| >= n"""

    def __init__(self, active_size: int, n: int, reason: str = "singular Gram matrix"):
        super().__init__(f"Active set of size {active_size} (n={n}) is unusable: {reason}")
        self.active_size = active_size
        self.n = n


class RankDeficient(LinearAlgebraError):
    """Raised when a full design matrix does not have full column rank"""
    pass


class Underdetermined(LinearAlgebraError):
    """Raised when there are at least as many features as samples"""

    def __init__(self, n: int, d: int):
        super().__init__(f"Multiple regression needs d < n, got n={n}, d={d}")
        self.n = n
        self.d = d


class VarianceError(PenScoreError):
    """Base class for residual-variance estimation failures"""
    pass


class DegenerateZeroVariance(VarianceError):
    """Raised when the residual variance estimate is zero"""
    pass


class SelectedSetTooLarge(VarianceError):
    """Raised when refitted cross-validation selects too many features to refit"""

    def __init__(self, selected: int, half_size: int):
        super().__init__(
            f"Selected {selected} feature(s) on a half-sample of size {half_size}; "
            f"OLS refit needs fewer than {half_size - 1}"
        )
        self.selected = selected
        self.half_size = half_size


class QuadratureNotConverged(PenScoreError):
    """Raised when adaptive quadrature cannot reach the requested tolerance"""
    pass


class ShiftIdentityViolation(PenScoreError):
    """Raised when the shifted-score identity fails beyond tolerance"""
    pass
