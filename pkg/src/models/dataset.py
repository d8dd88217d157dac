"""
Dataset model
Standardized design matrix and centred response shared by every test
"""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.core.errors import IndexOutOfRange, InputError, NonFiniteInput, ZeroVarianceColumn

# Relative tolerance for the centring / scaling invariants
STANDARDIZATION_TOL = 1e-9


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.asfortranarray(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Dataset:
    """Standardized features X (x_j'1 = 0, x_j'x_j = n) and centred response y"""

    X: np.ndarray
    y: np.ndarray
    names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise InputError(f"Design must be two-dimensional, got shape {X.shape}")
        n, d = X.shape
        if y.shape[0] != n:
            raise InputError(f"Response has {y.shape[0]} entries but design has {n} rows")
        if n < 2 or d < 1:
            raise InputError(f"Need n >= 2 and d >= 1, got n={n}, d={d}")
        if not np.all(np.isfinite(X)):
            raise NonFiniteInput("design matrix")
        if not np.all(np.isfinite(y)):
            raise NonFiniteInput("response")

        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(d))
        if len(names) != d:
            raise InputError(f"Got {len(names)} column name(s) for {d} feature(s)")

        col_sums = X.sum(axis=0)
        col_ss = np.einsum("ij,ij->j", X, X)
        if np.any(np.abs(col_sums) > STANDARDIZATION_TOL * n) or \
                np.any(np.abs(col_ss - n) > STANDARDIZATION_TOL * n):
            raise InputError("Design columns are not standardized (use standardize())")
        y_scale = max(float(np.std(y)), 1.0)
        if abs(y.sum()) > STANDARDIZATION_TOL * n * y_scale:
            raise InputError("Response is not centred (use standardize())")

        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def with_response(self, raw_y: np.ndarray) -> "Dataset":
        """
        Return a copy of this dataset with a new (centred) response

        Args:
            raw_y: Length-n response in original units

        Returns:
            Dataset sharing X and names
        """
        raw_y = np.asarray(raw_y, dtype=float).ravel()
        if not np.all(np.isfinite(raw_y)):
            raise NonFiniteInput("response")
        return Dataset(self.X, raw_y - raw_y.mean(), self.names)

    def columns(self, indices: Sequence[int]) -> np.ndarray:
        """Sub-design with the given columns, in the given order"""
        indices = list(indices)
        for j in indices:
            if not 0 <= j < self.d:
                raise IndexOutOfRange(j, self.d)
        return np.asfortranarray(self.X[:, indices])

    def index_of(self, name: str) -> int:
        """Column index of a feature by (case-insensitive) name"""
        for j, label in enumerate(self.names):
            if label.lower() == name.lower():
                return j
        raise KeyError(f"No feature named '{name}'")


@dataclass(frozen=True)
class FeatureSplit:
    """Feature under test x and the remaining columns Z"""

    x: np.ndarray
    Z: np.ndarray
    j: int
    name: str = ""

    @property
    def n(self) -> int:
        return self.x.shape[0]


def standardize(raw_X: np.ndarray, raw_y: np.ndarray,
                names: Optional[Sequence[str]] = None) -> Dataset:
    """
    Centre the response and scale each feature so that x_j'1 = 0 and x_j'x_j = n

    The response is centred but never rescaled.

    Args:
        raw_X: n x d raw design
        raw_y: Length-n raw response
        names: Optional column labels

    Returns:
        A Dataset satisfying the standardization invariants

    Raises:
        NonFiniteInput: If any entry is NaN or infinite
        ZeroVarianceColumn: If a column is constant
    """
    X = np.asarray(raw_X, dtype=float)
    y = np.asarray(raw_y, dtype=float).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    if n < 2:
        raise InputError(f"Need at least two samples, got {n}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("design matrix")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("response")

    centred = X - X.mean(axis=0)
    sum_sq = np.einsum("ij,ij->j", centred, centred)
    scale_floor = (n * np.finfo(float).eps * np.maximum(np.abs(X).max(axis=0), 1e-300)) ** 2
    for j in np.flatnonzero(sum_sq <= scale_floor):
        label = names[j] if names is not None else None
        raise ZeroVarianceColumn(int(j), label)

    X_std = centred * np.sqrt(n / sum_sq)
    return Dataset(X_std, y - y.mean(), tuple(names) if names is not None else ())


def split(dataset: Dataset, j: int) -> FeatureSplit:
    """
    Hold out feature j

    Args:
        dataset: The standardized dataset
        j: Index of the feature under test

    Returns:
        FeatureSplit with x = column j and Z = the other columns in original order

    Raises:
        IndexOutOfRange: If j is not a valid column
    """
    if not 0 <= j < dataset.d:
        raise IndexOutOfRange(j, dataset.d)
    Z = np.asfortranarray(np.delete(dataset.X, j, axis=1))
    return FeatureSplit(np.array(dataset.X[:, j]), Z, j, dataset.names[j])
