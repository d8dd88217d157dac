"""
Tabular data loading
Reads numeric CSV files and the bundled diabetes data into raw arrays
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from src.core.errors import CsvFormatError, InputError, NonFiniteInput
from src.models.dataset import Dataset, standardize

logger = logging.getLogger(__name__)

DIABETES_NAMES = ("AGE", "SEX", "BMI", "MAP", "TC", "LDL", "HDL", "TCH", "LTG", "GLU")

RawTable = Tuple[np.ndarray, np.ndarray, List[str]]


def _parse_cell(cell: str) -> float:
    """Correctly rounded value of one cell, NaN when it is not a plain number"""
    text = cell.strip()
    if "_" in text:
        return np.nan
    try:
        return float(text)
    except ValueError:
        return np.nan


class CsvDatasetReader:
    """Parse a header-first numeric CSV with one designated response column"""

    def __init__(self, response: Optional[str] = None):
        """
        Initialize the reader

        Args:
            response: Response column name; the last column when omitted
        """
        self.response = response

    def read_frame(self, path: Path) -> pd.DataFrame:
        """
        Read every cell as text and convert to numbers

        Args:
            path: CSV file (comma separated, '.' decimal point, UTF-8)

        Returns:
            DataFrame of floats

        Raises:
            CsvFormatError: On the first cell that is not a number
        """
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        if raw.shape[1] < 2:
            raise InputError(f"{path}: need a response and at least one feature column")

        frame = raw.apply(lambda col: col.map(_parse_cell)).astype(float)
        bad = frame.isna().to_numpy()
        if bad.any():
            row, col = map(int, np.argwhere(bad)[0])
            # +2: one-based numbering plus the header line
            raise CsvFormatError(row + 2, str(raw.columns[col]), raw.iat[row, col], str(path))
        return frame.astype(float)

    def read(self, path: Path) -> RawTable:
        """
        Load a CSV into raw arrays

        Returns:
            (raw_X, raw_y, feature names)
        """
        path = Path(path)
        frame = self.read_frame(path)
        response = self.response if self.response is not None else frame.columns[-1]
        if response not in frame.columns:
            raise InputError(f"{path}: no response column '{response}' "
                             f"(columns: {', '.join(frame.columns)})")

        features = [c for c in frame.columns if c != response]
        raw_X = frame[features].to_numpy()
        raw_y = frame[response].to_numpy()
        if not np.all(np.isfinite(raw_X)) or not np.all(np.isfinite(raw_y)):
            raise NonFiniteInput(str(path))
        logger.info(f"Loaded {path.name}: n={len(raw_y)}, d={len(features)}, response '{response}'")
        return raw_X, raw_y, features

    def load(self, path: Path) -> Dataset:
        """Read and standardize a CSV file"""
        raw_X, raw_y, names = self.read(path)
        return standardize(raw_X, raw_y, names)


def load_diabetes_raw() -> RawTable:
    """
    The 442 x 10 diabetes data in original units

    The response is disease progression one year after baseline.

    Returns:
        (raw_X, raw_y, names)
    """
    from sklearn.datasets import load_diabetes

    bunch = load_diabetes(scaled=False)
    return np.asarray(bunch.data, dtype=float), np.asarray(bunch.target, dtype=float), list(DIABETES_NAMES)


def load_diabetes_dataset() -> Dataset:
    """Standardized diabetes dataset with the conventional column labels"""
    raw_X, raw_y, names = load_diabetes_raw()
    logger.info(f"Loaded diabetes data: n={len(raw_y)}, d={len(names)}")
    return standardize(raw_X, raw_y, names)


def write_csv(path: Path, raw_X: np.ndarray, raw_y: np.ndarray, names: List[str],
              response: str = "y") -> None:
    """Write raw arrays as a header-first CSV with the response last"""
    frame = pd.DataFrame(np.asarray(raw_X, dtype=float), columns=list(names))
    frame[response] = np.asarray(raw_y, dtype=float)
    frame.to_csv(path, index=False, float_format="%.17g")
