"""
Result serialization
CSV and JSON tables plus the run manifest written by every command
"""
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src import __version__

logger = logging.getLogger(__name__)

# Enough digits to read back the same double
FLOAT_FORMAT = "%.17g"


def file_checksum(path: Path) -> str:
    """SHA-256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _plain(value):
    """JSON-friendly version of flag values; NaN and infinities become None"""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


@dataclass
class RunManifest:
    """Everything needed to repeat a run"""

    command: str
    flags: Dict
    input_checksums: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @classmethod
    def for_run(cls, command: str, flags: Dict, inputs: Sequence[Path] = (),
                seed: Optional[int] = None) -> "RunManifest":
        checksums = {str(p): file_checksum(Path(p)) for p in inputs}
        return cls(command, _plain(dict(flags)), checksums, seed)

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), indent=2, sort_keys=True, allow_nan=False)


class OutputWriter:
    """Writes a table as CSV and JSON under a prefix, or CSV to stdout"""

    def __init__(self, prefix: Optional[str] = None, manifest_path: Optional[str] = None):
        self.prefix = Path(prefix) if prefix else None
        self.manifest_path = Path(manifest_path) if manifest_path else None
        self.written: List[Path] = []

    def write_table(self, rows: List[Dict], extra: Optional[Dict] = None):
        """
        Write one table

        Args:
            rows: Records with identical keys
            extra: Additional top-level JSON members
        """
        frame = pd.DataFrame(rows)
        if self.prefix is None:
            frame.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            return

        self.prefix.parent.mkdir(parents=True, exist_ok=True)
        csv_path = self.prefix.with_name(self.prefix.name + ".csv")
        json_path = self.prefix.with_name(self.prefix.name + ".json")
        frame.to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        document = dict(_plain(extra or {}))
        document["rows"] = _plain(rows)
        with open(json_path, "w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2, allow_nan=False)
        self.written += [csv_path, json_path]
        logger.info(f"Wrote {csv_path} and {json_path}")

    def write_manifest(self, manifest: RunManifest):
        """Manifest next to the outputs, at --manifest, or to the log"""
        if self.prefix is not None:
            path = self.prefix.with_name(self.prefix.name + ".manifest.json")
        else:
            path = self.manifest_path
        if path is None:
            logger.info(f"Run manifest:\n{manifest.to_json()}")
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.to_json() + "\n", encoding="utf-8")
        self.written.append(path)
