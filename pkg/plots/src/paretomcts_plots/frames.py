"""Loading and validation of benchmark summary CSVs.

The expected schema is one row per (configuration, algorithm):
config_id, algorithm, r_hat, c_hat, cost_std, sat_m, sat_w, mean_samples.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

REQUIRED_COLUMNS = (
    "config_id",
    "algorithm",
    "r_hat",
    "c_hat",
    "cost_std",
    "sat_m",
    "sat_w",
    "mean_samples",
)


class SchemaError(ValueError):
    """Raised when a CSV does not conform to the summary schema."""


@dataclass(frozen=True)
class SummaryRow:
    """One configuration's aggregate metrics for one algorithm."""

    config_id: str
    algorithm: str
    r_hat: float
    c_hat: float
    cost_std: float
    sat_m: bool
    sat_w: bool
    mean_samples: float


def load_summary(text: str, source: str = "<string>") -> list[SummaryRow]:
    """Parse summary CSV text, reporting any missing columns."""
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [col for col in REQUIRED_COLUMNS if col not in header]
    if missing:
        raise SchemaError(f"{source}: missing summary columns {missing}")
    rows = [
        SummaryRow(
            config_id=row["config_id"],
            algorithm=row["algorithm"],
            r_hat=float(row["r_hat"]),
            c_hat=float(row["c_hat"]),
            cost_std=float(row["cost_std"]),
            sat_m=bool(int(row["sat_m"])),
            sat_w=bool(int(row["sat_w"])),
            mean_samples=float(row["mean_samples"]),
        )
        for row in reader
    ]
    if not rows:
        raise SchemaError(f"{source}: summary CSV contains no rows")
    return rows


def load_summary_files(paths: Sequence) -> dict[str, list[SummaryRow]]:
    """Load several summary CSVs, keyed by file stem, in argument order."""
    frames: dict[str, list[SummaryRow]] = {}
    for path in paths:
        path = Path(path)
        frames[path.stem] = load_summary(path.read_text(), source=str(path))
    return frames
