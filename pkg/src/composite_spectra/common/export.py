"""
Artifact writers. Numbers go out as decimal strings with the full number of
digits of their precision; consumers round.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel

from composite_spectra.operators.base import DenseMatrix
from composite_spectra.precision import PrecisionContext

logger = logging.getLogger(__name__)

SPECTRUM_HEADER = ("index", "sigma")
KERNEL_HEADER = ("s", "t", "value")
MODULUS_HEADER = ("delta", "omega")
HILBERT_HEADER = ("n", "inv_norm", "log_rate")
MATRIX_HEADER = ("row", "col", "value")
VERIFY_HEADER = ("criterion", "measured", "expected", "passed")


def format_value(value: Any, precision: PrecisionContext) -> str:
    if isinstance(value, (bool, int, str)):
        return str(value)
    return precision.to_decimal(value)


def write_csv(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    precision: PrecisionContext,
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value, precision) for value in row])
    logger.info(f"Wrote {path}")
    return path


def write_json(path: Path, payload: BaseModel) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def write_matrix_csv(path: Path, matrix: DenseMatrix) -> Path:
    """Row-major (row, col, value) layout with 1-based indices."""
    rows = (
        (i + 1, j + 1, value)
        for i, row in enumerate(matrix.entries)
        for j, value in enumerate(row)
    )
    return write_csv(path, MATRIX_HEADER, rows, matrix.precision)
