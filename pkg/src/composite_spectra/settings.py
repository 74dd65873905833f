import os
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings

from composite_spectra.kernels import KernelTag
from composite_spectra.operators.base import OperatorSpec
from composite_spectra.precision import DEFAULT_BITS, MIN_BITS

DEFAULT_OUTPUT_DIR = "results"

Command = Literal["spectrum", "hilbert", "kernel", "modulus", "rates", "verify"]
Family = Literal[
    "integration",
    "hausdorff",
    "multiplication",
    "embedding",
    "bh-j",
    "mult-j",
    "hausdorff-e",
]
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]


class PrecisionSettings(BaseSettings):
    """
    Default working precision.
    """

    bits: int = Field(default=DEFAULT_BITS, ge=MIN_BITS, validation_alias="SPECTRA_BITS")


class OutputSettings(BaseSettings):
    """
    Where artifacts go and how runs are logged.
    """

    output_dir: Path = Field(
        default=Path(DEFAULT_OUTPUT_DIR), validation_alias="SPECTRA_OUTPUT_DIR"
    )
    cache: bool = Field(default=True, validation_alias="SPECTRA_CACHE")
    log_level: LogLevel = Field(default="INFO", validation_alias="SPECTRA_LOG_LEVEL")


class ExperimentConfig(BaseModel):
    """
    One run of the laboratory. Loaded from a JSON file and overridden by
    command-line flags; unset sizes fall back to per-command defaults.
    """

    model_config = ConfigDict(extra="forbid")

    command: Command
    family: Family = "bh-j"
    theta: float = Field(default=1.0, gt=0)
    k: int = Field(default=1, ge=1)
    n: int | None = Field(default=None, ge=1)
    rows: int | None = Field(default=None, ge=1)
    cols: int | None = Field(default=None, ge=1)
    quadrature: int | None = Field(default=None, ge=1)
    bits: int = Field(default=DEFAULT_BITS, ge=MIN_BITS)
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    cache: bool = True
    tag: KernelTag = KernelTag.HAUSDORFF_J
    grid: int = Field(default=101, ge=2)
    deltas: list[float] | None = None
    delta_max: float = Field(default=1e-1, gt=0, lt=1)
    delta_min: float = Field(default=1e-6, gt=0, lt=1)
    delta_points: int = Field(default=11, ge=2)
    pair: Literal["j", "embedding"] = "j"
    quick: bool = False
    export_matrix: bool = False

    @model_validator(mode="after")
    def check_ranges(self) -> "ExperimentConfig":
        if self.delta_min >= self.delta_max:
            raise ValueError("'delta_min' must be smaller than 'delta_max'.")
        if self.deltas is not None and any(d <= 0 for d in self.deltas):
            raise ValueError("All 'deltas' must be positive.")
        if self.rows is not None and self.cols is not None:
            if self.family in ("integration", "multiplication", "mult-j") and self.rows != self.cols:
                raise ValueError(f"Family '{self.family}' needs rows == cols.")
        return self

    @model_validator(mode="after")
    def check_output_dir(self) -> "ExperimentConfig":
        target = self.output_dir
        while not target.exists() and target != target.parent:
            target = target.parent
        if not target.is_dir() or not os.access(target, os.W_OK):
            raise ValueError(f"Output directory '{self.output_dir}' is not writable.")
        return self

    def section_cols(self, default: int) -> int:
        return self.cols or self.n or default

    def section_rows(self, cols: int) -> int:
        if self.rows is not None:
            return self.rows
        if self.family in ("bh-j", "hausdorff-e"):
            return 3 * cols
        return cols

    def operator_spec(self, default_cols: int) -> OperatorSpec:
        cols = self.section_cols(default_cols)
        rows = self.section_rows(cols)
        if self.family == "integration":
            return OperatorSpec.integration(cols)
        elif self.family == "hausdorff":
            return OperatorSpec.hausdorff(rows, cols)
        elif self.family == "multiplication":
            return OperatorSpec.multiplication(self.theta, cols, self.quadrature)
        elif self.family == "embedding":
            return OperatorSpec.embedding(self.k, cols)
        elif self.family == "bh-j":
            return OperatorSpec.hausdorff_j(rows, cols)
        elif self.family == "mult-j":
            return OperatorSpec.mult_j(self.theta, cols, self.quadrature)
        elif self.family == "hausdorff-e":
            return OperatorSpec.hausdorff_e(rows, cols, self.k)
        else:
            raise ValueError(f"Unsupported operator family: {self.family}")

    def delta_grid(self) -> list[float]:
        """Decreasing grid, log-spaced between delta_max and delta_min unless given."""
        if self.deltas is not None:
            return sorted(self.deltas, reverse=True)
        grid = np.logspace(
            np.log10(self.delta_max), np.log10(self.delta_min), self.delta_points
        )
        return [float(x) for x in grid]

    def cache_payload(self) -> dict:
        return self.model_dump(mode="json", exclude={"output_dir", "cache"})
