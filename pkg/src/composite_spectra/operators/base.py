from typing import Any, Sequence

from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from composite_spectra.operators.types import BasisTag, OperatorFamily
from composite_spectra.precision import BigReal, PrecisionContext


class OperatorSpec(BaseModel):
    """
    Symbolic description of an operator section: the family, its parameters and
    the truncation sizes. Composites chain as outer after inner.
    """

    model_config = ConfigDict(frozen=True)

    family: OperatorFamily
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)
    theta: float | None = Field(default=None, gt=0)
    k: int | None = Field(default=None, ge=1)
    quadrature: int | None = Field(default=None, ge=1)
    outer: "OperatorSpec | None" = None
    inner: "OperatorSpec | None" = None

    @model_validator(mode="after")
    def check_family_parameters(self) -> "OperatorSpec":
        if self.family == OperatorFamily.MULTIPLICATION and self.theta is None:
            raise ValueError("A multiplication operator needs 'theta'.")
        if self.family == OperatorFamily.EMBEDDING and self.k is None:
            raise ValueError("An embedding model needs 'k'.")
        if self.family == OperatorFamily.COMPOSITE:
            if self.outer is None or self.inner is None:
                raise ValueError("A composite needs both 'outer' and 'inner'.")
            if self.inner.rows != self.outer.cols:
                raise ValueError(
                    f"Composite does not chain: inner has {self.inner.rows} rows, "
                    f"outer has {self.outer.cols} columns."
                )
            if self.rows != self.outer.rows or self.cols != self.inner.cols:
                raise ValueError(
                    f"Composite is {self.rows}x{self.cols} but its factors give "
                    f"{self.outer.rows}x{self.inner.cols}."
                )
        elif self.outer is not None or self.inner is not None:
            raise ValueError(f"Only composites have factors, not {self.family.value}.")
        return self

    @classmethod
    def integration(cls, n: int) -> "OperatorSpec":
        return cls(family=OperatorFamily.INTEGRATION, rows=n, cols=n)

    @classmethod
    def hausdorff(cls, rows: int, cols: int) -> "OperatorSpec":
        return cls(family=OperatorFamily.HAUSDORFF, rows=rows, cols=cols)

    @classmethod
    def multiplication(
        cls, theta: float, n: int, quadrature: int | None = None
    ) -> "OperatorSpec":
        return cls(
            family=OperatorFamily.MULTIPLICATION,
            rows=n,
            cols=n,
            theta=theta,
            quadrature=quadrature,
        )

    @classmethod
    def embedding(cls, k: int, n: int) -> "OperatorSpec":
        return cls(family=OperatorFamily.EMBEDDING, rows=n, cols=n, k=k)

    @classmethod
    def composite(cls, outer: "OperatorSpec", inner: "OperatorSpec") -> "OperatorSpec":
        return cls(
            family=OperatorFamily.COMPOSITE,
            rows=outer.rows,
            cols=inner.cols,
            outer=outer,
            inner=inner,
        )

    @classmethod
    def hausdorff_j(cls, rows: int, cols: int) -> "OperatorSpec":
        return cls.composite(cls.hausdorff(rows, cols), cls.integration(cols))

    @classmethod
    def mult_j(
        cls, theta: float, n: int, quadrature: int | None = None
    ) -> "OperatorSpec":
        return cls.composite(
            cls.multiplication(theta, n, quadrature), cls.integration(n)
        )

    @classmethod
    def hausdorff_e(cls, rows: int, cols: int, k: int) -> "OperatorSpec":
        return cls.composite(cls.hausdorff(rows, cols), cls.embedding(k, cols))

    def is_pair(self, outer: OperatorFamily, inner: OperatorFamily) -> bool:
        return (
            self.family == OperatorFamily.COMPOSITE
            and self.outer is not None
            and self.inner is not None
            and self.outer.family == outer
            and self.inner.family == inner
        )

    def resized(self, n: int) -> "OperatorSpec":
        """Same operator with n columns; the row count keeps its ratio to the columns."""
        rows = max(1, round(n * self.rows / self.cols))
        if self.family != OperatorFamily.COMPOSITE:
            return self.model_copy(update={"rows": rows, "cols": n})
        assert self.inner is not None and self.outer is not None
        inner = self.inner.resized(n)
        return OperatorSpec.composite(self.outer.resized(inner.rows), inner)

    def label(self) -> str:
        if self.family == OperatorFamily.COMPOSITE:
            assert self.outer is not None and self.inner is not None
            return f"{self.outer.label()}*{self.inner.label()}"
        return self.family.value


class DenseMatrix(BaseModel):
    """
    A rows x cols matrix of BigReal. Row and column basis tags say which
    coordinate spaces the matrix maps between; products check them.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: tuple[tuple[Any, ...], ...]
    row_basis: BasisTag
    col_basis: BasisTag
    bits: int
    reliable: bool = True

    @model_validator(mode="after")
    def check_shape(self) -> "DenseMatrix":
        if not self.entries or not self.entries[0]:
            raise ValueError("A matrix needs at least one row and one column.")
        width = len(self.entries[0])
        mp = self.precision.mp
        for index, row in enumerate(self.entries):
            if len(row) != width:
                raise ValueError(
                    f"Row {index + 1} has {len(row)} entries, expected {width}."
                )
            if not all(mp.isfinite(value) for value in row):
                raise ValueError(f"Row {index + 1} has a non-finite entry.")
        return self

    @field_serializer("entries")
    def serialize_entries(self, entries: tuple[tuple[Any, ...], ...]) -> list:
        return [[self.precision.to_decimal(v) for v in row] for row in entries]

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Sequence[Any]],
        row_basis: BasisTag,
        col_basis: BasisTag,
        precision: PrecisionContext,
        reliable: bool = True,
    ) -> "DenseMatrix":
        mp = precision.mp
        return cls(
            entries=tuple(tuple(mp.mpf(v) for v in row) for row in rows),
            row_basis=row_basis,
            col_basis=col_basis,
            bits=precision.bits,
            reliable=reliable,
        )

    @classmethod
    def identity(
        cls, n: int, basis: BasisTag, precision: PrecisionContext
    ) -> "DenseMatrix":
        return cls.diagonal([1] * n, basis, basis, precision)

    @classmethod
    def diagonal(
        cls,
        values: Sequence[Any],
        row_basis: BasisTag,
        col_basis: BasisTag,
        precision: PrecisionContext,
    ) -> "DenseMatrix":
        n = len(values)
        return cls.from_rows(
            [[values[i] if i == j else 0 for j in range(n)] for i in range(n)],
            row_basis,
            col_basis,
            precision,
        )

    @property
    def precision(self) -> PrecisionContext:
        return PrecisionContext.for_bits(self.bits)

    @property
    def rows(self) -> int:
        return len(self.entries)

    @property
    def cols(self) -> int:
        return len(self.entries[0])

    def __getitem__(self, index: tuple[int, int]) -> BigReal:
        i, j = index
        return self.entries[i][j]

    def column(self, j: int) -> list[BigReal]:
        return [row[j] for row in self.entries]

    def columns(self) -> list[list[BigReal]]:
        return [list(column) for column in zip(*self.entries)]

    def transpose(self) -> "DenseMatrix":
        return DenseMatrix(
            entries=tuple(zip(*self.entries)),
            row_basis=self.col_basis,
            col_basis=self.row_basis,
            bits=self.bits,
            reliable=self.reliable,
        )

    def submatrix(self, rows: int, cols: int) -> "DenseMatrix":
        """Leading rows x cols block."""
        return self.model_copy(
            update={"entries": tuple(row[:cols] for row in self.entries[:rows])}
        )

    def max_abs(self) -> BigReal:
        return max(abs(v) for row in self.entries for v in row)

    def gram(self) -> list[list[BigReal]]:
        """M^T M as nested lists."""
        mp = self.precision.mp
        columns = self.columns()
        n = len(columns)
        gram = [[mp.mpf(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i, n):
                gram[i][j] = gram[j][i] = mp.fdot(columns[i], columns[j])
        return gram

    def to_mp(self) -> Any:
        return self.precision.mp.matrix([list(row) for row in self.entries])
