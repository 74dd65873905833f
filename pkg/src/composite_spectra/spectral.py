"""
Singular spectra of operator sections: one-sided Jacobi SVD at working
precision, Hilbert-Schmidt tails of the Hausdorff-after-integration operator,
decay fits and the Hilbert-matrix conditioning laws.
"""

import logging
from typing import Any, Literal, Sequence

import numpy as np
from mpmath import MPContext
from pydantic import BaseModel, ConfigDict, Field, field_serializer, model_validator

from composite_spectra.legendre import monomial_moments
from composite_spectra.operators.assembly import (
    assemble_bh_j,
    assemble_hausdorff,
    hilbert_inverse,
    hilbert_segment,
)
from composite_spectra.operators.base import DenseMatrix, OperatorSpec
from composite_spectra.operators.factory import create_operator
from composite_spectra.operators.types import OperatorFamily
from composite_spectra.precision import (
    GUARD_BITS,
    BigReal,
    PrecisionContext,
    digamma_second,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_SWEEPS = 60
# Row/column ratio above which the Jacobi sweeps run on the R factor of a QR.
QR_CROSSOVER = 5 / 3
TAIL_ROWS = 200_000
TAIL_CHUNK = 20_000


class SpectrumReport(BaseModel):
    """
    Singular values of a section in non-increasing order with the diagnostics
    of the Jacobi run. ``orthogonality_residual`` is the largest column cosine
    seen in the final sweep.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sigmas: tuple[Any, ...]
    spec: OperatorSpec | None = None
    n: int
    rows: int
    precision_bits: int
    orthogonality_residual: Any
    sweeps: int
    converged: bool
    reliable: bool
    right_vectors: tuple[tuple[Any, ...], ...] | None = Field(
        default=None, exclude=True
    )

    @model_validator(mode="after")
    def check_order(self) -> "SpectrumReport":
        for a, b in zip(self.sigmas, self.sigmas[1:]):
            if b > a:
                raise ValueError("Singular values must be sorted non-increasing.")
        return self

    @field_serializer("sigmas")
    def serialize_sigmas(self, sigmas: tuple[Any, ...]) -> list[str]:
        precision = PrecisionContext.for_bits(self.precision_bits)
        return [precision.to_decimal(s) for s in sigmas]

    @field_serializer("orthogonality_residual")
    def serialize_residual(self, residual: Any) -> str:
        return PrecisionContext.for_bits(self.precision_bits).to_decimal(residual)

    def rounded(self, precision: PrecisionContext) -> "SpectrumReport":
        """The same report with its numbers rounded to ``precision``."""
        mp = precision.mp
        return self.model_copy(
            update={
                "sigmas": tuple(mp.mpf(s) for s in self.sigmas),
                "orthogonality_residual": mp.mpf(self.orthogonality_residual),
                "precision_bits": precision.bits,
                "right_vectors": None,
            }
        )


class DecayFit(BaseModel):
    """
    Straight-line fit of ln sigma_i against ln i (power) or i (exponential)
    over a 1-based inclusive index window.
    """

    model: Literal["power", "exponential"]
    exponent: float
    log_constant: float
    window: tuple[int, int]
    residual: float
    suggests_exponential: bool = False

    @model_validator(mode="after")
    def check_window(self) -> "DecayFit":
        start, stop = self.window
        if start < 1 or stop - start + 1 < 5:
            raise ValueError(f"A decay fit needs at least 5 indices, got {self.window}")
        return self


class HsTail(BaseModel):
    """
    ||A (I - Q_n)||_HS^2 for A the Hausdorff moment operator after integration.
    ``value`` sums the first ``terms`` rows, ``width`` bounds the rest.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n: int
    terms: int
    value: Any
    width: Any
    bits: int

    @field_serializer("value", "width")
    def serialize_value(self, value: Any) -> str:
        return PrecisionContext.for_bits(self.bits).to_decimal(value)

    @property
    def upper(self) -> BigReal:
        return self.value + self.width


class PointwiseBound(BaseModel):
    """s_i <= sqrt(constant) * i^(-exponent), from a tail bound C n^(-2 kappa)."""

    constant: float
    exponent: float

    @property
    def prefactor(self) -> float:
        return float(np.sqrt(self.constant))

    def bound(self, i: int) -> float:
        return self.prefactor * i ** (-self.exponent)


def _householder_r(
    columns: list[list[BigReal]], mp: MPContext, pivot: bool = False
) -> list[list[BigReal]]:
    """
    Columns of the square R factor of a tall matrix given by its columns. With
    ``pivot`` the remaining column of largest norm is moved forward at each
    step, so the rows of R are graded.
    """
    height = len(columns[0])
    width = len(columns)
    a = [list(c) for c in columns]
    for k in range(width):
        if pivot:
            best = max(range(k, width), key=lambda j: mp.fdot(a[j][k:], a[j][k:]))
            a[k], a[best] = a[best], a[k]
        x = a[k][k:]
        norm = mp.sqrt(mp.fdot(x, x))
        if norm == 0:
            continue
        alpha = -norm if x[0] >= 0 else norm
        v = list(x)
        v[0] -= alpha
        vv = mp.fdot(v, v)
        for j in range(k + 1, width):
            tail = a[j][k:]
            f = 2 * mp.fdot(v, tail) / vv
            a[j][k:] = [t - f * vi for t, vi in zip(tail, v)]
        a[k][k:] = [alpha] + [mp.mpf(0)] * (height - k - 1)
    return [column[:width] for column in a]


def _rotate(
    a: list[BigReal], b: list[BigReal], c: BigReal, s: BigReal
) -> tuple[list[BigReal], list[BigReal]]:
    return (
        [c * x - s * y for x, y in zip(a, b)],
        [s * x + c * y for x, y in zip(a, b)],
    )


def _jacobi(
    columns: list[list[BigReal]],
    vectors: list[list[BigReal]] | None,
    mp: MPContext,
    tolerance: BigReal,
    max_sweeps: int,
) -> tuple[int, bool, BigReal]:
    n = len(columns)
    residual = mp.mpf(0)
    for sweep in range(1, max_sweeps + 1):
        norms = [mp.fdot(c, c) for c in columns]
        off = mp.mpf(0)
        rotations = 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha, beta = norms[p], norms[q]
                if alpha == 0 or beta == 0:
                    continue
                gamma = mp.fdot(columns[p], columns[q])
                cosine = abs(gamma) / mp.sqrt(alpha * beta)
                if cosine > off:
                    off = cosine
                if cosine <= tolerance:
                    continue
                zeta = (beta - alpha) / (2 * gamma)
                if zeta == 0:
                    t = mp.mpf(1)
                else:
                    t = mp.sign(zeta) / (abs(zeta) + mp.sqrt(1 + zeta * zeta))
                c = 1 / mp.sqrt(1 + t * t)
                s = c * t
                columns[p], columns[q] = _rotate(columns[p], columns[q], c, s)
                if vectors is not None:
                    vectors[p], vectors[q] = _rotate(vectors[p], vectors[q], c, s)
                norms[p] = alpha - t * gamma
                norms[q] = beta + t * gamma
                rotations += 1
        residual = off
        logger.debug(
            f"Jacobi sweep {sweep}: {rotations} rotations, max cosine {mp.nstr(off, 5)}"
        )
        if off <= tolerance:
            return sweep, True, residual
    return max_sweeps, False, residual


def svd(
    matrix: DenseMatrix,
    spec: OperatorSpec | None = None,
    compute_vectors: bool = False,
    max_sweeps: int | None = None,
) -> SpectrumReport:
    """
    One-sided Jacobi SVD at the precision of the matrix. Wide matrices are
    transposed. Without vectors the sweeps run on the rows of the R factor of a
    column-pivoted QR, which have the same singular values and are close to
    orthogonal for graded spectra; with vectors tall matrices are reduced to
    their unpivoted R factor. The report is flagged unreliable when the sweeps
    hit their cap or the final column cosines are not below 2^(-bits/2).
    :param matrix: The section to decompose.
    :param spec: The operator the section belongs to, copied into the report.
    :param compute_vectors: Accumulate right singular vectors (rows >= cols only).
    :param max_sweeps: Sweep cap, max(DEFAULT_MAX_SWEEPS, cols) when omitted.
    """
    precision = matrix.precision
    mp = precision.mp
    transposed = matrix.cols > matrix.rows
    if transposed:
        columns = [list(row) for row in matrix.entries]
        if compute_vectors:
            logger.warning("Right singular vectors are not accumulated for wide matrices")
            compute_vectors = False
    else:
        columns = matrix.columns()
    height = len(columns[0])
    width = len(columns)
    if not compute_vectors:
        r_columns = _householder_r(columns, mp, pivot=True)
        columns = [[column[i] for column in r_columns] for i in range(width)]
        height = width
    elif height > QR_CROSSOVER * width:
        columns = _householder_r(columns, mp)
        height = width
    cap = max_sweeps if max_sweeps is not None else max(DEFAULT_MAX_SWEEPS, width)

    order = sorted(range(width), key=lambda j: -mp.fdot(columns[j], columns[j]))
    columns = [columns[j] for j in order]
    vectors = None
    if compute_vectors:
        vectors = [
            [mp.mpf(1) if r == order[k] else mp.mpf(0) for r in range(width)]
            for k in range(width)
        ]

    tolerance = mp.eps * height
    sweeps, converged, residual = _jacobi(columns, vectors, mp, tolerance, cap)

    sigmas = [mp.sqrt(mp.fdot(c, c)) for c in columns]
    ranking = sorted(range(width), key=lambda j: -sigmas[j])
    reliable = (
        converged and residual < precision.tolerance(precision.bits // 2) and matrix.reliable
    )
    if not converged:
        logger.warning(
            f"Jacobi SVD of a {matrix.rows}x{matrix.cols} matrix did not converge "
            f"in {cap} sweeps (max cosine {mp.nstr(residual, 5)})"
        )
    elif not reliable:
        logger.warning(f"Spectrum of a {matrix.rows}x{matrix.cols} matrix is flagged unreliable")
    logger.info(
        f"Jacobi SVD of a {matrix.rows}x{matrix.cols} matrix took {sweeps} sweeps"
    )
    return SpectrumReport(
        sigmas=tuple(sigmas[j] for j in ranking),
        spec=spec,
        n=matrix.cols,
        rows=matrix.rows,
        precision_bits=precision.bits,
        orthogonality_residual=residual,
        sweeps=sweeps,
        converged=converged,
        reliable=reliable,
        right_vectors=(
            tuple(tuple(vectors[j]) for j in ranking) if vectors is not None else None
        ),
    )


def decay_bits(spec: OperatorSpec) -> float:
    """
    Bits lost per singular value index by sections with a Hausdorff factor:
    sigma_i decays like exp(-1.28 i) after integration and faster alone.
    Other families decay algebraically and need none.
    """
    if spec.is_pair(OperatorFamily.HAUSDORFF, OperatorFamily.INTEGRATION):
        return 2.0
    if spec.family == OperatorFamily.HAUSDORFF:
        return 3.0
    if spec.family == OperatorFamily.COMPOSITE:
        assert spec.outer is not None
        return decay_bits(spec.outer)
    return 0.0


def section_spectrum(spec: OperatorSpec, precision: PrecisionContext) -> SpectrumReport:
    """
    Singular values of the section described by spec. Exponentially decaying
    families are assembled and decomposed with decay_bits(spec) extra bits per
    column, so the trailing values are resolved; the report is rounded back
    to ``precision``.
    """
    extra = decay_bits(spec)
    working = precision.graded(spec.cols, extra) if extra else precision
    if working.bits != precision.bits:
        logger.info(
            f"Decomposing {spec.label()} {spec.rows}x{spec.cols} at {working.bits} bits"
        )
    report = svd(create_operator(spec, working), spec=spec)
    return report.rounded(precision) if working.bits != precision.bits else report


def hs_tail(
    spec: OperatorSpec, n: int, terms: int, precision: PrecisionContext
) -> HsTail:
    """
    Hilbert-Schmidt tail sum_{i>=n} ||(I - Q_n) h_i||^2 / (i^2 (2i+1)) with
    ||(I - Q_n) h_i||^2 = 1 - (2i+1) sum_{j<=n} <s^i, L_j>^2. The first ``terms``
    rows are summed; the remaining rows are bounded by -psi''(n + terms)/4.
    Near i = n the radicand is about 16^-n, so the sum runs with 4n guard bits.
    """
    if not spec.is_pair(OperatorFamily.HAUSDORFF, OperatorFamily.INTEGRATION):
        raise ValueError(
            f"hs_tail is defined for the Hausdorff moment operator after integration, got {spec.label()}"
        )
    if n < 1 or terms < 1:
        raise ValueError(f"hs_tail needs n >= 1 and terms >= 1, got n={n}, terms={terms}")
    wide = precision.widened(GUARD_BITS + 4 * n).mp
    contributions = []
    for i in range(n, n + terms):
        moments = monomial_moments(i, n, wide)
        residual = 1 - (2 * i + 1) * wide.fsum(m * m for m in moments)
        if residual < 0:
            residual = wide.mpf(0)
        contributions.append(residual / (wide.mpf(i) ** 2 * (2 * i + 1)))
    value = precision.mpf(wide.fsum(contributions))
    width = -digamma_second(n + terms, precision) / 4
    return HsTail(n=n, terms=terms, value=value, width=width, bits=precision.bits)


def tail_to_pointwise(constant: float, kappa: float) -> PointwiseBound:
    """
    Turn the tail bound sum_{i>n} s_i^2 <= C n^(-2 kappa) into the pointwise
    bound s_i^2 <= C 2^(1+2 kappa) i^-(1+2 kappa).
    """
    if constant <= 0 or kappa <= 0:
        raise ValueError(f"Need C > 0 and kappa > 0, got C={constant}, kappa={kappa}")
    return PointwiseBound(
        constant=constant * 2 ** (1 + 2 * kappa), exponent=(1 + 2 * kappa) / 2
    )


def _float_log(value: Any) -> float:
    mp = PrecisionContext.for_bits(64).mp
    return float(mp.log(mp.mpf(value)))


def default_window(count: int) -> tuple[int, int]:
    """Leading 80% of the indices; the section edge is biased by truncation."""
    return 1, int(count * 0.8)


def _line_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(np.polyval([slope, intercept], x) - y)))
    return float(slope), float(intercept), residual


def fit_decay(
    sigmas: Sequence[Any],
    window: tuple[int, int] | None = None,
    model: Literal["power", "exponential"] = "power",
) -> DecayFit:
    """
    Least-squares line through (ln i, ln sigma_i), or (i, ln sigma_i) for the
    exponential model. A power fit steeper than i^-6 whose residual grows with
    the window is marked as better described by an exponential.
    """
    start, stop = window or default_window(len(sigmas))
    if stop > len(sigmas):
        raise ValueError(f"Window {start}..{stop} exceeds {len(sigmas)} values")
    if stop - start + 1 < 5:
        raise ValueError(f"A decay fit needs at least 5 indices, got {start}..{stop}")
    values = sigmas[start - 1 : stop]
    if any(v <= 0 for v in values):
        raise ValueError(f"Non-positive singular value in window {start}..{stop}")
    index = np.arange(start, stop + 1, dtype=float)
    y = np.array([_float_log(v) for v in values])
    x = np.log(index) if model == "power" else index
    slope, intercept, residual = _line_fit(x, y)

    suggests_exponential = False
    if model == "power" and slope < -6:
        half = max(5, len(index) // 2)
        _, _, half_residual = _line_fit(x[:half], y[:half])
        if residual > half_residual:
            suggests_exponential = True
            logger.warning(
                f"Power fit exponent {slope:.3f} with residual growing over the "
                f"window {start}..{stop}; an exponential fit describes the data better"
            )
    return DecayFit(
        model=model,
        exponent=slope,
        log_constant=intercept,
        window=(start, stop),
        residual=residual,
        suggests_exponential=suggests_exponential,
    )


def section_stabilization(
    spec: OperatorSpec, sizes: Sequence[int], i: int, precision: PrecisionContext
) -> list[tuple[int, BigReal]]:
    """sigma_i of growing sections of one operator."""
    if not sizes or i < 1 or i > min(sizes):
        raise ValueError(f"Index {i} must lie in 1..min(sizes)")
    series = []
    for n in sorted(sizes):
        section = spec.resized(n)
        report = section_spectrum(section, precision)
        series.append((n, report.sigmas[i - 1]))
    for (n_a, a), (n_b, b) in zip(series, series[1:]):
        if b < a - precision.tolerance(24) * max(1, abs(a)):
            logger.warning(
                f"sigma_{i} decreased from n={n_a} to n={n_b}: "
                f"{precision.mp.nstr(a, 12)} -> {precision.mp.nstr(b, 12)}"
            )
    return series


def hilbert_inverse_norm(n: int, precision: PrecisionContext) -> BigReal:
    """||H_n^-1|| = 1/lambda_min(H_n), computed with escalated precision."""
    escalated = precision.escalated(n)
    report = svd(hilbert_segment(n, escalated))
    return precision.mpf(1 / report.sigmas[-1])


def hilbert_inverse_norm_exact(n: int, precision: PrecisionContext) -> BigReal:
    """Largest eigenvalue of the integer inverse of H_n."""
    escalated = precision.escalated(n)
    mp = escalated.mp
    eigenvalues = mp.eigsy(hilbert_inverse(n, escalated).to_mp(), eigvals_only=True)
    return precision.mpf(max(eigenvalues[i] for i in range(n)))


def hausdorff_section_identity(n: int, precision: PrecisionContext) -> BigReal:
    """
    sigma_n(P_n B) ||H_n^-1||^(1/2). The Hausdorff section is lower triangular,
    so P_n B is its n x n leading block and P_n B B* P_n = H_n; the product is 1.
    """
    escalated = precision.escalated(n)
    sigma = svd(assemble_hausdorff(n, n, escalated)).sigmas[n - 1]
    norm = hilbert_inverse_norm(n, escalated)
    return precision.mpf(sigma * escalated.mp.sqrt(norm))


def _numpy_gram_tail(first: int, last: int, cols: int) -> np.ndarray:
    """sum_{i=first}^{last} a_i a_i^T for the rows a_i of the Hausdorff-after-integration matrix."""
    total = np.zeros((cols, cols))
    for start in range(first, last + 1, TAIL_CHUNK):
        i = np.arange(start, min(start + TAIL_CHUNK, last + 1), dtype=float)
        block = np.empty((i.size, cols))
        block[:, 0] = 1.0 / (i + 1)
        ratio = 1.0 / (i + 1)
        for j in range(1, cols):
            ratio = ratio * (i - j + 1) / (i + j + 1)
            block[:, j] = -np.sqrt(2 * j + 1) * ratio / i
        total += block.T @ block
    return total


def row_tail_gram(
    rows: int, cols: int, precision: PrecisionContext, tail_rows: int = TAIL_ROWS
) -> list[list[BigReal]]:
    """
    A^T A for A = Hausdorff after integration with all rows, not only the first
    ``rows``. Column 1 holds 1/(i+1) and loses about 1/rows of its squared mass
    under truncation, while columns j >= 2 decay like i^-2. The (1, 1) tail is
    the Hurwitz value zeta(2, rows+2); the other tail entries are summed in
    float64 over ``tail_rows`` further rows and closed with their leading
    asymptotics sqrt(2j-1) i^-2.
    """
    mp = precision.mp
    gram = assemble_bh_j(rows, cols, precision).gram()
    last = rows + tail_rows
    tail = _numpy_gram_tail(rows + 1, last, cols)
    scale = [mp.mpf(1)] + [-mp.sqrt(2 * j - 1) for j in range(2, cols + 1)]
    zeta3 = mp.zeta(3, last + 1)
    zeta4 = mp.zeta(4, last + 1)
    for j in range(cols):
        for l in range(j, cols):
            if j == 0 and l == 0:
                correction = mp.zeta(2, rows + 2)
            else:
                remainder = zeta3 if j == 0 else zeta4
                correction = mp.mpf(float(tail[j, l])) + scale[j] * scale[l] * remainder
            gram[j][l] += correction
            if l != j:
                gram[l][j] = gram[j][l]
    logger.info(f"Row-tail compensated Gram matrix built for {rows} rows and {cols} columns")
    return gram


def gram_spectrum(rows: int, cols: int, precision: PrecisionContext) -> list[BigReal]:
    """Eigenvalues of :func:`row_tail_gram` in non-increasing order."""
    mp = precision.mp
    eigenvalues = mp.eigsy(mp.matrix(row_tail_gram(rows, cols, precision)), eigvals_only=True)
    return sorted((eigenvalues[i] for i in range(cols)), reverse=True)


def integration_singular_value(i: int, precision: PrecisionContext) -> BigReal:
    """sigma_i(J) = 2/((2i-1) pi)."""
    mp = precision.mp
    return 2 / ((2 * i - 1) * mp.pi)


class RatioBound(BaseModel):
    """sigma_i(A)/sigma_i(J) and the smallest K with ratio_i <= K i^(-1/2)."""

    ratios: tuple[float, ...]
    constant: float


def ratio_to_integration(report: SpectrumReport, count: int | None = None) -> RatioBound:
    precision = PrecisionContext.for_bits(report.precision_bits)
    count = count or len(report.sigmas)
    ratios = [
        float(report.sigmas[i - 1] / integration_singular_value(i, precision))
        for i in range(1, count + 1)
    ]
    constant = max(r * np.sqrt(i) for i, r in enumerate(ratios, start=1))
    return RatioBound(ratios=tuple(ratios), constant=float(constant))


def scaled_maximum(sigmas: Sequence[Any], exponent: float, upto: int) -> tuple[float, int]:
    """max_{i <= upto} i^exponent sigma_i and the index where it is attained."""
    values = [float(sigmas[i - 1]) * i**exponent for i in range(1, upto + 1)]
    best = int(np.argmax(values))
    return values[best], best + 1
