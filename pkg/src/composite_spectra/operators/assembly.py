"""
Galerkin sections of J, the Hausdorff moment operator, the multiplication by
t^theta, the embedding model and their products. Legendre coordinates are used
on L2(0, 1), moment coordinates on the sequence side.
"""

import logging
from math import comb

from composite_spectra.errors import DimensionError
from composite_spectra.legendre import (
    QuadratureRule,
    antiderivative_values,
    gauss_jacobi_rule,
    gauss_rule,
    legendre_values,
    monomial_moments,
)
from composite_spectra.operators.base import DenseMatrix
from composite_spectra.operators.types import BasisTag
from composite_spectra.precision import BigReal, PrecisionContext

logger = logging.getLogger(__name__)


def hilbert_segment(n: int, precision: PrecisionContext) -> DenseMatrix:
    """H_n with entries 1/(i+j-1), i, j = 1..n."""
    if n < 1:
        raise ValueError(f"Hilbert segment size must be >= 1, got {n}")
    mp = precision.mp
    return DenseMatrix.from_rows(
        [[mp.fdiv(1, i + j + 1) for j in range(n)] for i in range(n)],
        BasisTag.MOMENT,
        BasisTag.MOMENT,
        precision,
    )


def hilbert_inverse(n: int, precision: PrecisionContext) -> DenseMatrix:
    """
    Exact inverse of H_n from its integer closed form
    (-1)^(i+j) (i+j-1) C(n+i-1, n-j) C(n+j-1, n-i) C(i+j-2, i-1)^2.
    """
    if n < 1:
        raise ValueError(f"Hilbert segment size must be >= 1, got {n}")
    rows = [
        [
            (-1) ** (i + j)
            * (i + j - 1)
            * comb(n + i - 1, n - j)
            * comb(n + j - 1, n - i)
            * comb(i + j - 2, i - 1) ** 2
            for j in range(1, n + 1)
        ]
        for i in range(1, n + 1)
    ]
    return DenseMatrix.from_rows(rows, BasisTag.MOMENT, BasisTag.MOMENT, precision)


def assemble_hausdorff(rows: int, cols: int, precision: PrecisionContext) -> DenseMatrix:
    """M_ij = int_0^1 t^(i-1) L_j(t) dt; zero above the diagonal."""
    wide = precision.widened().mp
    entries = [monomial_moments(i - 1, cols, wide) for i in range(1, rows + 1)]
    logger.info(f"Assembled Hausdorff section {rows}x{cols}")
    return DenseMatrix.from_rows(entries, BasisTag.MOMENT, BasisTag.LEGENDRE, precision)


def assemble_bh_j(rows: int, cols: int, precision: PrecisionContext) -> DenseMatrix:
    """
    Galerkin section of the Hausdorff moment operator after integration.
    Row i is (1/i) int_0^1 (1 - s^i) x(s) ds, so column 1 is 1/(i+1) and
    column j >= 2 is -(1/i) <s^i, L_j>.
    """
    wide = precision.widened().mp
    entries = []
    for i in range(1, rows + 1):
        moments = monomial_moments(i, cols, wide)
        row = [wide.mpf(1) / (i + 1)]
        row.extend(-moments[j] / i for j in range(1, cols))
        entries.append(row)
    logger.info(f"Assembled Hausdorff-after-integration section {rows}x{cols}")
    return DenseMatrix.from_rows(entries, BasisTag.MOMENT, BasisTag.LEGENDRE, precision)


def _galerkin(
    n: int, rule: QuadratureRule, precision: PrecisionContext, integrate: bool
) -> list[list[BigReal]]:
    """<(T L_j), L_i> with T = J or the identity under rule, which carries any weight."""
    mp = precision.widened().mp
    tests = [legendre_values(n, t, mp) for t in rule.nodes]
    if integrate:
        trials = [antiderivative_values(n, t, mp) for t in rule.nodes]
    else:
        trials = tests
    weights = [mp.mpf(w) for w in rule.weights]
    return [
        [
            mp.fdot(weights, [tests[k][i] * trials[k][j] for k in range(rule.size)])
            for j in range(n)
        ]
        for i in range(n)
    ]


def assemble_integration(n: int, precision: PrecisionContext) -> DenseMatrix:
    """
    <J L_j, L_i> by Gauss quadrature, exact since J L_j L_i has degree <= 2n-1.
    The result is tridiagonal apart from the (1, 1) entry 1/2.
    """
    rule = gauss_rule(n + 1, precision.widened())
    entries = _galerkin(n, rule, precision, integrate=True)
    logger.info(f"Assembled integration section {n}x{n}")
    return DenseMatrix.from_rows(
        entries, BasisTag.LEGENDRE, BasisTag.LEGENDRE, precision
    )


def _quadrature_checked(
    theta: float,
    n: int,
    m: int | None,
    precision: PrecisionContext,
    integrate: bool,
    label: str,
) -> DenseMatrix:
    if theta <= 0:
        raise ValueError(f"theta must be positive, got {theta}")
    # Gauss-Jacobi with m >= n + 1 nodes is exact for the degree-2n integrand
    m = m or n + 2
    wide = precision.widened()
    mp = wide.mp
    coarse = _galerkin(n, gauss_jacobi_rule(m, theta, wide), precision, integrate)
    fine = _galerkin(n, gauss_jacobi_rule(2 * m, theta, wide), precision, integrate)
    drift = max(
        abs(a - b) for row_a, row_b in zip(coarse, fine) for a, b in zip(row_a, row_b)
    )
    reliable = drift <= precision.tolerance(precision.bits // 2)
    if not reliable:
        logger.warning(
            f"{label} entries moved by {mp.nstr(drift, 5)} when the quadrature "
            f"doubled from {m} to {2 * m} nodes (theta={theta})"
        )
    logger.info(f"Assembled {label} section {n}x{n} with {2 * m} nodes")
    return DenseMatrix.from_rows(
        fine, BasisTag.LEGENDRE, BasisTag.LEGENDRE, precision, reliable=reliable
    )


def assemble_mult_j(
    theta: float, n: int, precision: PrecisionContext, m: int | None = None
) -> DenseMatrix:
    """
    <s^theta (J L_j)(s), L_i(s)> by Gauss-Jacobi quadrature for the weight
    s^theta. The rule is doubled once and the matrix is marked unreliable when
    the entries drift, which happens only when m < n + 1.
    """
    return _quadrature_checked(theta, n, m, precision, True, "multiplication-after-integration")


def assemble_multiplication(
    theta: float, n: int, precision: PrecisionContext, m: int | None = None
) -> DenseMatrix:
    return _quadrature_checked(theta, n, m, precision, False, "multiplication")


def embedding_diagonal(k: int, n: int, precision: PrecisionContext) -> DenseMatrix:
    """Diagonal model of the embedding of H^k: d_i = (1 + (pi i)^(2k))^(-1/2)."""
    if k < 1:
        raise ValueError(f"Embedding order must be >= 1, got {k}")
    mp = precision.mp
    values = [1 / mp.sqrt(1 + (mp.pi * i) ** (2 * k)) for i in range(1, n + 1)]
    return DenseMatrix.diagonal(
        values, BasisTag.LEGENDRE, BasisTag.COORDINATE, precision
    )


def compose(outer: DenseMatrix, inner: DenseMatrix) -> DenseMatrix:
    """outer * inner at the precision of the outer factor."""
    if outer.cols != inner.rows:
        raise DimensionError(
            f"Cannot compose a {outer.rows}x{outer.cols} matrix after a "
            f"{inner.rows}x{inner.cols} matrix"
        )
    if outer.col_basis != inner.row_basis:
        raise DimensionError(
            f"Basis mismatch: outer expects {outer.col_basis.value} coordinates, "
            f"inner produces {inner.row_basis.value}"
        )
    precision = outer.precision
    mp = precision.mp
    columns = inner.columns()
    entries = [[mp.fdot(row, column) for column in columns] for row in outer.entries]
    return DenseMatrix.from_rows(
        entries,
        outer.row_basis,
        inner.col_basis,
        precision,
        reliable=outer.reliable and inner.reliable,
    )


def assemble_hausdorff_e(
    rows: int, cols: int, k: int, precision: PrecisionContext
) -> DenseMatrix:
    return compose(
        assemble_hausdorff(rows, cols, precision), embedding_diagonal(k, cols, precision)
    )
