import pytest

from composite_spectra.errors import DimensionError
from composite_spectra.operators.assembly import (
    assemble_bh_j,
    assemble_hausdorff,
    assemble_hausdorff_e,
    assemble_integration,
    assemble_mult_j,
    assemble_multiplication,
    compose,
    embedding_diagonal,
    hilbert_inverse,
    hilbert_segment,
)
from composite_spectra.operators.base import DenseMatrix, OperatorSpec
from composite_spectra.operators.factory import create_operator
from composite_spectra.operators.types import BasisTag, OperatorFamily


def _max_difference(a: DenseMatrix, b: DenseMatrix):
    return max(
        abs(x - y) for row_a, row_b in zip(a.entries, b.entries) for x, y in zip(row_a, row_b)
    )


class TestOperatorSpec:
    def test_composite_shape(self):
        spec = OperatorSpec.hausdorff_j(30, 10)
        assert spec.family == OperatorFamily.COMPOSITE
        assert (spec.rows, spec.cols) == (30, 10)
        assert spec.is_pair(OperatorFamily.HAUSDORFF, OperatorFamily.INTEGRATION)
        assert spec.label() == "hausdorff*integration"

    def test_multiplication_needs_theta(self):
        with pytest.raises(ValueError):
            OperatorSpec(family=OperatorFamily.MULTIPLICATION, rows=3, cols=3)

    def test_non_positive_theta(self):
        with pytest.raises(ValueError):
            OperatorSpec.multiplication(0.0, 4)

    def test_composite_must_chain(self):
        with pytest.raises(ValueError):
            OperatorSpec.composite(OperatorSpec.hausdorff(5, 4), OperatorSpec.integration(3))

    def test_resized_keeps_row_ratio(self):
        spec = OperatorSpec.hausdorff_j(30, 10).resized(20)
        assert (spec.rows, spec.cols) == (60, 20)
        assert spec.inner.cols == 20
        assert spec.outer.cols == spec.inner.rows

    def test_zero_size_rejected(self):
        with pytest.raises(ValueError):
            OperatorSpec.integration(0)


class TestDenseMatrix:
    def test_ragged_rows_rejected(self, precision):
        with pytest.raises(ValueError):
            DenseMatrix.from_rows([[1, 2], [3]], BasisTag.COORDINATE, BasisTag.COORDINATE, precision)

    def test_non_finite_rejected(self, precision):
        with pytest.raises(ValueError):
            DenseMatrix.from_rows(
                [[1, precision.mp.inf]], BasisTag.COORDINATE, BasisTag.COORDINATE, precision
            )

    def test_transpose_and_gram(self, precision):
        matrix = DenseMatrix.from_rows(
            [[1, 2], [3, 4], [5, 6]], BasisTag.MOMENT, BasisTag.LEGENDRE, precision
        )
        assert matrix.transpose().rows == 2
        assert matrix.transpose().row_basis == BasisTag.LEGENDRE
        assert matrix.gram() == [[35, 44], [44, 56]]

    def test_serialized_as_decimal_strings(self, precision):
        matrix = DenseMatrix.identity(2, BasisTag.COORDINATE, precision)
        dumped = matrix.model_dump(mode="json")
        assert dumped["entries"][0][0] == "1.0"
        assert dumped["row_basis"] == "coordinate"


class TestHilbert:
    @pytest.mark.parametrize("n", [1, 4, 9])
    def test_inverse_is_exact(self, precision, n):
        """H_n times its integer inverse is the identity."""
        escalated = precision.escalated(n)
        product = compose(hilbert_segment(n, escalated), hilbert_inverse(n, escalated))
        identity = DenseMatrix.identity(n, BasisTag.MOMENT, escalated)
        assert _max_difference(product, identity) <= escalated.tolerance(64)

    def test_small_inverse(self, precision):
        assert hilbert_inverse(2, precision).entries == ((4, -6), (-6, 12))


class TestAssembly:
    def test_hausdorff_is_lower_triangular(self, precision):
        matrix = assemble_hausdorff(6, 6, precision)
        for i in range(6):
            for j in range(i + 1, 6):
                assert matrix[i, j] == 0
        assert matrix[0, 0] == 1

    def test_hausdorff_gram_is_hilbert(self, precision):
        """M M^T = H_n for the square Hausdorff section."""
        n = 7
        section = assemble_hausdorff(n, n, precision)
        product = compose(section, section.transpose())
        assert _max_difference(product, hilbert_segment(n, precision)) <= precision.tolerance(16)

    def test_integration_structure(self, precision):
        """Tridiagonal apart from the (1, 1) entry 1/2, with the known off-diagonals."""
        mp = precision.mp
        matrix = assemble_integration(6, precision)
        assert abs(matrix[0, 0] - mp.mpf(1) / 2) <= precision.tolerance(8)
        for i in range(6):
            for j in range(6):
                if abs(i - j) > 1:
                    assert abs(matrix[i, j]) <= precision.tolerance(8)
        for j in range(1, 6):
            # <J L_j, L_{j+1}> = 1/(2 sqrt((2j-1)(2j+1))), <J L_{j+1}, L_j> its negative.
            expected = 1 / (2 * mp.sqrt((2 * j - 1) * (2 * j + 1)))
            assert abs(matrix[j, j - 1] - expected) <= precision.tolerance(8)
            assert abs(matrix[j - 1, j] + expected) <= precision.tolerance(8)

    def test_bh_j_first_column(self, precision):
        matrix = assemble_bh_j(8, 4, precision)
        for i in range(8):
            assert abs(matrix[i, 0] - precision.mpf(1) / (i + 2)) <= precision.eps

    @pytest.mark.parametrize("n", [3, 8, 15])
    def test_two_paths_agree(self, precision, n):
        """Hausdorff after the integration section equals the closed form."""
        composed = compose(
            assemble_hausdorff(n, n + 1, precision), assemble_integration(n + 1, precision)
        ).submatrix(n, n)
        assert _max_difference(composed, assemble_bh_j(n, n, precision)) <= precision.tolerance(56)

    def test_multiplication_integer_theta_is_reliable(self, precision):
        """For theta = 1 the quadrature is exact and the doubled rule agrees."""
        matrix = assemble_mult_j(1.0, 5, precision)
        assert matrix.reliable
        # <s (J L_1), L_1> = int s^2 = 1/3
        assert abs(matrix[0, 0] - precision.mpf(1) / 3) <= precision.tolerance(8)

    @pytest.mark.parametrize("n", [4, 12])
    def test_multiplication_fractional_theta_is_reliable(self, precision, n):
        mp = precision.mp
        matrix = assemble_mult_j(0.5, n, precision)
        assert matrix.reliable
        # <s^0.5 (J L_1), L_1> = int s^1.5 = 2/5
        assert abs(matrix[0, 0] - mp.mpf(2) / 5) <= precision.tolerance(8)
        # <s^0.5 (J L_1), L_2> = sqrt 3 int s^1.5 (2s - 1) = 6 sqrt 3 / 35
        assert abs(matrix[1, 0] - 6 * mp.sqrt(3) / 35) <= precision.tolerance(8)

    def test_multiplication_undersized_rule_is_flagged(self, precision):
        assert not assemble_mult_j(0.5, 6, precision, m=2).reliable

    def test_multiplication_alone_is_symmetric(self, precision):
        matrix = assemble_multiplication(2.0, 5, precision)
        for i in range(5):
            for j in range(5):
                assert abs(matrix[i, j] - matrix[j, i]) <= precision.tolerance(8)

    def test_embedding_diagonal(self, precision):
        mp = precision.mp
        matrix = embedding_diagonal(1, 3, precision)
        assert matrix.col_basis == BasisTag.COORDINATE
        assert abs(matrix[1, 1] - 1 / mp.sqrt(1 + 4 * mp.pi**2)) <= precision.eps
        assert matrix[0, 1] == 0

    def test_hausdorff_e_scales_columns(self, precision):
        section = assemble_hausdorff(4, 3, precision)
        diagonal = embedding_diagonal(2, 3, precision)
        composed = assemble_hausdorff_e(4, 3, 2, precision)
        for i in range(4):
            for j in range(3):
                assert abs(composed[i, j] - section[i, j] * diagonal[j, j]) <= precision.tolerance(8)

    def test_compose_checks_sizes(self, precision):
        with pytest.raises(DimensionError):
            compose(assemble_hausdorff(4, 3, precision), assemble_integration(4, precision))

    def test_compose_checks_bases(self, precision):
        with pytest.raises(DimensionError):
            compose(assemble_integration(3, precision), assemble_hausdorff(3, 3, precision))


class TestFactory:
    def test_closed_form_for_hausdorff_after_integration(self, precision):
        spec = OperatorSpec.hausdorff_j(6, 4)
        assert create_operator(spec, precision) == assemble_bh_j(6, 4, precision)

    def test_generic_composite(self, precision):
        spec = OperatorSpec.composite(OperatorSpec.integration(4), OperatorSpec.integration(4))
        expected = compose(assemble_integration(4, precision), assemble_integration(4, precision))
        assert create_operator(spec, precision) == expected

    def test_each_family(self, precision):
        assert create_operator(OperatorSpec.embedding(2, 3), precision).rows == 3
        assert create_operator(OperatorSpec.hausdorff(5, 2), precision).cols == 2
        assert create_operator(OperatorSpec.mult_j(1.0, 3), precision).rows == 3
