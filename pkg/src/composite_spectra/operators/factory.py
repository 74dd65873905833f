from composite_spectra.operators.assembly import (
    assemble_bh_j,
    assemble_hausdorff,
    assemble_hausdorff_e,
    assemble_integration,
    assemble_mult_j,
    assemble_multiplication,
    compose,
    embedding_diagonal,
)
from composite_spectra.operators.base import DenseMatrix, OperatorSpec
from composite_spectra.operators.types import OperatorFamily
from composite_spectra.precision import PrecisionContext


def create_operator(spec: OperatorSpec, precision: PrecisionContext) -> DenseMatrix:
    """
    Assemble the section described by a spec.
    :param spec: The operator family, its parameters and sizes.
    :param precision: Working precision of the entries.
    :return: The section as a dense matrix.
    """
    if spec.family == OperatorFamily.INTEGRATION:
        return assemble_integration(spec.cols, precision)
    elif spec.family == OperatorFamily.HAUSDORFF:
        return assemble_hausdorff(spec.rows, spec.cols, precision)
    elif spec.family == OperatorFamily.MULTIPLICATION:
        assert spec.theta is not None
        return assemble_multiplication(spec.theta, spec.cols, precision, spec.quadrature)
    elif spec.family == OperatorFamily.EMBEDDING:
        assert spec.k is not None
        return embedding_diagonal(spec.k, spec.cols, precision)
    elif spec.family == OperatorFamily.COMPOSITE:
        assert spec.outer is not None and spec.inner is not None
        # Closed-form assemblies for the pairs that have them.
        if spec.is_pair(OperatorFamily.HAUSDORFF, OperatorFamily.INTEGRATION):
            return assemble_bh_j(spec.rows, spec.cols, precision)
        if spec.is_pair(OperatorFamily.MULTIPLICATION, OperatorFamily.INTEGRATION):
            outer = spec.outer
            assert outer.theta is not None
            return assemble_mult_j(outer.theta, spec.cols, precision, outer.quadrature)
        if spec.is_pair(OperatorFamily.HAUSDORFF, OperatorFamily.EMBEDDING):
            assert spec.inner.k is not None
            return assemble_hausdorff_e(spec.rows, spec.cols, spec.inner.k, precision)
        return compose(
            create_operator(spec.outer, precision),
            create_operator(spec.inner, precision),
        )
    else:
        raise ValueError(f"Unsupported operator family: {spec.family}")
