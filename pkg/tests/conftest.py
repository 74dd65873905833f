import pytest

from composite_spectra.precision import PrecisionContext


@pytest.fixture
def precision():
    """The default 256-bit working precision."""
    return PrecisionContext.for_bits(256)


@pytest.fixture
def fast_precision():
    """A lighter precision for tests that assemble and decompose sections."""
    return PrecisionContext.for_bits(128)
