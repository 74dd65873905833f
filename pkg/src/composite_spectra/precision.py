"""
Configurable-precision reals and the special functions the operator formulas use:
the dilogarithm on [0, 1], the second derivative of the digamma function at
positive integers and zeta values.
"""

import logging
import math
import threading
from functools import lru_cache
from typing import Any, Literal

from mpmath import MPContext
from mpmath.libmp import prec_to_dps
from pydantic import BaseModel, ConfigDict, Field

from composite_spectra.errors import DomainError

logger = logging.getLogger(__name__)

# An mpf created by the MPContext of a PrecisionContext.
BigReal = Any

MIN_BITS = 64
DEFAULT_BITS = 256
GUARD_BITS = 32


@lru_cache(maxsize=128)
def _mp_context(bits: int, thread_id: int) -> MPContext:
    # mpmath changes the working precision of a context while it evaluates
    # special functions, so every thread gets its own context per bit budget.
    mp = MPContext()
    mp.prec = bits
    return mp


class PrecisionContext(BaseModel):
    """
    A bit budget for real arithmetic. Values are mpmath ``mpf`` numbers created
    through :attr:`mp`; they are rounded to nearest at ``bits`` of mantissa.
    """

    model_config = ConfigDict(frozen=True)

    bits: int = Field(default=DEFAULT_BITS, ge=MIN_BITS)
    rounding: Literal["nearest"] = "nearest"

    @classmethod
    def for_bits(cls, bits: int) -> "PrecisionContext":
        return _shared_context(bits)

    @property
    def mp(self) -> MPContext:
        return _mp_context(self.bits, threading.get_ident())

    @property
    def dps(self) -> int:
        """Decimal digits that round-trip at this precision."""
        return prec_to_dps(self.bits)

    @property
    def eps(self) -> BigReal:
        return self.mp.eps

    def mpf(self, value: Any) -> BigReal:
        return self.mp.mpf(value)

    def widened(self, guard: int = GUARD_BITS) -> "PrecisionContext":
        return PrecisionContext.for_bits(self.bits + guard)

    def escalated(self, n: int) -> "PrecisionContext":
        """
        Context for Hilbert-matrix work of size n. The inverse norm grows like
        exp(3.53 n), so 6 bits per row keeps about 50 bits after cancellation.
        """
        return PrecisionContext.for_bits(max(self.bits, math.ceil(6 * n)))

    def graded(self, n: int, bits_per_index: float) -> "PrecisionContext":
        """
        Context for a spectrum decaying like 2^(-bits_per_index i): the working
        bits are kept for the n-th value on top of the decay.
        """
        return PrecisionContext.for_bits(self.bits + math.ceil(bits_per_index * n))

    def tolerance(self, margin: int) -> BigReal:
        """Returns 2^-(bits - margin)."""
        return self.mp.ldexp(self.mp.mpf(1), -(self.bits - margin))

    def to_decimal(self, value: Any) -> str:
        return self.mp.nstr(self.mp.mpf(value), self.dps)


@lru_cache(maxsize=64)
def _shared_context(bits: int) -> PrecisionContext:
    return PrecisionContext(bits=bits)


def _dilog_series(x: BigReal, mp: MPContext) -> BigReal:
    total = mp.mpf(0)
    power = mp.mpf(1)
    j = 0
    while True:
        j += 1
        power *= x
        term = power / (j * j)
        total += term
        if term <= mp.eps * total:
            return total


def dilog(x: Any, precision: PrecisionContext) -> BigReal:
    """
    Li2(x) for 0 <= x <= 1. The power series is summed for x <= 1/2, the
    reflection Li2(x) = pi^2/6 - ln(x) ln(1-x) - Li2(1-x) is used above it.
    Both branches run with guard bits and are rounded once at the end.
    """
    mp = precision.mp
    x = mp.mpf(x)
    if x < 0 or x > 1:
        raise DomainError(f"dilog is defined on [0, 1], got {mp.nstr(x, 12)}")
    if x == 0:
        return mp.mpf(0)
    if x == 1:
        return mp.pi**2 / 6

    wide = precision.widened().mp
    xw = wide.mpf(x)
    if xw <= wide.mpf(0.5):
        value = _dilog_series(xw, wide)
    else:
        y = 1 - xw
        value = (
            wide.pi**2 / 6 - wide.log(xw) * wide.log(y) - _dilog_series(y, wide)
        )
    return mp.mpf(value)


def _cube_tail(a: int, mp: MPContext) -> BigReal:
    """Euler-Maclaurin value of sum_{i >= a} i^-3."""
    a = mp.mpf(a)
    total = 1 / (2 * a**2) + 1 / (2 * a**3)
    previous = None
    k = 0
    while True:
        k += 1
        term = mp.bernoulli(2 * k) * (2 * k + 1) / (2 * a ** (2 * k + 2))
        if previous is not None and abs(term) > abs(previous):
            logger.warning(
                f"Euler-Maclaurin terms for the cube tail started growing at k={k} "
                f"(a={mp.nstr(a, 6)}); the tail is truncated there"
            )
            return total
        total += term
        if abs(term) <= mp.eps * total:
            return total
        previous = term


def digamma_second(n: int, precision: PrecisionContext) -> BigReal:
    """
    psi''(n) for a positive integer n, via psi''(n) = -2 sum_{k>=0} (n+k)^-3.
    Terms are summed directly until the argument reaches max(32, bits/4), the
    rest comes from an Euler-Maclaurin expansion with as many Bernoulli
    corrections as the precision needs.
    """
    if n <= 0:
        raise DomainError(f"digamma_second needs a positive integer, got {n}")
    mp = precision.mp
    wide = precision.widened().mp
    start = max(32, precision.bits // 4)
    head = wide.fsum(wide.mpf(i) ** -3 for i in range(n, start))
    tail = _cube_tail(max(n, start), wide)
    return mp.mpf(-2 * (head + tail))


def zeta(s: Any, precision: PrecisionContext) -> BigReal:
    return precision.mp.zeta(s)
