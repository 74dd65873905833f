"""
Kernels of A*A for A the Hausdorff moment operator after integration and for
the multiplication-after-integration operator, the first two s-derivatives of
the former, and Nystrom sections of the integral operators they define.
"""

import logging
from enum import Enum
from typing import Any, Callable, Sequence

from pydantic import BaseModel, ConfigDict, field_serializer

from composite_spectra.errors import DomainError
from composite_spectra.legendre import gauss_rule
from composite_spectra.operators.base import DenseMatrix
from composite_spectra.operators.types import BasisTag
from composite_spectra.precision import BigReal, PrecisionContext, dilog

logger = logging.getLogger(__name__)

KernelFunction = Callable[[BigReal, BigReal], BigReal]


class KernelTag(Enum):
    HAUSDORFF_J = "hausdorff-j"
    MULT_J = "mult-j"
    HAUSDORFF_J_DS = "hausdorff-j-ds"
    HAUSDORFF_J_DSS = "hausdorff-j-dss"


SYMMETRIC_TAGS = (KernelTag.HAUSDORFF_J, KernelTag.MULT_J)


def _unit(value: Any, name: str, precision: PrecisionContext) -> BigReal:
    mp = precision.mp
    value = mp.mpf(value)
    if value < 0 or value > 1:
        raise DomainError(f"{name} must lie in [0, 1], got {mp.nstr(value, 12)}")
    return value


def kernel_k(s: Any, t: Any, precision: PrecisionContext) -> BigReal:
    """
    k(s, t) = sum_j (1 - s^j)(1 - t^j)/j^2 = zeta(2) - Li2(s) - Li2(t) + Li2(st).
    """
    s = _unit(s, "s", precision)
    t = _unit(t, "t", precision)
    wide = precision.widened()
    mp = wide.mp
    value = (
        mp.pi**2 / 6 - dilog(s, wide) - dilog(t, wide) + dilog(mp.mpf(s) * t, wide)
    )
    return precision.mpf(value)


def kernel_k_series(s: Any, t: Any, terms: int, precision: PrecisionContext) -> BigReal:
    """Partial sum of the first ``terms`` series terms; the omitted tail is below 1/terms."""
    s = _unit(s, "s", precision)
    t = _unit(t, "t", precision)
    mp = precision.mp
    total = mp.mpf(0)
    s_power = mp.mpf(1)
    t_power = mp.mpf(1)
    for j in range(1, terms + 1):
        s_power *= s
        t_power *= t
        total += (1 - s_power) * (1 - t_power) / (j * j)
    return total


def kernel_k_ds(s: Any, t: Any, precision: PrecisionContext) -> BigReal:
    """
    k_s(s, t) = (ln(1-s) - ln(1-st))/s, with the limit t - 1 at s = 0. The
    derivative has a logarithmic pole at s = 1 unless t = 1.
    """
    s = _unit(s, "s", precision)
    t = _unit(t, "t", precision)
    mp = precision.mp
    if s == 0:
        return t - 1
    if s == 1:
        raise DomainError("k_s has a logarithmic pole at s = 1")
    wide = precision.widened().mp
    sw, tw = wide.mpf(s), wide.mpf(t)
    return mp.mpf((wide.log1p(-sw) - wide.log1p(-sw * tw)) / sw)


def _dss_series(s: BigReal, t: BigReal, mp) -> BigReal:
    total = mp.mpf(0)
    s_power = mp.mpf(1)
    t_power = t
    j = 1
    while True:
        j += 1
        t_power *= t
        term = (j - 1) * s_power * (1 - t_power) / j
        total -= term
        if abs(term) <= mp.eps * abs(total):
            return total
        s_power *= s


def kernel_k_dss(s: Any, t: Any, precision: PrecisionContext) -> BigReal:
    """
    k_ss(s, t) = g'(s)/s - g(s)/s^2 with g(s) = ln(1-s) - ln(1-st), the
    s-derivative of :func:`kernel_k_ds`. Equals -(1 - t^2)/2 at s = 0 and behaves
    like -1/(1-s) near s = 1, so it is not square integrable.
    """
    s = _unit(s, "s", precision)
    t = _unit(t, "t", precision)
    if s == 1:
        raise DomainError("k_ss has a pole at s = 1")
    mp = precision.mp
    wide = precision.widened().mp
    sw, tw = wide.mpf(s), wide.mpf(t)
    if sw == 0:
        return mp.mpf(-(1 - tw * tw) / 2)
    if sw <= wide.mpf(0.25):
        return mp.mpf(_dss_series(sw, tw, wide))
    g = wide.log1p(-sw) - wide.log1p(-sw * tw)
    dg = -1 / (1 - sw) + tw / (1 - sw * tw)
    return mp.mpf(dg / sw - g / (sw * sw))


def kernel_ktilde(s: Any, t: Any, theta: float, precision: PrecisionContext) -> BigReal:
    """int_{max(s,t)}^1 tau^(2 theta) d tau = (1 - max(s,t)^(2 theta + 1))/(2 theta + 1)."""
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    s = _unit(s, "s", precision)
    t = _unit(t, "t", precision)
    mp = precision.mp
    power = 2 * mp.mpf(theta) + 1
    return (1 - max(s, t) ** power) / power


def kernel_function(
    tag: KernelTag, precision: PrecisionContext, theta: float | None = None
) -> KernelFunction:
    if tag == KernelTag.HAUSDORFF_J:
        return lambda s, t: kernel_k(s, t, precision)
    elif tag == KernelTag.MULT_J:
        if theta is None:
            raise ValueError("The multiplication kernel needs 'theta'")
        return lambda s, t: kernel_ktilde(s, t, theta, precision)
    elif tag == KernelTag.HAUSDORFF_J_DS:
        return lambda s, t: kernel_k_ds(s, t, precision)
    elif tag == KernelTag.HAUSDORFF_J_DSS:
        return lambda s, t: kernel_k_dss(s, t, precision)
    else:
        raise ValueError(f"Unsupported kernel tag: {tag}")


class KernelGrid(BaseModel):
    """
    Kernel values on a tensor grid; ``values[a][b]`` belongs to
    (s_nodes[a], t_nodes[b]). Derivative kernels store -inf on the pole line.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    tag: KernelTag
    theta: float | None = None
    s_nodes: tuple[Any, ...]
    t_nodes: tuple[Any, ...]
    values: tuple[tuple[Any, ...], ...]
    bits: int

    @field_serializer("s_nodes", "t_nodes")
    def serialize_nodes(self, nodes: tuple[Any, ...]) -> list[str]:
        precision = PrecisionContext.for_bits(self.bits)
        return [precision.to_decimal(v) for v in nodes]

    @field_serializer("values")
    def serialize_values(self, values: tuple[tuple[Any, ...], ...]) -> list[list[str]]:
        precision = PrecisionContext.for_bits(self.bits)
        return [[precision.to_decimal(v) for v in row] for row in values]

    def rows(self) -> list[tuple[Any, Any, Any]]:
        """(s, t, value) triples, s outermost."""
        return [
            (s, t, self.values[a][b])
            for a, s in enumerate(self.s_nodes)
            for b, t in enumerate(self.t_nodes)
        ]


def uniform_nodes(points: int, precision: PrecisionContext) -> list[BigReal]:
    if points < 2:
        raise ValueError(f"A grid needs at least 2 points, got {points}")
    mp = precision.mp
    return [mp.mpf(a) / (points - 1) for a in range(points)]


def kernel_grid(
    tag: KernelTag,
    s_nodes: Sequence[Any],
    t_nodes: Sequence[Any],
    precision: PrecisionContext,
    theta: float | None = None,
) -> KernelGrid:
    mp = precision.mp
    kernel = kernel_function(tag, precision, theta)
    derivative = tag in (KernelTag.HAUSDORFF_J_DS, KernelTag.HAUSDORFF_J_DSS)
    values = []
    for s in s_nodes:
        row = []
        for t in t_nodes:
            if derivative and s == 1:
                # k_s(s, 1) and k_ss(s, 1) vanish identically
                row.append(mp.mpf(0) if t == 1 else mp.ninf)
            else:
                row.append(kernel(s, t))
        values.append(tuple(row))
    logger.info(f"Kernel grid {tag.value} with {len(s_nodes)}x{len(t_nodes)} points")
    return KernelGrid(
        tag=tag,
        theta=theta,
        s_nodes=tuple(mp.mpf(s) for s in s_nodes),
        t_nodes=tuple(mp.mpf(t) for t in t_nodes),
        values=tuple(values),
        bits=precision.bits,
    )


def nystrom(
    kernel: KernelTag | KernelFunction,
    m: int,
    precision: PrecisionContext,
    theta: float | None = None,
) -> DenseMatrix:
    """
    Symmetric Nystrom section W^(1/2) K W^(1/2) on m Gauss nodes. Its eigenvalues
    approximate those of the integral operator with the given kernel.
    :param kernel: A kernel tag or any function of (s, t).
    :param m: Number of Gauss nodes, at least 2.
    :param theta: Exponent of the multiplier for the MULT_J tag.
    """
    if m < 2:
        raise ValueError(f"Nystrom needs at least 2 nodes, got {m}")
    mp = precision.mp
    if isinstance(kernel, KernelTag):
        symmetric = kernel in SYMMETRIC_TAGS
        kernel = kernel_function(kernel, precision, theta)
    else:
        symmetric = False
    rule = gauss_rule(m, precision)
    roots = [mp.sqrt(w) for w in rule.weights]
    entries = [[mp.mpf(0)] * m for _ in range(m)]
    for a in range(m):
        for b in range(a if symmetric else 0, m):
            value = roots[a] * kernel(rule.nodes[a], rule.nodes[b]) * roots[b]
            entries[a][b] = value
            if symmetric:
                entries[b][a] = value
    logger.info(f"Nystrom section with {m} nodes assembled")
    return DenseMatrix.from_rows(entries, BasisTag.NODAL, BasisTag.NODAL, precision)


def nystrom_eigenvalues(matrix: DenseMatrix) -> list[BigReal]:
    """Eigenvalues of a symmetric Nystrom section in non-increasing order."""
    mp = matrix.precision.mp
    eigenvalues = mp.eigsy(matrix.to_mp(), eigvals_only=True)
    return sorted((eigenvalues[i] for i in range(matrix.rows)), reverse=True)


def dss_square_integral(cutoff: Any, m: int, precision: PrecisionContext) -> BigReal:
    """
    int_0^cutoff int_0^1 k_ss(s, t)^2 dt ds. With s = 1 - e^-u the pole at s = 1
    becomes an exponential in u, integrated by Gauss rules in u and t. The value
    grows like 1/(1 - cutoff).
    """
    mp = precision.mp
    cutoff = mp.mpf(cutoff)
    if cutoff <= 0 or cutoff >= 1:
        raise DomainError(f"cutoff must lie in (0, 1), got {mp.nstr(cutoff, 12)}")
    rule = gauss_rule(m, precision)
    length = -mp.log1p(-cutoff)
    total = []
    for wu, xu in zip(rule.weights, rule.nodes):
        u = length * xu
        s = -mp.expm1(-u)
        inner = mp.fdot(rule.weights, [kernel_k_dss(s, t, precision) ** 2 for t in rule.nodes])
        total.append(wu * inner * mp.exp(-u))
    return length * mp.fsum(total)
