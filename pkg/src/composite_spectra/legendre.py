"""
Shifted Legendre polynomials on [0, 1], normalized so that
L_j(t) = sqrt(2j-1) P_{j-1}(2t-1) is an orthonormal basis of L2(0, 1).
"""

import logging
import math
import threading
from functools import lru_cache
from typing import Any, Callable

import numpy as np
from mpmath import MPContext
from pydantic import BaseModel, ConfigDict, Field

from composite_spectra.errors import DomainError
from composite_spectra.precision import BigReal, PrecisionContext

logger = logging.getLogger(__name__)


def _legendre_p(degree: int, x: BigReal, mp: MPContext) -> list[BigReal]:
    """P_0(x), ..., P_degree(x) by the three-term recurrence."""
    values = [mp.mpf(1)]
    if degree >= 1:
        values.append(mp.mpf(x))
    for k in range(1, degree):
        values.append(((2 * k + 1) * x * values[k] - k * values[k - 1]) / (k + 1))
    return values


def legendre_values(n: int, t: BigReal, mp: MPContext) -> list[BigReal]:
    """L_1(t), ..., L_n(t)."""
    p = _legendre_p(n - 1, 2 * mp.mpf(t) - 1, mp)
    return [mp.sqrt(2 * j - 1) * p[j - 1] for j in range(1, n + 1)]


def antiderivative_values(n: int, s: BigReal, mp: MPContext) -> list[BigReal]:
    """(J L_1)(s), ..., (J L_n)(s) where J integrates from 0."""
    s = mp.mpf(s)
    p = _legendre_p(n, 2 * s - 1, mp)
    values = [s]
    for j in range(2, n + 1):
        k = j - 1
        values.append((p[k + 1] - p[k - 1]) / (2 * mp.sqrt(2 * k + 1)))
    return values


def _check_unit_interval(t: BigReal, mp: MPContext, name: str) -> None:
    if t < 0 or t > 1:
        raise DomainError(f"{name} must lie in [0, 1], got {mp.nstr(t, 12)}")


def legendre_eval(j: int, t: Any, precision: PrecisionContext) -> BigReal:
    if j < 1:
        raise DomainError(f"Legendre index must be >= 1, got {j}")
    mp = precision.mp
    t = mp.mpf(t)
    _check_unit_interval(t, mp, "t")
    return legendre_values(j, t, mp)[-1]


def legendre_antiderivative(j: int, s: Any, precision: PrecisionContext) -> BigReal:
    """
    (J L_j)(s) = int_0^s L_j. For j >= 2 this is
    (P_j(2s-1) - P_{j-2}(2s-1)) / (2 sqrt(2j-1)), a polynomial of degree j.
    """
    if j < 1:
        raise DomainError(f"Legendre index must be >= 1, got {j}")
    mp = precision.mp
    s = mp.mpf(s)
    _check_unit_interval(s, mp, "s")
    return antiderivative_values(j, s, mp)[-1]


class QuadratureRule(BaseModel):
    """
    Gauss-Legendre rule on [0, 1]. Exact for polynomials of degree <= 2m-1.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    nodes: tuple[Any, ...]
    weights: tuple[Any, ...]
    bits: int

    @property
    def size(self) -> int:
        return len(self.nodes)

    def integrate(self, f: Callable[[BigReal], BigReal]) -> BigReal:
        mp = PrecisionContext.for_bits(self.bits).mp
        return mp.fdot(self.weights, [f(t) for t in self.nodes])


@lru_cache(maxsize=256)
def _gauss_rule(m: int, bits: int, thread_id: int) -> QuadratureRule:
    precision = PrecisionContext.for_bits(bits)
    mp = precision.mp
    wide = precision.widened().mp
    tol = 4 * wide.eps
    nodes = []
    weights = []
    for k in range(1, m + 1):
        x = wide.cos(wide.pi * (4 * k - 1) / (4 * m + 2))
        for _ in range(100):
            p = _legendre_p(m, x, wide)
            dp = m * (x * p[m] - p[m - 1]) / (x * x - 1)
            dx = p[m] / dp
            x -= dx
            if abs(dx) <= tol:
                break
        else:
            logger.warning(f"Newton iteration for Gauss node {k} of {m} hit its cap")
        p = _legendre_p(m, x, wide)
        dp = m * (x * p[m] - p[m - 1]) / (x * x - 1)
        nodes.append(mp.mpf((1 - x) / 2))
        weights.append(mp.mpf(1 / ((1 - x * x) * dp * dp)))
    logger.debug(f"Gauss rule with {m} nodes built at {bits} bits")
    return QuadratureRule(nodes=tuple(nodes), weights=tuple(weights), bits=bits)


def gauss_rule(m: int, precision: PrecisionContext) -> QuadratureRule:
    """
    Gauss-Legendre nodes and weights on [0, 1]. Nodes are the roots of the
    degree-m shifted Legendre polynomial, found by Newton iteration with guard
    bits; the rule is cached per size and precision.
    """
    if m < 1:
        raise ValueError(f"Quadrature needs at least one node, got {m}")
    return _gauss_rule(m, precision.bits, threading.get_ident())


def _jacobi_recurrence(m: int, theta: BigReal, mp: MPContext) -> tuple[list, list]:
    """
    Three-term recurrence p_{k+1} = (s - a_k) p_k - b_k p_{k-1} of the monic
    polynomials orthogonal for s^theta on [0, 1], k = 0..m-1. b_0 is unused.
    """
    a = [(theta + 1) / (theta + 2)]
    b = [mp.mpf(0)]
    for k in range(1, m):
        twice = 2 * k + theta
        a.append((1 + theta * theta / (twice * (twice + 2))) / 2)
        b.append(k * k * (k + theta) ** 2 / (twice * twice * (twice + 1) * (twice - 1)))
    return a, b


def _orthogonal_values(
    x: BigReal, a: list, b: list, mp: MPContext
) -> tuple[list[BigReal], BigReal]:
    """p_0(x), ..., p_m(x) and p_m'(x)."""
    values = [mp.mpf(1), x - a[0]]
    slopes = [mp.mpf(0), mp.mpf(1)]
    for k in range(1, len(a)):
        values.append((x - a[k]) * values[k] - b[k] * values[k - 1])
        slopes.append(values[k] + (x - a[k]) * slopes[k] - b[k] * slopes[k - 1])
    return values, slopes[-1]


@lru_cache(maxsize=128)
def _gauss_jacobi_rule(m: int, theta: float, bits: int, thread_id: int) -> QuadratureRule:
    precision = PrecisionContext.for_bits(bits)
    mp = precision.mp
    wide = precision.widened().mp
    exponent = wide.mpf(theta)
    a, b = _jacobi_recurrence(m, exponent, wide)
    jacobi = np.diag([float(v) for v in a])
    if m > 1:
        off = np.sqrt([float(v) for v in b[1:]])
        jacobi += np.diag(off, 1) + np.diag(off, -1)
    guesses = np.sort(np.linalg.eigvalsh(jacobi))
    norms = [1 / (exponent + 1)]
    for k in range(1, m):
        norms.append(norms[-1] * b[k])
    tol = 4 * wide.eps
    nodes = []
    weights = []
    for k, guess in enumerate(guesses):
        x = wide.mpf(float(guess))
        for _ in range(100):
            values, slope = _orthogonal_values(x, a, b, wide)
            dx = values[m] / slope
            x -= dx
            if abs(dx) <= tol:
                break
        else:
            logger.warning(f"Newton iteration for Gauss-Jacobi node {k + 1} of {m} hit its cap")
        values, _ = _orthogonal_values(x, a, b, wide)
        christoffel = wide.fsum(values[j] ** 2 / norms[j] for j in range(m))
        nodes.append(mp.mpf(x))
        weights.append(mp.mpf(1 / christoffel))
    logger.debug(f"Gauss-Jacobi rule with {m} nodes for s^{theta} built at {bits} bits")
    return QuadratureRule(nodes=tuple(nodes), weights=tuple(weights), bits=bits)


def gauss_jacobi_rule(m: int, theta: float, precision: PrecisionContext) -> QuadratureRule:
    """
    Gauss rule on [0, 1] for the weight s^theta, so that rule.integrate(f)
    approximates int_0^1 s^theta f(s) ds and is exact for polynomials f of
    degree <= 2m-1. Nodes start from the float64 eigenvalues of the Jacobi
    matrix and are refined by Newton iteration on the recurrence.
    """
    if m < 1:
        raise ValueError(f"Quadrature needs at least one node, got {m}")
    if theta <= -1:
        raise DomainError(f"The weight s^theta needs theta > -1, got {theta}")
    return _gauss_jacobi_rule(m, float(theta), precision.bits, threading.get_ident())


class LegendreBasis(BaseModel):
    """The first n shifted Legendre polynomials."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    bits: int

    @property
    def precision(self) -> PrecisionContext:
        return PrecisionContext.for_bits(self.bits)

    def values(self, t: Any) -> list[BigReal]:
        return legendre_values(self.n, t, self.precision.mp)

    def coefficients(self, f: Callable[[BigReal], BigReal], m: int) -> list[BigReal]:
        """<f, L_j> for j = 1..n under gauss_rule(m)."""
        rule = gauss_rule(m, self.precision)
        return self.project(rule, [f(t) for t in rule.nodes])

    def project(self, rule: QuadratureRule, samples: list[BigReal]) -> list[BigReal]:
        mp = self.precision.mp
        columns = [self.values(t) for t in rule.nodes]
        return [
            mp.fdot(
                rule.weights, [samples[k] * columns[k][j] for k in range(rule.size)]
            )
            for j in range(self.n)
        ]

    def gram(self, m: int | None = None) -> list[list[BigReal]]:
        mp = self.precision.mp
        rule = gauss_rule(m or 2 * self.n, self.precision)
        columns = [self.values(t) for t in rule.nodes]
        return [
            [
                mp.fdot(
                    rule.weights,
                    [columns[k][i] * columns[k][j] for k in range(rule.size)],
                )
                for j in range(self.n)
            ]
            for i in range(self.n)
        ]


def monomial_moment(i: int, j: int, precision: PrecisionContext) -> BigReal:
    """
    <s^i, L_j> = sqrt(2j-1) (i!)^2 / ((i-j+1)! (i+j)!), zero when i < j-1.
    The factorial ratio is formed exactly in integers and rounded once.
    """
    if i < 0 or j < 1:
        raise DomainError(f"monomial_moment needs i >= 0 and j >= 1, got ({i}, {j})")
    mp = precision.mp
    if i < j - 1:
        return mp.mpf(0)
    ratio = mp.fdiv(math.perm(i, j - 1), math.perm(i + j, j))
    return mp.sqrt(2 * j - 1) * ratio


def monomial_moments(i: int, n: int, mp: MPContext) -> list[BigReal]:
    """<s^i, L_j> for j = 1..n by the ratio recurrence r_{j+1} = r_j (i-j+1)/(i+j+1)."""
    moments = []
    ratio = mp.mpf(1) / (i + 1)
    for j in range(1, n + 1):
        moments.append(mp.sqrt(2 * j - 1) * ratio)
        ratio = ratio * (i - j + 1) / (i + j + 1)
    return moments


def projection_tail_norm(
    f: Callable[[BigReal], BigReal], n: int, m: int, precision: PrecisionContext
) -> BigReal:
    """
    ||(I - Q_n) f|| computed Parseval-style as (||f||^2 - sum_{j<=n} <f, L_j>^2)^(1/2).
    The caller chooses m large enough to resolve the coefficients of f up to
    degree n. A negative radicand is clipped to zero and logged when it exceeds
    the working tolerance.
    :param f: Function of one BigReal on [0, 1].
    :param n: Dimension of the projection range.
    :param m: Number of Gauss nodes.
    """
    wide = precision.widened()
    mp = wide.mp
    rule = gauss_rule(m, wide)
    samples = [mp.mpf(f(t)) for t in rule.nodes]
    norm_squared = mp.fdot(rule.weights, [v * v for v in samples])
    coefficients = LegendreBasis(n=n, bits=wide.bits).project(rule, samples)
    radicand = norm_squared - mp.fsum(c * c for c in coefficients)
    if radicand < 0:
        if -radicand > precision.tolerance(16) * max(norm_squared, 1):
            logger.warning(
                f"Projection tail radicand {mp.nstr(radicand, 8)} clipped to zero "
                f"(n={n}, m={m})"
            )
        return precision.mpf(0)
    return precision.mpf(mp.sqrt(radicand))
