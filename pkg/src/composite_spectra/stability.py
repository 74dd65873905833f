"""
Moduli of continuity omega(delta) = sup{||D x|| : ||A x|| <= delta, ||x|| <= E}
for pairs of sections sharing a column space, logarithmic stability envelopes
and the index-wise comparison sigma_i(D) <= Psi(sigma_i(A)).
"""

import logging
from typing import Any, Callable, Sequence

import numpy as np
from mpmath import MPContext
from pydantic import BaseModel, ConfigDict, field_serializer

from composite_spectra.errors import ConvergenceError, DimensionError, DomainError
from composite_spectra.operators.base import DenseMatrix, OperatorSpec
from composite_spectra.operators.factory import create_operator
from composite_spectra.precision import BigReal, PrecisionContext

logger = logging.getLogger(__name__)

GOLDEN = (5**0.5 - 1) / 2
# The beta search covers [beta_max e^-SEARCH_SPAN, beta_max] in log scale.
SEARCH_SPAN = 120
# Golden-section stops when beta is bracketed to this relative width.
SEARCH_TOLERANCE = 1e-8


class ModulusCurve(BaseModel):
    """omega on a decreasing delta grid for the sections of (D, A) at size n."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    deltas: tuple[Any, ...]
    omegas: tuple[Any, ...]
    d_spec: OperatorSpec | None = None
    a_spec: OperatorSpec | None = None
    n: int | None = None
    radius: float = 1.0
    bits: int
    reliable: bool = True

    @field_serializer("deltas", "omegas")
    def serialize_values(self, values: tuple[Any, ...]) -> list[str]:
        precision = PrecisionContext.for_bits(self.bits)
        return [precision.to_decimal(v) for v in values]


class StabilityFit(BaseModel):
    """
    omega(delta) ~ C_k / ln(1/delta)^k. ``constant`` is the minimax fit in log
    scale, ``upper_constant`` the smallest C_k that bounds every grid point.
    """

    k: int
    constant: float
    upper_constant: float
    window: tuple[float, float]
    residual: float


class TheoremCheck(BaseModel):
    passed: bool
    checked: int
    first_violation: int | None = None
    max_ratio: float


def _lambda_max(matrix: Any, mp: MPContext) -> BigReal:
    eigenvalues = mp.eigsy(matrix, eigvals_only=True)
    return max(eigenvalues[i] for i in range(matrix.rows))


def _gram(matrix: DenseMatrix, mp: MPContext) -> Any:
    return mp.matrix(matrix.gram())


def modulus(
    d: DenseMatrix, a: DenseMatrix, delta: Any, radius: float = 1.0
) -> BigReal:
    """
    omega(delta) over the ball of the given radius, from the S-procedure dual
    omega^2 = min_{beta >= 0} max(lambda_max(D^T D - beta A^T A), 0) + beta delta^2.
    The dual function is convex in beta; the minimum is located by golden-section
    search in ln(beta) on [beta_max e^-120, beta_max], beta_max = sigma_1(D)^2/delta^2,
    and compared with beta = 0.
    :param d: Section of the operator whose output is bounded.
    :param a: Section of the forward operator; same columns as ``d``.
    :param delta: Data accuracy, positive.
    :param radius: Radius E of the ball; omega_E(delta) = E omega_1(delta/E).
    """
    if d.cols != a.cols or d.col_basis != a.col_basis:
        raise DimensionError(
            f"Sections must share their column space: {d.cols} {d.col_basis.value} "
            f"vs {a.cols} {a.col_basis.value}"
        )
    if radius <= 0:
        raise DomainError(f"radius must be positive, got {radius}")
    precision = d.precision
    mp = precision.mp
    delta = mp.mpf(delta)
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {mp.nstr(delta, 8)}")
    if radius != 1:
        return radius * modulus(d, a, delta / radius)

    dtd = _gram(d, mp)
    ata = _gram(a, mp)
    top = _lambda_max(dtd, mp)
    if _lambda_max(ata, mp) <= delta**2:
        return mp.sqrt(top)

    def dual(beta: BigReal) -> BigReal:
        return max(_lambda_max(dtd - beta * ata, mp), 0) + beta * delta**2

    beta_max = top / delta**2
    hi = mp.log(beta_max)
    lo = hi - SEARCH_SPAN
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = dual(mp.exp(x1)), dual(mp.exp(x2))
    iterations = 0
    while hi - lo > SEARCH_TOLERANCE:
        iterations += 1
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = dual(mp.exp(x1))
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = dual(mp.exp(x2))
    best = min(f1, f2)
    upper = mp.log(beta_max)
    if upper - hi < 2 * SEARCH_TOLERANCE and best < dual(mp.mpf(0)):
        raise ConvergenceError(
            "The dual minimum sits at the upper end of the beta bracket",
            bracket=(mp.nstr(mp.exp(lo), 12), mp.nstr(mp.exp(hi), 12)),
        )
    best = min(best, dual(mp.mpf(0)))
    logger.debug(
        f"Modulus at delta={mp.nstr(delta, 6)}: {iterations} golden-section steps, "
        f"beta={mp.nstr(mp.exp((lo + hi) / 2), 6)}"
    )
    return mp.sqrt(best)


def _scaled_values(
    directions: np.ndarray, dm: np.ndarray, am: np.ndarray, delta: float
) -> np.ndarray:
    """||D x|| for x = min(1, delta/||A u||) u over the rows u of directions."""
    a_norms = np.linalg.norm(directions @ am.T, axis=1)
    d_norms = np.linalg.norm(directions @ dm.T, axis=1)
    scale = np.minimum(1.0, delta / np.maximum(a_norms, np.finfo(float).tiny))
    return scale * d_norms


def _top_vector(dtd: np.ndarray, ata: np.ndarray, beta: float) -> np.ndarray:
    _, vectors = np.linalg.eigh(dtd - beta * ata)
    return vectors[:, -1]


def _polish(dm: np.ndarray, am: np.ndarray, delta: float, steps: int = 100) -> float:
    """
    Follows the top eigenvector v(beta) of D^T D - beta A^T A, whose ratio
    ||A v||/||v|| decreases in beta, and bisects ln(beta) for the ratio delta.
    Near a crossing of the top eigenvalues the maximizer mixes the vectors at
    both ends of the bracket, so the plane they span is scanned at the end.
    """
    dtd = dm.T @ dm
    ata = am.T @ am
    top = float(np.linalg.eigvalsh(dtd)[-1])
    if top == 0.0:
        return 0.0
    low_vector = _top_vector(dtd, ata, 0.0)
    best = float(_scaled_values(low_vector[None, :], dm, am, delta)[0])
    if np.linalg.norm(am @ low_vector) <= delta:
        return best
    try:
        # Top generalized eigenvector of (D^T D, A^T A), for a maximizer inside the ball
        lower = np.linalg.cholesky(ata)
        inverse = np.linalg.inv(lower)
        _, vectors = np.linalg.eigh(inverse @ dtd @ inverse.T)
        candidate = np.linalg.solve(lower.T, vectors[:, -1])
        candidate /= np.linalg.norm(candidate)
        best = max(best, float(_scaled_values(candidate[None, :], dm, am, delta)[0]))
    except np.linalg.LinAlgError:
        pass
    hi = np.log(top / delta**2) + 10.0
    lo = hi - SEARCH_SPAN
    high_vector = _top_vector(dtd, ata, float(np.exp(hi)))
    for _ in range(steps):
        mid = (lo + hi) / 2
        vector = _top_vector(dtd, ata, float(np.exp(mid)))
        best = max(best, float(_scaled_values(vector[None, :], dm, am, delta)[0]))
        if np.linalg.norm(am @ vector) > delta:
            lo, low_vector = mid, vector
        else:
            hi, high_vector = mid, vector
    if dm.shape[1] < 2:
        return best
    basis, _ = np.linalg.qr(np.stack([low_vector, high_vector], axis=1))
    angles = np.linspace(0.0, np.pi, 4096, endpoint=False)
    width = np.pi / 4096
    for _ in range(4):
        plane = np.stack([np.cos(angles), np.sin(angles)], axis=1) @ basis.T
        values = _scaled_values(plane, dm, am, delta)
        best = max(best, float(np.max(values)))
        centre = angles[int(np.argmax(values))]
        angles = np.linspace(centre - width, centre + width, 257)
        width /= 128
    return best


def sampled_modulus(
    d: DenseMatrix,
    a: DenseMatrix,
    delta: float,
    samples: int = 100_000,
    seed: int = 0,
    polish: bool = True,
) -> float:
    """
    Primal lower estimate of omega(delta) in float64. Every direction u is pulled
    onto the boundary of the feasible set at min(1, delta/||A u||) u; in two
    dimensions the directions form a uniform mesh of the half circle, otherwise
    they are random. With ``polish`` the estimate is raised by following the
    top eigenvector path of D^T D - beta A^T A, which reaches the maximizer
    when the dual is tight. Every evaluated point is feasible, so the result
    never exceeds omega(delta) beyond float64 rounding.
    """
    dm = np.array(d.entries, dtype=float)
    am = np.array(a.entries, dtype=float)
    n = d.cols
    if n == 2:
        angles = np.linspace(0.0, np.pi, samples, endpoint=False)
        directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        rng = np.random.default_rng(seed)
        directions = rng.normal(size=(samples, n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    best = float(np.max(_scaled_values(directions, dm, am, delta)))
    if polish:
        best = max(best, _polish(dm, am, delta))
    return best


def modulus_curve(
    d_spec: OperatorSpec,
    a_spec: OperatorSpec,
    n: int,
    deltas: Sequence[Any],
    precision: PrecisionContext,
    radius: float = 1.0,
) -> ModulusCurve:
    """
    Sections of both operators at n columns and omega on a decreasing grid. A
    curve that increases as delta decreases beyond the working tolerance is
    flagged unreliable.
    """
    mp = precision.mp
    grid = [mp.mpf(x) for x in deltas]
    if not grid or any(x <= 0 for x in grid):
        raise ValueError("The delta grid must be non-empty and positive")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("The delta grid must be strictly decreasing")
    d_section = d_spec.resized(n)
    a_section = a_spec.resized(n)
    d = create_operator(d_section, precision)
    a = create_operator(a_section, precision)
    omegas = [modulus(d, a, delta, radius) for delta in grid]

    reliable = d.reliable and a.reliable
    slack = precision.tolerance(precision.bits // 2)
    for index, (w_a, w_b) in enumerate(zip(omegas, omegas[1:])):
        if w_b > w_a * (1 + slack):
            reliable = False
            logger.warning(
                f"omega increased from {mp.nstr(w_a, 10)} to {mp.nstr(w_b, 10)} "
                f"between grid points {index + 1} and {index + 2}"
            )
    logger.info(f"Modulus curve with {len(grid)} points at n={n}")
    return ModulusCurve(
        deltas=tuple(grid),
        omegas=tuple(omegas),
        d_spec=d_section,
        a_spec=a_section,
        n=n,
        radius=radius,
        bits=precision.bits,
        reliable=reliable,
    )


def check_thm_general(
    d_sigmas: Sequence[Any],
    a_sigmas: Sequence[Any],
    psi: Callable[[Any], Any],
    tolerance: float = 1e-8,
) -> TheoremCheck:
    """Index-wise sigma_i(D) <= Psi(sigma_i(A)), up to a relative tolerance."""
    if len(d_sigmas) != len(a_sigmas):
        raise DimensionError(
            f"Spectra differ in length: {len(d_sigmas)} vs {len(a_sigmas)}"
        )
    first = None
    max_ratio = 0.0
    for index, (sd, sa) in enumerate(zip(d_sigmas, a_sigmas), start=1):
        bound = psi(sa)
        if bound > 0:
            max_ratio = max(max_ratio, float(sd / bound))
        if sd > bound * (1 + tolerance) and first is None:
            first = index
    if first is not None:
        logger.warning(f"sigma_i(D) <= Psi(sigma_i(A)) fails first at i={first}")
    return TheoremCheck(
        passed=first is None,
        checked=len(d_sigmas),
        first_violation=first,
        max_ratio=max_ratio,
    )


def fit_log_envelope(
    curve: ModulusCurve, k: int, window: tuple[float, float] | None = None
) -> StabilityFit:
    """
    Chebyshev fit of ln omega = ln C_k - k ln ln(1/delta): with
    r = ln omega + k ln ln(1/delta), ln C_k is the midrange of r and the
    residual its half range.
    """
    mp = PrecisionContext.for_bits(curve.bits).mp
    points = [
        (delta, omega)
        for delta, omega in zip(curve.deltas, curve.omegas)
        if window is None or window[0] <= delta <= window[1]
    ]
    if len(points) < 3:
        raise ValueError(f"An envelope fit needs at least 3 grid points, got {len(points)}")
    if any(delta >= 1 or omega <= 0 for delta, omega in points):
        raise ValueError("Envelope fits need 0 < delta < 1 and omega > 0")
    r = [float(mp.log(omega) + k * mp.log(mp.log(1 / delta))) for delta, omega in points]
    log_constant = (max(r) + min(r)) / 2
    deltas = [float(delta) for delta, _ in points]
    return StabilityFit(
        k=k,
        constant=float(mp.exp(log_constant)),
        upper_constant=float(mp.exp(max(r))),
        window=(min(deltas), max(deltas)),
        residual=(max(r) - min(r)) / 2,
    )


def envelope(fit: StabilityFit, precision: PrecisionContext) -> Callable[[Any], BigReal]:
    """Psi(delta) = C_k / ln(1/delta)^k with the bounding constant."""
    mp = precision.mp
    constant = mp.mpf(fit.upper_constant)

    def psi(delta: Any) -> BigReal:
        return constant / mp.log(1 / mp.mpf(delta)) ** fit.k

    return psi


def lower_bound_from_envelope(
    fit: StabilityFit, d_sigmas: Sequence[Any], precision: PrecisionContext
) -> list[BigReal]:
    """Psi^-1(sigma_i(D)) = exp(-(C_k / sigma_i(D))^(1/k)), a lower bound for sigma_i(A)."""
    mp = precision.mp
    constant = mp.mpf(fit.upper_constant)
    return [mp.exp(-((constant / mp.mpf(s)) ** (mp.mpf(1) / fit.k))) for s in d_sigmas]


def equilibrated_cutoff(delta: Any, precision: PrecisionContext) -> int:
    """Section size floor(ln(1/delta)/4) + 1 balancing data error and truncation."""
    mp = precision.mp
    delta = mp.mpf(delta)
    if delta <= 0 or delta >= 1:
        raise DomainError(f"delta must lie in (0, 1), got {mp.nstr(delta, 8)}")
    return int(mp.floor(mp.log(1 / delta) / 4)) + 1
