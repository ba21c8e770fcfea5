"""Divergences between finite distributions.

Two families are provided:

* f-divergences ``sum over supp(nu) of nu[y] * f(mu[y] / nu[y])`` for a
  convex generator f with f(1) = 0, returning +inf when absolute
  continuity fails (some y has nu[y] = 0 but mu[y] > 0);
* the max divergence ``max over y in supp(mu) of ln(mu[y] / nu[y])`` and
  its slack-delta variant, the largest ``ln((mu[R] - delta) / nu[R])``
  over events R inside supp(mu) with mu[R] >= delta.

Natural logarithms throughout. +inf is a legal value, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .errors import (
    EmptyRelationError,
    GroundMismatchError,
    InvalidGeneratorError,
    ValidationError,
)
from .finite_prob import FiniteDistribution, PointRelation, StochasticKernel
from .tolerances import TAU_ZERO

INF = math.inf

# Exhaustive event enumeration is limited to supports of this size.
MAX_EXACT_SUPPORT = 20


@dataclass(frozen=True)
class FDivergenceKind:
    """A named f-divergence: a convex generator with f(1) = 0.

    ``generator`` must accept a numpy array of nonnegative ratios and
    return the elementwise values; +inf entries are allowed (for
    generators unbounded at 0).
    """

    name: str
    generator: Callable[[np.ndarray], np.ndarray]

    def __call__(self, ratios: np.ndarray) -> np.ndarray:
        return self.generator(ratios)

    def __repr__(self) -> str:
        return f"FDivergenceKind({self.name})"


def _gen_kl(t: np.ndarray) -> np.ndarray:
    # t * ln(t), continuously extended with 0 at t = 0
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, t * np.log(safe), 0.0)


def _gen_rkl(t: np.ndarray) -> np.ndarray:
    # -ln(t), +inf at t = 0
    safe = np.where(t > 0.0, t, 1.0)
    return np.where(t > 0.0, -np.log(safe), INF)


def _gen_tv(t: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(t - 1.0)


def _gen_chi2(t: np.ndarray) -> np.ndarray:
    return (t - 1.0) ** 2


def _gen_hellinger(t: np.ndarray) -> np.ndarray:
    return 0.5 * (np.sqrt(t) - 1.0) ** 2


KL = FDivergenceKind("kl", _gen_kl)
REVERSE_KL = FDivergenceKind("rkl", _gen_rkl)
TOTAL_VARIATION = FDivergenceKind("tv", _gen_tv)
CHI_SQUARED = FDivergenceKind("chi2", _gen_chi2)
HELLINGER = FDivergenceKind("hellinger", _gen_hellinger)

STANDARD_KINDS: tuple[FDivergenceKind, ...] = (
    KL,
    REVERSE_KL,
    TOTAL_VARIATION,
    CHI_SQUARED,
    HELLINGER,
)

KIND_BY_NAME = {kind.name: kind for kind in STANDARD_KINDS}

# Spot-check grid for custom generators: geometric, straddling 1.
_CHECK_GRID = 2.0 ** np.arange(-10, 11)


def custom_kind(name: str, generator: Callable) -> FDivergenceKind:
    """Wrap a user generator after convexity and normalization spot checks.

    The generator is probed at a fixed grid of ratios: f(1) must vanish and
    midpoint convexity must hold on every grid pair. Scalar-only callables
    are vectorized.
    """
    try:
        probe = np.asarray(generator(_CHECK_GRID), dtype=float)
        if probe.shape != _CHECK_GRID.shape:
            raise TypeError
        vec = generator
    except Exception:
        vec = np.vectorize(generator, otypes=[float])
        probe = vec(_CHECK_GRID)
    if not np.all(np.isfinite(probe)):
        raise InvalidGeneratorError(
            f"generator {name!r} is not finite on the check grid"
        )
    one = float(vec(np.array([1.0]))[0])
    if abs(one) > 1e-9:
        raise InvalidGeneratorError(f"generator {name!r} has f(1) = {one:g}, expected 0")
    a = _CHECK_GRID[:, None]
    b = _CHECK_GRID[None, :]
    mid = vec((a + b) / 2.0)
    if np.any(mid > (vec(a) + vec(b)) / 2.0 + 1e-9):
        raise InvalidGeneratorError(f"generator {name!r} fails midpoint convexity")
    return FDivergenceKind(name, vec)


@dataclass(frozen=True)
class MaxDivergence:
    """Descriptor for the max divergence with additive slack ``delta``."""

    delta: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.delta <= 1.0):
            raise ValidationError(f"delta {self.delta:g} outside [0, 1]")

    @property
    def name(self) -> str:
        return "max" if self.delta == 0.0 else f"max(delta={self.delta:g})"


Divergence = FDivergenceKind | MaxDivergence


def _require_shared_ground(mu: FiniteDistribution, nu: FiniteDistribution) -> None:
    if mu.ground != nu.ground:
        raise GroundMismatchError("divergence requires a shared ground set")


def f_divergence(
    kind: FDivergenceKind, mu: FiniteDistribution, nu: FiniteDistribution
) -> float:
    """f-divergence of ``mu`` from ``nu`` (second argument is the reference).

    Sums ``nu[y] * f(mu[y]/nu[y])`` over the support of ``nu``; returns +inf
    when ``mu`` puts mass outside that support. The convention
    0 * f(0/0) = 0 is built in because y outside supp(nu) contributes
    nothing.
    """
    _require_shared_ground(mu, nu)
    p = mu.probs
    q = nu.probs
    on = q > TAU_ZERO
    if np.any(p[~on] > TAU_ZERO):
        return INF
    ratios = p[on] / q[on]
    values = np.asarray(kind(ratios), dtype=float)
    if np.any(np.isnan(values)):
        raise InvalidGeneratorError(
            f"generator {kind.name!r} produced NaN on valid ratios"
        )
    total = float(np.sum(q[on] * values))
    if math.isnan(total):
        raise InvalidGeneratorError(
            f"generator {kind.name!r} produced values summing to NaN"
        )
    return total


def max_divergence(mu: FiniteDistribution, nu: FiniteDistribution) -> float:
    """Largest log likelihood ratio ``ln(mu[y]/nu[y])`` over supp(mu)."""
    _require_shared_ground(mu, nu)
    p = mu.probs
    q = nu.probs
    on = p > TAU_ZERO
    if np.any(q[on] <= TAU_ZERO):
        return INF
    return float(np.max(np.log(p[on] / q[on])))


def approx_max_divergence(
    mu: FiniteDistribution,
    nu: FiniteDistribution,
    delta: float,
    exact_subsets: bool = False,
) -> float:
    """Max divergence with additive slack.

    Maximizes ``ln((mu[R] - delta) / nu[R])`` over events R inside supp(mu)
    with mu[R] >= delta. Events whose numerator vanishes contribute -inf;
    if no event has positive numerator the result is -inf (a vacuous
    constraint, reported as a sentinel rather than an error).

    The default path evaluates prefixes of the support sorted by decreasing
    likelihood ratio (ratio-level sets), which attain the maximum; set
    ``exact_subsets`` to enumerate every event instead (supports up to
    ``MAX_EXACT_SUPPORT`` labels).
    """
    _require_shared_ground(mu, nu)
    if not (0.0 <= delta <= 1.0):
        raise ValidationError(f"delta {delta:g} outside [0, 1]")
    p = mu.probs
    q = nu.probs
    on = np.flatnonzero(p > TAU_ZERO)
    if on.size == 0:
        return -INF
    if exact_subsets:
        return _exact_event_max(p[on], q[on], delta)

    ps = p[on]
    qs = q[on]
    ratios = np.where(qs > TAU_ZERO, ps / np.where(qs > TAU_ZERO, qs, 1.0), INF)
    order = np.argsort(-ratios, kind="stable")
    cp = np.cumsum(ps[order])
    cq = np.cumsum(qs[order])
    best = -INF
    for k in range(on.size):
        if cp[k] < delta:
            continue
        num = cp[k] - delta
        if num <= 0.0:
            continue
        if cq[k] <= TAU_ZERO:
            return INF
        best = max(best, math.log(num / cq[k]))
    return best


def _exact_event_max(ps: np.ndarray, qs: np.ndarray, delta: float) -> float:
    """Enumerate all events over the support (chunked bitmask sweep)."""
    k = ps.size
    if k > MAX_EXACT_SUPPORT:
        raise ValidationError(
            f"exact event enumeration limited to supports of size "
            f"{MAX_EXACT_SUPPORT}, got {k}"
        )
    best = -INF
    total = 1 << k
    shifts = np.arange(k)
    chunk = 1 << 16
    for start in range(1, total, chunk):
        stop = min(start + chunk, total)
        codes = np.arange(start, stop, dtype=np.int64)
        bits = (codes[:, None] >> shifts[None, :]) & 1
        P = bits @ ps
        Q = bits @ qs
        num = P - delta
        ok = (P >= delta) & (num > 0.0)
        if not np.any(ok):
            continue
        numk = num[ok]
        Qk = Q[ok]
        if np.any(Qk <= TAU_ZERO):
            return INF
        best = max(best, float(np.max(np.log(numk / Qk))))
    return best


def delta_required(
    kernel: StochasticKernel, phi: PointRelation, epsilon: float
) -> float:
    """Smallest additive slack making the kernel epsilon-close on ``phi``.

    For each related pair, in both directions, accumulates
    ``sum over y of max(0, P[y] - e^epsilon * Q[y])`` and returns the worst
    value. Zero means the multiplicative bound alone already holds.
    """
    if len(phi) == 0:
        raise EmptyRelationError("relation has no pairs")
    if epsilon < 0.0:
        raise ValidationError(f"epsilon {epsilon:g} must be nonnegative")
    scale = math.exp(epsilon)
    worst = 0.0
    for a, b in phi:
        pa = kernel.matrix[kernel.input_index(a)]
        pb = kernel.matrix[kernel.input_index(b)]
        fwd = float(np.sum(np.maximum(0.0, pa - scale * pb)))
        bwd = float(np.sum(np.maximum(0.0, pb - scale * pa)))
        worst = max(worst, fwd, bwd)
    return worst


def divergence_value(
    divergence: Divergence,
    mu: FiniteDistribution,
    nu: FiniteDistribution,
    exact_subsets: bool = False,
) -> float:
    """Evaluate an f-divergence or (slack) max divergence descriptor."""
    if isinstance(divergence, FDivergenceKind):
        return f_divergence(divergence, mu, nu)
    if isinstance(divergence, MaxDivergence):
        if divergence.delta == 0.0:
            return max_divergence(mu, nu)
        return approx_max_divergence(
            mu, nu, divergence.delta, exact_subsets=exact_subsets
        )
    raise ValidationError(f"unknown divergence descriptor {divergence!r}")
