"""Obfuscation mechanisms and mechanism combinators.

Baselines (randomized response, the exponential-decay geometric kernel)
live next to the coupling mechanism, which routes an estimated input
distribution to a prescribed output distribution through a coupling and
therefore ships the output distribution exactly when the estimate is
exact. Compositions (sequential, pairwise-lifted sequential, output
post-processing) and stability checks for pre-processing round it out.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass
from typing import Iterable, Mapping

import numpy as np

from .divergences import max_divergence
from .errors import (
    GroundMismatchError,
    InvalidCouplingError,
    InvalidEpsilonError,
    UnknownLabelError,
    UnsupportedInputError,
    ValidationError,
)
from .finite_prob import (
    DistributionPairRelation,
    FiniteDistribution,
    GroundMetric,
    StochasticKernel,
    _clean_ground,
    lift,
    pair_label,
)
from .tolerances import TAU_MASS, TAU_NUM, TAU_ZERO
from .transport import (
    Coupling,
    emd,
    northwest_corner,
    validate_coupling,
    wasserstein_inf,
    wasserstein_p,
)

FALLBACK_ERROR = "error"
FALLBACK_SAMPLE_TARGET = "sample_target"
_FALLBACKS = (FALLBACK_ERROR, FALLBACK_SAMPLE_TARGET)

MODE_OPTIMAL = "optimal"
MODE_NORTHWEST = "northwest"
MODE_GIVEN = "given"
_MODES = (MODE_OPTIMAL, MODE_NORTHWEST, MODE_GIVEN)


def randomized_response(ground: Iterable[str], epsilon: float) -> StochasticKernel:
    """k-ary randomized response at privacy level ``epsilon``.

    Keeps the true label with probability e^eps / (e^eps + k - 1) and
    spreads the rest uniformly over the other labels.
    """
    ground = _clean_ground(ground)
    k = len(ground)
    if k < 2:
        raise ValidationError("randomized response needs at least two labels")
    if not (math.isfinite(epsilon) and epsilon >= 0.0):
        raise InvalidEpsilonError(f"epsilon {epsilon!r} must be finite and >= 0")
    denom = math.exp(epsilon) + k - 1
    matrix = np.full((k, k), 1.0 / denom)
    np.fill_diagonal(matrix, math.exp(epsilon) / denom)
    return StochasticKernel(ground, ground, matrix)


@dataclass(frozen=True)
class GeometricMechanism:
    """A geometric kernel together with its audited worst-case level.

    ``effective_epsilon`` is the tightest metric-scaled max-divergence
    level the rows actually attain; row normalization can push it above
    the nominal decay rate, so the audited value is reported rather than
    assumed.
    """

    kernel: StochasticKernel
    effective_epsilon: float


def geometric_mechanism(
    ground: Iterable[str], epsilon: float, metric: GroundMetric
) -> GeometricMechanism:
    """Rows proportional to exp(-epsilon * d(x, y)), normalized per row."""
    ground = _clean_ground(ground)
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise InvalidEpsilonError(f"epsilon {epsilon!r} must be finite and > 0")
    cost = metric.submatrix(ground, ground)
    weights = np.exp(-epsilon * cost)
    matrix = weights / weights.sum(axis=1, keepdims=True)
    kernel = StochasticKernel(ground, ground, matrix)

    worst = 0.0
    rows = [kernel.row_by_index(i) for i in range(len(ground))]
    for a in range(len(ground)):
        for b in range(len(ground)):
            if a == b:
                continue
            level = max_divergence(rows[a], rows[b])
            d = cost[a, b]
            if d <= TAU_ZERO:
                if level > TAU_NUM:
                    worst = math.inf
                continue
            worst = max(worst, level / d)
    return GeometricMechanism(kernel, worst)


@dataclass(frozen=True)
class CouplingEntry:
    """Per-auxiliary-value data: the estimated input distribution and the
    coupling that routes it to the shared target."""

    s: str
    approx_input: FiniteDistribution
    coupling: Coupling


@dataclass(frozen=True)
class CouplingMechanismSpec:
    """A coupling mechanism: a target output distribution plus, for each
    auxiliary value, an estimated input distribution and a coupling of the
    estimate with the target.

    ``fallback`` decides what an input with (estimated) zero mass gets:
    ``"error"`` refuses, ``"sample_target"`` emits the target directly.
    """

    target: FiniteDistribution
    entries: tuple[CouplingEntry, ...]
    fallback: str = FALLBACK_ERROR
    tau_mass: InitVar[float] = TAU_MASS

    def __post_init__(self, tau_mass: float) -> None:
        if self.fallback not in _FALLBACKS:
            raise ValidationError(
                f"fallback must be one of {_FALLBACKS}, got {self.fallback!r}"
            )
        entries = tuple(self.entries)
        if not entries:
            raise ValidationError("coupling mechanism needs at least one auxiliary value")
        seen = set()
        for entry in entries:
            if entry.s in seen:
                raise ValidationError(f"duplicate auxiliary value {entry.s!r}")
            seen.add(entry.s)
            if entry.approx_input.ground != entries[0].approx_input.ground:
                raise GroundMismatchError(
                    "all estimated inputs must share one ground set"
                )
            if not validate_coupling(
                entry.coupling, entry.approx_input, self.target, tau_mass
            ):
                raise InvalidCouplingError(
                    f"coupling for auxiliary value {entry.s!r} does not have the "
                    "declared marginals"
                )
        object.__setattr__(self, "entries", entries)

    @property
    def aux(self) -> tuple[str, ...]:
        return tuple(entry.s for entry in self.entries)

    def entry_for(self, s: str) -> CouplingEntry:
        for entry in self.entries:
            if entry.s == s:
                return entry
        raise UnknownLabelError(f"auxiliary value {s!r} not in mechanism")


def build_coupling_mechanism(
    target: FiniteDistribution,
    approx_inputs: Mapping[str, FiniteDistribution],
    mode: str = MODE_OPTIMAL,
    *,
    metric: GroundMetric | None = None,
    couplings: Mapping[str, Coupling] | None = None,
    fallback: str = FALLBACK_ERROR,
) -> CouplingMechanismSpec:
    """Assemble a coupling mechanism for the given estimates.

    Modes: ``"optimal"`` picks the cost-minimal coupling under ``metric``
    (the utility-optimal choice), ``"northwest"`` the staircase coupling,
    ``"given"`` validates caller-supplied couplings.
    """
    if mode not in _MODES:
        raise ValidationError(f"mode must be one of {_MODES}, got {mode!r}")
    if not approx_inputs:
        raise ValidationError("approx_inputs must be nonempty")
    entries = []
    for s, lam_hat in approx_inputs.items():
        s = str(s)
        if mode == MODE_OPTIMAL:
            if metric is None:
                raise ValidationError("optimal mode needs a metric")
            coupling = emd(lam_hat, target, metric).coupling
        elif mode == MODE_NORTHWEST:
            coupling = northwest_corner(lam_hat, target)
        else:
            if couplings is None or s not in couplings:
                raise ValidationError(f"given mode needs a coupling for {s!r}")
            coupling = couplings[s]
        entries.append(CouplingEntry(s, lam_hat, coupling))
    return CouplingMechanismSpec(target, tuple(entries), fallback)


def cp_kernel(spec: CouplingMechanismSpec, s: str) -> StochasticKernel:
    """The mechanism's kernel for auxiliary value ``s``.

    Row x is the coupling row conditioned on x. Inputs the estimate
    declares impossible are served by the fallback policy.
    """
    entry = spec.entry_for(s)
    lam_hat = entry.approx_input
    mass = entry.coupling.mass
    k = len(lam_hat.ground)
    matrix = np.zeros((k, len(spec.target.ground)))
    for i in range(k):
        p = lam_hat.probs[i]
        if p > TAU_ZERO:
            matrix[i] = mass[i] / p
        elif spec.fallback == FALLBACK_SAMPLE_TARGET:
            matrix[i] = spec.target.probs
        else:
            raise UnsupportedInputError(
                f"input {lam_hat.ground[i]!r} has zero estimated mass and "
                "fallback is 'error'"
            )
    return StochasticKernel(lam_hat.ground, spec.target.ground, matrix)


@dataclass(frozen=True)
class AuxIndexedKernel:
    """A family of kernels indexed by auxiliary values, sharing grounds."""

    kernels: Mapping[str, StochasticKernel]

    def __post_init__(self) -> None:
        kernels = dict(self.kernels)
        if not kernels:
            raise ValidationError("auxiliary kernel family must be nonempty")
        first = next(iter(kernels.values()))
        for kernel in kernels.values():
            if kernel.inputs != first.inputs or kernel.outputs != first.outputs:
                raise GroundMismatchError(
                    "all kernels in a family must share input and output grounds"
                )
        object.__setattr__(self, "kernels", kernels)

    @property
    def aux(self) -> tuple[str, ...]:
        return tuple(self.kernels)

    def kernel_for(self, s: str) -> StochasticKernel:
        try:
            return self.kernels[s]
        except KeyError:
            raise UnknownLabelError(f"auxiliary value {s!r} not in family") from None


def aux_kernel(spec: CouplingMechanismSpec) -> AuxIndexedKernel:
    """All per-auxiliary kernels of a coupling mechanism."""
    return AuxIndexedKernel({s: cp_kernel(spec, s) for s in spec.aux})


@dataclass(frozen=True)
class AdaptiveKernel:
    """A second-stage kernel that may depend on the first stage's output:
    one StochasticKernel per selector label, all sharing grounds."""

    branches: Mapping[str, StochasticKernel]

    def __post_init__(self) -> None:
        branches = dict(self.branches)
        if not branches:
            raise ValidationError("adaptive kernel needs at least one branch")
        first = next(iter(branches.values()))
        for kernel in branches.values():
            if kernel.inputs != first.inputs or kernel.outputs != first.outputs:
                raise GroundMismatchError("all branches must share grounds")
        object.__setattr__(self, "branches", branches)

    @classmethod
    def constant(
        cls, selectors: Iterable[str], kernel: StochasticKernel
    ) -> "AdaptiveKernel":
        return cls({str(y): kernel for y in selectors})

    def branch(self, selector: str) -> StochasticKernel:
        try:
            return self.branches[selector]
        except KeyError:
            raise UnknownLabelError(
                f"no branch for selector {selector!r}"
            ) from None


def _as_adaptive(
    first: StochasticKernel, second: AdaptiveKernel | StochasticKernel
) -> AdaptiveKernel:
    if isinstance(second, StochasticKernel):
        second = AdaptiveKernel.constant(first.outputs, second)
    missing = [y for y in first.outputs if y not in second.branches]
    if missing:
        raise GroundMismatchError(f"missing branches for selectors {missing}")
    branch0 = second.branch(first.outputs[0])
    if branch0.inputs != first.inputs:
        raise GroundMismatchError(
            "second-stage inputs must match the first stage's inputs"
        )
    return second


def _branch_stack(first: StochasticKernel, second: AdaptiveKernel) -> np.ndarray:
    return np.stack([second.branch(y).matrix for y in first.outputs])


def seq_compose(
    first: StochasticKernel,
    second: AdaptiveKernel | StochasticKernel,
    marginalize: bool = False,
) -> StochasticKernel:
    """Run ``first``, then the branch of ``second`` picked by its output.

    Emits the joint pair (y0, y1) by default; ``marginalize`` keeps only
    the second coordinate.
    """
    second = _as_adaptive(first, second)
    stack = _branch_stack(first, second)  # (|Y0|, |X|, |Y1|)
    y1 = second.branch(first.outputs[0]).outputs
    if marginalize:
        matrix = np.einsum("xj,jxk->xk", first.matrix, stack)
        return StochasticKernel(first.inputs, y1, matrix)
    joint = np.einsum("xj,jxk->xjk", first.matrix, stack)
    outputs = tuple(pair_label(a, b) for a in first.outputs for b in y1)
    return StochasticKernel(
        first.inputs, outputs, joint.reshape(len(first.inputs), -1)
    )


def liftseq_compose(
    first: StochasticKernel,
    second: AdaptiveKernel | StochasticKernel,
    marginalize: bool = False,
) -> StochasticKernel:
    """Pairwise-lifted sequential composition.

    Input pairs (x0, x1): ``first`` consumes x0, the selected branch of
    ``second`` consumes x1. Emits the joint (y0, y1) unless marginalized.
    """
    second = _as_adaptive(first, second)
    stack = _branch_stack(first, second)
    y1 = second.branch(first.outputs[0]).outputs
    inputs = tuple(
        pair_label(a, b) for a in first.inputs for b in first.inputs
    )
    if marginalize:
        matrix = np.einsum("aj,jbk->abk", first.matrix, stack)
        return StochasticKernel(inputs, y1, matrix.reshape(len(inputs), -1))
    joint = np.einsum("aj,jbk->abjk", first.matrix, stack)
    outputs = tuple(pair_label(a, b) for a in first.outputs for b in y1)
    return StochasticKernel(inputs, outputs, joint.reshape(len(inputs), -1))


def post_process(
    first: StochasticKernel, second: StochasticKernel
) -> StochasticKernel:
    """Feed every output of ``first`` through ``second`` (matrix product)."""
    if first.outputs != second.inputs:
        raise GroundMismatchError(
            "post-processing inputs must match the first kernel's outputs"
        )
    return StochasticKernel(first.inputs, second.outputs, first.matrix @ second.matrix)


def _wass(lam, mu, metric, order):
    if order == "inf" or (isinstance(order, float) and math.isinf(order)):
        return wasserstein_inf(lam, mu, metric).cost
    return wasserstein_p(lam, mu, metric, p=float(order)).cost


def stability_check(
    kernel: StochasticKernel,
    c: float,
    *,
    pairs: Iterable | None = None,
    metric: GroundMetric | None = None,
    order: float | str = 1.0,
    relation: DistributionPairRelation | None = None,
) -> bool:
    """Check a pre-processing kernel's expansion bound on supplied pairs.

    Metric form (``pairs`` + ``metric``): every pair must satisfy
    W(T#a, T#b) <= c * W(a, b) + TAU_NUM for the chosen Wasserstein order.

    Relation form (``relation``): for every related pair, the image of the
    right member must reach the image of the left member in at most ``c``
    steps along the relation, where a step crosses one related pair in
    either orientation and distributions are matched within TAU_NUM.
    """
    if (relation is None) == (pairs is None and metric is None):
        raise ValidationError("provide either pairs+metric or relation")
    if relation is None:
        if pairs is None or metric is None:
            raise ValidationError("metric form needs both pairs and metric")
        if c < 0.0:
            raise ValidationError("expansion factor c must be nonnegative")
        for pair in pairs:
            a, b = (pair.left, pair.right) if hasattr(pair, "left") else pair
            before = _wass(a, b, metric, order)
            after = _wass(lift(kernel, a), lift(kernel, b), metric, order)
            if after > c * before + TAU_NUM:
                return False
        return True

    steps = int(c)
    if steps < 0 or steps != c:
        raise ValidationError("relation form needs a nonnegative integer step count")
    nodes: list[FiniteDistribution] = []

    def node_id(dist: FiniteDistribution) -> int | None:
        for i, known in enumerate(nodes):
            if known.is_close(dist, TAU_NUM):
                return i
        return None

    def intern(dist: FiniteDistribution) -> int:
        i = node_id(dist)
        if i is None:
            nodes.append(dist)
            i = len(nodes) - 1
        return i

    edges: set[tuple[int, int]] = set()
    pair_ids = []
    for pair in relation:
        a = intern(pair.left)
        b = intern(pair.right)
        edges.add((a, b))
        edges.add((b, a))
        pair_ids.append((a, b))

    neighbors: dict[int, set[int]] = {}
    for a, b in edges:
        neighbors.setdefault(a, set()).add(b)

    for pair in relation:
        goal_dist = lift(kernel, pair.left)
        start_dist = lift(kernel, pair.right)
        if goal_dist.is_close(start_dist, TAU_NUM):
            continue
        start = node_id(start_dist)
        goal = node_id(goal_dist)
        if start is None or goal is None:
            return False
        frontier = {start}
        seen = {start}
        reached = False
        for _ in range(steps):
            frontier = {
                nxt
                for node in frontier
                for nxt in neighbors.get(node, ())
                if nxt not in seen
            }
            seen |= frontier
            if goal in seen:
                reached = True
                break
        if not reached:
            return False
    return True


def sample_outputs(
    kernel: StochasticKernel, labels: Iterable[str], rng: np.random.Generator
) -> list[str]:
    """Sample one output per input label by inverse-CDF over the row.

    One uniform draw is consumed per input, in order, so a seeded
    counter-based generator reproduces the stream exactly.
    """
    out = []
    for label in labels:
        row = kernel.matrix[kernel.input_index(str(label))]
        cum = np.cumsum(row)
        u = rng.random()
        idx = int(np.searchsorted(cum, u, side="right"))
        out.append(kernel.outputs[min(idx, len(kernel.outputs) - 1)])
    return out
