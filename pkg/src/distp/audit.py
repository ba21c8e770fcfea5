"""Numerical auditors for privacy definitions and utility loss.

Each auditor evaluates a divergence (or a metric-scaled divergence) over
every supplied pair, in both directions, and reports the supremum. An
infinite observed level is a legal outcome and is reported, never raised;
exceptions are reserved for malformed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .divergences import (
    KL,
    STANDARD_KINDS,
    Divergence,
    MaxDivergence,
    divergence_value,
    max_divergence,
)
from .errors import (
    EmptyRelationError,
    GroundMismatchError,
    InfiniteEpsilonError,
    ValidationError,
)
from .finite_prob import (
    DistributionPairRelation,
    FiniteDistribution,
    GroundMetric,
    PointRelation,
    StochasticKernel,
    lift,
    pair_label,
)
from .mechanisms import AuxIndexedKernel, CouplingMechanismSpec, aux_kernel
from .tolerances import TAU_NUM, TAU_ZERO
from .transport import _cost_block, wasserstein_inf, wasserstein_p

NOTION_DP = "dp"
NOTION_XDP = "xdp"
NOTION_DISTP = "distp"
NOTION_XDISTP = "xdistp"


@dataclass(frozen=True)
class PairAudit:
    """One audited pair: the two directional values and the verdict."""

    pair: str
    forward: float
    backward: float
    bound: float | None

    @property
    def value(self) -> float:
        return max(self.forward, self.backward)

    @property
    def passed(self) -> bool | None:
        if self.bound is None:
            return None
        return self.value <= self.bound + TAU_NUM

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "forward": self.forward,
            "backward": self.backward,
            "value": self.value,
            "bound": self.bound,
            "pass": self.passed,
        }


@dataclass(frozen=True)
class AuditReport:
    """Aggregated audit outcome.

    ``observed_eps`` is the maximum per-pair value; the verdict compares it
    with ``claimed_eps`` (a missing claim passes vacuously).
    """

    notion: str
    divergence: str
    claimed_eps: float | None
    observed_eps: float
    worst_pair: str
    pairs: tuple[PairAudit, ...]

    @property
    def passed(self) -> bool:
        if self.claimed_eps is None:
            return True
        return self.observed_eps <= self.claimed_eps + TAU_NUM

    def to_dict(self) -> dict:
        return {
            "notion": self.notion,
            "divergence": self.divergence,
            "claimed_eps": self.claimed_eps,
            "observed_eps": self.observed_eps,
            "worst_pair": self.worst_pair,
            "verdict": "pass" if self.passed else "fail",
            "pairs": [p.to_dict() for p in self.pairs],
        }


def _assemble(
    notion: str,
    divergence_name: str,
    entries: list[tuple[str, float, float]],
    claimed: float | None,
) -> AuditReport:
    pairs = tuple(
        PairAudit(label, fwd, bwd, claimed) for label, fwd, bwd in entries
    )
    observed = max(p.value for p in pairs)
    worst = next(p.pair for p in pairs if p.value == observed)
    return AuditReport(notion, divergence_name, claimed, observed, worst, pairs)


def _check_nonempty(relation) -> None:
    if len(relation) == 0:
        raise EmptyRelationError("relation has no pairs")


def audit_div_dp(
    kernel: StochasticKernel,
    phi: PointRelation,
    divergence: Divergence,
    claimed_eps: float | None = None,
    *,
    exact_subsets: bool = False,
) -> AuditReport:
    """Worst divergence between output rows over all related input pairs."""
    _check_nonempty(phi)
    entries = []
    for a, b in phi:
        row_a = kernel.row(a)
        row_b = kernel.row(b)
        fwd = divergence_value(divergence, row_a, row_b, exact_subsets)
        bwd = divergence_value(divergence, row_b, row_a, exact_subsets)
        entries.append((pair_label(a, b), fwd, bwd))
    return _assemble(NOTION_DP, divergence.name, entries, claimed_eps)


def _scaled(value: float, distance: float) -> float:
    """Divergence per unit distance; zero-distance pairs must have zero
    divergence and otherwise blow up to +inf."""
    if distance <= TAU_ZERO:
        return 0.0 if value <= TAU_NUM else math.inf
    return value / distance


def audit_div_xdp(
    kernel: StochasticKernel,
    phi: PointRelation,
    metric: GroundMetric,
    divergence: Divergence,
    claimed_eps: float | None = None,
    *,
    exact_subsets: bool = False,
) -> AuditReport:
    """Worst divergence per unit input distance over all related pairs."""
    _check_nonempty(phi)
    entries = []
    for a, b in phi:
        row_a = kernel.row(a)
        row_b = kernel.row(b)
        d = metric.distance(a, b)
        fwd = _scaled(divergence_value(divergence, row_a, row_b, exact_subsets), d)
        bwd = _scaled(divergence_value(divergence, row_b, row_a, exact_subsets), d)
        entries.append((pair_label(a, b), fwd, bwd))
    return _assemble(NOTION_XDP, divergence.name, entries, claimed_eps)


Mechanism = StochasticKernel | AuxIndexedKernel | CouplingMechanismSpec


def _kernel_family(mechanism: Mechanism):
    if isinstance(mechanism, CouplingMechanismSpec):
        return aux_kernel(mechanism)
    return mechanism


def _pair_evaluations(mechanism, psi: DistributionPairRelation):
    """Yield (index, label, lifted_left, lifted_right) per audited instance.

    Aux-tagged pairs select the named kernels; untagged pairs against a
    kernel family are audited once per auxiliary value.
    """
    family = _kernel_family(mechanism)
    for i, pair in enumerate(psi):
        if isinstance(family, StochasticKernel):
            tag = f"{i}:{pair_label(*pair.aux)}" if pair.aux else str(i)
            yield i, tag, lift(family, pair.left), lift(family, pair.right)
        elif pair.aux is not None:
            s0, s1 = pair.aux
            yield (
                i,
                f"{i}:{pair_label(s0, s1)}",
                lift(family.kernel_for(s0), pair.left),
                lift(family.kernel_for(s1), pair.right),
            )
        else:
            for s, kernel in family.kernels.items():
                yield (
                    i,
                    f"{i}:{pair_label(s, s)}",
                    lift(kernel, pair.left),
                    lift(kernel, pair.right),
                )


def audit_distp(
    mechanism: Mechanism,
    psi: DistributionPairRelation,
    divergence: Divergence,
    claimed_eps: float | None = None,
    *,
    exact_subsets: bool = False,
) -> AuditReport:
    """Worst divergence between lifted outputs over related distribution
    pairs. Accepts a single kernel, a family indexed by auxiliary values,
    or a coupling mechanism."""
    _check_nonempty(psi)
    entries = []
    for _, label, out0, out1 in _pair_evaluations(mechanism, psi):
        fwd = divergence_value(divergence, out0, out1, exact_subsets)
        bwd = divergence_value(divergence, out1, out0, exact_subsets)
        entries.append((label, fwd, bwd))
    return _assemble(NOTION_DISTP, divergence.name, entries, claimed_eps)


WASSERSTEIN_ONE = "1"
WASSERSTEIN_INF = "inf"


def _input_distance(pair, metric: GroundMetric, wasserstein) -> float:
    if wasserstein in (WASSERSTEIN_INF, math.inf):
        return wasserstein_inf(pair.left, pair.right, metric).cost
    p = 1.0 if wasserstein == WASSERSTEIN_ONE else float(wasserstein)
    return wasserstein_p(pair.left, pair.right, metric, p=p).cost


def audit_xdistp(
    mechanism: Mechanism,
    psi: DistributionPairRelation,
    metric: GroundMetric,
    divergence: Divergence,
    claimed_eps: float | None = None,
    *,
    wasserstein: float | str = WASSERSTEIN_ONE,
    exact_subsets: bool = False,
) -> AuditReport:
    """Worst lifted divergence per unit of input Wasserstein distance.

    ``wasserstein`` picks the denominator: "1" (default), "inf", or a
    numeric order p >= 1.
    """
    _check_nonempty(psi)
    family = _kernel_family(mechanism)
    distances = [_input_distance(pair, metric, wasserstein) for pair in psi]
    entries = []
    for i, label, out0, out1 in _pair_evaluations(family, psi):
        d = distances[i]
        fwd = _scaled(divergence_value(divergence, out0, out1, exact_subsets), d)
        bwd = _scaled(divergence_value(divergence, out1, out0, exact_subsets), d)
        entries.append((label, fwd, bwd))
    return _assemble(NOTION_XDISTP, divergence.name, entries, claimed_eps)


def expected_utility_loss(
    kernel: StochasticKernel, lam: FiniteDistribution, metric: GroundMetric
) -> float:
    """Mean distance between input and emitted output.

    ``metric`` must cover both the input and the output labels.
    """
    if lam.ground != kernel.inputs:
        raise GroundMismatchError("distribution ground does not match kernel inputs")
    cost = _cost_block(metric, kernel.inputs, kernel.outputs)
    return float(lam.probs @ (kernel.matrix * cost).sum(axis=1))


def worst_case_loss(
    kernel: StochasticKernel, lam: FiniteDistribution, metric: GroundMetric
) -> float:
    """Largest distance between input and output that can actually occur."""
    if lam.ground != kernel.inputs:
        raise GroundMismatchError("distribution ground does not match kernel inputs")
    cost = _cost_block(metric, kernel.inputs, kernel.outputs)
    active = (lam.probs[:, None] * kernel.matrix) > TAU_ZERO
    if not np.any(active):
        return 0.0
    return float(np.max(cost[active]))


def _cp_lift(
    spec: CouplingMechanismSpec, s: str, lam: FiniteDistribution
) -> FiniteDistribution:
    """Output distribution of the coupling mechanism for aux ``s`` on the
    true input ``lam``.

    Computed from the coupling directly so that inputs the estimate rules
    out (which carry zero true mass once the estimation level is finite)
    never consult the fallback policy.
    """
    entry = spec.entry_for(s)
    hat = entry.approx_input
    if lam.ground != hat.ground:
        raise GroundMismatchError("true input ground does not match the estimate")
    on = hat.probs > TAU_ZERO
    denom = np.where(on, hat.probs, 1.0)
    rows = np.where(
        on[:, None], entry.coupling.mass / denom[:, None], spec.target.probs
    )
    return FiniteDistribution(spec.target.ground, lam.probs @ rows)


@dataclass(frozen=True)
class BoundCheck:
    """One theoretical bound audited against the mechanism."""

    name: str
    bound: float
    report: AuditReport

    @property
    def passed(self) -> bool:
        return self.report.passed

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "report": self.report.to_dict(),
        }


@dataclass(frozen=True)
class CPTheoremReport:
    """Estimation level and the full slate of audited output bounds."""

    epsilon: float
    checks: tuple[BoundCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def check(self, name: str) -> BoundCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise ValidationError(f"no bound named {name!r}")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "verdict": "pass" if self.passed else "fail",
            "checks": [check.to_dict() for check in self.checks],
        }


def check_cp_theorem(
    spec: CouplingMechanismSpec,
    actual_inputs: Mapping[str, FiniteDistribution],
    *,
    exact_subsets: bool = False,
) -> CPTheoremReport:
    """Audit the coupling mechanism's output-closeness guarantees.

    The estimation level is the worst two-sided max divergence between each
    true input and its estimate; it must be finite (matching supports). The
    audited bounds, over all pairs of auxiliary values: max divergence at
    most twice the level; KL at most 2 * eps * e^eps; and for each built-in
    f-divergence kind, at most e^eps * f(e^(2*eps)).
    """
    missing = [s for s in spec.aux if s not in actual_inputs]
    if missing:
        raise ValidationError(f"actual inputs missing auxiliary values {missing}")

    eps = 0.0
    for entry in spec.entries:
        lam = actual_inputs[entry.s]
        level = max(
            max_divergence(entry.approx_input, lam),
            max_divergence(lam, entry.approx_input),
        )
        if not math.isfinite(level):
            raise InfiniteEpsilonError(
                f"estimate for {entry.s!r} has a different support than the "
                "true input"
            )
        eps = max(eps, level)

    aux = spec.aux
    instances = []
    outputs = {s: _cp_lift(spec, s, actual_inputs[s]) for s in aux}
    for i, s0 in enumerate(aux):
        for s1 in aux[i:]:
            instances.append((pair_label(s0, s1), outputs[s0], outputs[s1]))

    def audit_with(divergence: Divergence, bound: float) -> AuditReport:
        entries = []
        for label, out0, out1 in instances:
            fwd = divergence_value(divergence, out0, out1, exact_subsets)
            bwd = divergence_value(divergence, out1, out0, exact_subsets)
            entries.append((label, fwd, bwd))
        return _assemble(NOTION_DISTP, divergence.name, entries, bound)

    growth = math.exp(eps)
    checks = [
        BoundCheck("max", 2.0 * eps, audit_with(MaxDivergence(), 2.0 * eps)),
        BoundCheck("kl", 2.0 * eps * growth, audit_with(KL, 2.0 * eps * growth)),
    ]
    for kind in STANDARD_KINDS:
        bound = growth * float(kind(math.exp(2.0 * eps)))
        checks.append(BoundCheck(f"f:{kind.name}", bound, audit_with(kind, bound)))
    return CPTheoremReport(eps, tuple(checks))
