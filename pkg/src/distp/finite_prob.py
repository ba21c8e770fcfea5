"""Finite probability primitives: distributions, kernels, relations, metrics.

Grounds are ordered tuples of string labels; probabilities live in numpy
arrays aligned with the ground order. Objects are immutable after
construction and validate themselves exactly once, at construction time.
"""

from __future__ import annotations

import json
from dataclasses import InitVar, dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DimensionMismatchError,
    GroundMismatchError,
    UnknownLabelError,
    ValidationError,
)
from .tolerances import TAU_MASS, TAU_NUM, TAU_ZERO


def pair_label(a: str, b: str) -> str:
    """Canonical label for an ordered pair of labels.

    Rendered as a compact JSON array so arbitrary label strings stay
    unambiguous and recoverable.
    """
    return json.dumps([a, b], separators=(",", ":"))


def split_pair_label(label: str) -> tuple[str, str]:
    """Inverse of :func:`pair_label`."""
    try:
        parts = json.loads(label)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not a pair label: {label!r}") from exc
    if not isinstance(parts, list) or len(parts) != 2:
        raise ValidationError(f"not a pair label: {label!r}")
    return str(parts[0]), str(parts[1])


def _clean_ground(labels: Iterable[str]) -> tuple[str, ...]:
    ground = tuple(str(x) for x in labels)
    if not ground:
        raise ValidationError("ground set must be nonempty")
    if len(set(ground)) != len(ground):
        raise ValidationError("ground set contains duplicate labels")
    return ground


def _clean_probs(values, size: int, tau_mass: float, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != size:
        raise DimensionMismatchError(
            f"{what}: expected {size} entries, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{what}: entries must be finite")
    if np.any(arr < -TAU_ZERO):
        raise ValidationError(f"{what}: negative probability entry {arr.min():g}")
    np.clip(arr, 0.0, None, out=arr)
    total = float(arr.sum())
    if abs(total - 1.0) > tau_mass:
        raise ValidationError(f"mass {total:g} outside tolerance ({what})")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """A probability distribution over an ordered finite ground set.

    Parameters
    ----------
    ground:
        Ordered labels. Must be nonempty and duplicate free.
    probs:
        Probabilities aligned with ``ground``. Entries must be nonnegative
        and sum to 1 within ``tau_mass``; off-mass inputs are rejected,
        never renormalized.
    """

    ground: tuple[str, ...]
    probs: np.ndarray
    tau_mass: InitVar[float] = TAU_MASS

    def __post_init__(self, tau_mass: float) -> None:
        ground = _clean_ground(self.ground)
        probs = _clean_probs(self.probs, len(ground), tau_mass, "distribution")
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(ground)})

    def index(self, label: str) -> int:
        try:
            return self._index[label]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownLabelError(f"label {label!r} not in ground set") from None

    def __getitem__(self, label: str) -> float:
        return float(self.probs[self.index(label)])

    def __len__(self) -> int:
        return len(self.ground)

    def support(self, tau_zero: float = TAU_ZERO) -> tuple[str, ...]:
        return tuple(x for x, p in zip(self.ground, self.probs) if p > tau_zero)

    def support_indices(self, tau_zero: float = TAU_ZERO) -> np.ndarray:
        return np.flatnonzero(self.probs > tau_zero)

    def is_close(self, other: "FiniteDistribution", tol: float = TAU_NUM) -> bool:
        return self.ground == other.ground and bool(
            np.allclose(self.probs, other.probs, rtol=0.0, atol=tol)
        )

    def __repr__(self) -> str:
        pairs = ", ".join(f"{x}: {p:g}" for x, p in zip(self.ground, self.probs))
        return f"FiniteDistribution({pairs})"


def point_distribution(label: str, ground: Iterable[str]) -> FiniteDistribution:
    """The distribution placing all mass on ``label``."""
    ground = _clean_ground(ground)
    if label not in ground:
        raise UnknownLabelError(f"label {label!r} not in ground set")
    probs = np.zeros(len(ground))
    probs[ground.index(label)] = 1.0
    return FiniteDistribution(ground, probs)


def uniform_distribution(ground: Iterable[str]) -> FiniteDistribution:
    ground = _clean_ground(ground)
    return FiniteDistribution(ground, np.full(len(ground), 1.0 / len(ground)))


def event_probability(mu: FiniteDistribution, event: Iterable[str]) -> float:
    """Total mass of a set of labels. Duplicates in ``event`` are ignored."""
    seen = set()
    total = 0.0
    for label in event:
        label = str(label)
        if label in seen:
            continue
        seen.add(label)
        total += mu[label]
    return total


def product_distribution(
    left: FiniteDistribution, right: FiniteDistribution
) -> FiniteDistribution:
    """Independent product over the pair ground, row-major in ``left``."""
    ground = tuple(
        pair_label(a, b) for a in left.ground for b in right.ground
    )
    probs = np.outer(left.probs, right.probs).reshape(-1)
    return FiniteDistribution(ground, probs)


@dataclass(frozen=True, eq=False)
class StochasticKernel:
    """A row-stochastic map from an input ground to an output ground.

    ``matrix[i, j]`` is the probability of emitting ``outputs[j]`` on input
    ``inputs[i]``. Every row must sum to 1 within ``tau_mass``.
    """

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    matrix: np.ndarray
    tau_mass: InitVar[float] = TAU_MASS

    def __post_init__(self, tau_mass: float) -> None:
        inputs = _clean_ground(self.inputs)
        outputs = _clean_ground(self.outputs)
        matrix = np.array(self.matrix, dtype=float)
        if matrix.shape != (len(inputs), len(outputs)):
            raise DimensionMismatchError(
                f"kernel matrix shape {matrix.shape} does not match "
                f"({len(inputs)}, {len(outputs)})"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValidationError("kernel entries must be finite")
        if np.any(matrix < -TAU_ZERO):
            raise ValidationError(
                f"kernel has negative entry {matrix.min():g}"
            )
        np.clip(matrix, 0.0, None, out=matrix)
        sums = matrix.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > tau_mass)
        if bad.size:
            i = int(bad[0])
            raise ValidationError(
                f"mass {sums[i]:g} outside tolerance (kernel row {inputs[i]!r})"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_in_index", {x: i for i, x in enumerate(inputs)})

    def input_index(self, label: str) -> int:
        try:
            return self._in_index[label]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownLabelError(f"input label {label!r} not in kernel") from None

    def row(self, label: str) -> FiniteDistribution:
        return self.row_by_index(self.input_index(label))

    def row_by_index(self, i: int) -> FiniteDistribution:
        return FiniteDistribution(self.outputs, self.matrix[i])

    @classmethod
    def identity(cls, ground: Iterable[str]) -> "StochasticKernel":
        ground = _clean_ground(ground)
        return cls(ground, ground, np.eye(len(ground)))

    @classmethod
    def constant(
        cls, inputs: Iterable[str], target: FiniteDistribution
    ) -> "StochasticKernel":
        inputs = _clean_ground(inputs)
        matrix = np.tile(target.probs, (len(inputs), 1))
        return cls(inputs, target.ground, matrix)

    def __repr__(self) -> str:
        return (
            f"StochasticKernel({len(self.inputs)} inputs -> "
            f"{len(self.outputs)} outputs)"
        )


def lift(kernel: StochasticKernel, lam: FiniteDistribution) -> FiniteDistribution:
    """Push a distribution over inputs through a kernel.

    Returns the output distribution y -> sum_x lam[x] * kernel(x)[y]. The
    input ground must match the kernel's input ground exactly (same order).
    """
    if lam.ground != kernel.inputs:
        raise GroundMismatchError(
            "distribution ground does not match kernel inputs"
        )
    probs = lam.probs @ kernel.matrix
    return FiniteDistribution(kernel.outputs, probs)


@dataclass(frozen=True)
class PointRelation:
    """An adjacency relation between input labels: a set of ordered pairs.

    Pairs are kept in first-seen order with duplicates dropped, so audits
    that iterate the relation are deterministic.
    """

    pairs: tuple[tuple[str, str], ...]

    def __init__(self, pairs: Iterable[tuple[str, str]]):
        seen = set()
        cleaned = []
        for pair in pairs:
            a, b = pair
            key = (str(a), str(b))
            if key not in seen:
                seen.add(key)
                cleaned.append(key)
        object.__setattr__(self, "pairs", tuple(cleaned))

    @classmethod
    def full(cls, ground: Iterable[str], include_self: bool = False) -> "PointRelation":
        ground = _clean_ground(ground)
        return cls(
            (a, b)
            for a in ground
            for b in ground
            if include_self or a != b
        )

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (str(a), str(b)) in set(self.pairs)


@dataclass(frozen=True)
class DistributionPair:
    """One audited pair of input distributions, optionally tagged with
    auxiliary values naming which kernel serves each side."""

    left: FiniteDistribution
    right: FiniteDistribution
    aux: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        if self.left.ground != self.right.ground:
            raise GroundMismatchError("pair members must share a ground set")
        if self.aux is not None:
            object.__setattr__(self, "aux", (str(self.aux[0]), str(self.aux[1])))


@dataclass(frozen=True)
class DistributionPairRelation:
    """An adjacency relation between input distributions."""

    pairs: tuple[DistributionPair, ...]

    def __init__(self, pairs: Iterable):
        cleaned = []
        for pair in pairs:
            if isinstance(pair, DistributionPair):
                cleaned.append(pair)
            else:
                left, right = pair
                cleaned.append(DistributionPair(left, right))
        object.__setattr__(self, "pairs", tuple(cleaned))

    @classmethod
    def from_point_relation(
        cls, phi: PointRelation, ground: Iterable[str]
    ) -> "DistributionPairRelation":
        """Point-mass pairs (one per arc), the embedding of a label relation."""
        ground = _clean_ground(ground)
        return cls(
            DistributionPair(
                point_distribution(a, ground), point_distribution(b, ground)
            )
            for a, b in phi
        )

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True, eq=False)
class GroundMetric:
    """A nonnegative cost table over a ground set with zero diagonal.

    Symmetry and the triangle inequality are not enforced; they are
    checkable via :meth:`is_symmetric` and :meth:`satisfies_triangle`.
    """

    ground: tuple[str, ...]
    cost: np.ndarray

    def __post_init__(self) -> None:
        ground = _clean_ground(self.ground)
        cost = np.array(self.cost, dtype=float)
        n = len(ground)
        if cost.shape != (n, n):
            raise DimensionMismatchError(
                f"cost shape {cost.shape} does not match ground size {n}"
            )
        if not np.all(np.isfinite(cost)):
            raise ValidationError("cost entries must be finite")
        if np.any(cost < 0.0):
            raise ValidationError(f"cost has negative entry {cost.min():g}")
        diag = np.abs(np.diagonal(cost))
        if np.any(diag > TAU_NUM):
            raise ValidationError("cost diagonal must be zero")
        cost = cost.copy()
        np.fill_diagonal(cost, 0.0)
        cost.setflags(write=False)
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "_index", {x: i for i, x in enumerate(ground)})

    def index(self, label: str) -> int:
        try:
            return self._index[label]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownLabelError(f"label {label!r} not in metric ground") from None

    def distance(self, a: str, b: str) -> float:
        return float(self.cost[self.index(a), self.index(b)])

    def submatrix(self, rows: Iterable[str], cols: Iterable[str]) -> np.ndarray:
        """Cost block for the given row/column labels (must all be present)."""
        r = [self.index(x) for x in rows]
        c = [self.index(x) for x in cols]
        return self.cost[np.ix_(r, c)]

    def is_symmetric(self, tol: float = TAU_NUM) -> bool:
        return bool(np.all(np.abs(self.cost - self.cost.T) <= tol))

    def satisfies_triangle(self, tol: float = TAU_NUM) -> bool:
        c = self.cost
        # via[i, j, k] = c[i, j] + c[j, k]; require c[i, k] <= via for all j
        via = c[:, :, None] + c[None, :, :]
        return bool(np.all(c[:, None, :] <= via + tol))

    @classmethod
    def line(
        cls, ground: Iterable[str], positions: Iterable[float] | None = None
    ) -> "GroundMetric":
        """Absolute-difference costs for labels placed on a line.

        Defaults to unit spacing in ground order.
        """
        ground = _clean_ground(ground)
        if positions is None:
            pos = np.arange(len(ground), dtype=float)
        else:
            pos = np.array(list(positions), dtype=float)
            if pos.shape != (len(ground),):
                raise DimensionMismatchError(
                    "positions must match ground size"
                )
        cost = np.abs(pos[:, None] - pos[None, :])
        return cls(ground, cost)

    @classmethod
    def discrete(cls, ground: Iterable[str]) -> "GroundMetric":
        """0/1 costs: zero on the diagonal, one elsewhere."""
        ground = _clean_ground(ground)
        n = len(ground)
        return cls(ground, np.ones((n, n)) - np.eye(n))

    @classmethod
    def from_mapping(
        cls, ground: Iterable[str], entries: Mapping[tuple[str, str], float]
    ) -> "GroundMetric":
        ground = _clean_ground(ground)
        n = len(ground)
        cost = np.zeros((n, n))
        idx = {x: i for i, x in enumerate(ground)}
        for (a, b), value in entries.items():
            cost[idx[str(a)], idx[str(b)]] = value
        return cls(ground, cost)
