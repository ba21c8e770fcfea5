"""File formats: JSON objects for domain types, CSV for costs and labels.

JSON layouts:
    distribution  {"ground": [...], "probs": [...]}
    kernel        {"inputs": [...], "outputs": [...], "rows": [[...], ...]}
    coupling      {"rows": [...], "cols": [...], "mass": [[...], ...]}
    mechanism spec
                  {"target": dist, "aux": [{"s", "approx_input", "coupling"}],
                   "fallback": "error" | "sample_target"}
    relation      [[a, b], ...] where each element is a label, a
                  distribution object, or {"aux": s, "dist": dist}

Cost matrices are CSV: a header row of labels, then a square numeric
matrix. Data points are CSV with header "x", one label per line.

Loaders ignore unknown keys so reports that embed extra context stay
loadable. Serialized floats that are infinite become the strings "inf" /
"-inf"; loaders reverse that.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any

import numpy as np

from .errors import ValidationError
from .tolerances import TAU_MASS
from .finite_prob import (
    DistributionPair,
    DistributionPairRelation,
    FiniteDistribution,
    GroundMetric,
    PointRelation,
    StochasticKernel,
)
from .mechanisms import CouplingEntry, CouplingMechanismSpec
from .transport import Coupling


def jsonable(value: Any) -> Any:
    """Recursively convert to plain JSON values; infinities become tokens."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            raise ValidationError("cannot serialize NaN")
        return value
    return value


def _as_float(value: Any, what: str) -> float:
    if value == "inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{what}: expected a number, got {value!r}") from None


def dumps_json(obj: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, newline."""
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def distribution_to_dict(dist: FiniteDistribution) -> dict:
    return {"ground": list(dist.ground), "probs": dist.probs.tolist()}


def distribution_from_dict(
    data: Any, tau_mass: float = TAU_MASS
) -> FiniteDistribution:
    if not isinstance(data, dict) or "ground" not in data or "probs" not in data:
        raise ValidationError("distribution object needs 'ground' and 'probs'")
    probs = [_as_float(v, "probs") for v in data["probs"]]
    return FiniteDistribution(
        tuple(str(x) for x in data["ground"]), np.array(probs), tau_mass
    )


def kernel_to_dict(kernel: StochasticKernel) -> dict:
    return {
        "inputs": list(kernel.inputs),
        "outputs": list(kernel.outputs),
        "rows": kernel.matrix.tolist(),
    }


def kernel_from_dict(data: Any, tau_mass: float = TAU_MASS) -> StochasticKernel:
    needed = {"inputs", "outputs", "rows"}
    if not isinstance(data, dict) or not needed.issubset(data):
        raise ValidationError("kernel object needs 'inputs', 'outputs', 'rows'")
    rows = [[_as_float(v, "rows") for v in row] for row in data["rows"]]
    return StochasticKernel(
        tuple(str(x) for x in data["inputs"]),
        tuple(str(y) for y in data["outputs"]),
        np.array(rows),
        tau_mass,
    )


def coupling_to_dict(coupling: Coupling) -> dict:
    return {
        "rows": list(coupling.rows),
        "cols": list(coupling.cols),
        "mass": coupling.mass.tolist(),
    }


def coupling_from_dict(data: Any, tau_mass: float = TAU_MASS) -> Coupling:
    needed = {"rows", "cols", "mass"}
    if not isinstance(data, dict) or not needed.issubset(data):
        raise ValidationError("coupling object needs 'rows', 'cols', 'mass'")
    mass = [[_as_float(v, "mass") for v in row] for row in data["mass"]]
    return Coupling(
        tuple(str(x) for x in data["rows"]),
        tuple(str(y) for y in data["cols"]),
        np.array(mass),
        tau_mass,
    )


def cp_spec_to_dict(spec: CouplingMechanismSpec) -> dict:
    return {
        "target": distribution_to_dict(spec.target),
        "aux": [
            {
                "s": entry.s,
                "approx_input": distribution_to_dict(entry.approx_input),
                "coupling": coupling_to_dict(entry.coupling),
            }
            for entry in spec.entries
        ],
        "fallback": spec.fallback,
    }


def cp_spec_from_dict(
    data: Any, tau_mass: float = TAU_MASS
) -> CouplingMechanismSpec:
    if not isinstance(data, dict) or "target" not in data or "aux" not in data:
        raise ValidationError("mechanism spec needs 'target' and 'aux'")
    entries = []
    for item in data["aux"]:
        if not {"s", "approx_input", "coupling"}.issubset(item):
            raise ValidationError(
                "each aux entry needs 's', 'approx_input', 'coupling'"
            )
        entries.append(
            CouplingEntry(
                str(item["s"]),
                distribution_from_dict(item["approx_input"], tau_mass),
                coupling_from_dict(item["coupling"], tau_mass),
            )
        )
    return CouplingMechanismSpec(
        distribution_from_dict(data["target"], tau_mass),
        tuple(entries),
        str(data.get("fallback", "error")),
        tau_mass,
    )


def load_mechanism(
    path: str, tau_mass: float = TAU_MASS
) -> StochasticKernel | CouplingMechanismSpec:
    """Read a mechanism file, accepting either layout."""
    data = load_json(path)
    if isinstance(data, dict) and "rows" in data and "inputs" in data:
        return kernel_from_dict(data, tau_mass)
    if isinstance(data, dict) and "target" in data and "aux" in data:
        return cp_spec_from_dict(data, tau_mass)
    raise ValidationError(
        f"{path}: not a kernel (inputs/outputs/rows) or a mechanism spec "
        "(target/aux)"
    )


def _pair_side(item: Any, tau_mass: float):
    """One relation entry side: label, distribution, or aux-tagged dist."""
    if isinstance(item, str):
        return item, None, None
    if isinstance(item, dict) and "dist" in item:
        aux = str(item["aux"]) if "aux" in item else None
        return None, distribution_from_dict(item["dist"], tau_mass), aux
    if isinstance(item, dict):
        return None, distribution_from_dict(item, tau_mass), None
    raise ValidationError(f"relation entry {item!r} is not a label or distribution")


def relation_from_obj(
    data: Any, tau_mass: float = TAU_MASS
) -> PointRelation | DistributionPairRelation:
    """Parse a relation file body.

    A list whose pairs are all plain labels parses as a point relation;
    anything with distribution objects parses as a distribution relation
    (labels are not mixed with distributions inside one file).
    """
    if not isinstance(data, list):
        raise ValidationError("relation file must be a JSON list of pairs")
    sides = []
    for pair in data:
        if not isinstance(pair, list) or len(pair) != 2:
            raise ValidationError("each relation entry must be a 2-element array")
        sides.append((_pair_side(pair[0], tau_mass), _pair_side(pair[1], tau_mass)))
    if all(a[0] is not None and b[0] is not None for a, b in sides):
        return PointRelation((a[0], b[0]) for a, b in sides)
    pairs = []
    for (la, da, sa), (lb, db, sb) in sides:
        if da is None or db is None:
            raise ValidationError(
                "relation mixes labels and distributions; use one form per file"
            )
        aux = (sa, sb) if sa is not None and sb is not None else None
        pairs.append(DistributionPair(da, db, aux))
    return DistributionPairRelation(pairs)


def relation_to_obj(
    relation: PointRelation | DistributionPairRelation,
) -> list:
    if isinstance(relation, PointRelation):
        return [[a, b] for a, b in relation]
    out = []
    for pair in relation:
        left = distribution_to_dict(pair.left)
        right = distribution_to_dict(pair.right)
        if pair.aux is not None:
            left = {"aux": pair.aux[0], "dist": left}
            right = {"aux": pair.aux[1], "dist": right}
        out.append([left, right])
    return out


def metric_from_csv(path: str) -> GroundMetric:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValidationError(f"{path}: empty cost matrix file")
    labels = tuple(cell.strip() for cell in rows[0])
    body = rows[1:]
    if len(body) != len(labels):
        raise ValidationError(
            f"{path}: expected {len(labels)} matrix rows, found {len(body)}"
        )
    cost = []
    for row in body:
        if len(row) != len(labels):
            raise ValidationError(f"{path}: ragged cost matrix row {row!r}")
        cost.append([_as_float(cell.strip(), "cost") for cell in row])
    return GroundMetric(labels, np.array(cost))


def metric_to_csv(metric: GroundMetric) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(metric.ground)
    for row in metric.cost:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def load_labels_csv(path: str, header: str = "x") -> list[str]:
    """Read a one-column CSV of labels with the given header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row]
    if not rows or not rows[0] or rows[0][0].strip() != header:
        raise ValidationError(f"{path}: expected a CSV with header {header!r}")
    out = []
    for row in rows[1:]:
        if len(row) != 1:
            raise ValidationError(f"{path}: expected one label per line")
        out.append(row[0])
    return out


def labels_to_csv(labels: list[str], header: str = "y") -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([header])
    for label in labels:
        writer.writerow([label])
    return buf.getvalue()
