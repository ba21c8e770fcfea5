"""Command-line interface.

Subcommands: divergence, emd, couple, couple-mech, obfuscate, audit,
compose. JSON reports go to stdout with a "config" block echoing the seed,
tolerance overrides, and tool version, so runs are self-describing and
reproducible. Exit codes: 0 success (audit verdict pass), 2 audit verdict
fail, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .audit import (
    audit_distp,
    audit_div_dp,
    audit_div_xdp,
    audit_xdistp,
)
from .divergences import KIND_BY_NAME, MaxDivergence, divergence_value
from .errors import DistpError, ValidationError
from .fileio import (
    coupling_from_dict,
    coupling_to_dict,
    cp_spec_to_dict,
    distribution_from_dict,
    dumps_json,
    jsonable,
    kernel_from_dict,
    kernel_to_dict,
    labels_to_csv,
    load_json,
    load_labels_csv,
    load_mechanism,
    metric_from_csv,
    relation_from_obj,
)
from .finite_prob import DistributionPairRelation, PointRelation, StochasticKernel
from .mechanisms import (
    AdaptiveKernel,
    CouplingMechanismSpec,
    build_coupling_mechanism,
    cp_kernel,
    liftseq_compose,
    post_process,
    sample_outputs,
    seq_compose,
)
from .tolerances import DEFAULT_SEED, TAU_MASS, TAU_NUM
from .transport import coupling_cost, emd, northwest_corner, wasserstein_inf, wasserstein_p

DIVERGENCE_CHOICES = tuple(KIND_BY_NAME) + ("max", "max-delta")


@dataclass(frozen=True)
class RunConfig:
    """Settings echoed into every JSON report."""

    seed: int = DEFAULT_SEED
    exact_subsets: bool = False
    tau_mass: float = TAU_MASS
    tau_num: float = TAU_NUM
    format: str = "json"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "exact_subsets": self.exact_subsets,
            "tau_mass": self.tau_mass,
            "tau_num": self.tau_num,
            "format": self.format,
            "tool_version": __version__,
        }


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(message)


def _config(args) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        exact_subsets=getattr(args, "exact_subsets", False),
        tau_mass=args.tau_mass,
        tau_num=args.tau_num,
        format=getattr(args, "format", "json"),
    )


def _emit(payload: dict, config: RunConfig) -> None:
    sys.stdout.write(dumps_json({"config": config.to_dict(), **payload}))


def _load_distribution(path: str, tau_mass: float):
    return distribution_from_dict(load_json(path), tau_mass)


def _resolve_divergence(args):
    if args.divergence == "max":
        return MaxDivergence(0.0)
    if args.divergence == "max-delta":
        if args.delta is None:
            raise ValidationError("divergence 'max-delta' needs --delta")
        return MaxDivergence(args.delta)
    return KIND_BY_NAME[args.divergence]


def cmd_divergence(args) -> int:
    cfg = _config(args)
    lhs = _load_distribution(args.lhs, cfg.tau_mass)
    rhs = _load_distribution(args.rhs, cfg.tau_mass)
    divergence = _resolve_divergence(args)
    value = divergence_value(divergence, lhs, rhs, cfg.exact_subsets)
    _emit({"kind": divergence.name, "value": value}, cfg)
    return 0


def cmd_emd(args) -> int:
    cfg = _config(args)
    lhs = _load_distribution(args.lhs, cfg.tau_mass)
    rhs = _load_distribution(args.rhs, cfg.tau_mass)
    metric = metric_from_csv(args.cost)
    if args.inf:
        result = wasserstein_inf(lhs, rhs, metric)
        order = "inf"
    else:
        p = 1.0 if args.p is None else args.p
        result = wasserstein_p(lhs, rhs, metric, p=p)
        order = p
    payload = {
        "order": order,
        "cost": result.cost,
        "coupling": coupling_to_dict(result.coupling),
    }
    _emit(payload, cfg)
    return 0


def cmd_couple(args) -> int:
    cfg = _config(args)
    lhs = _load_distribution(args.lhs, cfg.tau_mass)
    rhs = _load_distribution(args.rhs, cfg.tau_mass)
    metric = metric_from_csv(args.cost) if args.cost else None
    if args.northwest:
        coupling = northwest_corner(lhs, rhs)
        cost = coupling_cost(coupling, metric) if metric else None
    else:
        if metric is None:
            raise ValidationError("provide --cost for an optimal coupling "
                                  "or pass --northwest")
        result = emd(lhs, rhs, metric)
        coupling, cost = result.coupling, result.cost
    _emit({"cost": cost, "coupling": coupling_to_dict(coupling)}, cfg)
    return 0


def cmd_couple_mech(args) -> int:
    cfg = _config(args)
    target = _load_distribution(args.target, cfg.tau_mass)
    inputs_raw = load_json(args.inputs)
    if not isinstance(inputs_raw, dict):
        raise ValidationError("--inputs file must map auxiliary values to "
                              "distribution objects")
    approx = {
        str(s): distribution_from_dict(obj, cfg.tau_mass)
        for s, obj in inputs_raw.items()
    }
    metric = metric_from_csv(args.cost) if args.cost else None
    couplings = None
    if args.couplings:
        data = load_json(args.couplings)
        if not isinstance(data, dict):
            raise ValidationError("--couplings file must map auxiliary values "
                                  "to coupling objects")
        couplings = {
            str(s): coupling_from_dict(obj, cfg.tau_mass)
            for s, obj in data.items()
        }
    spec = build_coupling_mechanism(
        target,
        approx,
        args.mode,
        metric=metric,
        couplings=couplings,
        fallback=args.fallback,
    )
    payload = cp_spec_to_dict(spec)
    text = dumps_json({"config": cfg.to_dict(), **payload})
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def cmd_obfuscate(args) -> int:
    cfg = _config(args)
    mechanism = load_mechanism(args.mech, cfg.tau_mass)
    if isinstance(mechanism, CouplingMechanismSpec):
        if args.aux is None:
            raise ValidationError("mechanism spec needs --aux to pick a kernel")
        kernel = cp_kernel(mechanism, args.aux)
    else:
        if args.aux is not None:
            raise ValidationError("--aux only applies to mechanism spec files")
        kernel = mechanism
    labels = load_labels_csv(args.data, header="x")
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    outputs = sample_outputs(kernel, labels, rng)
    text = labels_to_csv(outputs, header="y")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def _report_with_tau(report, tau_num: float) -> dict:
    """Report dict with verdicts recomputed at the configured tolerance."""
    payload = report.to_dict()
    claimed = report.claimed_eps
    if claimed is not None:
        payload["verdict"] = (
            "pass" if report.observed_eps <= claimed + tau_num else "fail"
        )
        for entry in payload["pairs"]:
            entry["pass"] = entry["value"] <= claimed + tau_num
    return payload


def _audit_csv(payload: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair", "forward", "backward", "value", "bound", "pass"])
    for entry in payload["pairs"]:
        writer.writerow(
            [
                entry["pair"],
                jsonable(entry["forward"]),
                jsonable(entry["backward"]),
                jsonable(entry["value"]),
                "" if entry["bound"] is None else jsonable(entry["bound"]),
                "" if entry["pass"] is None else str(entry["pass"]).lower(),
            ]
        )
    return buf.getvalue()


def cmd_audit(args) -> int:
    cfg = _config(args)
    mechanism = load_mechanism(args.mech, cfg.tau_mass)
    relation = relation_from_obj(load_json(args.relation), cfg.tau_mass)
    divergence = _resolve_divergence(args)
    metric = metric_from_csv(args.metric) if args.metric else None

    if isinstance(relation, PointRelation):
        if args.wasserstein is not None:
            raise ValidationError(
                "--wasserstein needs a relation over distributions"
            )
        if isinstance(mechanism, StochasticKernel):
            if metric is None:
                report = audit_div_dp(
                    mechanism, relation, divergence, args.claimed_eps,
                    exact_subsets=cfg.exact_subsets,
                )
            else:
                report = audit_div_xdp(
                    mechanism, relation, metric, divergence, args.claimed_eps,
                    exact_subsets=cfg.exact_subsets,
                )
        else:
            ground = mechanism.entries[0].approx_input.ground
            lifted = DistributionPairRelation.from_point_relation(relation, ground)
            report = audit_distp(
                mechanism, lifted, divergence, args.claimed_eps,
                exact_subsets=cfg.exact_subsets,
            )
    else:
        if metric is None:
            report = audit_distp(
                mechanism, relation, divergence, args.claimed_eps,
                exact_subsets=cfg.exact_subsets,
            )
        else:
            order = args.wasserstein or "1"
            report = audit_xdistp(
                mechanism, relation, metric, divergence, args.claimed_eps,
                wasserstein=order, exact_subsets=cfg.exact_subsets,
            )

    payload = _report_with_tau(report, cfg.tau_num)
    if cfg.format == "csv":
        sys.stdout.write(_audit_csv(payload))
    else:
        _emit(payload, cfg)
    return 0 if payload["verdict"] == "pass" else 2


def _load_second_stage(path: str, tau_mass: float):
    data = load_json(path)
    if isinstance(data, dict) and "branches" in data:
        return AdaptiveKernel(
            {
                str(y): kernel_from_dict(obj, tau_mass)
                for y, obj in data["branches"].items()
            }
        )
    return kernel_from_dict(data, tau_mass)


def cmd_compose(args) -> int:
    cfg = _config(args)
    first = kernel_from_dict(load_json(args.first), cfg.tau_mass)
    if args.op == "post":
        second = kernel_from_dict(load_json(args.second), cfg.tau_mass)
        composed = post_process(first, second)
    else:
        second = _load_second_stage(args.second, cfg.tau_mass)
        combine = seq_compose if args.op == "seq" else liftseq_compose
        composed = combine(first, second, marginalize=args.marginalize)
    _emit(kernel_to_dict(composed), cfg)
    return 0


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED,
                     help="random seed echoed in reports (default %(default)s)")
    sub.add_argument("--tau-mass", type=float, default=TAU_MASS,
                     help="probability mass tolerance for loaded objects")
    sub.add_argument("--tau-num", type=float, default=TAU_NUM,
                     help="numeric comparison tolerance for verdicts")


def _divergence_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--divergence", required=True, choices=DIVERGENCE_CHOICES,
                     help="divergence kind")
    sub.add_argument("--delta", type=float, default=None,
                     help="slack for the max-delta divergence")
    sub.add_argument("--exact-subsets", action="store_true",
                     help="cross-check slack divergences by subset enumeration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="distp",
                     description="Distribution privacy toolkit: divergences, "
                                 "optimal transport, mechanisms, audits.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", metavar="command")

    p = subs.add_parser("divergence", help="divergence between two distributions")
    p.add_argument("--lhs", required=True, help="left distribution JSON file")
    p.add_argument("--rhs", required=True, help="right distribution JSON file")
    _divergence_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_divergence)

    p = subs.add_parser("emd", help="Wasserstein distance and optimal coupling")
    p.add_argument("--lhs", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--cost", required=True, help="cost matrix CSV file")
    group = p.add_mutually_exclusive_group()
    group.add_argument("-p", type=float, default=None,
                       help="Wasserstein order (default 1)")
    group.add_argument("--inf", action="store_true",
                       help="infinity-order (bottleneck) distance")
    _common_flags(p)
    p.set_defaults(func=cmd_emd)

    p = subs.add_parser("couple", help="build a coupling of two distributions")
    p.add_argument("--lhs", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--cost", default=None, help="cost matrix CSV file")
    p.add_argument("--northwest", action="store_true",
                   help="staircase coupling instead of a cost-optimal one")
    _common_flags(p)
    p.set_defaults(func=cmd_couple)

    p = subs.add_parser("couple-mech", help="coupling mechanism operations")
    actions = p.add_subparsers(dest="action", metavar="action")
    b = actions.add_parser("build", help="assemble a coupling mechanism spec")
    b.add_argument("--target", required=True, help="target distribution JSON")
    b.add_argument("--inputs", required=True,
                   help="JSON file mapping auxiliary values to distributions")
    b.add_argument("--mode", default="optimal",
                   choices=("optimal", "northwest", "given"))
    b.add_argument("--cost", default=None, help="cost matrix CSV (optimal mode)")
    b.add_argument("--couplings", default=None,
                   help="JSON map of couplings (given mode)")
    b.add_argument("--fallback", default="error",
                   choices=("error", "sample_target"))
    b.add_argument("--out", default=None, help="also write the spec here")
    _common_flags(b)
    b.set_defaults(func=cmd_couple_mech)

    p = subs.add_parser("obfuscate", help="sample outputs for a data file")
    p.add_argument("--mech", required=True, help="kernel or mechanism spec JSON")
    p.add_argument("--aux", default=None, help="auxiliary value (spec files)")
    p.add_argument("--data", required=True, help="CSV of input labels, header x")
    p.add_argument("--out", default=None, help="also write the CSV here")
    _common_flags(p)
    p.set_defaults(func=cmd_obfuscate)

    p = subs.add_parser("audit", help="audit a mechanism against a relation")
    p.add_argument("--mech", required=True)
    p.add_argument("--relation", required=True, help="relation JSON file")
    _divergence_flags(p)
    p.add_argument("--claimed-eps", type=float, default=None, dest="claimed_eps")
    p.add_argument("--metric", default=None, help="cost matrix CSV file")
    p.add_argument("--wasserstein", default=None, choices=("1", "inf"),
                   help="input distance for distribution relations")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    _common_flags(p)
    p.set_defaults(func=cmd_audit)

    p = subs.add_parser("compose", help="compose two mechanisms")
    p.add_argument("--op", required=True, choices=("seq", "liftseq", "post"))
    p.add_argument("--first", required=True, help="first-stage kernel JSON")
    p.add_argument("--second", required=True,
                   help="second-stage kernel JSON (or branches object)")
    p.add_argument("--marginalize", action="store_true",
                   help="keep only the second stage's output")
    _common_flags(p)
    p.set_defaults(func=cmd_compose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (DistpError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
