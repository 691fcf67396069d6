"""Command-line surface: rank -> plan -> apply -> cost / verify.

Each command is a pure pipeline stage over files.  Success exits 0; failures
exit nonzero with a machine-readable JSON object on stderr of the form
{"error": <code>, "message": <text>}.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .container import ContainerError, load_model, load_sample_blob, save_model
from .cost import compare, cost_report, format_cost_table
from .graph import GraphError, PruneGroup, discover_groups
from .importance import ACTIVE_METHODS, ImportanceReport, score_layer
from .jsonio import write_json_atomic
from .pruner import apply_plan, make_plan, plan_from_dict, plan_to_dict, verify_equivalence

METHOD_FLAGS = {
    "operator-norm": "operator_norm",
    "l1": "l1",
    "l2": "l2",
    "gm": "gm",
    "hrank": "hrank",
    "energy": "energy",
}


class CliError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _load(model_path: str):
    path = os.path.join(model_path, "manifest.json") if os.path.isdir(model_path) else model_path
    return load_model(path)


def _split_layers(spec: str | None) -> list[str] | None:
    if spec is None:
        return None
    layers = [s.strip() for s in spec.split(",") if s.strip()]
    if not layers:
        raise CliError("bad_arguments", "--layers given but empty")
    return layers


def _cmd_rank(args) -> int:
    model = _load(args.model)
    method = METHOD_FLAGS[args.method]
    layers = _split_layers(args.layers) or model.graph.conv_ids()
    for layer in layers:
        if layer not in model.graph:
            raise CliError("unknown_layer", f"no layer '{layer}' in model")

    samples = None
    if method in ACTIVE_METHODS:
        if not args.inputs:
            raise CliError(
                "active_method_requires_inputs",
                f"method '{args.method}' computes importance from feature maps and "
                "needs --inputs with sample data; passive methods "
                "(operator-norm, l1, l2, gm) are data-free")
        samples = load_sample_blob(args.inputs)[: args.samples]
        if not samples:
            raise CliError("empty_inputs", f"no sample tensors in '{args.inputs}'")

    entries = []
    for layer in layers:
        report = score_layer(model.graph, model.weights, layer, method,
                             samples=samples, tap=args.tap,
                             flatten_order=model.flatten_order)
        entries.append({
            "layer_id": report.layer_id,
            "method": report.method,
            "raw": [float(v) for v in report.raw_scores],
            "normalized": [float(v) for v in report.normalized_scores],
            "metadata": report.metadata,
        })

    groups = discover_groups(model.graph)
    payload = {
        "format_version": 1,
        "tool_version": __version__,
        "model_hash": model.content_hash(),
        "method": method,
        "layers": entries,
        "groups": [
            {"members": list(g.members),
             "consumers": [[n, r] for n, r in g.consumers],
             "prunable": g.prunable}
            for g in groups
        ],
    }
    write_json_atomic(args.out, payload)
    print(f"ranked {len(entries)} layer(s) with {args.method} -> {args.out}")
    return 0


def _cmd_plan(args) -> int:
    with open(args.scores, "r", encoding="utf-8") as fh:
        scores = json.load(fh)
    reports = {
        e["layer_id"]: ImportanceReport(
            e["layer_id"], e["method"],
            np.asarray(e["raw"], dtype=np.float64),
            np.asarray(e["normalized"], dtype=np.float64),
            e.get("metadata", {}))
        for e in scores["layers"]
    }
    groups = [
        PruneGroup(tuple(g["members"]),
                   tuple((n, r) for n, r in g["consumers"]),
                   bool(g.get("prunable", True)))
        for g in scores["groups"]
    ]
    selection = _split_layers(args.layers)
    plan = make_plan(reports, groups, args.ratio, selection,
                     method=scores.get("method", ""),
                     model_hash=scores.get("model_hash", ""))
    payload = plan_to_dict(plan)
    payload["tool_version"] = __version__
    write_json_atomic(args.out, payload)
    dropped = sum(len(g.drop) for g in plan.groups)
    print(f"plan drops {dropped} filter(s) across {len(plan.groups)} group(s) -> {args.out}")
    return 0


def _read_plan(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return plan_from_dict(json.load(fh))


def _cmd_apply(args) -> int:
    model = _load(args.model)
    plan = _read_plan(args.plan)
    if plan.model_hash and plan.model_hash != model.content_hash():
        raise CliError("model_hash_mismatch",
                       "plan was computed for a different model "
                       f"({plan.model_hash[:12]}... vs {model.content_hash()[:12]}...)")
    pruned = apply_plan(model, plan)
    manifest = save_model(pruned, args.out_dir)
    print(f"pruned model written to {manifest}")
    return 0


def _parse_shape(spec: str | None):
    if spec is None:
        return None
    parts = [p for p in spec.split(",") if p.strip()]
    if len(parts) != 3:
        raise CliError("bad_arguments", f"--input-shape wants C,H,W, got '{spec}'")
    return tuple(int(p) for p in parts)


def _cmd_cost(args) -> int:
    model = _load(args.model)
    input_shape = _parse_shape(args.input_shape)
    report = cost_report(model, input_shape)
    payload = {
        "format_version": 1,
        "tool_version": __version__,
        "model_hash": model.content_hash(),
        "report": report.to_dict(),
    }
    if args.baseline:
        baseline = _load(args.baseline)
        base_report = cost_report(baseline, input_shape or baseline.input_shape)
        payload["baseline_hash"] = baseline.content_hash()
        payload["baseline_report"] = base_report.to_dict()
        try:
            payload["comparison"] = compare(base_report, report)
        except ValueError as exc:
            raise CliError("mismatched_baseline", str(exc)) from exc
    write_json_atomic(args.out, payload)
    print(format_cost_table(report))
    if "comparison" in payload:
        comp = payload["comparison"]
        print(f"params: -{comp['total_params_reduction_pct']:.2f}%  "
              f"MACs: -{comp['total_macs_reduction_pct']:.2f}% vs baseline")
    print(f"cost report -> {args.out}")
    return 0


def _cmd_verify(args) -> int:
    model = _load(args.model)
    pruned = _load(args.pruned)
    plan = _read_plan(args.plan)
    rng = np.random.default_rng(args.seed)
    samples = [rng.standard_normal(model.input_shape).astype(np.float32)
               for _ in range(args.samples)]
    result = verify_equivalence(model, pruned, plan, samples)
    result["model_hash"] = model.content_hash()
    result["pruned_hash"] = pruned.content_hash()
    result["tool_version"] = __version__
    json.dump(result, sys.stdout, indent=2, sort_keys=True)
    print()
    return 0 if result["ok"] else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pfprune",
        description="Structured CNN filter pruning: importance ranking, plan "
                    "creation/application, and parameter/MAC accounting.")
    parser.add_argument("--version", action="version", version=f"pfprune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", help="score filters of conv layers")
    p.add_argument("--model", required=True)
    p.add_argument("--method", required=True, choices=sorted(METHOD_FLAGS))
    p.add_argument("--layers", help="comma-separated layer ids (default: all convs)")
    p.add_argument("--inputs", help="sample blob for active methods (hrank, energy)")
    p.add_argument("--samples", type=int, default=500,
                   help="max samples taken from --inputs (default 500)")
    p.add_argument("--tap", choices=("pre-act", "post-act"), default="post-act")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("plan", help="turn scores into a keep/drop plan")
    p.add_argument("--scores", required=True)
    p.add_argument("--ratio", type=float, required=True)
    p.add_argument("--layers", help="restrict pruning to these layer ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("apply", help="apply a plan, writing the pruned model")
    p.add_argument("--model", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("cost", help="parameter and MAC accounting")
    p.add_argument("--model", required=True)
    p.add_argument("--baseline", help="unpruned model to diff against")
    p.add_argument("--input-shape", help="C,H,W override")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cost)

    p = sub.add_parser("verify", help="check pruned model against the original")
    p.add_argument("--model", required=True)
    p.add_argument("--pruned", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, ContainerError, GraphError) as exc:
        code = getattr(exc, "code", "error")
        json.dump({"error": code, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (ValueError, KeyError, OSError) as exc:
        json.dump({"error": "error", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
