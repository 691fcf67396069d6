"""Turn importance reports into keep/drop plans and rewrite models.

Plans are pure data (layer ids, masks, propagation records) so they can be
serialized, diffed and replayed.  Applying a plan never mutates the source
model; it produces a new one that re-validates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import Model
from .graph import NetworkGraph, PruneGroup
from .jsonio import canonical_json, sha256_hex
from . import forward as _forward

__all__ = [
    "GroupPlan",
    "PrunePlan",
    "make_plan",
    "apply_plan",
    "verify_equivalence",
    "plan_to_dict",
    "plan_from_dict",
    "plan_hash",
    "predict_param_count",
]


@dataclass(frozen=True)
class GroupPlan:
    layers: tuple[str, ...]
    keep: tuple[int, ...]
    drop: tuple[int, ...]
    propagation: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class PrunePlan:
    ratio: float
    method: str
    groups: tuple[GroupPlan, ...]
    model_hash: str = ""


def make_plan(reports: dict, groups: list[PruneGroup], p: float,
              layer_selection=None, method: str = "", model_hash: str = "") -> PrunePlan:
    """Select filters to drop at ratio p.

    Singleton groups drop the floor(p * n) lowest-scoring filters (ties by
    ascending index); multi-layer groups first sum their members' normalized
    scores so the shared mask reflects every branch.  At least one filter
    always survives per group.  A group must be selected wholly or not at
    all: masks are shared, so pruning one member alone is unrepresentable.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"pruning ratio must be in (0, 1), got {p}")
    known = {m for g in groups for m in g.members}
    selection = set(layer_selection) if layer_selection is not None else set(reports)
    for layer in selection:
        if layer not in known:
            raise ValueError(f"selected layer '{layer}' is not a conv layer of this model")
        if layer not in reports:
            raise ValueError(f"selected layer '{layer}' has no importance report")

    group_plans: list[GroupPlan] = []
    for group in groups:
        picked = selection.intersection(group.members)
        if not picked:
            continue
        if picked != set(group.members):
            missing = sorted(set(group.members) - picked)
            raise ValueError(
                f"layers {sorted(picked)} share an add-coupled mask with {missing}; "
                "select all of them or none")
        if not group.prunable:
            raise ValueError(
                f"group {list(group.members)} cannot be pruned (its add also "
                "receives unprunable channels)")
        lengths = {len(reports[m].normalized_scores) for m in group.members}
        if len(lengths) != 1:
            raise ValueError(f"group {list(group.members)}: score lengths differ {lengths}")
        n = lengths.pop()
        scores = np.zeros(n, dtype=np.float64)
        for m in group.members:
            scores += np.asarray(reports[m].normalized_scores, dtype=np.float64)
        drop_count = min(math.floor(p * n), n - 1)
        order = np.argsort(scores, kind="stable")
        drop = tuple(sorted(int(i) for i in order[:drop_count]))
        keep = tuple(sorted(int(i) for i in order[drop_count:]))
        group_plans.append(GroupPlan(group.members, keep, drop, tuple(group.consumers)))

    methods = {reports[m].method for g in group_plans for m in g.layers}
    plan_method = method or ("+".join(sorted(methods)) if methods else "")
    return PrunePlan(float(p), plan_method, tuple(group_plans), model_hash)


def _flatten_source_shape(graph: NetworkGraph, dense_id: str, shapes) -> tuple[int, int, int]:
    """Shape feeding the flatten node above a dense consumer."""
    cur = graph.nodes[dense_id].inputs[0]
    while graph.nodes[cur].op_kind != "flatten":
        cur = graph.nodes[cur].inputs[0]
    return shapes[graph.nodes[cur].inputs[0]]


def _flat_keep_columns(n_channels: int, positions: int, keep, order: str) -> np.ndarray:
    keep = np.asarray(keep, dtype=np.int64)
    if order == "channel_last":
        return (np.arange(positions)[:, None] * n_channels + keep[None, :]).ravel()
    return (keep[:, None] * positions + np.arange(positions)[None, :]).ravel()


def apply_plan(model: Model, plan: PrunePlan) -> Model:
    """Slice kernels, biases, batchnorm params and consumer inputs per plan.

    Filter removal propagates: each consumer conv loses the matching input
    channels, and a dense after flatten loses the columns of every spatial
    position of each dropped channel, laid out per the model's flatten_order.
    """
    shapes = model.shapes()
    weights = dict(model.weights)
    graph = model.graph

    for group in plan.groups:
        keep = list(group.keep)
        for member in group.layers:
            node = graph.nodes[member]
            kname = node.weight_refs["kernel"]
            n_out = weights[kname].shape[0]
            if sorted(set(group.keep) | set(group.drop)) != list(range(n_out)):
                raise ValueError(
                    f"plan for '{member}' does not partition filters 0..{n_out - 1}")
            weights[kname] = weights[kname][keep]
            bias = node.weight_refs.get("bias")
            if bias:
                weights[bias] = weights[bias][keep]
        n_channels = len(group.keep) + len(group.drop)
        for consumer, role in group.propagation:
            node = graph.nodes[consumer]
            if role == "bn":
                for ref in ("gamma", "beta", "mean", "variance"):
                    name = node.weight_refs[ref]
                    weights[name] = weights[name][keep]
            elif role == "conv_in":
                name = node.weight_refs["kernel"]
                weights[name] = weights[name][:, keep]
            elif role == "dense_in":
                name = node.weight_refs["kernel"]
                weights[name] = weights[name][:, keep]
            elif role == "dense_in_flat":
                if model.flatten_order not in ("channel_last", "channel_first"):
                    raise ValueError(
                        f"flatten_order required to prune dense '{consumer}' "
                        f"but model declares '{model.flatten_order}'")
                c, h, w = _flatten_source_shape(graph, consumer, shapes)
                if c != n_channels:
                    raise ValueError(
                        f"dense '{consumer}': flatten carries {c} channels, "
                        f"plan masks {n_channels}")
                cols = _flat_keep_columns(c, h * w, keep, model.flatten_order)
                name = node.weight_refs["kernel"]
                weights[name] = weights[name][:, cols]
            else:
                raise ValueError(f"unknown propagation role '{role}'")

    pruned = Model(
        graph=graph,
        weights=weights,
        input_shape=model.input_shape,
        flatten_order=model.flatten_order,
        provenance={"original_model": model.content_hash(), "plan": plan_hash(plan)},
    )
    pruned.shapes()  # re-validate
    return pruned


def predict_param_count(model: Model, plan: PrunePlan, include_batchnorm: bool = True) -> int:
    """Analytic post-pruning parameter count, straight from keep counts.

    Independent of apply_plan: works on the original dims plus the plan's
    masks only, so it can cross-check the rewritten model.
    """
    keep_of: dict[str, int] = {}
    in_keep: dict[str, list] = {}
    dense_channel_keep: dict[str, list] = {}
    dense_flat_keep: dict[str, tuple] = {}
    bn_keep: dict[str, int] = {}
    for group in plan.groups:
        for member in group.layers:
            keep_of[member] = len(group.keep)
        for consumer, role in group.propagation:
            if role == "conv_in":
                in_keep[consumer] = list(group.keep)
            elif role == "bn":
                bn_keep[consumer] = len(group.keep)
            elif role == "dense_in":
                dense_channel_keep[consumer] = list(group.keep)
            elif role == "dense_in_flat":
                dense_flat_keep[consumer] = (len(group.keep), len(group.keep) + len(group.drop))

    shapes = model.shapes()
    total = 0
    for nid, node in model.graph.nodes.items():
        if node.op_kind == "conv2d":
            kern = model.weights[node.weight_refs["kernel"]]
            n_out = keep_of.get(nid, kern.shape[0])
            n_in = len(in_keep[nid]) if nid in in_keep else kern.shape[1]
            total += n_out * n_in * kern.shape[2] * kern.shape[3]
            if node.weight_refs.get("bias"):
                total += n_out
        elif node.op_kind == "dense":
            kern = model.weights[node.weight_refs["kernel"]]
            n_out, n_in = kern.shape
            if nid in dense_channel_keep:
                n_in = len(dense_channel_keep[nid])
            elif nid in dense_flat_keep:
                kept, orig = dense_flat_keep[nid]
                c, h, w = _flatten_source_shape(model.graph, nid, shapes)
                assert c == orig
                n_in = kept * h * w
            total += n_out * n_in
            if node.weight_refs.get("bias"):
                total += n_out
        elif node.op_kind == "batchnorm" and include_batchnorm:
            channels = bn_keep.get(nid, model.weights[node.weight_refs["gamma"]].shape[0])
            total += 4 * channels
    return total


def verify_equivalence(model: Model, pruned: Model, plan: PrunePlan, samples) -> dict:
    """Check that pruning only removed channels, nothing else.

    At every pruned layer whose inputs are untouched by the plan, the pruned
    model's conv output must equal the original output restricted to kept
    channels, exactly.  Layers downstream of other pruned layers see changed
    inputs by design, so they are reported (max deviation) but not asserted.
    """
    samples = list(samples)
    ancestors = _ancestor_map(model.graph)
    pruned_layers = {m: g for g in plan.groups for m in g.layers}
    layer_results: dict[str, dict] = {
        m: {"asserted": not any(a in pruned_layers for a in ancestors[m]),
            "equal": True, "max_abs_diff": 0.0}
        for m in pruned_layers
    }
    terminal = [nid for nid in model.graph.topological_order()
                if not model.graph.consumers(nid)]
    output_diff = 0.0

    for sample in samples:
        orig = _forward.run_network(model.graph, model.weights, sample, model.flatten_order)
        new = _forward.run_network(pruned.graph, pruned.weights, sample, pruned.flatten_order)
        for member, group in pruned_layers.items():
            expected = orig[member][list(group.keep)]
            actual = new[member]
            diff = float(np.max(np.abs(expected.astype(np.float64) -
                                       actual.astype(np.float64)))) if expected.size else 0.0
            entry = layer_results[member]
            entry["max_abs_diff"] = max(entry["max_abs_diff"], diff)
            if not np.array_equal(expected, actual):
                entry["equal"] = False
        for t in terminal:
            if orig[t].shape == new[t].shape:
                output_diff = max(output_diff, float(np.max(np.abs(
                    orig[t].astype(np.float64) - new[t].astype(np.float64)))))

    violations = sorted(m for m, r in layer_results.items()
                        if r["asserted"] and not r["equal"])
    return {
        "samples": len(samples),
        "layers": layer_results,
        "violations": violations,
        "ok": not violations,
        "terminal_max_abs_diff": output_diff,
    }


def _ancestor_map(graph: NetworkGraph) -> dict[str, set]:
    ancestors: dict[str, set] = {}
    for nid in graph.topological_order():
        node = graph.nodes[nid]
        acc: set = set()
        for src in node.inputs:
            acc.add(src)
            acc |= ancestors[src]
        ancestors[nid] = acc
    return ancestors


def plan_to_dict(plan: PrunePlan) -> dict:
    return {
        "format_version": 1,
        "ratio": plan.ratio,
        "method": plan.method,
        "model_hash": plan.model_hash,
        "groups": [
            {
                "layers": list(g.layers),
                "keep": list(g.keep),
                "drop": list(g.drop),
                "propagation": [{"node": n, "role": r} for n, r in g.propagation],
            }
            for g in plan.groups
        ],
    }


def plan_from_dict(data: dict) -> PrunePlan:
    groups = tuple(
        GroupPlan(
            tuple(g["layers"]),
            tuple(int(i) for i in g["keep"]),
            tuple(int(i) for i in g["drop"]),
            tuple((p["node"], p["role"]) for p in g["propagation"]),
        )
        for g in data["groups"]
    )
    return PrunePlan(float(data["ratio"]), data.get("method", ""), groups,
                     data.get("model_hash", ""))


def plan_hash(plan: PrunePlan) -> str:
    return sha256_hex(canonical_json(plan_to_dict(plan)).encode())
