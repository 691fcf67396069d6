"""Parameter and MAC accounting per layer and per network.

Counting conventions: one MAC is one multiply-accumulate; biases, batchnorm,
activations and pooling contribute zero MACs.  Batchnorm parameters default
to 4 per channel (scale, shift and both running statistics) and can be
excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

from .container import Model
from .graph import infer_shapes

__all__ = ["CostReport", "count_params", "count_macs", "cost_report", "compare",
           "format_cost_table"]


@dataclass(frozen=True)
class CostReport:
    input_shape: tuple[int, ...]
    per_node: dict[str, dict]
    total_params: int
    total_macs: int
    include_batchnorm: bool = True

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "include_batchnorm": self.include_batchnorm,
            "per_node": {k: dict(v) for k, v in self.per_node.items()},
            "total_params": self.total_params,
            "total_macs": self.total_macs,
        }


def cost_report(model: Model, input_shape=None, include_batchnorm: bool = True) -> CostReport:
    """Params and MACs for every node at the given (default: manifest) input."""
    input_shape = tuple(int(v) for v in (input_shape or model.input_shape))
    shapes = infer_shapes(model.graph, input_shape, model.weights)
    per_node: dict[str, dict] = {}
    for nid, node in model.graph.nodes.items():
        params = 0
        macs = 0
        if node.op_kind == "conv2d":
            n_out, n_in, kh, kw = model.weights[node.weight_refs["kernel"]].shape
            params = n_out * n_in * kh * kw
            if node.weight_refs.get("bias"):
                params += n_out
            _, ho, wo = shapes[nid]
            macs = ho * wo * kh * kw * n_in * n_out
        elif node.op_kind == "dense":
            n_out, n_in = model.weights[node.weight_refs["kernel"]].shape
            params = n_out * n_in
            if node.weight_refs.get("bias"):
                params += n_out
            macs = n_in * n_out
        elif node.op_kind == "batchnorm" and include_batchnorm:
            params = 4 * model.weights[node.weight_refs["gamma"]].shape[0]
        per_node[nid] = {"params": int(params), "macs": int(macs)}
    return CostReport(
        input_shape,
        per_node,
        sum(v["params"] for v in per_node.values()),
        sum(v["macs"] for v in per_node.values()),
        include_batchnorm,
    )


def count_params(model: Model, include_batchnorm: bool = True) -> CostReport:
    return cost_report(model, None, include_batchnorm)


def count_macs(model: Model, input_shape=None, include_batchnorm: bool = True) -> CostReport:
    return cost_report(model, input_shape, include_batchnorm)


def _reduction_pct(before: int, after: int) -> float:
    return 100.0 * (before - after) / before if before else 0.0


def compare(before: CostReport, after: CostReport) -> dict:
    """Absolute and percentage-point reductions of `after` vs `before`."""
    if set(before.per_node) != set(after.per_node):
        missing = set(before.per_node).symmetric_difference(after.per_node)
        raise ValueError(f"cost reports cover different nodes: {sorted(missing)}")
    per_node = {}
    for nid in before.per_node:
        b, a = before.per_node[nid], after.per_node[nid]
        per_node[nid] = {
            "params_before": b["params"], "params_after": a["params"],
            "params_reduction_pct": _reduction_pct(b["params"], a["params"]),
            "macs_before": b["macs"], "macs_after": a["macs"],
            "macs_reduction_pct": _reduction_pct(b["macs"], a["macs"]),
        }
    return {
        "per_node": per_node,
        "total_params_before": before.total_params,
        "total_params_after": after.total_params,
        "total_params_reduction_pct": _reduction_pct(before.total_params, after.total_params),
        "total_macs_before": before.total_macs,
        "total_macs_after": after.total_macs,
        "total_macs_reduction_pct": _reduction_pct(before.total_macs, after.total_macs),
    }


def format_cost_table(report: CostReport) -> str:
    """Aligned-column text rendering of a cost report."""
    rows = [("node", "params", "MACs")]
    for nid, entry in report.per_node.items():
        if entry["params"] or entry["macs"]:
            rows.append((nid, f"{entry['params']:,}", f"{entry['macs']:,}"))
    rows.append(("total", f"{report.total_params:,}", f"{report.total_macs:,}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(col.rjust(w) if j else col.ljust(w)
                               for j, (col, w) in enumerate(zip(row, widths))))
        if i == 0 or i == len(rows) - 2:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)
