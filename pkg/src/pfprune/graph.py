"""Layer DAG, shape inference and prune-group discovery.

A network is a DAG of typed nodes.  Shapes are (channels, height, width)
tuples for spatial tensors and (features,) after flatten / global pooling.
Graphs are immutable once built; analyses never mutate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GraphError",
    "ShapeError",
    "LayerNode",
    "NetworkGraph",
    "PruneGroup",
    "infer_shapes",
    "discover_groups",
]

OP_KINDS = {
    "input",
    "conv2d",
    "dense",
    "add",
    "maxpool",
    "avgpool",
    "globalavgpool",
    "flatten",
    "batchnorm",
    "activation",
    "softmax",
}

# Ops that neither create nor reorder channels; masks propagate straight
# through them.
CHANNEL_AGNOSTIC = {"batchnorm", "activation", "maxpool", "avgpool", "softmax"}


class GraphError(ValueError):
    code = "invalid_graph"


class ShapeError(GraphError):
    code = "shape_mismatch"


@dataclass(frozen=True)
class LayerNode:
    id: str
    op_kind: str
    inputs: tuple[str, ...] = ()
    attrs: dict = field(default_factory=dict)
    weight_refs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.op_kind not in OP_KINDS:
            raise GraphError(f"node '{self.id}': unknown op_kind '{self.op_kind}'")
        object.__setattr__(self, "inputs", tuple(self.inputs))


_ARITY = {"input": 0, "add": 2}


class NetworkGraph:
    """Immutable DAG of layer nodes with a single input node."""

    def __init__(self, nodes: list[LayerNode]):
        self.nodes: dict[str, LayerNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise GraphError(f"duplicate node id '{node.id}'")
            self.nodes[node.id] = node
        self._check_structure()
        self._order = self._toposort()
        self._consumers: dict[str, tuple[str, ...]] = {nid: () for nid in self.nodes}
        cons: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for node in nodes:
            for src in node.inputs:
                cons[src].append(node.id)
        self._consumers = {nid: tuple(cons[nid]) for nid in self.nodes}

    def _check_structure(self) -> None:
        inputs = [n.id for n in self.nodes.values() if n.op_kind == "input"]
        if len(inputs) != 1:
            raise GraphError(f"graph needs exactly one input node, found {len(inputs)}")
        self.input_id = inputs[0]
        for node in self.nodes.values():
            want = _ARITY.get(node.op_kind, 1)
            if len(node.inputs) != want:
                raise GraphError(
                    f"node '{node.id}' ({node.op_kind}) needs {want} input(s), has {len(node.inputs)}"
                )
            for src in node.inputs:
                if src not in self.nodes:
                    raise GraphError(f"node '{node.id}' references missing input '{src}'")

    def _toposort(self) -> tuple[str, ...]:
        indeg = {nid: len(n.inputs) for nid, n in self.nodes.items()}
        ready = [nid for nid, d in indeg.items() if d == 0]
        out: list[str] = []
        adj: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for node in self.nodes.values():
            for src in node.inputs:
                adj[src].append(node.id)
        while ready:
            nid = ready.pop(0)
            out.append(nid)
            for nxt in adj[nid]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if len(out) != len(self.nodes):
            raise GraphError("graph contains a cycle")
        return tuple(out)

    def topological_order(self) -> tuple[str, ...]:
        return self._order

    def consumers(self, node_id: str) -> tuple[str, ...]:
        return self._consumers[node_id]

    def conv_ids(self) -> list[str]:
        return [nid for nid in self._order if self.nodes[nid].op_kind == "conv2d"]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes


def _pair(value) -> tuple[int, int]:
    if isinstance(value, (list, tuple)):
        a, b = value
        return int(a), int(b)
    return int(value), int(value)


def _conv_out(in_dim: int, k: int, stride: int, padding: str) -> int:
    if padding == "same":
        return math.ceil(in_dim / stride)
    return (in_dim - k) // stride + 1


def infer_shapes(graph: NetworkGraph, input_shape, weights) -> dict[str, tuple[int, ...]]:
    """Map every node to its output shape.

    ``weights`` resolves weight_refs to arrays (their dims drive conv/dense
    output sizes).  Raises ShapeError on any inconsistency, naming the node.
    """
    c, h, w = (int(v) for v in input_shape)
    if min(c, h, w) < 1:
        raise ShapeError(f"input shape must be positive, got {input_shape}")
    shapes: dict[str, tuple[int, ...]] = {}

    def weight(node: LayerNode, ref: str) -> np.ndarray:
        name = node.weight_refs.get(ref)
        if name is None or name not in weights:
            raise ShapeError(f"node '{node.id}': missing weight reference '{ref}'")
        return weights[name]

    for nid in graph.topological_order():
        node = graph.nodes[nid]
        ins = [shapes[i] for i in node.inputs]
        kind = node.op_kind

        if kind == "input":
            shape = (c, h, w)
        elif kind == "conv2d":
            ci, hi, wi = _spatial(ins[0], node)
            kern = weight(node, "kernel")
            if kern.ndim != 4:
                raise ShapeError(f"node '{nid}': conv kernel must be 4-D, got {kern.shape}")
            n_out, n_in, kh, kw = kern.shape
            if n_in != ci:
                raise ShapeError(
                    f"node '{nid}': kernel expects {n_in} input channels, got {ci}"
                )
            sh, sw = _pair(node.attrs.get("stride", 1))
            pad = node.attrs.get("padding", "same")
            if pad not in ("same", "valid"):
                raise ShapeError(f"node '{nid}': unknown padding '{pad}'")
            shape = (n_out, _conv_out(hi, kh, sh, pad), _conv_out(wi, kw, sw, pad))
        elif kind in ("maxpool", "avgpool"):
            ci, hi, wi = _spatial(ins[0], node)
            wh, ww = _pair(node.attrs["window"])
            sh, sw = _pair(node.attrs.get("stride", node.attrs["window"]))
            pad = node.attrs.get("padding", "valid")
            shape = (ci, _conv_out(hi, wh, sh, pad), _conv_out(wi, ww, sw, pad))
        elif kind == "globalavgpool":
            ci, _, _ = _spatial(ins[0], node)
            shape = (ci,)
        elif kind == "flatten":
            ci, hi, wi = _spatial(ins[0], node)
            shape = (ci * hi * wi,)
        elif kind == "dense":
            if len(ins[0]) != 1:
                raise ShapeError(f"node '{nid}': dense input must be flat, got {ins[0]}")
            kern = weight(node, "kernel")
            if kern.ndim != 2:
                raise ShapeError(f"node '{nid}': dense kernel must be 2-D, got {kern.shape}")
            n_out, n_in = kern.shape
            if n_in != ins[0][0]:
                raise ShapeError(f"node '{nid}': dense expects {n_in} inputs, got {ins[0][0]}")
            shape = (n_out,)
        elif kind == "batchnorm":
            ch = ins[0][0]
            for ref in ("gamma", "beta", "mean", "variance"):
                vec = weight(node, ref)
                if vec.shape != (ch,):
                    raise ShapeError(
                        f"node '{nid}': batchnorm '{ref}' has shape {vec.shape}, expected ({ch},)"
                    )
            shape = ins[0]
        elif kind in ("activation", "softmax"):
            shape = ins[0]
        elif kind == "add":
            if ins[0] != ins[1]:
                raise ShapeError(
                    f"node '{nid}': add inputs disagree, {ins[0]} vs {ins[1]}"
                )
            shape = ins[0]
        else:  # pragma: no cover - op set is closed
            raise ShapeError(f"node '{nid}': unknown op_kind '{kind}'")

        if min(shape) < 1:
            raise ShapeError(f"node '{nid}': inferred non-positive shape {shape}")
        shapes[nid] = shape
    return shapes


def _spatial(shape: tuple[int, ...], node: LayerNode) -> tuple[int, int, int]:
    if len(shape) != 3:
        raise ShapeError(f"node '{node.id}' needs a (C,H,W) input, got {shape}")
    return shape


@dataclass(frozen=True)
class PruneGroup:
    """Conv layers whose output channels must share one keep/drop mask.

    ``consumers`` lists every weight-bearing downstream node the mask
    propagates into, as (node_id, role) with role one of:
      - "conv_in":       kernel input-channel axis is sliced
      - "bn":            all four per-channel parameter vectors are sliced
      - "dense_in":      dense columns map 1:1 to channels (after global pooling)
      - "dense_in_flat": dense columns map to (channel, position) pairs via
                         the model's flatten_order
    """

    members: tuple[str, ...]
    consumers: tuple[tuple[str, str], ...]
    prunable: bool = True


class _UnionFind:
    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _resolve_channel_source(graph: NetworkGraph, node_id: str) -> str:
    """Walk upward through channel-agnostic ops to the node defining channels."""
    cur = node_id
    while True:
        node = graph.nodes[cur]
        if node.op_kind in CHANNEL_AGNOSTIC:
            cur = node.inputs[0]
            continue
        return cur


def discover_groups(graph: NetworkGraph) -> list[PruneGroup]:
    """Partition conv layers into groups sharing one output-channel mask.

    Convs whose outputs meet at an elementwise add (directly or through
    channel-agnostic ops, including chains of adds) are grouped together.
    Groups whose add pulls in a non-conv channel source (e.g. the network
    input) are kept but marked unprunable.
    """
    uf = _UnionFind()
    tainted: set[str] = set()

    for nid in graph.topological_order():
        node = graph.nodes[nid]
        if node.op_kind != "add":
            continue
        sources = [_resolve_channel_source(graph, src) for src in node.inputs]
        for src in sources:
            kind = graph.nodes[src].op_kind
            if kind in ("conv2d", "add"):
                uf.union(nid, src)
            elif kind == "input":
                uf.union(nid, src)
                tainted.add(nid)
            else:
                raise GraphError(
                    f"add node '{nid}': unsupported topology, channel source "
                    f"'{src}' is a {kind} node"
                )

    roots: dict[str, list[str]] = {}
    for cid in graph.conv_ids():
        roots.setdefault(uf.find(cid), []).append(cid)

    tainted_roots = {uf.find(t) for t in tainted}
    order = {nid: i for i, nid in enumerate(graph.topological_order())}
    groups: list[PruneGroup] = []
    for root, members in sorted(roots.items(), key=lambda kv: min(order[m] for m in kv[1])):
        members = sorted(members, key=order.__getitem__)
        consumers = _walk_consumers(graph, set(members), uf, root)
        prunable = uf.find(root) not in tainted_roots
        groups.append(PruneGroup(tuple(members), tuple(consumers), prunable))
    return groups


def _walk_consumers(
    graph: NetworkGraph,
    members: set[str],
    uf: _UnionFind,
    root: str,
) -> list[tuple[str, str]]:
    seen: set[tuple[str, str]] = set()
    out: list[tuple[str, str]] = []
    order = {nid: i for i, nid in enumerate(graph.topological_order())}

    def record(nid: str, role: str) -> None:
        key = (nid, role)
        if key not in seen:
            seen.add(key)
            out.append(key)

    def walk(nid: str, mode: str, visited: set[tuple[str, str]]) -> None:
        for nxt in graph.consumers(nid):
            state = (nxt, mode)
            if state in visited:
                continue
            visited.add(state)
            node = graph.nodes[nxt]
            kind = node.op_kind
            if kind == "batchnorm":
                record(nxt, "bn")
                walk(nxt, mode, visited)
            elif kind in ("activation", "maxpool", "avgpool", "softmax"):
                walk(nxt, mode, visited)
            elif kind == "conv2d":
                record(nxt, "conv_in")
            elif kind == "add":
                # Same group by construction; the sum carries the same mask.
                walk(nxt, mode, visited)
            elif kind == "globalavgpool":
                walk(nxt, "channels", visited)
            elif kind == "flatten":
                walk(nxt, "flat", visited)
            elif kind == "dense":
                record(nxt, "dense_in" if mode == "channels" else "dense_in_flat")

    visited: set[tuple[str, str]] = set()
    for member in sorted(members, key=order.__getitem__):
        walk(member, "spatial", visited)
    return out
