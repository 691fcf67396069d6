"""Reference inference at desk scale: convolution, dense, pooling, batchnorm.

Only as fast as it needs to be for generating feature maps; accumulation is
64-bit, activations are stored as 32-bit. conv2d invocations are counted in
a module-level counter so callers can prove a code path is data-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .graph import NetworkGraph, _pair

__all__ = [
    "Activation",
    "conv_forward",
    "run_network",
    "run_to_layer",
    "collect_feature_maps",
    "conv_call_count",
    "reset_conv_call_count",
]

_conv_calls = 0


def conv_call_count() -> int:
    """Number of conv_forward invocations since the last reset."""
    return _conv_calls


def reset_conv_call_count() -> None:
    global _conv_calls
    _conv_calls = 0


@dataclass(frozen=True)
class Activation:
    node_id: str
    tensor: np.ndarray


def _same_pad(in_dim: int, k: int, stride: int) -> tuple[int, int]:
    out = -(-in_dim // stride)
    total = max((out - 1) * stride + k - in_dim, 0)
    before = (total + 1) // 2  # odd padding goes on the leading edge
    return before, total - before


def _pad_spatial(x: np.ndarray, kh: int, kw: int, sh: int, sw: int, padding: str,
                 fill: float = 0.0) -> np.ndarray:
    if padding == "valid":
        return x
    ph = _same_pad(x.shape[1], kh, sh)
    pw = _same_pad(x.shape[2], kw, sw)
    return np.pad(x, ((0, 0), ph, pw), constant_values=fill)


def conv_forward(x: np.ndarray, kernel: np.ndarray, bias=None,
                 padding: str = "same", stride=1) -> np.ndarray:
    """2-D convolution (cross-correlation) of a (C,H,W) input.

    Each output element is the sum over input channels and kernel offsets of
    input * weight, plus bias when present.
    """
    global _conv_calls
    _conv_calls += 1

    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 3 or k.ndim != 4:
        raise ValueError(f"expected (C,H,W) input and 4-D kernel, got {x.shape}, {k.shape}")
    n_out, n_in, kh, kw = k.shape
    if x.shape[0] != n_in:
        raise ValueError(f"input has {x.shape[0]} channels, kernel expects {n_in}")
    sh, sw = _pair(stride)

    xp = _pad_spatial(x, kh, kw, sh, sw, padding)
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::sh, ::sw]
    _, ho, wo = windows.shape[:3]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(ho * wo, n_in * kh * kw)
    out = cols @ k.reshape(n_out, n_in * kh * kw).T
    out = out.T.reshape(n_out, ho, wo)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[:, None, None]
    return out.astype(np.float32)


def _pool(x: np.ndarray, node, reduce_fn, fill: float) -> np.ndarray:
    wh, ww = _pair(node.attrs["window"])
    sh, sw = _pair(node.attrs.get("stride", node.attrs["window"]))
    padding = node.attrs.get("padding", "valid")
    xp = _pad_spatial(np.asarray(x, dtype=np.float64), wh, ww, sh, sw, padding, fill)
    windows = sliding_window_view(xp, (wh, ww), axis=(1, 2))[:, ::sh, ::sw]
    return reduce_fn(windows, axis=(3, 4)).astype(np.float32)


def _batchnorm(x: np.ndarray, gamma, beta, mean, var, eps: float) -> np.ndarray:
    scale = gamma.astype(np.float64) / np.sqrt(var.astype(np.float64) + eps)
    shift = beta.astype(np.float64) - mean.astype(np.float64) * scale
    if x.ndim == 3:
        scale, shift = scale[:, None, None], shift[:, None, None]
    return (x.astype(np.float64) * scale + shift).astype(np.float32)


_ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "linear": lambda x: x,
}


def _flatten(x: np.ndarray, order: str) -> np.ndarray:
    if order == "channel_last":
        return np.ascontiguousarray(x.transpose(1, 2, 0)).ravel()
    if order == "channel_first":
        return np.ascontiguousarray(x).ravel()
    raise ValueError(f"unknown flatten_order '{order}'")


def _eval_node(node, ins: list[np.ndarray], weights, flatten_order: str) -> np.ndarray:
    kind = node.op_kind
    if kind == "conv2d":
        bias_ref = node.weight_refs.get("bias")
        return conv_forward(
            ins[0],
            weights[node.weight_refs["kernel"]],
            weights[bias_ref] if bias_ref else None,
            node.attrs.get("padding", "same"),
            node.attrs.get("stride", 1),
        )
    if kind == "dense":
        w = weights[node.weight_refs["kernel"]].astype(np.float64)
        out = w @ ins[0].astype(np.float64)
        bias_ref = node.weight_refs.get("bias")
        if bias_ref:
            out = out + weights[bias_ref].astype(np.float64)
        return out.astype(np.float32)
    if kind == "batchnorm":
        refs = node.weight_refs
        return _batchnorm(
            ins[0], weights[refs["gamma"]], weights[refs["beta"]],
            weights[refs["mean"]], weights[refs["variance"]],
            float(node.attrs.get("epsilon", 1e-5)),
        )
    if kind == "activation":
        name = node.attrs.get("name", "relu")
        if name not in _ACTIVATIONS:
            raise ValueError(f"node '{node.id}': unknown activation '{name}'")
        return _ACTIVATIONS[name](ins[0])
    if kind == "maxpool":
        return _pool(ins[0], node, np.max, -np.inf)
    if kind == "avgpool":
        return _pool(ins[0], node, np.mean, 0.0)
    if kind == "globalavgpool":
        return ins[0].astype(np.float64).mean(axis=(1, 2)).astype(np.float32)
    if kind == "flatten":
        return _flatten(ins[0], flatten_order)
    if kind == "add":
        return (ins[0].astype(np.float64) + ins[1].astype(np.float64)).astype(np.float32)
    if kind == "softmax":
        z = ins[0].astype(np.float64)
        z = np.exp(z - z.max())
        return (z / z.sum()).astype(np.float32)
    raise ValueError(f"node '{node.id}': cannot execute op '{kind}'")


def run_network(graph: NetworkGraph, weights, x: np.ndarray,
                flatten_order: str = "channel_last",
                stop_after: str | None = None) -> dict[str, np.ndarray]:
    """Execute the graph on one sample, returning activations per node.

    Execution stops once ``stop_after`` (and everything topologically before
    it) has been evaluated.
    """
    acts: dict[str, np.ndarray] = {}
    for nid in graph.topological_order():
        node = graph.nodes[nid]
        if node.op_kind == "input":
            acts[nid] = np.asarray(x, dtype=np.float32)
        else:
            for ref, name in node.weight_refs.items():
                if name not in weights:
                    raise KeyError(f"node '{nid}': missing weight tensor '{name}' ({ref})")
            acts[nid] = _eval_node(node, [acts[i] for i in node.inputs], weights, flatten_order)
        if nid == stop_after:
            break
    return acts


def _post_chain_end(graph: NetworkGraph, node_id: str) -> str:
    """Follow the batchnorm/activation chain hanging off a node."""
    cur = node_id
    while True:
        nxt = [c for c in graph.consumers(cur)
               if graph.nodes[c].op_kind in ("batchnorm", "activation")]
        if len(nxt) != 1:
            return cur
        cur = nxt[0]


def run_to_layer(graph: NetworkGraph, weights, x: np.ndarray, target: str,
                 tap: str = "pre-act", flatten_order: str = "channel_last") -> Activation:
    """Activation at ``target``, before ("pre-act", default) or after
    ("post-act") any batchnorm/activation ops that immediately follow it."""
    if target not in graph:
        raise KeyError(f"no node '{target}' in graph")
    if tap not in ("pre-act", "post-act"):
        raise ValueError(f"tap must be 'pre-act' or 'post-act', got '{tap}'")
    stop = target if tap == "pre-act" else _post_chain_end(graph, target)
    acts = run_network(graph, weights, x, flatten_order, stop_after=stop)
    return Activation(stop, acts[stop])


def collect_feature_maps(graph: NetworkGraph, weights, samples, target: str,
                         tap: str = "post-act",
                         flatten_order: str = "channel_last") -> list[np.ndarray]:
    """Feature maps of one conv layer for a batch of input samples."""
    return [run_to_layer(graph, weights, s, target, tap, flatten_order).tensor
            for s in samples]
