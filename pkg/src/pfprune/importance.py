"""Per-filter importance criteria.

Six criteria over one conv layer: the operator-norm method (channel-wise
rank-1 SVD directions scored by trace alignment), entry-wise l1/l2 norms,
distance from the geometric median, and two feature-map criteria (average
numerical rank, average nuclear norm).  The first four are passive: they
read weights only and never run the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import KernelTensor, svd_rank1, trace_product
from . import forward as _forward

__all__ = [
    "PASSIVE_METHODS",
    "ACTIVE_METHODS",
    "ImportanceReport",
    "DirectionBank",
    "direction_bank",
    "score_operator_norm",
    "score_entrywise",
    "score_gm",
    "score_hrank",
    "score_energy",
    "score_layer",
    "geometric_median",
    "normalize_scores",
]

PASSIVE_METHODS = ("operator_norm", "l1", "l2", "gm")
ACTIVE_METHODS = ("hrank", "energy")

# Singular values below this times sigma_max * max(h, w) do not count toward
# numerical rank (float32-scale precision).
HRANK_EPS = 1e-7


@dataclass(frozen=True)
class ImportanceReport:
    layer_id: str
    method: str
    raw_scores: np.ndarray
    normalized_scores: np.ndarray
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DirectionBank:
    """Per-channel maximally-stretched directions, stacked column-wise.

    ``directions`` has shape (k_v, n_in); column c is a unit vector, or all
    zero for channels listed in ``degenerate_channels``.
    """

    layer_id: str
    directions: np.ndarray
    degenerate_channels: tuple[int, ...] = ()


def normalize_scores(raw: np.ndarray, method: str) -> np.ndarray:
    """Map raw scores into [0, 1] with max exactly 1 (all-zero stays zero).

    The operator-norm criterion squares first, so strongly negative trace
    alignment also ranks as important; the other criteria are nonnegative
    by construction and are scaled by their maximum directly.
    """
    raw = np.asarray(raw, dtype=np.float64)
    scaled = raw * raw if method == "operator_norm" else raw
    top = scaled.max() if scaled.size else 0.0
    if top <= 0.0:
        return np.zeros_like(scaled)
    return scaled / top


def direction_bank(kernel: KernelTensor, layer_id: str = "") -> DirectionBank:
    """Channel-wise rank-1 directions of a kernel tensor.

    For each input channel c, the matrix of that channel across all filters
    is approximated by its leading singular triple; the first row of
    u1 @ w1.T, rescaled to unit length, becomes column c.  The column's sign
    is then canonicalized (largest-magnitude entry positive) so that scores
    do not depend on which filter happens to be listed first; rows of the
    rank-1 approximation only differ by sign and scale.  All-zero channels
    yield a zero column and are flagged rather than failing, since dead
    channels do occur in real checkpoints.
    """
    bank = np.zeros((kernel.k_v, kernel.n_in), dtype=np.float64)
    degenerate: list[int] = []
    for c in range(kernel.n_in):
        factors = svd_rank1(kernel.channel_matrix(c))
        if factors.degenerate:
            degenerate.append(c)
            continue
        row = factors.u1[0] * factors.w1
        nrm = np.linalg.norm(row)
        # A filter exactly orthogonal to the leading direction zeroes the
        # first row; the right singular vector itself is the direction then.
        col = row / nrm if nrm > 0.0 else factors.w1
        if col[np.argmax(np.abs(col))] < 0:
            col = -col
        bank[:, c] = col
    return DirectionBank(layer_id, bank, tuple(degenerate))


def score_operator_norm(kernel: KernelTensor, bank: DirectionBank | None = None,
                        layer_id: str = "") -> ImportanceReport:
    """Importance as trace alignment of each filter with the direction bank."""
    if bank is None:
        bank = direction_bank(kernel, layer_id)
    raw = np.array([
        trace_product(kernel.filter_matrix(j), bank.directions)
        for j in range(kernel.n_out)
    ])
    return ImportanceReport(
        layer_id, "operator_norm", raw, normalize_scores(raw, "operator_norm"),
        {"degenerate_channels": list(bank.degenerate_channels)},
    )


def score_entrywise(kernel: KernelTensor, p: int, layer_id: str = "") -> ImportanceReport:
    """Entry-wise l1 or l2 norm of each filter over all its entries."""
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    flat = kernel.data.reshape(kernel.n_out, -1).astype(np.float64)
    raw = np.abs(flat).sum(axis=1) if p == 1 else np.sqrt((flat * flat).sum(axis=1))
    method = f"l{p}"
    return ImportanceReport(layer_id, method, raw, normalize_scores(raw, method), {"p": p})


def geometric_median(points: np.ndarray, tol: float = 1e-9,
                     max_iter: int = 500) -> tuple[np.ndarray, int]:
    """Weiszfeld iteration from the coordinate-wise mean.

    Returns (median, iterations).  Iterates landing exactly on a data point
    are nudged by 1e-12 to step off the singularity.
    """
    pts = np.asarray(points, dtype=np.float64)
    g = pts.mean(axis=0)
    iterations = 0
    for _ in range(max_iter):
        d = np.linalg.norm(pts - g, axis=1)
        if np.all(d < 1e-15):
            break
        if np.any(d < 1e-15):
            g = g + 1e-12
            d = np.linalg.norm(pts - g, axis=1)
        w = 1.0 / d
        g_next = (w @ pts) / w.sum()
        iterations += 1
        if np.linalg.norm(g_next - g) < tol:
            g = g_next
            break
        g = g_next
    return g, iterations


def score_gm(kernel: KernelTensor, layer_id: str = "") -> ImportanceReport:
    """Distance of each flattened filter from the filters' geometric median."""
    if kernel.n_out < 2:
        raise ValueError("geometric-median scoring needs at least 2 filters")
    pts = kernel.data.reshape(kernel.n_out, -1).astype(np.float64)
    median, iterations = geometric_median(pts)
    raw = np.linalg.norm(pts - median, axis=1)
    return ImportanceReport(layer_id, "gm", raw, normalize_scores(raw, "gm"),
                            {"weiszfeld_iterations": iterations})


def _check_maps(feature_maps) -> tuple[int, int, int]:
    if not feature_maps:
        raise ValueError("feature-map scoring needs at least one sample")
    shape = np.asarray(feature_maps[0]).shape
    if len(shape) != 3:
        raise ValueError(f"feature maps must be (channels, h, w), got {shape}")
    for fm in feature_maps:
        if np.asarray(fm).shape != shape:
            raise ValueError(
                f"inconsistent feature-map shapes: {np.asarray(fm).shape} vs {shape}"
            )
    return shape


def score_hrank(feature_maps, layer_id: str = "") -> ImportanceReport:
    """Average numerical rank of each filter's feature map over samples."""
    n_l, h, w = _check_maps(feature_maps)
    ranks = np.zeros((len(feature_maps), n_l))
    for s, fm in enumerate(feature_maps):
        fm = np.asarray(fm, dtype=np.float64)
        for j in range(n_l):
            sv = np.linalg.svd(fm[j], compute_uv=False)
            ranks[s, j] = int(np.sum(sv > HRANK_EPS * sv[0] * max(h, w)))
    raw = ranks.mean(axis=0)
    return ImportanceReport(layer_id, "hrank", raw, normalize_scores(raw, "hrank"),
                            {"samples": len(feature_maps)})


def score_energy(feature_maps, layer_id: str = "") -> ImportanceReport:
    """Average nuclear norm (sum of singular values) of each feature map."""
    n_l, _, _ = _check_maps(feature_maps)
    sums = np.zeros((len(feature_maps), n_l))
    for s, fm in enumerate(feature_maps):
        fm = np.asarray(fm, dtype=np.float64)
        for j in range(n_l):
            sums[s, j] = np.linalg.svd(fm[j], compute_uv=False).sum()
    raw = sums.mean(axis=0)
    return ImportanceReport(layer_id, "energy", raw, normalize_scores(raw, "energy"),
                            {"samples": len(feature_maps)})


def score_layer(graph, weights, layer_id: str, method: str, *, samples=None,
                tap: str = "post-act", flatten_order: str = "channel_last") -> ImportanceReport:
    """Score one conv layer under any of the six criteria.

    Active criteria (hrank, energy) need ``samples``, a list of network
    inputs, and run the network up to the layer's tap point; passive
    criteria never touch ``samples``.
    """
    node = graph.nodes[layer_id]
    if node.op_kind != "conv2d":
        raise ValueError(f"node '{layer_id}' is {node.op_kind}, not conv2d")
    if method in ACTIVE_METHODS:
        if not samples:
            raise ValueError(
                f"method '{method}' is active and needs input samples; "
                "passive methods (operator_norm, l1, l2, gm) are data-free"
            )
        maps = _forward.collect_feature_maps(
            graph, weights, samples, layer_id, tap, flatten_order)
        report = score_hrank(maps, layer_id) if method == "hrank" else score_energy(maps, layer_id)
        report.metadata["tap"] = tap
        return report
    kernel = KernelTensor(weights[node.weight_refs["kernel"]])
    if method == "operator_norm":
        return score_operator_norm(kernel, layer_id=layer_id)
    if method == "l1":
        return score_entrywise(kernel, 1, layer_id)
    if method == "l2":
        return score_entrywise(kernel, 2, layer_id)
    if method == "gm":
        return score_gm(kernel, layer_id)
    raise ValueError(f"unknown method '{method}'")
