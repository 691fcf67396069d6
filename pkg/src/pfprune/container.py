"""Portable model container: JSON manifest plus a binary weight blob.

Blob layout (all integers little-endian):
    magic "PFPW" | version u32 | tensor_count u32 | tensor...
    tensor: name_len u32 | name utf-8 | dtype u8 (0 = float32) | rank u8
            | dims u32 each | payload float32 row-major
Conv kernels are stored (n_out, n_in, k_h, k_w); dense kernels (out, in).
Tensors are written sorted by name so identical models produce identical
bytes.  Trailing bytes after the last tensor are an error.
"""

from __future__ import annotations

import io
import os
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphError, LayerNode, NetworkGraph, infer_shapes
from .jsonio import canonical_json, sha256_hex, write_bytes_atomic

__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "ContainerError",
    "BadMagicError",
    "TruncatedBlobError",
    "TrailingBytesError",
    "UnresolvedWeightRefError",
    "ManifestError",
    "Model",
    "write_blob",
    "read_blob",
    "load_model",
    "save_model",
    "load_sample_blob",
]

MAGIC = b"PFPW"
FORMAT_VERSION = 1
FLATTEN_ORDERS = ("channel_last", "channel_first")


class ContainerError(ValueError):
    code = "container_error"


class BadMagicError(ContainerError):
    code = "bad_magic"


class TruncatedBlobError(ContainerError):
    code = "truncated_blob"


class TrailingBytesError(ContainerError):
    code = "trailing_bytes"


class UnresolvedWeightRefError(ContainerError):
    code = "unresolved_weight_ref"


class ManifestError(ContainerError):
    code = "bad_manifest"


def blob_bytes(weights: dict[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<II", FORMAT_VERSION, len(weights)))
    for name in sorted(weights):
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        encoded = name.encode("utf-8")
        out.write(struct.pack("<I", len(encoded)))
        out.write(encoded)
        out.write(struct.pack("<BB", 0, arr.ndim))
        out.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.write(arr.tobytes())
    return out.getvalue()


def write_blob(weights: dict[str, np.ndarray], path: str) -> None:
    write_bytes_atomic(path, blob_bytes(weights))


def read_blob(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise TruncatedBlobError(f"blob truncated while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise BadMagicError(f"bad magic in '{path}', not a PFPW blob")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != FORMAT_VERSION:
        raise ManifestError(f"unsupported blob version {version}")
    weights: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        dtype_code, rank = struct.unpack("<BB", take(2, f"descriptor of '{name}'"))
        if dtype_code != 0:
            raise ManifestError(f"tensor '{name}': unknown dtype code {dtype_code}")
        dims = struct.unpack(f"<{rank}I", take(4 * rank, f"dims of '{name}'"))
        n_values = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = take(4 * n_values, f"payload of '{name}'")
        arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
        if not np.all(np.isfinite(arr)):
            raise ContainerError(f"tensor '{name}' contains non-finite values")
        weights[name] = arr
    if pos != len(data):
        raise TrailingBytesError(f"{len(data) - pos} trailing bytes after last tensor")
    return weights


@dataclass
class Model:
    graph: NetworkGraph
    weights: dict[str, np.ndarray]
    input_shape: tuple[int, int, int]
    flatten_order: str = "channel_last"
    provenance: dict = field(default_factory=dict)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return infer_shapes(self.graph, self.input_shape, self.weights)

    def manifest_dict(self, blob_name: str = "weights.pfpw") -> dict:
        nodes = []
        for nid in self.graph.nodes:
            node = self.graph.nodes[nid]
            entry = {"id": node.id, "op_kind": node.op_kind, "inputs": list(node.inputs)}
            if node.attrs:
                entry["attrs"] = _plain(node.attrs)
            if node.weight_refs:
                entry["weight_refs"] = dict(node.weight_refs)
            nodes.append(entry)
        manifest = {
            "format_version": FORMAT_VERSION,
            "input_shape": list(self.input_shape),
            "flatten_order": self.flatten_order,
            "weight_blob": blob_name,
            "nodes": nodes,
        }
        if self.provenance:
            manifest["provenance"] = dict(self.provenance)
        return manifest

    def content_hash(self) -> str:
        """Hash of structure plus weights; independent of file paths and provenance."""
        manifest = self.manifest_dict()
        manifest.pop("weight_blob", None)
        manifest.pop("provenance", None)
        return sha256_hex(canonical_json(manifest).encode() + blob_bytes(self.weights))


def _plain(attrs: dict) -> dict:
    out = {}
    for key, value in attrs.items():
        if isinstance(value, tuple):
            out[key] = list(value)
        else:
            out[key] = value
    return out


def _node_from_entry(entry: dict) -> LayerNode:
    for required in ("id", "op_kind"):
        if required not in entry:
            raise ManifestError(f"node entry missing '{required}': {entry}")
    attrs = dict(entry.get("attrs", {}))
    for key, value in attrs.items():
        if isinstance(value, list):
            attrs[key] = tuple(value)
    return LayerNode(entry["id"], entry["op_kind"], tuple(entry.get("inputs", ())),
                     attrs, dict(entry.get("weight_refs", {})))


def load_model(manifest_path: str) -> Model:
    """Parse a manifest, read its blob, and validate graph and shapes."""
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ManifestError(
            f"unsupported manifest format_version {manifest.get('format_version')}")
    for required in ("input_shape", "flatten_order", "nodes", "weight_blob"):
        if required not in manifest:
            raise ManifestError(f"manifest missing required field '{required}'")
    if manifest["flatten_order"] not in FLATTEN_ORDERS:
        raise ManifestError(f"unknown flatten_order '{manifest['flatten_order']}'")

    blob_path = os.path.join(os.path.dirname(os.path.abspath(manifest_path)),
                             manifest["weight_blob"])
    weights = read_blob(blob_path)

    try:
        graph = NetworkGraph([_node_from_entry(e) for e in manifest["nodes"]])
    except GraphError:
        raise

    for node in graph.nodes.values():
        for ref, name in node.weight_refs.items():
            if name not in weights:
                raise UnresolvedWeightRefError(
                    f"node '{node.id}': weight reference '{ref}' -> '{name}' "
                    "not present in blob")

    model = Model(
        graph=graph,
        weights=weights,
        input_shape=tuple(int(v) for v in manifest["input_shape"]),
        flatten_order=manifest["flatten_order"],
        provenance=dict(manifest.get("provenance", {})),
    )
    model.shapes()  # raises ShapeError on inconsistency
    return model


def save_model(model: Model, out_dir: str, manifest_name: str = "manifest.json",
               blob_name: str = "weights.pfpw") -> str:
    """Write manifest + blob into out_dir; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    write_blob(model.weights, os.path.join(out_dir, blob_name))
    manifest_path = os.path.join(out_dir, manifest_name)
    payload = (canonical_json(model.manifest_dict(blob_name)) + "\n").encode("utf-8")
    write_bytes_atomic(manifest_path, payload)
    return manifest_path


def load_sample_blob(path: str) -> list[np.ndarray]:
    """Input samples stored in blob format, ordered by tensor name."""
    tensors = read_blob(path)
    return [tensors[name] for name in sorted(tensors)]
