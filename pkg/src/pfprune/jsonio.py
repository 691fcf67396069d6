"""Canonical JSON emission and atomic file writes.

Reports are diffed and hashed, so serialization must be stable: keys sorted,
floats printed with 17 significant digits (round-trip exact for float64),
files written via temp-then-rename.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

__all__ = ["canonical_json", "write_json_atomic", "write_bytes_atomic", "sha256_hex"]


def _fmt(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(f"{json.dumps(str(k))}:{_fmt(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _fmt(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if not np.isfinite(f):
            raise ValueError(f"cannot serialize non-finite float {f}")
        return f"{f:.17g}"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} to canonical JSON")


def canonical_json(obj) -> str:
    return _fmt(obj)


def write_bytes_atomic(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: str, obj) -> None:
    write_bytes_atomic(path, (canonical_json(obj) + "\n").encode("utf-8"))


def sha256_hex(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()
