"""Small linear-algebra kernel: rank-1 SVD factors, operator norm, traces.

Storage is 32-bit floats throughout the toolkit; everything here promotes to
64-bit before accumulating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelTensor",
    "Rank1Factors",
    "svd_rank1",
    "operator_norm",
    "entrywise_norm",
    "trace_product",
]


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values (NaN/Inf)")


@dataclass(frozen=True)
class KernelTensor:
    """Convolution weights of one layer, laid out (n_out, n_in, k_h, k_w)."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float32)
        if a.ndim != 4:
            raise ValueError(f"kernel tensor must be 4-D, got shape {a.shape}")
        if min(a.shape) < 1:
            raise ValueError(f"kernel dimensions must all be >= 1, got {a.shape}")
        _require_finite(a, "kernel tensor")
        object.__setattr__(self, "data", a)

    @property
    def n_out(self) -> int:
        return self.data.shape[0]

    @property
    def n_in(self) -> int:
        return self.data.shape[1]

    @property
    def k_h(self) -> int:
        return self.data.shape[2]

    @property
    def k_w(self) -> int:
        return self.data.shape[3]

    @property
    def k_v(self) -> int:
        """Length of one vectorized 2-D kernel."""
        return self.k_h * self.k_w

    def channel_matrix(self, c: int) -> np.ndarray:
        """Channel c of every filter, stacked as an (n_out, k_v) matrix."""
        return self.data[:, c, :, :].reshape(self.n_out, self.k_v).astype(np.float64)

    def filter_matrix(self, j: int) -> np.ndarray:
        """Filter j with its kernels vectorized, an (n_in, k_v) matrix."""
        return self.data[j].reshape(self.n_in, self.k_v).astype(np.float64)


@dataclass(frozen=True)
class Rank1Factors:
    """Leading singular triple (sigma1, u1, w1) of a matrix.

    ``degenerate`` marks an all-zero input, for which sigma1 is 0 and both
    vectors are zero instead of unit length.
    """

    sigma1: float
    u1: np.ndarray
    w1: np.ndarray
    degenerate: bool = False


def svd_rank1(m: np.ndarray) -> Rank1Factors:
    """Leading singular triple of a 2-D matrix.

    The sign ambiguity of the pair (u1, w1) is resolved by making the
    largest-magnitude entry of w1 positive, so repeated calls are
    reproducible.  An all-zero matrix yields zero factors with the
    ``degenerate`` flag set rather than an error.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    _require_finite(m, "matrix")

    if not m.any():
        return Rank1Factors(0.0, np.zeros(m.shape[0]), np.zeros(m.shape[1]), True)

    u, s, vt = np.linalg.svd(m, full_matrices=False)
    sigma1 = float(s[0])
    u1 = u[:, 0].copy()
    w1 = vt[0].copy()
    pivot = int(np.argmax(np.abs(w1)))
    if w1[pivot] < 0:
        w1 = -w1
        u1 = -u1
    return Rank1Factors(sigma1, u1, w1, False)


def operator_norm(m: np.ndarray) -> float:
    """Largest singular value of a 2-D matrix (0 for the zero matrix)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    _require_finite(m, "matrix")
    if not m.any():
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def entrywise_norm(t: np.ndarray, p: int) -> float:
    """Entry-wise l1 or l2 norm over every element of a tensor slice."""
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p}")
    flat = np.asarray(t, dtype=np.float64).ravel()
    _require_finite(flat, "tensor slice")
    if p == 1:
        return float(np.sum(np.abs(flat)))
    return float(np.sqrt(np.sum(flat * flat)))


def trace_product(f: np.ndarray, c: np.ndarray) -> float:
    """trace(F @ C) as a sum of row/column dot products.

    Only the diagonal of the product is accumulated; the full matrix is
    never materialized.
    """
    f = np.asarray(f, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if f.ndim != 2 or c.ndim != 2 or f.shape[1] != c.shape[0] or f.shape[0] != c.shape[1]:
        raise ValueError(
            f"trace_product needs shapes (m, k) and (k, m); got {f.shape} and {c.shape}"
        )
    n = f.shape[0]
    return float(sum(np.dot(f[i, :], c[:, i]) for i in range(n)))
