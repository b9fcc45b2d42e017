"""Polynomial propagation ``E = sum_i alpha_i A^i E0``, space flip and scoring."""

from __future__ import annotations

import os
import struct
import threading

import numpy as np

from .errors import DataError, StaleCacheError
from .graph import SparseAdjacency, spmm

DEFAULT_DIM = 64
DENSE_CAP = 512

_CKPT_MAGIC = b"SGCFCKP\x00"
_CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sIQQQBQ")  # magic, version, N, d, n, flip, user_count


def hop_embeddings(adj: SparseAdjacency, e0: np.ndarray, n: int) -> list[np.ndarray]:
    """``[E0, A E0, ..., A^n E0]`` by repeated sparse products."""
    if e0.shape[0] != adj.node_count:
        raise ValueError(f"E0 has {e0.shape[0]} rows, graph has {adj.node_count} nodes")
    z = [np.asarray(e0, dtype=np.float64)]
    for _ in range(n):
        z.append(spmm(adj, z[-1]))
    return z


def propagate(adj: SparseAdjacency, e0: np.ndarray, coeffs) -> np.ndarray:
    """Apply the filter ``sum_i coeffs[i] * A^i`` to ``e0`` without forming A^i."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1 or len(coeffs) == 0:
        raise ValueError("need at least one coefficient")
    if e0.shape[0] != adj.node_count:
        raise ValueError(f"E0 has {e0.shape[0]} rows, graph has {adj.node_count} nodes")
    z = np.asarray(e0, dtype=np.float64)
    out = coeffs[0] * z
    for c in coeffs[1:]:
        z = spmm(adj, z)
        out = out + c * z
    return out


def space_flip(e: np.ndarray) -> np.ndarray:
    return -e


def signal_matrix(e: np.ndarray, flipped: bool = False, cap: int = DENSE_CAP) -> np.ndarray:
    """Node-similarity matrix ``E E^T`` (``-E E^T`` when flipped)."""
    if e.shape[0] > cap:
        raise ValueError(f"{e.shape[0]} nodes exceeds the dense cap of {cap}")
    s = e @ e.T
    return -s if flipped else s


def xavier_uniform(n_rows: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (dim + dim))
    return rng.uniform(-bound, bound, size=(n_rows, dim))


class EmbeddingModel:
    """Initial embedding table plus a lazily refreshed propagated cache.

    Writing :attr:`e0` (or calling :meth:`mark_dirty` after an in-place edit)
    invalidates the cache; :meth:`refresh` recomputes it. The cache is swapped
    in as a whole, so concurrent readers see either the old or the new table.
    """

    def __init__(self, adj: SparseAdjacency, e0: np.ndarray, coeffs, space_flip: bool = False):
        e0 = np.asarray(e0, dtype=np.float64)
        if e0.ndim != 2 or e0.shape[0] != adj.node_count:
            raise ValueError(f"E0 must be {adj.node_count} x d, got {e0.shape}")
        self.adj = adj
        self.coefficients = np.asarray(coeffs, dtype=np.float64)
        self.space_flip = bool(space_flip)
        self._e0 = e0
        self._version = 0
        self._cache: tuple[int, np.ndarray] | None = None
        self._lock = threading.Lock()

    @classmethod
    def initialize(cls, adj, coeffs, dim=DEFAULT_DIM, seed=0, space_flip=False) -> "EmbeddingModel":
        return cls(adj, xavier_uniform(adj.node_count, dim, np.random.default_rng(seed)), coeffs, space_flip)

    @property
    def user_count(self) -> int:
        return self.adj.user_count

    @property
    def item_count(self) -> int:
        return self.adj.item_count

    @property
    def dim(self) -> int:
        return self._e0.shape[1]

    @property
    def e0(self) -> np.ndarray:
        return self._e0

    @e0.setter
    def e0(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != self._e0.shape:
            raise ValueError(f"E0 shape {value.shape} != {self._e0.shape}")
        self._e0 = value
        self.mark_dirty()

    def mark_dirty(self) -> None:
        self._version += 1

    @property
    def cache_valid(self) -> bool:
        c = self._cache
        return c is not None and c[0] == self._version

    def refresh(self) -> np.ndarray:
        with self._lock:
            if not self.cache_valid:
                self._cache = (self._version, propagate(self.adj, self._e0, self.coefficients))
            return self._cache[1]

    @property
    def embeddings(self) -> np.ndarray:
        """Propagated table E; raises if stale rather than recomputing."""
        c = self._cache
        if c is None or c[0] != self._version:
            raise StaleCacheError("propagated embeddings are stale; call refresh()")
        return c[1]

    @property
    def sign(self) -> float:
        return -1.0 if self.space_flip else 1.0

    def user_embeddings(self) -> np.ndarray:
        """User rows with the flip applied (the flip lives on the user side)."""
        e = self.embeddings[: self.user_count]
        return space_flip(e) if self.space_flip else e

    def item_embeddings(self) -> np.ndarray:
        return self.embeddings[self.user_count:]

    def score(self, u: int, i: int) -> float:
        if not 0 <= u < self.user_count:
            raise IndexError(f"user index {u} out of range")
        if not 0 <= i < self.item_count:
            raise IndexError(f"item index {i} out of range")
        e = self.embeddings
        return float(self.sign * (e[u] @ e[self.user_count + i]))

    def score_users(self, users) -> np.ndarray:
        """Full item score rows for the given users."""
        return self.user_embeddings()[np.asarray(users)] @ self.item_embeddings().T

    def copy(self) -> "EmbeddingModel":
        m = EmbeddingModel(self.adj, self._e0.copy(), self.coefficients.copy(), self.space_flip)
        m.refresh()
        return m


def save_checkpoint(model: EmbeddingModel, path: str | os.PathLike) -> None:
    """Header (N, d, n, flip, users), float64 coefficients, float32 row-major E0."""
    n_nodes, dim = model.e0.shape
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(
            _CKPT_MAGIC, _CKPT_VERSION, n_nodes, dim, len(model.coefficients) - 1,
            int(model.space_flip), model.user_count,
        ))
        fh.write(np.ascontiguousarray(model.coefficients, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.e0, dtype="<f4").tobytes())


def load_checkpoint(path: str | os.PathLike, adj: SparseAdjacency) -> EmbeddingModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise DataError(f"{path}: truncated checkpoint")
    magic, version, n_nodes, dim, n, flip, users = _CKPT_HEADER.unpack_from(raw)
    if magic != _CKPT_MAGIC:
        raise DataError(f"{path}: not a model checkpoint")
    if version != _CKPT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    if n_nodes != adj.node_count or users != adj.user_count:
        raise DataError(f"{path}: checkpoint graph ({users}+{n_nodes - users}) does not match data")
    off = _CKPT_HEADER.size
    expected = off + 8 * (n + 1) + 4 * n_nodes * dim
    if len(raw) != expected:
        raise DataError(f"{path}: checkpoint size {len(raw)} != {expected}")
    coeffs = np.frombuffer(raw, dtype="<f8", count=n + 1, offset=off).astype(np.float64)
    off += 8 * (n + 1)
    e0 = np.frombuffer(raw, dtype="<f4", count=n_nodes * dim, offset=off).astype(np.float64)
    model = EmbeddingModel(adj, e0.reshape(n_nodes, dim), coeffs, bool(flip))
    model.refresh()
    return model
