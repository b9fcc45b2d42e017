"""Symmetrically normalized user-item adjacency and sparse kernels."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .dataset import SplitDataset
from .errors import DataError

_CACHE_MAGIC = b"SGCFADJ\x00"
_CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<8sIQQQ")


@dataclass(frozen=True, eq=False)
class SparseAdjacency:
    """D^-1/2 A D^-1/2 of the bipartite graph, stored as CSR arrays.

    Nodes ``[0, user_count)`` are users and ``[user_count, N)`` items.
    Isolated nodes have ``d^-1/2 = 0`` and therefore empty rows.
    """

    user_count: int
    item_count: int
    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    degrees: np.ndarray = field(repr=False)

    def __post_init__(self):
        for a in (self.indptr, self.indices, self.values, self.degrees):
            a.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.user_count + self.item_count

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.node_count
        return sp.csr_matrix((self.values, self.indices, self.indptr), shape=(n, n))

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def neighbors(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node]:self.indptr[node + 1]]


def adjacency_from_edges(user_count: int, item_count: int, users, items) -> SparseAdjacency:
    """Normalized adjacency from parallel user/item index arrays (duplicates ignored)."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    n = user_count + item_count
    if len(users) and (users.max() >= user_count or items.max() >= item_count):
        raise DataError("edge index out of range")
    pairs = np.unique(np.stack([users, items], axis=1), axis=0) if len(users) else np.zeros((0, 2), np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1] + user_count])
    cols = np.concatenate([pairs[:, 1] + user_count, pairs[:, 0]])

    deg = np.bincount(rows, minlength=n).astype(np.float64)
    inv_sqrt = np.zeros(n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    vals = inv_sqrt[rows] * inv_sqrt[cols]

    a = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    a.sort_indices()
    return SparseAdjacency(
        user_count,
        item_count,
        a.indptr.astype(np.int64),
        a.indices.astype(np.int64),
        a.data.astype(np.float64),
        deg,
    )


def build_normalized_adjacency(split: SplitDataset) -> SparseAdjacency:
    """Adjacency of the training interactions only."""
    users, items = split.pairs("train")
    if len(users) == 0:
        raise DataError("train split is empty")
    return adjacency_from_edges(split.user_count, split.item_count, users, items)


def adjacency_from_dense(a: np.ndarray, user_count: int) -> SparseAdjacency:
    """Normalize a dense 0/1 bipartite adjacency (user block first)."""
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        raise DataError("adjacency must be square")
    block = a[:user_count, user_count:]
    if np.any(a[:user_count, :user_count]) or np.any(a[user_count:, user_count:]):
        raise DataError("graph is not bipartite in the given user/item layout")
    if not np.array_equal(block, a[user_count:, :user_count].T):
        raise DataError("adjacency is not symmetric")
    u, i = np.nonzero(block)
    return adjacency_from_edges(user_count, a.shape[0] - user_count, u, i)


def spmm(adj: SparseAdjacency, x: np.ndarray) -> np.ndarray:
    """Sparse-dense product ``adj @ x``; rows are accumulated sequentially."""
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[0] != adj.node_count:
        raise ValueError(f"operand has {x.shape[0] if x.ndim else 0} rows, adjacency has {adj.node_count}")
    return adj.csr @ x


def save_adjacency(adj: SparseAdjacency, path: str | os.PathLike) -> None:
    """Binary cache: little-endian header (magic, version, N, nnz, users) then arrays."""
    with open(path, "wb") as fh:
        fh.write(_CACHE_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, adj.node_count, adj.nnz, adj.user_count))
        for arr, dt in ((adj.indptr, "<i8"), (adj.indices, "<i8"), (adj.values, "<f8"), (adj.degrees, "<f8")):
            fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def load_adjacency(path: str | os.PathLike) -> SparseAdjacency:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CACHE_HEADER.size:
        raise DataError(f"{path}: truncated adjacency cache")
    magic, version, n, nnz, users = _CACHE_HEADER.unpack_from(raw)
    if magic != _CACHE_MAGIC:
        raise DataError(f"{path}: not an adjacency cache")
    if version != _CACHE_VERSION:
        raise DataError(f"{path}: unsupported cache version {version}")
    off = _CACHE_HEADER.size
    out = []
    for count, dt in ((n + 1, "<i8"), (nnz, "<i8"), (nnz, "<f8"), (n, "<f8")):
        size = count * 8
        if off + size > len(raw):
            raise DataError(f"{path}: truncated adjacency cache")
        out.append(np.frombuffer(raw, dtype=dt, count=count, offset=off).astype(dt[1:]))
        off += size
    return SparseAdjacency(users, n - users, *out)
