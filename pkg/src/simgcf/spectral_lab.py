"""Exact, dense verification of graph-signal behaviour on small graphs.

Everything here densifies the adjacency, so graphs are capped at
``DENSE_CAP`` nodes. The eigensolver is a cyclic Jacobi rotation scheme
with a round-robin pair ordering: each round applies ``N/2`` disjoint
rotations at once, and ``N-1`` rounds visit every off-diagonal pair.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalError
from .filters import FilterSpec, eval_monomial
from .graph import SparseAdjacency, adjacency_from_edges
from .propagation import DENSE_CAP, propagate, signal_matrix

EIG_TOL = 1e-12
SIGN_THRESHOLD = 1e-12


# -- eigensolver ------------------------------------------------------------

def _rotate(a: np.ndarray, v: np.ndarray, p: np.ndarray, q: np.ndarray) -> None:
    apq = a[p, q]
    active = apq != 0.0
    if not active.any():
        return
    p, q, apq = p[active], q[active], apq[active]
    with np.errstate(over="ignore"):
        tau = (a[q, q] - a[p, p]) / (2.0 * apq)
    t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = (t * c)[:, None]
    c = c[:, None]

    rp, rq = a[p, :].copy(), a[q, :].copy()
    a[p, :] = c * rp - s * rq
    a[q, :] = s * rp + c * rq
    cp, cq = a[:, p].copy(), a[:, q].copy()
    a[:, p] = cp * c.T - cq * s.T
    a[:, q] = cp * s.T + cq * c.T
    a[p, q] = 0.0
    a[q, p] = 0.0
    vp, vq = v[:, p].copy(), v[:, q].copy()
    v[:, p] = vp * c.T - vq * s.T
    v[:, q] = vp * s.T + vq * c.T


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(a: np.ndarray, tol: float = EIG_TOL, max_sweeps: int = 100):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Sweeps continue until the off-diagonal Frobenius norm drops below ``tol``.
    Each eigenvector's largest-magnitude entry is made positive.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    m = n + (n % 2)  # odd sizes get a bye slot
    players = list(range(m))
    for _ in range(max_sweeps):
        if _off_norm(a) < tol:
            break
        for _ in range(m - 1):
            pairs = [(players[k], players[m - 1 - k]) for k in range(m // 2)]
            pairs = [(min(x, y), max(x, y)) for x, y in pairs if x < n and y < n]
            if pairs:
                p, q = map(np.array, zip(*pairs))
                _rotate(a, v, p, q)
            players = [players[0], players[-1]] + players[1:-1]
    else:
        if _off_norm(a) >= tol:
            raise NumericalError(f"Jacobi sweeps did not converge (off-diagonal norm {_off_norm(a):.3e})")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[idx, np.arange(n)] < 0, -1.0, 1.0)
    return w, v * signs


@dataclass(frozen=True)
class DenseSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self, values: np.ndarray | None = None) -> np.ndarray:
        """``U diag(values) U^T`` (the original matrix when values is None)."""
        lam = self.eigenvalues if values is None else values
        return (self.eigenvectors * lam) @ self.eigenvectors.T

    def fourier(self, x: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ x

    def inverse_fourier(self, x_hat: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ x_hat


def _dense(adj) -> np.ndarray:
    return adj.to_dense() if isinstance(adj, SparseAdjacency) else np.asarray(adj, dtype=np.float64)


def dense_eigendecomposition(adj, cap: int = DENSE_CAP) -> DenseSpectrum:
    a = _dense(adj)
    if a.shape[0] > cap:
        raise ValueError(f"{a.shape[0]} nodes exceeds the dense cap of {cap}")
    w, v = jacobi_eigh(a)
    return DenseSpectrum(w, v)


# -- graph signals ----------------------------------------------------------

def _filter_fn(filt) -> Callable:
    """Scalar function of lam for a FilterSpec, coefficient list or callable."""
    if isinstance(filt, FilterSpec):
        spec = filt if filt.is_fitted else filt.fit()
        return spec.polynomial
    if callable(filt):
        return filt
    coeffs = np.asarray(filt, dtype=np.float64)
    return lambda lam: eval_monomial(coeffs, lam)


def _coefficients(filt) -> np.ndarray:
    if isinstance(filt, FilterSpec):
        return (filt if filt.is_fitted else filt.fit()).propagation_coefficients()
    return np.asarray(filt, dtype=np.float64)


@dataclass(frozen=True)
class SignalMatrix:
    s: np.ndarray
    kind: str  # "GS" or "GES"
    filter: object = field(default=None, repr=False)

    @property
    def symmetric(self) -> bool:
        return bool(np.max(np.abs(self.s - self.s.T), initial=0.0) < 1e-10)


def exact_graph_signal(spec: DenseSpectrum, filt) -> SignalMatrix:
    """GS ``U f(Lambda) U^T``."""
    f = _filter_fn(filt)
    values = np.asarray(f(spec.eigenvalues), dtype=np.float64) * np.ones(spec.size)
    return SignalMatrix(spec.reconstruct(values), "GS", filt)


def polynomial_graph_signal(adj, coeffs: Sequence[float]) -> np.ndarray:
    """``sum_i alpha_i A^i`` by repeated dense multiplication."""
    a = _dense(adj)
    out = np.zeros_like(a)
    power = np.eye(a.shape[0])
    for k, c in enumerate(coeffs):
        if k:
            power = power @ a
        out += c * power
    return out


def ges_matrix(adj: SparseAdjacency, filt, e0: np.ndarray, flipped: bool = False,
               cap: int = DENSE_CAP) -> SignalMatrix:
    """GES ``(f(A) E0)(f(A) E0)^T``, negated when ``flipped``."""
    if adj.node_count > cap:
        raise ValueError(f"{adj.node_count} nodes exceeds the dense cap of {cap}")
    e = propagate(adj, e0, _coefficients(filt))
    return SignalMatrix(signal_matrix(e, flipped, cap), "GES", filt)


def _neg(filt):
    if isinstance(filt, FilterSpec):
        return (filt if filt.is_fitted else filt.fit()).negated()
    return -np.asarray(filt, dtype=np.float64)


@dataclass
class SignBlindnessReport:
    ges_max_dev: float
    gs_max_dev: float
    gs_max_abs: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.ges_max_dev <= self.tol and self.gs_max_dev <= self.tol

    def to_dict(self) -> dict:
        return {"ges_sign_blind_max_dev": self.ges_max_dev, "gs_negation_max_dev": self.gs_max_dev,
                "gs_max_abs": self.gs_max_abs, "tol": self.tol, "passed": self.passed}

    def describe(self) -> str:
        return (f"GES(f) vs GES(-f): max |diff| = {self.ges_max_dev:.3e}; "
                f"GS(f) vs -GS(-f): max |diff| = {self.gs_max_dev:.3e} (tol {self.tol:g})")


def verify_sign_blindness(adj: SparseAdjacency, filt, e0: np.ndarray, tol: float = 1e-10,
                      spectrum: DenseSpectrum | None = None) -> SignBlindnessReport:
    """The GES of f and -f coincide while their GS differ by sign."""
    neg = _neg(filt)
    s2_pos = ges_matrix(adj, filt, e0).s
    s2_neg = ges_matrix(adj, neg, e0).s
    spectrum = spectrum or dense_eigendecomposition(adj)
    s1_pos = exact_graph_signal(spectrum, filt).s
    s1_neg = exact_graph_signal(spectrum, neg).s
    return SignBlindnessReport(
        float(np.max(np.abs(s2_pos - s2_neg), initial=0.0)),
        float(np.max(np.abs(s1_pos + s1_neg), initial=0.0)),
        float(np.max(np.abs(s1_pos), initial=0.0)),
        tol,
    )


# -- sign / parity patterns -------------------------------------------------

def hop_distances(adj: SparseAdjacency) -> np.ndarray:
    """All-pairs unweighted hop counts by breadth-first search (-1 if unreachable)."""
    n = adj.node_count
    dist = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            x = queue.popleft()
            for y in adj.neighbors(x):
                if dist[src, y] < 0:
                    dist[src, y] = dist[src, x] + 1
                    queue.append(y)
    return dist


def predicted_sign(quadrant: str, hop: int, kind: str = "GS") -> int:
    """Sign of a GS/GES entry between nodes ``hop`` apart on a bipartite graph."""
    parity = 1 if hop % 2 == 0 else -1
    if kind == "GES":
        # squaring hides the overall sign: I, IV -> all +; II, III -> alternate
        return 1 if quadrant in ("I", "IV") else parity
    return {"I": 1, "IV": -1, "II": parity, "III": -parity}[quadrant]


@dataclass
class ParityReport:
    quadrant: str
    kind: str
    max_hop: int
    rows: list[dict]
    sign_violations: int
    decay_violations: int
    checked_pairs: int

    @property
    def passed(self) -> bool:
        return self.sign_violations == 0 and self.decay_violations == 0

    def to_dict(self, with_rows: bool = False) -> dict:
        d = {"quadrant": self.quadrant, "kind": self.kind, "max_hop": self.max_hop,
             "checked_pairs": self.checked_pairs, "sign_violations": self.sign_violations,
             "decay_violations": self.decay_violations, "passed": self.passed}
        if with_rows:
            d["rows"] = self.rows
        return d


def sign_pattern(s: np.ndarray, dist: np.ndarray, quadrant: str, max_hop: int, kind: str = "GS",
                 threshold: float = SIGN_THRESHOLD, check_decay: bool = True) -> ParityReport:
    """Compare entry signs with the hop-parity rule and magnitudes along shortest paths.

    Pairs farther than ``max_hop`` apart, and entries with magnitude at or
    below ``threshold``, are not sign-checked. Decay requires
    ``|S[p, v]| <= |S[p, x]|`` whenever x precedes v on a shortest path from p.
    """
    n = s.shape[0]
    rows, sign_bad = [], 0
    for p in range(n):
        for q in range(p, n):
            h = dist[p, q]
            if h < 0 or h > max_hop or abs(s[p, q]) <= threshold:
                continue
            expected = predicted_sign(quadrant, int(h), kind)
            actual = 1 if s[p, q] > 0 else -1
            ok = bool(actual == expected)
            sign_bad += not ok
            rows.append({"i": p, "j": q, "hops": int(h), "value": float(s[p, q]),
                         "sign": actual, "expected": expected, "ok": ok})
    decay_bad = 0
    if check_decay:
        mag = np.abs(s)
        for p in range(n):
            for v in range(n):
                h = dist[p, v]
                if h < 1:
                    continue
                preds = [x for x in range(n) if dist[p, x] == h - 1 and dist[x, v] == 1]
                decay_bad += sum(bool(mag[p, v] > mag[p, x] + threshold) for x in preds)
    return ParityReport(quadrant, kind, max_hop, rows, int(sign_bad), int(decay_bad), len(rows))


def parity_sign_pattern(adj: SparseAdjacency, filt: FilterSpec, spectrum: DenseSpectrum | None = None,
                        quadrant: str | None = None, check_decay: bool = True) -> ParityReport:
    """GS sign-vs-hop-parity table of a quadrant filter (pairs within n hops)."""
    spectrum = spectrum or dense_eigendecomposition(adj)
    s1 = exact_graph_signal(spectrum, filt).s
    quadrant = quadrant or filt.quadrant
    return sign_pattern(s1, hop_distances(adj), quadrant, filt.degree, "GS", check_decay=check_decay)


def ges_sign_pattern(adj: SparseAdjacency, filt: FilterSpec, quadrant: str | None = None) -> ParityReport:
    """GES pattern with ``E0 = I`` (so ``S2 = f(A)^2``, pairs within 2n hops)."""
    s2 = ges_matrix(adj, filt, np.eye(adj.node_count)).s
    quadrant = quadrant or filt.quadrant
    return sign_pattern(s2, hop_distances(adj), quadrant, 2 * filt.degree, "GES", check_decay=False)


# -- odd / even decomposition ----------------------------------------------

@dataclass
class OddEvenResult:
    s_odd: np.ndarray
    s_even: np.ndarray
    s_low: np.ndarray   # E_I E_I^T
    s_high: np.ndarray  # -E_III E_III^T (space flipped)
    low_dev: float
    high_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.low_dev <= self.tol and self.high_dev <= self.tol

    def to_dict(self) -> dict:
        return {"low_equals_odd_plus_even_max_dev": self.low_dev,
                "flipped_high_equals_odd_minus_even_max_dev": self.high_dev,
                "tol": self.tol, "passed": self.passed}


def odd_even_decomposition(adj: SparseAdjacency, coeffs: Sequence[float], e0: np.ndarray,
                           tol: float = 1e-10, cap: int = DENSE_CAP) -> OddEvenResult:
    """Split ``sum_ij a_i a_j E^i (E^j)^T`` by the parity of ``i + j``.

    ``coeffs`` are the quadrant-I magnitudes. The low filter uses them as is,
    the high filter signs them ``(-1)^(i+1)`` and is space flipped.
    """
    if adj.node_count > cap:
        raise ValueError(f"{adj.node_count} nodes exceeds the dense cap of {cap}")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    n = len(coeffs) - 1
    hops = [np.asarray(e0, dtype=np.float64)]
    for _ in range(n):
        hops.append(adj.csr @ hops[-1])
    s_odd = np.zeros((adj.node_count, adj.node_count))
    s_even = np.zeros_like(s_odd)
    for i in range(n + 1):
        for j in range(n + 1):
            term = coeffs[i] * coeffs[j] * (hops[i] @ hops[j].T)
            if (i + j) % 2:
                s_odd += term
            else:
                s_even += term
    high = coeffs * (-1.0) ** (np.arange(n + 1) + 1)
    s_low = signal_matrix(propagate(adj, e0, coeffs), False, cap)
    s_high = signal_matrix(propagate(adj, e0, high), True, cap)
    return OddEvenResult(
        s_odd, s_even, s_low, s_high,
        float(np.max(np.abs(s_low - (s_odd + s_even)), initial=0.0)),
        float(np.max(np.abs(s_high - (s_odd - s_even)), initial=0.0)),
        tol,
    )


# -- lab graphs -------------------------------------------------------------

CASE_GRAPH_EDGES = ((0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (3, 2), (4, 0), (4, 2))
# report label -> node index (users 0-4, items 5-7); 1-2-3-4 is u1-i1-u2-i2
CASE_GRAPH_LABELS = {1: 0, 2: 5, 3: 1, 4: 6, 5: 2, 6: 3, 7: 7, 8: 4}


def build_case_graph() -> SparseAdjacency:
    """Five users and three items, connected and containing a 3-hop path 1-2-3-4."""
    users, items = zip(*CASE_GRAPH_EDGES)
    return adjacency_from_edges(5, 3, users, items)


def random_bipartite_graph(n_users: int, n_items: int, p: float, rng: np.random.Generator,
                           connect: bool = True) -> SparseAdjacency:
    """Erdos-Renyi bipartite graph; ``connect`` adds one edge per isolated node."""
    mask = rng.random((n_users, n_items)) < p
    if connect:
        for u in np.flatnonzero(~mask.any(axis=1)):
            mask[u, rng.integers(n_items)] = True
        for i in np.flatnonzero(~mask.any(axis=0)):
            mask[rng.integers(n_users), i] = True
    u, i = np.nonzero(mask)
    return adjacency_from_edges(n_users, n_items, u, i)


def random_tree(depth: int, rng: np.random.Generator, max_children: int = 3) -> SparseAdjacency:
    """Random rooted tree with a user root and alternating user/item levels."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    users, items, edges = 1, 0, []
    frontier = [("u", 0)]
    for _ in range(depth):
        nxt = []
        for kind, idx in frontier:
            for _ in range(int(rng.integers(1 if not nxt else 0, max_children + 1))):
                if kind == "u":
                    edges.append((idx, items))
                    nxt.append(("i", items))
                    items += 1
                else:
                    edges.append((users, idx))
                    nxt.append(("u", users))
                    users += 1
        if not nxt:
            break
        frontier = nxt
    u, i = zip(*edges)
    return adjacency_from_edges(users, items, u, i)


def random_quadrant_filter(rng: np.random.Generator, degree: int, quadrant: str = "I") -> FilterSpec:
    coeffs = tuple(rng.uniform(0.05, 1.0, degree + 1).tolist())
    return FilterSpec(basis="monomial", degree=degree, base_coefficients=coeffs, quadrant=quadrant).fit()


def decaying_filter(degree: int = 3, ratio: float = 0.5, quadrant: str = "I") -> FilterSpec:
    """Geometric coefficients ``ratio**i``: a low-pass filter whose GS decays with hops."""
    coeffs = tuple(ratio ** i for i in range(degree + 1))
    return FilterSpec(basis="monomial", degree=degree, base_coefficients=coeffs, quadrant=quadrant).fit()
