"""Spatial and temporal hypergraph construction and normalization.

Spatial hyperedges come from hop neighborhoods of a thresholded-Gaussian
geographic adjacency; temporal hyperedges group nodes whose training
series are DTW-nearest. Both feed the same symmetric normalization
D^{-1/2} H W B^{-1} H^T D^{-1/2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter, Tensor, _accum, hadamard, matmul, outer, softmax_rows

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, but keep a fallback
    njit = None


class ConstructionError(ValueError):
    pass


@dataclass
class Hypergraph:
    """Binary incidence plus per-hyperedge weights; degrees are derived."""

    incidence: np.ndarray  # (N, M) entries in {0, 1}
    weights: np.ndarray    # (M,) positive

    def __post_init__(self):
        self.incidence = np.asarray(self.incidence, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        n, m = self.incidence.shape
        if self.weights.shape != (m,):
            raise ConstructionError(f"expected {m} weights, got {self.weights.shape}")
        if not np.all((self.incidence == 0) | (self.incidence == 1)):
            raise ConstructionError("incidence entries must be 0 or 1")
        if np.any(self.weights <= 0):
            raise ConstructionError("hyperedge weights must be positive")
        empty = np.flatnonzero(self.incidence.sum(axis=0) < 1)
        if empty.size:
            raise ConstructionError(f"empty hyperedge at column {empty[0]}")

    @property
    def n_nodes(self) -> int:
        return self.incidence.shape[0]

    @property
    def n_hyperedges(self) -> int:
        return self.incidence.shape[1]

    def node_degrees(self) -> np.ndarray:
        """d(v) = sum_e W(e) H(v, e)"""
        return self.incidence @ self.weights

    def edge_degrees(self) -> np.ndarray:
        """b(e) = sum_v H(v, e)"""
        return self.incidence.sum(axis=0)

    def to_text(self) -> str:
        lines = [f"{self.n_nodes} {self.n_hyperedges}"]
        for j in range(self.n_hyperedges):
            members = np.flatnonzero(self.incidence[:, j])
            lines.append(" ".join([repr(float(self.weights[j]))] + [str(i) for i in members]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Hypergraph":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        n, m = (int(v) for v in lines[0].split())
        if len(lines) - 1 != m:
            raise ConstructionError(f"expected {m} hyperedge lines, got {len(lines) - 1}")
        incidence = np.zeros((n, m))
        weights = np.zeros(m)
        for j, ln in enumerate(lines[1:]):
            parts = ln.split()
            weights[j] = float(parts[0])
            for tok in parts[1:]:
                incidence[int(tok), j] = 1.0
        return cls(incidence, weights)


@dataclass
class GeoGraph:
    """Symmetric nonnegative sensor adjacency from distances."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConstructionError("adjacency must be square")
        if not np.allclose(a, a.T):
            raise ConstructionError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ConstructionError("adjacency diagonal must be zero")
        self.adjacency = a

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]


def build_geo_adjacency(edges, n: int, sigma: float, eps: float = 0.1) -> GeoGraph:
    """Thresholded Gaussian kernel adjacency from (from, to, distance) triples."""
    if sigma <= 0:
        raise ConstructionError("sigma must be positive")
    a = np.zeros((n, n))
    for i, j, d in edges:
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise ConstructionError(f"node index out of range: ({i}, {j}) with n={n}")
        if d <= 0:
            raise ConstructionError(f"non-positive distance on edge ({i}, {j})")
        if i == j:
            continue
        w = np.exp(-(d * d) / (sigma * sigma))
        if w >= eps:
            a[i, j] = max(a[i, j], w)
            a[j, i] = max(a[j, i], w)
    return GeoGraph(a)


def _hop_neighborhood(adj: np.ndarray, center: int, radius: int) -> list[int]:
    members = {center}
    frontier = {center}
    for _ in range(radius):
        nxt = set()
        for v in frontier:
            nxt.update(np.flatnonzero(adj[v]).tolist())
        frontier = nxt - members
        members |= frontier
    return sorted(members)


def build_spatial_hyperedges(g: GeoGraph, radius: int = 2) -> Hypergraph:
    """One hyperedge per centroid node: the centroid plus its <=radius-hop
    neighbors. Weight = member count; identical member sets are merged."""
    n = g.n_nodes
    seen: dict[tuple, int] = {}
    columns = []
    for c in range(n):
        members = tuple(_hop_neighborhood(g.adjacency, c, radius))
        if members not in seen:
            seen[members] = len(columns)
            columns.append(members)
    incidence = np.zeros((n, len(columns)))
    weights = np.zeros(len(columns))
    for j, members in enumerate(columns):
        incidence[list(members), j] = 1.0
        weights[j] = len(members)
    return Hypergraph(incidence, weights)


@dataclass
class AdaptiveIncidence:
    """Base hypergraph plus trainable node/hyperedge embedding vectors."""

    base: Hypergraph
    node_embed: Parameter
    edge_embed: Parameter

    @classmethod
    def create(cls, base: Hypergraph, name: str = "adaptive",
               init: np.ndarray | None = None, rng: np.random.Generator | None = None,
               scale: float = 0.08) -> "AdaptiveIncidence":
        rng = rng or np.random.default_rng(0)
        en = rng.uniform(-scale, scale, base.n_nodes)
        em = rng.uniform(-scale, scale, base.n_hyperedges)
        return cls(base,
                   Parameter(f"{name}.node_embed", en),
                   Parameter(f"{name}.edge_embed", em))

    def parameters(self) -> list[Parameter]:
        return [self.node_embed, self.edge_embed]


def adaptive_incidence(ai: AdaptiveIncidence) -> Tensor:
    """H-masked row softmax of the embedding outer product; differentiable
    w.r.t. both embeddings, support stays inside the base incidence."""
    scores = softmax_rows(outer(ai.node_embed.tensor, ai.edge_embed.tensor))
    return hadamard(Tensor(ai.base.incidence), scores)


def normalized_transform(hg: Hypergraph, h_use=None):
    """D^{-1/2} H_use W B^{-1} H_use^T D^{-1/2}.

    Degrees D and B always come from the binary incidence so the spectrum
    stays controlled when an adaptive H_use is plugged in. Returns an
    ndarray for ndarray input and a Tensor for Tensor input.
    """
    d = hg.node_degrees()
    b = hg.edge_degrees()
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise ConstructionError(f"zero-degree node {bad[0]}")
    bad = np.flatnonzero(b <= 0)
    if bad.size:
        raise ConstructionError(f"zero-degree hyperedge {bad[0]}")
    d_inv_sqrt = 1.0 / np.sqrt(d)
    wb = hg.weights / b
    if h_use is None:
        h_use = hg.incidence
    if isinstance(h_use, Tensor):
        left = hadamard(h_use, Tensor(d_inv_sqrt[:, None] * wb[None, :]))
        right = hadamard(h_use, Tensor(d_inv_sqrt[:, None]))
        return matmul(left, transpose2d(right))
    h = np.asarray(h_use, dtype=np.float64)
    return (d_inv_sqrt[:, None] * h) @ (wb[:, None] * h.T) * d_inv_sqrt[None, :]


def transpose2d(t: Tensor) -> Tensor:
    out = Tensor(t.data.T, _parents=(t,))
    out._backward = lambda g: _accum(t, g.T)
    return out


# ---------------------------------------------------------------------------
# dynamic time warping


def _dtw_python(x, y, band):
    n, m = len(x), len(y)
    inf = np.inf
    prev = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = np.full(m + 1, inf)
        lo, hi = 1, m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            cost = abs(x[i - 1] - y[j - 1])
            cur[j] = cost + min(prev[j], cur[j - 1], prev[j - 1])
        prev = cur
    return prev[m]


if njit is not None:
    _dtw_kernel = njit(cache=True)(_dtw_python)
else:  # pragma: no cover
    _dtw_kernel = _dtw_python


def dtw_distance(x, y, band: int | None = None) -> float:
    """DTW distance with absolute-difference local cost and the usual
    match/insert/delete steps; optional Sakoe-Chiba band half-width."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("dtw_distance requires nonempty series")
    return float(_dtw_kernel(x, y, -1 if band is None else int(band)))


def dtw_matrix(signals: np.ndarray, band: int | None = None) -> np.ndarray:
    """Pairwise DTW distances between rows of signals (N, T)."""
    n = signals.shape[0]
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = dtw_distance(signals[i], signals[j], band=band)
    return d


def build_temporal_hypergraph(signals: np.ndarray, r: int,
                              band: int | None = None) -> Hypergraph:
    """r-uniform hypergraph: hyperedge j = node j plus its r-1 DTW-nearest
    neighbors (ties broken by lower node index). M = N, unit weights."""
    signals = np.asarray(signals, dtype=np.float64)
    n = signals.shape[0]
    if r < 2:
        raise ConstructionError("r must be at least 2")
    if r > n:
        raise ConstructionError(f"r={r} exceeds node count {n}")
    dist = dtw_matrix(signals, band=band)
    incidence = np.zeros((n, n))
    for v in range(n):
        others = np.array([u for u in range(n) if u != v])
        order = others[np.lexsort((others, dist[v, others]))]
        members = [v] + order[: r - 1].tolist()
        incidence[members, v] = 1.0
    return Hypergraph(incidence, np.ones(n))
