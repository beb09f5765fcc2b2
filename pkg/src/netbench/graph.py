"""Unweighted graphs in compressed adjacency form.

Graphs are immutable once built: loaders and generators clean the edge set
(no self-loops, no multi-edges, undirected edges symmetrized) and freeze it
into ``offsets``/``targets`` arrays. Traversal code works on cached Python
lists because per-vertex numpy indexing is slower than list slicing in
tight BFS loops.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

__all__ = [
    "INF",
    "Graph",
    "DiameterEstimate",
    "GraphFormatError",
    "from_edges",
    "load_edge_list",
    "read_edge_list",
    "to_edge_list",
    "generate_gnm",
    "path_graph",
    "star_graph",
    "cycle_graph",
    "complete_graph",
    "grid_graph",
    "bfs",
    "largest_component",
    "estimate_diameter",
]

#: Sentinel distance for unreachable vertices.
INF = np.iinfo(np.int64).max

EXACT_DIAMETER_THRESHOLD = 1000


class GraphFormatError(ValueError):
    """Raised when an edge list cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable unweighted graph.

    Attributes
    ----------
    node_count : int
    directed : bool
    offsets, targets : ndarray
        Forward adjacency: the out-neighbors of ``v`` are
        ``targets[offsets[v]:offsets[v + 1]]``, sorted ascending.
    rev_offsets, rev_targets : ndarray
        Reverse adjacency (in-neighbors). Same arrays as the forward
        adjacency for undirected graphs.
    """

    node_count: int
    directed: bool
    offsets: np.ndarray
    targets: np.ndarray
    rev_offsets: np.ndarray
    rev_targets: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def arc_count(self) -> int:
        """Number of stored adjacency entries."""
        return int(self.targets.shape[0])

    @property
    def edge_count(self) -> int:
        """Edges as usually reported: arcs for directed, pairs for undirected."""
        return self.arc_count if self.directed else self.arc_count // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.targets[self.offsets[v]:self.offsets[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.rev_targets[self.rev_offsets[v]:self.rev_offsets[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def edges(self) -> np.ndarray:
        """Edge array of shape (edge_count, 2); undirected edges as u < v."""
        src = np.repeat(np.arange(self.node_count), np.diff(self.offsets))
        pairs = np.stack([src, self.targets], axis=1)
        if not self.directed:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs

    def adjacency_lists(self, reverse: bool = False) -> tuple[list[int], list[int]]:
        """(offsets, targets) as Python lists, cached."""
        key = "rev" if reverse and self.directed else "fwd"
        if key not in self._cache:
            if key == "rev":
                self._cache[key] = (self.rev_offsets.tolist(), self.rev_targets.tolist())
            else:
                self._cache[key] = (self.offsets.tolist(), self.targets.tolist())
        return self._cache[key]

    def to_scipy(self) -> csr_matrix:
        data = np.ones(self.arc_count, dtype=np.int8)
        return csr_matrix(
            (data, self.targets, self.offsets), shape=(self.node_count, self.node_count)
        )

    def same_as(self, other: "Graph") -> bool:
        return (
            self.node_count == other.node_count
            and self.directed == other.directed
            and np.array_equal(self.offsets, other.offsets)
            and np.array_equal(self.targets, other.targets)
        )

    def __repr__(self) -> str:
        kind = "directed" if self.directed else "undirected"
        return f"Graph({kind}, n={self.node_count}, m={self.edge_count})"


@dataclass(frozen=True)
class DiameterEstimate:
    """Bounds on the hop diameter."""

    lower: int
    upper: int

    @property
    def vertex_diameter_upper(self) -> int:
        return self.upper + 1

    @property
    def exact(self) -> bool:
        return self.lower == self.upper


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    counts = np.bincount(src, minlength=n)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return offsets, dst.astype(np.int64)


def from_edges(node_count: int, edges: Iterable, directed: bool = False) -> Graph:
    """Build a cleaned graph from an iterable of ``(u, v)`` pairs."""
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                     dtype=np.int64).reshape(-1, 2)
    if node_count < 0:
        raise ValueError("node_count must be non-negative")
    if arr.size and (arr.min() < 0 or arr.max() >= node_count):
        raise ValueError("edge endpoint out of range")
    arr = arr[arr[:, 0] != arr[:, 1]]
    if not directed:
        arr = np.concatenate([arr, arr[:, ::-1]])
    if arr.size:
        arr = np.unique(arr, axis=0)
    src, dst = arr[:, 0], arr[:, 1]
    offsets, targets = _csr(node_count, src, dst)
    if directed:
        rev_offsets, rev_targets = _csr(node_count, dst, src)
    else:
        rev_offsets, rev_targets = offsets, targets
    for a in (offsets, targets, rev_offsets, rev_targets):
        a.setflags(write=False)
    return Graph(node_count, directed, offsets, targets, rev_offsets, rev_targets)


def read_edge_list(stream: TextIO, directed: bool = False) -> Graph:
    """Parse a whitespace-separated edge list.

    Lines starting with ``%`` or ``#`` are comments; extra columns (weights,
    timestamps as in KONECT files) are ignored. Ids are taken as 1-based when
    the smallest id is 1, otherwise as 0-based.
    """
    pairs = []
    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "%#":
            continue
        tokens = stripped.split()
        if len(tokens) < 2:
            raise GraphFormatError(f"expected two node ids, got {stripped!r}", lineno)
        try:
            u, v = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"non-integer node id in {stripped!r}", lineno) from None
        if u < 0 or v < 0:
            raise GraphFormatError("negative node id", lineno)
        pairs.append((u, v))
    if not pairs:
        raise GraphFormatError("no edges")
    arr = np.array(pairs, dtype=np.int64)
    if arr.min() == 1:
        arr -= 1
    return from_edges(int(arr.max()) + 1, arr, directed=directed)


def load_edge_list(text: str, directed: bool = False) -> Graph:
    """Parse edge-list text; see :func:`read_edge_list`."""
    return read_edge_list(io.StringIO(text), directed=directed)


def to_edge_list(g: Graph) -> str:
    """Serialize as a 1-based KONECT-style edge list."""
    kind = "asym" if g.directed else "sym"
    lines = [f"% {kind} unweighted", f"% {g.edge_count} {g.node_count} {g.node_count}"]
    lines.extend(f"{u + 1} {v + 1}" for u, v in g.edges().tolist())
    return "\n".join(lines) + "\n"


def generate_gnm(n: int, m: int, seed: int) -> Graph:
    """Uniform random simple undirected graph with ``n`` nodes and ``m`` edges."""
    total = n * (n - 1) // 2
    if n < 0 or not 0 <= m <= total:
        raise ValueError(f"m must lie in [0, {total}] for n={n}, got {m}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(total, size=m, replace=False)) if m else np.zeros(0, np.int64)
    # pair index k -> (i, j), i < j, rows enumerated in lexicographic order
    rows = np.arange(max(n - 1, 0), dtype=np.int64)
    starts = rows * n - rows * (rows + 1) // 2
    i = np.searchsorted(starts, idx, side="right") - 1
    j = idx - starts[i] + i + 1
    return from_edges(n, np.stack([i, j], axis=1), directed=False)


def path_graph(n: int) -> Graph:
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n: int) -> Graph:
    """Star with ``n`` nodes in total; node 0 is the center."""
    return from_edges(n, [(0, i) for i in range(1, n)])


def cycle_graph(n: int) -> Graph:
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def grid_graph(rows: int, cols: int) -> Graph:
    """``rows x cols`` lattice; node ``r * cols + c``."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return from_edges(rows * cols, edges)


def _bfs_lists(offsets: list, targets: list, n: int, source: int) -> list:
    dist = [-1] * n
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        du = dist[u] + 1
        for w in targets[offsets[u]:offsets[u + 1]]:
            if dist[w] < 0:
                dist[w] = du
                queue.append(w)
    return dist


def bfs(g: Graph, source: int, direction: str = "forward") -> np.ndarray:
    """Hop distances from ``source``; unreachable vertices get :data:`INF`.

    ``direction="backward"`` follows arcs in reverse (distances *to* source).
    """
    if not 0 <= source < g.node_count:
        raise IndexError(f"source {source} out of range [0, {g.node_count})")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    offsets, targets = g.adjacency_lists(reverse=direction == "backward")
    dist = np.array(_bfs_lists(offsets, targets, g.node_count, source), dtype=np.int64)
    dist[dist < 0] = INF
    return dist


def largest_component(g: Graph) -> tuple[Graph, np.ndarray]:
    """Largest (strongly) connected component and the original ids of its nodes.

    Node ``i`` of the returned graph is node ``mapping[i]`` of ``g``; relative
    order is preserved.
    """
    if g.node_count == 0:
        raise ValueError("empty graph")
    _, labels = connected_components(
        g.to_scipy(), directed=g.directed, connection="strong"
    )
    counts = np.bincount(labels)
    keep = labels == np.argmax(counts)
    mapping = np.flatnonzero(keep)
    if mapping.size == g.node_count:
        return g, mapping
    new_id = np.full(g.node_count, -1, dtype=np.int64)
    new_id[mapping] = np.arange(mapping.size)
    e = g.edges()
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    return from_edges(mapping.size, new_id[e], directed=g.directed), mapping


def _eccentricity(dist: list) -> tuple[int, int]:
    """(eccentricity, farthest vertex), ignoring unreachable vertices."""
    best, far = 0, 0
    for v, d in enumerate(dist):
        if d > best:
            best, far = d, v
    return best, far


def estimate_diameter(
    g: Graph, seed: int = 0, exact_threshold: int = EXACT_DIAMETER_THRESHOLD
) -> DiameterEstimate:
    """Bounds on the diameter of a connected graph.

    Exact (BFS from every node) when ``node_count <= exact_threshold``,
    otherwise a double sweep: BFS from a random node, then from the farthest
    node found. The upper bound is twice the smallest eccentricity seen; for
    directed graphs it is the smallest ``ecc_out + ecc_in`` of a sweep root.
    """
    n = g.node_count
    if n == 0:
        raise ValueError("empty graph")
    fo, ft = g.adjacency_lists()
    if n <= exact_threshold:
        diam = max(_eccentricity(_bfs_lists(fo, ft, n, s))[0] for s in range(n))
        return DiameterEstimate(diam, diam)

    rng = np.random.default_rng(seed)
    start = int(rng.integers(n))
    ecc_start, far = _eccentricity(_bfs_lists(fo, ft, n, start))
    ecc_far, _ = _eccentricity(_bfs_lists(fo, ft, n, far))
    lower = max(ecc_start, ecc_far)
    if not g.directed:
        upper = 2 * min(ecc_start, ecc_far)
    else:
        ro, rt = g.adjacency_lists(reverse=True)
        upper = min(
            ecc_start + _eccentricity(_bfs_lists(ro, rt, n, start))[0],
            ecc_far + _eccentricity(_bfs_lists(ro, rt, n, far))[0],
        )
    return DiameterEstimate(lower, max(upper, lower))
