"""Exact and sampled betweenness centrality.

All scores are normalized over ordered pairs: ``b(v) = 1/(n(n-1)) *
sum_{s != v != t} sigma_st(v) / sigma_st``. The sampling algorithms draw an
ordered pair ``(s, t)`` uniformly, pick one shortest ``s``-``t`` path
uniformly and credit its interior vertices, so each sample is an unbiased
Bernoulli estimate of ``b(v)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .graph import Graph, estimate_diameter

__all__ = [
    "CentralityEstimate",
    "KadabraParams",
    "brandes_exact",
    "brute_force_betweenness",
    "sample_shortest_path",
    "sample_shortest_path_reference",
    "sample_betweenness",
    "deviation_bound",
    "kadabra_omega",
    "kadabra",
    "rk_sample_size",
    "rk",
    "top_k",
]

BRUTE_FORCE_MAX_NODES = 12


@dataclass
class CentralityEstimate:
    """Per-node betweenness plus the sampling state that produced it."""

    scores: np.ndarray
    algorithm: str
    samples_used: int = 0
    epsilon: float = 0.0
    delta: float = 0.0
    omega: int = 0
    c: int | None = None


@dataclass
class KadabraParams:
    """Parameters of the adaptive sampler.

    ``delta_l``/``delta_u`` are filled by :func:`kadabra` with the per-vertex
    failure budgets actually used.
    """

    epsilon: float = 0.015
    delta: float = 0.1
    c: int = 10
    seed: int = 0
    delta_l: np.ndarray | None = field(default=None, repr=False)
    delta_u: np.ndarray | None = field(default=None, repr=False)

    def validate(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if int(self.c) != self.c or self.c < 1:
            raise ValueError(f"c must be a positive integer, got {self.c}")


def _finish_scores(acc: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(n)
    return acc / (n * (n - 1))


def brandes_exact(g: Graph) -> CentralityEstimate:
    """Exact betweenness by single-source path counting and dependency accumulation."""
    n = g.node_count
    offsets, targets = g.adjacency_lists()
    acc = [0.0] * n
    for s in range(n):
        dist = [-1] * n
        sigma = [0] * n
        preds: list[list[int]] = [[] for _ in range(n)]
        dist[s] = 0
        sigma[s] = 1
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv = dist[v] + 1
            for w in targets[offsets[v]:offsets[v + 1]]:
                if dist[w] < 0:
                    dist[w] = dv
                    queue.append(w)
                if dist[w] == dv:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        dep = [0.0] * n
        for w in reversed(order):
            coeff = (1.0 + dep[w]) / sigma[w]
            for v in preds[w]:
                dep[v] += sigma[v] * coeff
            if w != s:
                acc[w] += dep[w]
    return CentralityEstimate(_finish_scores(np.array(acc), n), "brandes")


def _all_shortest_paths(adj: list[list[int]], s: int, t: int) -> list[tuple[int, ...]]:
    """Every shortest s-t path, by iterative deepening over simple paths."""
    n = len(adj)
    for length in range(1, n):
        found = []
        stack = [(s,)]
        while stack:
            path = stack.pop()
            if len(path) - 1 == length:
                if path[-1] == t:
                    found.append(path)
                continue
            for w in adj[path[-1]]:
                if w not in path:
                    stack.append(path + (w,))
        if found:
            return found
    return []


def brute_force_betweenness(g: Graph) -> CentralityEstimate:
    """Betweenness by explicit enumeration of all shortest paths (tiny graphs only)."""
    n = g.node_count
    if n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_NODES} nodes, got {n}")
    adj = [g.neighbors(v).tolist() for v in range(n)]
    acc = np.zeros(n)
    for s, t in permutations(range(n), 2):
        paths = _all_shortest_paths(adj, s, t)
        if not paths:
            continue
        sigma_st = len(paths)
        through = np.zeros(n)
        for p in paths:
            for v in p[1:-1]:
                through[v] += 1
        acc += through / sigma_st
    return CentralityEstimate(_finish_scores(acc, n), "brute_force")


def _walk_back(start: int, dist: dict, sigma: dict, offsets: list, targets: list,
               rng: np.random.Generator) -> list[int]:
    """Random walk from ``start`` to the BFS root, choosing predecessors by path count.

    ``offsets``/``targets`` must list the arcs pointing *towards* the root.
    """
    path = [start]
    v = start
    while dist[v] > 0:
        want = dist[v] - 1
        cands = [u for u in targets[offsets[v]:offsets[v + 1]] if dist.get(u) == want]
        if len(cands) == 1:
            v = cands[0]
        else:
            weights = np.array([sigma[u] for u in cands], dtype=float)
            r = rng.random() * weights.sum()
            v = cands[min(int(np.searchsorted(np.cumsum(weights), r, side="right")),
                          len(cands) - 1)]
        path.append(v)
    return path


def sample_shortest_path_reference(g: Graph, s: int, t: int,
                                   rng: np.random.Generator) -> list[int]:
    """Uniform shortest s-t path via a full BFS from ``s`` and a weighted walk back."""
    if s == t:
        raise ValueError("s and t must differ")
    offsets, targets = g.adjacency_lists()
    dist = {s: 0}
    sigma = {s: 1}
    queue = deque([s])
    while queue:
        v = queue.popleft()
        dv = dist[v] + 1
        for w in targets[offsets[v]:offsets[v + 1]]:
            dw = dist.get(w)
            if dw is None:
                dist[w] = dv
                sigma[w] = sigma[v]
                queue.append(w)
            elif dw == dv:
                sigma[w] += sigma[v]
    if t not in dist:
        raise ValueError(f"node {t} is unreachable from {s}")
    ro, rt = g.adjacency_lists(reverse=True)
    return _walk_back(t, dist, sigma, ro, rt, rng)[::-1]


def sample_shortest_path(g: Graph, s: int, t: int, rng: np.random.Generator) -> list[int]:
    """Uniform shortest s-t path via balanced bidirectional BFS.

    Whole layers are expanded from whichever side has the frontier with fewer
    outgoing arcs. The first layer that touches the other side's visited set
    contains exactly the vertices at that distance on shortest paths; one is
    drawn proportionally to ``sigma_s * sigma_t`` and the path is completed by
    weighted walks towards both endpoints.
    """
    if s == t:
        raise ValueError("s and t must differ")
    fo, ft = g.adjacency_lists()
    ro, rt = g.adjacency_lists(reverse=True)
    # side 0 grows from s along out-arcs; side 1 grows from t along in-arcs
    dist = ({s: 0}, {t: 0})
    sigma = ({s: 1}, {t: 1})
    frontier = ([s], [t])
    adj = ((fo, ft), (ro, rt))
    work = [fo[s + 1] - fo[s], ro[t + 1] - ro[t]]
    while True:
        if not frontier[0] or not frontier[1]:
            raise ValueError(f"node {t} is unreachable from {s}")
        side = 0 if work[0] <= work[1] else 1
        other = 1 - side
        d_side, sg_side = dist[side], sigma[side]
        d_other = dist[other]
        off, tgt = adj[side]
        nxt = []
        layer = d_side[frontier[side][0]] + 1
        meet = []
        for v in frontier[side]:
            sv = sg_side[v]
            for w in tgt[off[v]:off[v + 1]]:
                dw = d_side.get(w)
                if dw is None:
                    d_side[w] = layer
                    sg_side[w] = sv
                    nxt.append(w)
                    if w in d_other:
                        meet.append(w)
                elif dw == layer:
                    sg_side[w] += sv
        if meet:
            break
        frontier[side][:] = nxt
        o2 = adj[side][0]
        work[side] = sum(o2[v + 1] - o2[v] for v in nxt)

    weights = np.array([sigma[0][w] * sigma[1][w] for w in meet], dtype=float)
    if len(meet) == 1:
        mid = meet[0]
    else:
        r = rng.random() * weights.sum()
        k = min(int(np.searchsorted(np.cumsum(weights), r, side="right")), len(meet) - 1)
        mid = meet[k]
    # towards s: follow in-arcs over side-0 layers; towards t: out-arcs over side-1
    to_s = _walk_back(mid, dist[0], sigma[0], ro, rt, rng)
    to_t = _walk_back(mid, dist[1], sigma[1], fo, ft, rng)
    return to_s[::-1] + to_t[1:]


def _sample_pair(n: int, rng: np.random.Generator) -> tuple[int, int]:
    s = int(rng.integers(n))
    t = int(rng.integers(n - 1))
    if t >= s:
        t += 1
    return s, t


def _draw(g: Graph, counts: np.ndarray, k: int, rng: np.random.Generator,
          sampler) -> None:
    n = g.node_count
    for _ in range(k):
        s, t = _sample_pair(n, rng)
        path = sampler(g, s, t, rng)
        for v in path[1:-1]:
            counts[v] += 1


def _check_connected_sample_graph(g: Graph) -> None:
    if g.node_count < 2:
        raise ValueError("graph must have at least two nodes")


def sample_betweenness(g: Graph, n_samples: int, seed: int = 0,
                       bidirectional: bool = True) -> CentralityEstimate:
    """Non-adaptive estimate from exactly ``n_samples`` uniform path samples."""
    _check_connected_sample_graph(g)
    rng = np.random.default_rng(seed)
    counts = np.zeros(g.node_count)
    sampler = sample_shortest_path if bidirectional else sample_shortest_path_reference
    _draw(g, counts, n_samples, rng, sampler)
    return CentralityEstimate(counts / max(n_samples, 1), "fixed", samples_used=n_samples)


def deviation_bound(b, delta_v, tau):
    """Empirical-Bernstein half-width for a Bernoulli mean ``b`` after ``tau`` samples.

    ``sqrt(2 b (1 - b) ln(3/delta_v) / tau) + 3 ln(3/delta_v) / tau``; used for
    both the lower and the upper deviation in the stopping rule.
    """
    b = np.asarray(b, dtype=float)
    log_term = np.log(3.0 / np.asarray(delta_v, dtype=float))
    return np.sqrt(2.0 * b * (1.0 - b) * log_term / tau) + 3.0 * log_term / tau


def kadabra_omega(n: int, epsilon: float, delta: float) -> int:
    """Non-adaptive sample cap: Hoeffding plus a union bound over 2n tails at delta/2."""
    return math.ceil(math.log(4 * n / delta) / (2 * epsilon ** 2))


def kadabra(g: Graph, params: KadabraParams | None = None, *,
            bidirectional: bool = True, **kwargs) -> CentralityEstimate:
    """Adaptive-sampling betweenness approximation with an absolute error target.

    Draws rounds of ``params.c`` uniform shortest paths until the deviation
    bound of every vertex is below ``epsilon`` or ``omega`` samples are
    reached, so that ``P(max_v |b~(v) - b(v)| > epsilon) <= delta``.

    ``g`` must be connected (strongly, if directed); pass the largest
    component. Keyword arguments override fields of ``params``.
    """
    if params is None:
        params = KadabraParams(**kwargs)
    elif kwargs:
        params = KadabraParams(**{**params.__dict__, **kwargs})
    params.validate()
    _check_connected_sample_graph(g)
    n = g.node_count
    eps, delta, c = params.epsilon, params.delta, int(params.c)
    omega = kadabra_omega(n, eps, delta)
    params.delta_l = np.full(n, delta / (4 * n))
    params.delta_u = np.full(n, delta / (4 * n))

    rng = np.random.default_rng(params.seed)
    sampler = sample_shortest_path if bidirectional else sample_shortest_path_reference
    counts = np.zeros(n)
    tau = 0
    while tau < omega:
        if tau > 0:
            b = counts / tau
            f = deviation_bound(b, params.delta_l, tau)
            gdev = deviation_bound(b, params.delta_u, tau)
            if f.max() < eps and gdev.max() < eps:
                break
        try:
            _draw(g, counts, c, rng, sampler)
        except ValueError as exc:
            raise ValueError(f"graph is not connected: {exc}") from None
        tau += c
    return CentralityEstimate(
        counts / tau, "kadabra", samples_used=tau, epsilon=eps, delta=delta,
        omega=omega, c=c,
    )


def rk_sample_size(vertex_diameter: int, epsilon: float, delta: float) -> int:
    """Fixed sample budget ``ceil(0.5/eps^2 * (floor(log2(VD-2)) + 1 + ln(1/delta)))``."""
    vd_term = math.floor(math.log2(vertex_diameter - 2)) if vertex_diameter > 3 else 0
    return math.ceil(0.5 / epsilon ** 2 * (vd_term + 1 + math.log(1 / delta)))


def rk(g: Graph, epsilon: float = 0.015, delta: float = 0.1, seed: int = 0, *,
       bidirectional: bool = True) -> CentralityEstimate:
    """Fixed-budget path sampling with a vertex-diameter sample size."""
    KadabraParams(epsilon, delta, 1, seed).validate()
    _check_connected_sample_graph(g)
    vd = estimate_diameter(g, seed=seed).vertex_diameter_upper
    r = rk_sample_size(vd, epsilon, delta)
    try:
        est = sample_betweenness(g, r, seed=seed, bidirectional=bidirectional)
    except ValueError as exc:
        raise ValueError(f"graph is not connected: {exc}") from None
    est.algorithm = "rk"
    est.epsilon, est.delta, est.omega = epsilon, delta, r
    return est


def top_k(scores: np.ndarray, k: int = 25) -> tuple[list[int], list[float]]:
    """Highest ``k`` scores, descending; ties broken by smaller node id."""
    scores = np.asarray(scores, dtype=float)
    order = np.lexsort((np.arange(scores.size), -scores))[:k]
    return order.tolist(), scores[order].tolist()
