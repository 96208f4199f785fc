"""Betweenness centrality of stations.

``B_n`` sums, over unordered pairs ``{k, m}`` with ``n`` not an endpoint, the
fraction of hop-count shortest k-m paths that pass through ``n``.  No
normalisation is applied; summing over ordered pairs instead would double
every value and leave the ranking untouched.  Pairs in different components
contribute nothing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .graph import MetroGraph


@dataclass(frozen=True)
class CentralityReport:
    ids: tuple[str, ...]
    values: np.ndarray

    @property
    def ranking(self) -> list[str]:
        """Station ids by descending value, ties broken by id."""
        return [sid for _, sid in sorted(zip(-self.values, self.ids))]

    def as_dict(self) -> dict[str, float]:
        return {sid: float(v) for sid, v in zip(self.ids, self.values)}


def _report(g: MetroGraph, values) -> CentralityReport:
    v = np.asarray(values, dtype=float)
    v.setflags(write=False)
    return CentralityReport(ids=tuple(g.ids), values=v)


def betweenness(g: MetroGraph) -> CentralityReport:
    """Brandes' algorithm: one BFS plus dependency back-propagation per source."""
    n = g.n
    nbrs = g.neighbors
    cb = [0.0] * n
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = [0] * n
        dist = [-1] * n
        sigma[s] = 1
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    # every unordered pair was visited from both ends
    return _report(g, [c / 2.0 for c in cb])


BRUTE_FORCE_MAX_N = 12


def _bfs_dist(g: MetroGraph, s: int) -> list[int]:
    dist = [-1] * g.n
    dist[s] = 0
    queue = deque([s])
    while queue:
        v = queue.popleft()
        for w in g.neighbors[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                queue.append(w)
    return dist


def _all_shortest_paths(g: MetroGraph, k: int, m: int, dist_from_k: list[int]) -> list[list[int]]:
    target = dist_from_k[m]
    paths = []

    def walk(path):
        v = path[-1]
        if v == m:
            paths.append(list(path))
            return
        for w in g.neighbors[v]:
            if dist_from_k[w] == dist_from_k[v] + 1 and dist_from_k[w] <= target:
                path.append(w)
                walk(path)
                path.pop()

    walk([k])
    return paths


def brute_force_betweenness(g: MetroGraph) -> CentralityReport:
    """Direct evaluation of the pair sum by listing every shortest path.

    Exact rational accumulation; intended as a test oracle for small graphs.
    """
    if g.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_N} vertices, got {g.n}")
    totals = [Fraction(0)] * g.n
    for k in range(g.n):
        dist = _bfs_dist(g, k)
        for m in range(k + 1, g.n):
            if dist[m] < 0:
                continue
            paths = _all_shortest_paths(g, k, m, dist)
            through = [0] * g.n
            for p in paths:
                for v in p[1:-1]:
                    through[v] += 1
            for v in range(g.n):
                if through[v]:
                    totals[v] += Fraction(through[v], len(paths))
    return _report(g, [float(t) for t in totals])
