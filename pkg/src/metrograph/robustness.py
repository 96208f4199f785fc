"""Edge connectivity and k-edge augmentation of metro graphs.

Unconstrained 2-edge augmentation is solved exactly on the bridge tree (the
tree obtained by contracting 2-edge-connected components): with ``l`` leaves
in DFS order, joining leaf ``i`` to leaf ``i + floor(l/2)`` removes every
bridge using ``ceil(l/2)`` new links, which is also a lower bound since each
leaf needs a new incident link.

With a distance threshold only station pairs closer than ``max_dist_km`` are
admissible.  The 2-edge case then pairs leaf components greedily and, when
the candidate set is small, searches exhaustively for a smaller plan.  For
``k > 2`` a heuristic repeatedly adds the shortest admissible link across the
current minimum cut; its plans are validated but not claimed minimal.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .graph import GraphError, Link, MetroGraph, components, haversine_km, is_connected

AUGMENT_LINE = "augmented"
BRUTE_FORCE_MAX_EDGES = 20
BRUTE_FORCE_MAX_N = 10
EXHAUSTIVE_BUDGET = 200_000


class InfeasibleAugmentation(Exception):
    """No admissible set of new links reaches the requested connectivity."""

    def __init__(self, message: str, best_k: int):
        super().__init__(message)
        self.best_k = best_k


@dataclass(frozen=True)
class AugmentationPlan:
    k: int
    added: tuple[tuple[str, str], ...]
    distances_km: tuple[float, ...]
    resulting_connectivity: int
    constrained: bool
    threshold_km: float | None
    method: str
    lower_bound: int | None = None

    @property
    def size(self) -> int:
        return len(self.added)

    @property
    def max_distance_km(self) -> float:
        return max(self.distances_km, default=0.0)

    def links(self) -> list[Link]:
        return [Link(p, frozenset([AUGMENT_LINE])) for p in self.added]

    def apply(self, g: MetroGraph) -> MetroGraph:
        return g.with_links(self.links())


# -- connectivity -----------------------------------------------------------

def minimum_cut(g: MetroGraph) -> tuple[int, frozenset[int]]:
    """Stoer-Wagner global minimum cut of the unweighted graph.

    Returns the cut size and the vertex indices on one side.  Ties between
    equally tight vertices go to the lower index.
    """
    n = g.n
    if n < 2:
        raise GraphError("minimum cut needs at least two stations")
    w = g.adjacency_int.astype(np.int64).copy()
    groups = {i: [i] for i in range(n)}
    active = list(range(n))
    best = math.inf
    best_side: list[int] = []
    while len(active) > 1:
        in_a = {active[0]}
        conn = w[active[0]].copy()
        order = [active[0]]
        for _ in range(len(active) - 1):
            rest = [v for v in active if v not in in_a]
            nxt = max(rest, key=lambda v: (conn[v], -v))
            order.append(nxt)
            in_a.add(nxt)
            conn = conn + w[nxt]
        last, prev = order[-1], order[-2]
        phase_cut = int(sum(w[last, v] for v in active if v != last))
        if phase_cut < best:
            best = phase_cut
            best_side = list(groups[last])
        w[prev] += w[last]
        w[:, prev] += w[:, last]
        w[prev, prev] = 0
        w[last] = 0
        w[:, last] = 0
        groups[prev].extend(groups.pop(last))
        active.remove(last)
    return int(best), frozenset(best_side)


def edge_connectivity(g: MetroGraph) -> int:
    """Largest k for which ``g`` is k-edge connected; 0 when disconnected."""
    if g.n < 2:
        raise GraphError("edge connectivity needs at least two stations")
    if not is_connected(g):
        return 0
    return minimum_cut(g)[0]


def _connected_without(n: int, edges: list[tuple[int, int]], removed: set[int]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for e, (i, j) in enumerate(edges):
        if e not in removed:
            adj[i].append(j)
            adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def brute_force_connectivity(g: MetroGraph) -> int:
    """Size of the smallest edge subset whose removal disconnects ``g``."""
    edges = list(g.edge_index_pairs)
    if len(edges) > BRUTE_FORCE_MAX_EDGES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_EDGES} edges, got {len(edges)}")
    if g.n < 2:
        raise GraphError("edge connectivity needs at least two stations")
    for size in range(len(edges) + 1):
        for subset in itertools.combinations(range(len(edges)), size):
            if not _connected_without(g.n, edges, set(subset)):
                return size
    return len(edges)


def bridges(g: MetroGraph) -> list[tuple[int, int]]:
    """Bridges as sorted vertex-index pairs (iterative Tarjan low-link)."""
    n = g.n
    disc = [-1] * n
    low = [0] * n
    out = []
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(g.neighbors[root]))]
        while stack:
            u, parent, it = stack[-1]
            advanced = False
            for v in it:
                if v == parent:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, u, iter(g.neighbors[v])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[v])
            if advanced:
                continue
            stack.pop()
            if parent >= 0:
                low[parent] = min(low[parent], low[u])
                if low[u] > disc[parent]:
                    out.append((min(parent, u), max(parent, u)))
    return sorted(out)


@dataclass(frozen=True)
class BridgeTree:
    label: tuple[int, ...]             # vertex -> component
    members: tuple[tuple[int, ...], ...]
    adj: tuple[tuple[int, ...], ...]   # component adjacency via bridges
    bridges: tuple[tuple[int, int], ...]

    @property
    def leaves(self) -> list[int]:
        return [c for c, nb in enumerate(self.adj) if len(nb) == 1]

    def path(self, a: int, b: int) -> list[int]:
        """Component path from ``a`` to ``b``."""
        parent = {a: -1}
        stack = [a]
        while stack:
            u = stack.pop()
            if u == b:
                break
            for v in self.adj[u]:
                if v not in parent:
                    parent[v] = u
                    stack.append(v)
        out = [b]
        while out[-1] != a:
            out.append(parent[out[-1]])
        return out[::-1]


def bridge_tree(g: MetroGraph) -> BridgeTree:
    br = bridges(g)
    brset = set(br)
    label = [-1] * g.n
    members = []
    for start in range(g.n):
        if label[start] >= 0:
            continue
        c = len(members)
        label[start] = c
        stack = [start]
        comp = [start]
        while stack:
            u = stack.pop()
            for v in g.neighbors[u]:
                if label[v] < 0 and (min(u, v), max(u, v)) not in brset:
                    label[v] = c
                    comp.append(v)
                    stack.append(v)
        members.append(tuple(sorted(comp)))
    adj: list[set[int]] = [set() for _ in members]
    for i, j in br:
        adj[label[i]].add(label[j])
        adj[label[j]].add(label[i])
    return BridgeTree(
        label=tuple(label),
        members=tuple(members),
        adj=tuple(tuple(sorted(a)) for a in adj),
        bridges=tuple(br),
    )


def _is_two_edge_connected(g: MetroGraph) -> bool:
    return is_connected(g) and not bridges(g)


# -- augmentation -----------------------------------------------------------

def _pair(g: MetroGraph, i: int, j: int) -> tuple[str, str]:
    a, b = g.stations[i].id, g.stations[j].id
    return (a, b) if a < b else (b, a)


def _dist(g: MetroGraph, pair: tuple[str, str]) -> float:
    return haversine_km(g.station(pair[0]), g.station(pair[1]))


def candidate_pairs(g: MetroGraph, max_dist_km: float | None = None) -> list[tuple[str, str]]:
    """Non-adjacent station pairs, strictly closer than ``max_dist_km`` if given."""
    out = []
    for i in range(g.n):
        for j in range(i + 1, g.n):
            if g.adjacency_int[i, j]:
                continue
            p = _pair(g, i, j)
            if max_dist_km is not None and not _dist(g, p) < max_dist_km:
                continue
            out.append(p)
    return sorted(out)


def _plan(g, k, pairs, constrained, threshold, method, lower_bound=None) -> AugmentationPlan:
    pairs = tuple(sorted(pairs))
    plan = AugmentationPlan(
        k=k,
        added=pairs,
        distances_km=tuple(_dist(g, p) for p in pairs),
        resulting_connectivity=0,
        constrained=constrained,
        threshold_km=threshold,
        method=method,
        lower_bound=lower_bound,
    )
    lam = edge_connectivity(plan.apply(g))
    if lam < k:
        raise AssertionError(f"{method} produced a plan with connectivity {lam} < {k}")
    return dataclasses.replace(plan, resulting_connectivity=lam)


def _dfs_leaf_order(tree: BridgeTree) -> list[int]:
    leaves = set(tree.leaves)
    internal = [c for c in range(len(tree.adj)) if c not in leaves]
    root = internal[0] if internal else 0
    order = []
    seen = {root}
    stack = [root]
    while stack:
        u = stack.pop()
        if u in leaves:
            order.append(u)
        for v in reversed(tree.adj[u]):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return order


def _join_components(g: MetroGraph, tree: BridgeTree, a: int, b: int) -> tuple[str, str] | None:
    """Lexicographically smallest non-adjacent station pair between two components."""
    best = None
    for i in tree.members[a]:
        for j in tree.members[b]:
            if g.adjacency_int[i, j]:
                continue
            p = _pair(g, i, j)
            if best is None or p < best:
                best = p
    return best


def _augment_bridge_tree(g: MetroGraph) -> AugmentationPlan:
    tree = bridge_tree(g)
    leaves = _dfs_leaf_order(tree)
    ell = len(leaves)
    lb = math.ceil(ell / 2)
    if ell == 0:
        return _plan(g, 2, [], False, None, "bridge-tree", 0)
    half = ell // 2
    pairs = []
    for i in range(lb):
        p = _join_components(g, tree, leaves[i], leaves[(i + half) % ell])
        if p is None:
            raise InfeasibleAugmentation("no non-adjacent station pair can close the only bridge", best_k=1)
        pairs.append(p)
    return _plan(g, 2, set(pairs), False, None, "bridge-tree", lb)


def _bridges_removed(tree: BridgeTree, g: MetroGraph, pair) -> int:
    a, b = tree.label[g.index[pair[0]]], tree.label[g.index[pair[1]]]
    if a == b:
        return 0
    return len(tree.path(a, b)) - 1


def _greedy_two_edge(g: MetroGraph, candidates: list[tuple[str, str]]) -> list[tuple[str, str]]:
    current = g
    chosen: list[tuple[str, str]] = []
    remaining = list(candidates)
    while True:
        tree = bridge_tree(current)
        if not tree.bridges:
            return chosen
        leaves = set(tree.leaves)
        best_key, best_pair = None, None
        for p in remaining:
            removed = _bridges_removed(tree, current, p)
            if removed == 0:
                continue
            touched = len({tree.label[current.index[s]] for s in p} & leaves)
            key = (-touched, -removed, _dist(g, p), p)
            if best_key is None or key < best_key:
                best_key, best_pair = key, p
        if best_pair is None:  # pragma: no cover - excluded by the feasibility pre-check
            raise InfeasibleAugmentation("greedy pairing stalled", best_k=1)
        chosen.append(best_pair)
        remaining.remove(best_pair)
        current = current.with_links([Link(best_pair, frozenset([AUGMENT_LINE]))])


def _exhaustive_two_edge(g, useful, lo, hi) -> list[tuple[str, str]] | None:
    """First feasible subset of size in [lo, hi) in lexicographic order, if the search is small."""
    budget = sum(math.comb(len(useful), s) for s in range(lo, hi))
    if budget > EXHAUSTIVE_BUDGET:
        return None
    for size in range(lo, hi):
        for subset in itertools.combinations(useful, size):
            trial = g.with_links(Link(p, frozenset([AUGMENT_LINE])) for p in subset)
            if _is_two_edge_connected(trial):
                return list(subset)
    return None


def _augment_min_cut(g: MetroGraph, k: int, candidates: list[tuple[str, str]], constrained, threshold):
    current = g
    chosen: list[tuple[str, str]] = []
    remaining = set(candidates)
    while True:
        lam, side = minimum_cut(current) if is_connected(current) else (0, frozenset(components(current)[0]))
        if lam >= k:
            break
        side_ids = {current.stations[i].id for i in side}
        crossing = [p for p in remaining if (p[0] in side_ids) != (p[1] in side_ids)]
        if not crossing:  # pragma: no cover - excluded by the feasibility pre-check
            raise InfeasibleAugmentation("no admissible link crosses the minimum cut", best_k=lam)
        p = min(crossing, key=lambda q: (_dist(g, q), q))
        chosen.append(p)
        remaining.discard(p)
        current = current.with_links([Link(p, frozenset([AUGMENT_LINE]))])
    return _plan(g, k, chosen, constrained, threshold, "min-cut-heuristic")


def augment(g: MetroGraph, k: int = 2, max_dist_km: float | None = None) -> AugmentationPlan:
    """Propose new links making ``g`` k-edge connected.

    Raises :class:`InfeasibleAugmentation` (carrying the best reachable k)
    when the admissible links cannot reach ``k``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if max_dist_km is not None and not max_dist_km > 0:
        raise ValueError("max_dist_km must be positive")
    if g.n < 2 or not is_connected(g):
        raise GraphError("augmentation needs a connected graph with at least two stations")

    constrained = max_dist_km is not None
    lam = edge_connectivity(g)
    if lam >= k:
        return _plan(g, k, [], constrained, max_dist_km, "already-connected", 0)

    candidates = candidate_pairs(g, max_dist_km)
    ceiling = edge_connectivity(g.with_links(Link(p, frozenset([AUGMENT_LINE])) for p in candidates))
    if ceiling < k:
        where = f" within {max_dist_km} km" if constrained else ""
        raise InfeasibleAugmentation(
            f"adding every admissible link{where} only reaches {ceiling}-edge connectivity, {k} requested",
            best_k=ceiling,
        )

    if k == 2 and not constrained:
        return _augment_bridge_tree(g)
    if k == 2:
        tree = bridge_tree(g)
        lb = math.ceil(len(tree.leaves) / 2)
        chosen = _greedy_two_edge(g, candidates)
        method = "greedy"
        if len(chosen) > lb:
            useful = [p for p in candidates if _bridges_removed(tree, g, p) > 0]
            better = _exhaustive_two_edge(g, useful, lb, len(chosen))
            if better is not None:
                chosen, method = better, "exhaustive"
            elif sum(math.comb(len(useful), s) for s in range(lb, len(chosen))) <= EXHAUSTIVE_BUDGET:
                method = "greedy+exhaustive"  # search ran and confirmed the greedy size
        return _plan(g, 2, chosen, True, max_dist_km, method, lb)
    return _augment_min_cut(g, k, candidates, constrained, max_dist_km)


def brute_force_augment(g: MetroGraph, k: int = 2, max_dist_km: float | None = None) -> AugmentationPlan:
    """Smallest admissible link set reaching k-edge connectivity, by exhaustive search.

    Subsets are tried by increasing size, then in lexicographic pair order.
    """
    if g.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_N} stations, got {g.n}")
    if g.n < 2:
        raise GraphError("augmentation needs at least two stations")
    candidates = candidate_pairs(g, max_dist_km)
    deg = g.adjacency_int.sum(axis=1)
    deficit = {g.stations[i].id: k - int(deg[i]) for i in range(g.n) if deg[i] < k}
    for size in range(len(candidates) + 1):
        for subset in itertools.combinations(candidates, size):
            if deficit:
                # cheap necessary condition: every vertex needs degree >= k
                gain = dict.fromkeys(deficit, 0)
                for a, b in subset:
                    if a in gain:
                        gain[a] += 1
                    if b in gain:
                        gain[b] += 1
                if any(gain[v] < need for v, need in deficit.items()):
                    continue
            trial = g.with_links(Link(p, frozenset([AUGMENT_LINE])) for p in subset)
            if edge_connectivity(trial) >= k:
                return _plan(g, k, subset, max_dist_km is not None, max_dist_km, "brute-force")
    best = edge_connectivity(g.with_links(Link(p, frozenset([AUGMENT_LINE])) for p in candidates))
    raise InfeasibleAugmentation(f"no admissible link set reaches {k}-edge connectivity", best_k=best)
