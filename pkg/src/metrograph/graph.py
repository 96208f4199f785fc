"""Station/link model of a metro network and its derived matrices."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0


class GraphError(ValueError):
    """Invalid station or link definition."""


@dataclass(frozen=True)
class Station:
    id: str
    name: str
    lat: float
    lon: float
    zone: int = 1

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise GraphError(f"station {self.id!r}: latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise GraphError(f"station {self.id!r}: longitude {self.lon} out of range")


@dataclass(frozen=True)
class Link:
    """Undirected connection between two stations, served by one or more lines.

    ``endpoints`` is stored in sorted order so equal pairs compare equal.
    """

    endpoints: tuple[str, str]
    lines: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        a, b = self.endpoints
        if a == b:
            raise GraphError(f"self-loop at station {a!r}")
        if a > b:
            object.__setattr__(self, "endpoints", (b, a))
        object.__setattr__(self, "lines", frozenset(self.lines))
        if not self.lines:
            raise GraphError(f"link {a}-{b} has no line")

    @property
    def pair(self) -> tuple[str, str]:
        return self.endpoints


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MetroGraph:
    """Immutable undirected metro network.

    Vertex ``i`` is ``stations[i]``.  The adjacency matrix is binary: several
    lines running between the same pair of stations still give ``A[i, j] = 1``;
    the line memberships survive on ``Link.lines`` for the hypergraph model.
    """

    stations: tuple[Station, ...]
    links: tuple[Link, ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {s.id: i for i, s in enumerate(self.stations)}

    @property
    def n(self) -> int:
        return len(self.stations)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.stations]

    def station(self, sid: str) -> Station:
        return self.stations[self.index[sid]]

    @cached_property
    def edge_index_pairs(self) -> tuple[tuple[int, int], ...]:
        idx = self.index
        return tuple((idx[a], idx[b]) for a, b in (lk.endpoints for lk in self.links))

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        nb: list[set[int]] = [set() for _ in range(self.n)]
        for i, j in self.edge_index_pairs:
            nb[i].add(j)
            nb[j].add(i)
        return tuple(tuple(sorted(s)) for s in nb)

    @cached_property
    def adjacency_int(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edge_index_pairs:
            a[i, j] = a[j, i] = 1
        return _readonly(a)

    @cached_property
    def laplacian_int(self) -> np.ndarray:
        a = self.adjacency_int
        return _readonly(np.diag(a.sum(axis=1)) - a)

    @cached_property
    def adjacency(self) -> np.ndarray:
        return _readonly(self.adjacency_int.astype(float))

    @cached_property
    def degree(self) -> np.ndarray:
        return _readonly(np.diag(self.adjacency_int.sum(axis=1)).astype(float))

    @cached_property
    def laplacian(self) -> np.ndarray:
        return _readonly(self.laplacian_int.astype(float))

    @cached_property
    def lines(self) -> dict[str, tuple[int, ...]]:
        """Line name -> sorted vertex indices served by that line."""
        members: dict[str, set[int]] = {}
        for (i, j), lk in zip(self.edge_index_pairs, self.links):
            for line in lk.lines:
                members.setdefault(line, set()).update((i, j))
        return {k: tuple(sorted(v)) for k, v in sorted(members.items())}

    def has_link(self, a: str, b: str) -> bool:
        i, j = self.index[a], self.index[b]
        return bool(self.adjacency_int[i, j])

    def with_links(self, extra: Iterable[Link]) -> "MetroGraph":
        return build_graph(self.stations, list(self.links) + list(extra))


def build_graph(stations: Sequence[Station], links: Iterable[Link]) -> MetroGraph:
    """Validate stations and links and assemble a :class:`MetroGraph`.

    Links sharing the same endpoint pair are merged, their line sets united.
    """
    stations = tuple(stations)
    seen: set[str] = set()
    for s in stations:
        if s.id in seen:
            raise GraphError(f"duplicate station id {s.id!r}")
        seen.add(s.id)

    merged: dict[tuple[str, str], set[str]] = {}
    for lk in links:
        for end in lk.endpoints:
            if end not in seen:
                raise GraphError(f"link {lk.endpoints[0]}-{lk.endpoints[1]} references unknown station {end!r}")
        merged.setdefault(lk.endpoints, set()).update(lk.lines)
    out = tuple(Link(pair, frozenset(lines)) for pair, lines in merged.items())
    return MetroGraph(stations=stations, links=out)


def components(g: MetroGraph) -> list[list[int]]:
    """Connected components as sorted vertex-index lists, ordered by smallest member."""
    label = [-1] * g.n
    comps = []
    for start in range(g.n):
        if label[start] >= 0:
            continue
        label[start] = len(comps)
        queue = deque([start])
        members = [start]
        while queue:
            u = queue.popleft()
            for w in g.neighbors[u]:
                if label[w] < 0:
                    label[w] = label[start]
                    members.append(w)
                    queue.append(w)
        comps.append(sorted(members))
    return comps


def is_connected(g: MetroGraph) -> bool:
    if g.n == 0:
        raise GraphError("graph has no stations")
    return len(components(g)) == 1


def haversine_km(a: Station, b: Station) -> float:
    """Great-circle distance in kilometres on a sphere of radius 6371 km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def graph_from_edges(n: int, edges: Iterable[tuple[int, int]], line: str = "L") -> MetroGraph:
    """Small helper for synthetic graphs: stations ``v0..v{n-1}`` on a dummy grid."""
    width = len(str(max(n - 1, 0)))
    ids = [f"v{i:0{width}d}" for i in range(n)]
    stations = [Station(ids[i], ids[i], 51.5 + 0.01 * (i // 10), -0.1 + 0.01 * (i % 10)) for i in range(n)]
    links = [Link((ids[i], ids[j]), frozenset([line])) for i, j in edges]
    return build_graph(stations, links)
