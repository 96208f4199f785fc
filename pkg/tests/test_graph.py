import math
import random

import numpy as np
import pytest

from graphgen import cycle, path, random_connected
from metrograph.graph import GraphError, Link, Station, build_graph, graph_from_edges, haversine_km, is_connected


def st(i, lat=51.5, lon=-0.1):
    return Station(f"s{i}", f"Station {i}", lat, lon)


def test_two_stations_one_link():
    g = build_graph([st(0), st(1)], [Link(("s0", "s1"), {"L"})])
    np.testing.assert_array_equal(g.adjacency, [[0, 1], [1, 0]])
    np.testing.assert_array_equal(g.laplacian, [[1, -1], [-1, 1]])


def test_triangle_degrees():
    g = cycle(3)
    np.testing.assert_array_equal(np.diag(g.degree), [2, 2, 2])
    np.testing.assert_array_equal(g.laplacian.sum(axis=1), 0)


def test_validation_errors():
    with pytest.raises(GraphError, match="unknown"):
        build_graph([st(0), st(1)], [Link(("s0", "s9"), {"L"})])
    with pytest.raises(GraphError, match="duplicate"):
        build_graph([st(0), st(0)], [])
    with pytest.raises(GraphError, match="self-loop"):
        Link(("s0", "s0"), {"L"})
    with pytest.raises(GraphError, match="latitude"):
        Station("x", "x", 91.0, 0.0)
    with pytest.raises(GraphError, match="longitude"):
        Station("x", "x", 0.0, -181.0)


def test_parallel_lines_collapse():
    g = build_graph([st(0), st(1)], [Link(("s0", "s1"), {"A"}), Link(("s1", "s0"), {"B"})])
    assert len(g.links) == 1
    assert g.links[0].lines == {"A", "B"}
    assert g.adjacency[0, 1] == 1.0
    assert g.lines == {"A": (0, 1), "B": (0, 1)}


def test_is_connected():
    assert is_connected(path(4))
    assert not is_connected(graph_from_edges(4, [(0, 1), (2, 3)]))
    assert is_connected(graph_from_edges(1, []))


def _chord_distance_km(a, b):
    """Chord length on the unit sphere, converted to arc length (independent of haversine)."""

    def xyz(s):
        la, lo = math.radians(s.lat), math.radians(s.lon)
        return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])

    chord = np.linalg.norm(xyz(a) - xyz(b))
    return 2 * 6371.0 * math.asin(chord / 2)


def test_haversine():
    a = Station("a", "a", 51.5074, -0.1278)
    b = Station("b", "b", 51.5154, -0.1755)
    assert haversine_km(a, a) == 0.0
    d = haversine_km(a, b)
    assert d == pytest.approx(_chord_distance_km(a, b), abs=1e-9)
    assert d == pytest.approx(3.419, abs=1e-3)  # equirectangular hand check: 0.030739 deg * 111.195 km/deg
    assert haversine_km(b, a) == d


@pytest.mark.parametrize("seed", range(20))
def test_matrix_invariants(seed):
    g = random_connected(random.Random(seed), 3 + seed % 12, 0.2)
    a = g.adjacency_int
    assert np.array_equal(a, a.T)
    assert np.all(np.diag(a) == 0)
    assert set(np.unique(a)) <= {0, 1}
    assert np.all(g.laplacian_int @ np.ones(g.n, dtype=np.int64) == 0)


def test_index_is_stable_bijection():
    stations = [st(i) for i in (3, 1, 2)]
    g1 = build_graph(stations, [])
    g2 = build_graph(stations, [])
    assert g1.ids == ["s3", "s1", "s2"] == g2.ids
    assert [g1.index[s] for s in g1.ids] == [0, 1, 2]


def test_matrices_are_read_only(sample_graph):
    with pytest.raises(ValueError):
        sample_graph.adjacency[0, 0] = 5
