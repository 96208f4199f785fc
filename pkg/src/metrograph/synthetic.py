"""Seeded synthetic passenger flows generated by the diffusion model.

A smooth resident-population signal ``phi`` drives both rush hours:

* morning log net out-flow ``q_am = -k L phi`` (adjacent-station diffusion);
* evening log net out-flow ``q_pm = k L_H phi``, with ``L_H = Dv - M De^-1 M^T``
  the unnormalised hypergraph Laplacian, so return trips spread along whole
  lines as well as between neighbours.

Each signal gets Gaussian noise with standard deviation ``noise`` times the
signal's own standard deviation.  Counts are ``b * exp(-+q/2)`` around a
station volume ``b`` shared by both windows, rounded to whole passengers.
"""

from __future__ import annotations

import numpy as np

from .diffusion import FlowTable
from .graph import MetroGraph, Station, haversine_km
from .hypernet import build_hypergraph
from .numerics import Rng


def population_signal(g: MetroGraph, rng: Rng, smoothing: float = 1.0) -> np.ndarray:
    """Residents grow with distance from the network centroid, plus smooth random variation."""
    lat = np.mean([s.lat for s in g.stations])
    lon = np.mean([s.lon for s in g.stations])
    centre = Station("_c", "_c", float(lat), float(lon))
    r = np.array([haversine_km(centre, s) for s in g.stations])
    radial = r / max(r.max(), 1e-12)
    z = rng.normal_array((g.n,))
    smooth = np.linalg.solve(np.eye(g.n) + smoothing * g.laplacian, z)
    smooth = smooth / max(np.std(smooth), 1e-12)
    phi = 2.0 * radial + 0.5 * smooth
    return phi - phi.min()


def hypergraph_laplacian(g: MetroGraph) -> np.ndarray:
    h = build_hypergraph(g)
    m = h.incidence
    return np.diag(h.vertex_degrees) - (m / h.edge_degrees[None, :]) @ m.T


def synthetic_flows(
    g: MetroGraph,
    seed: int,
    noise: float = 0.1,
    k: float = 1.0,
    base_volume: float = 8000.0,
) -> tuple[FlowTable, np.ndarray]:
    """Return the flow table and the population signal that generated it."""
    rng = Rng(seed)
    phi = population_signal(g, rng)
    q_am = -k * (g.laplacian @ phi)
    q_pm = k * (hypergraph_laplacian(g) @ phi)
    q_am = q_am + noise * np.std(q_am) * rng.normal_array((g.n,))
    q_pm = q_pm + noise * np.std(q_pm) * rng.normal_array((g.n,))
    volume = base_volume * np.exp(rng.uniform_array((g.n,), -0.5, 0.5))

    def counts(q):
        entries = np.maximum(1.0, np.rint(volume * np.exp(-q / 2.0)))
        exits = np.maximum(1.0, np.rint(volume * np.exp(q / 2.0)))
        return entries, exits

    e_am, x_am = counts(q_am)
    e_pm, x_pm = counts(q_pm)
    return FlowTable(tuple(g.ids), e_am, x_am, e_pm, x_pm), phi
