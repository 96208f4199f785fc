"""Fick's-law commuter model on the station graph.

Morning net out-flow at a station is taken proportional to the population
difference with its neighbours, ``q = -k L phi``.  Inverting with the
Laplacian pseudo-inverse recovers the resident population up to an additive
constant; estimates are shifted so the least populated station sits at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from .graph import GraphError, MetroGraph, is_connected
from .numerics import pseudo_inverse

DEFINITIONS = ("log", "linear")
WINDOWS = ("am", "pm")
FLOW_COLUMNS = ("entries_am", "exits_am", "entries_pm", "exits_pm")


class FlowError(ValueError):
    pass


class ZeroCountError(FlowError):
    def __init__(self, station: str, column: str):
        super().__init__(f"station {station!r} has zero {column}; the log net flow is undefined")
        self.station = station
        self.column = column


@dataclass(frozen=True)
class FlowTable:
    """Per-station passenger counts for the morning and evening rush windows."""

    ids: tuple[str, ...]
    entries_am: np.ndarray
    exits_am: np.ndarray
    entries_pm: np.ndarray
    exits_pm: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise FlowError("duplicate station in flow table")
        for col in FLOW_COLUMNS:
            arr = np.array(getattr(self, col), dtype=float)
            if arr.shape != (n,):
                raise FlowError(f"{col} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise FlowError(f"{col} has non-finite counts")
            bad = np.flatnonzero(arr < 0)
            if bad.size:
                raise FlowError(f"negative {col} at station {self.ids[bad[0]]!r}")
            arr.setflags(write=False)
            object.__setattr__(self, col, arr)

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "FlowTable":
        rows = list(records)
        return cls(
            ids=tuple(str(r["station_id"]) for r in rows),
            **{c: np.array([float(r[c]) for r in rows]) for c in FLOW_COLUMNS},
        )

    def aligned(self, g: MetroGraph) -> "FlowTable":
        """Reorder to the graph's vertex order; every station must be covered exactly."""
        pos = {sid: i for i, sid in enumerate(self.ids)}
        missing = [sid for sid in g.ids if sid not in pos]
        extra = sorted(set(self.ids) - set(g.ids))
        if missing:
            raise FlowError(f"flows missing for stations: {', '.join(missing)}")
        if extra:
            raise FlowError(f"flows reference unknown stations: {', '.join(extra)}")
        order = [pos[sid] for sid in g.ids]
        return FlowTable(tuple(g.ids), *(getattr(self, c)[order] for c in FLOW_COLUMNS))

    def window(self, window: str) -> tuple[np.ndarray, np.ndarray]:
        if window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")
        return getattr(self, f"entries_{window}"), getattr(self, f"exits_{window}")


@dataclass(frozen=True)
class NetFlowSignal:
    ids: tuple[str, ...]
    q: np.ndarray
    definition: str
    window: str


@dataclass(frozen=True)
class PopulationEstimate:
    ids: tuple[str, ...]
    phi_hat: np.ndarray
    diffusivity: float
    projected_offset: float

    def as_dict(self) -> dict[str, float]:
        return {sid: float(v) for sid, v in zip(self.ids, self.phi_hat)}


def net_flow(flows: FlowTable, definition: str = "log", window: str = "am") -> NetFlowSignal:
    """Net out-flow per station: ``ln(exits) - ln(entries)`` or ``exits - entries``."""
    if definition not in DEFINITIONS:
        raise ValueError(f"definition must be one of {DEFINITIONS}")
    entries, exits = flows.window(window)
    if definition == "linear":
        q = exits - entries
    else:
        for col, arr in ((f"entries_{window}", entries), (f"exits_{window}", exits)):
            zero = np.flatnonzero(arr <= 0)
            if zero.size:
                raise ZeroCountError(flows.ids[zero[0]], col)
        q = np.log(exits) - np.log(entries)
    q = np.array(q, dtype=float)
    q.setflags(write=False)
    return NetFlowSignal(ids=flows.ids, q=q, definition=definition, window=window)


def forward_flow(g: MetroGraph, phi, k: float = 1.0) -> np.ndarray:
    """Net flow implied by a population signal: ``-k L phi``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n,):
        raise ValueError(f"population vector has shape {phi.shape}, expected ({g.n},)")
    if not k > 0:
        raise ValueError("diffusivity must be positive")
    return -k * (g.laplacian @ phi)


@lru_cache(maxsize=16)
def laplacian_pinv(g: MetroGraph) -> np.ndarray:
    out = pseudo_inverse(g.laplacian)
    out.setflags(write=False)
    return out


def estimate_population(g: MetroGraph, q, k: float = 1.0) -> PopulationEstimate:
    """Relative resident population from a net-flow signal.

    ``q`` is first centred (its mean is reported as ``projected_offset``) so
    that it lies in the range of the Laplacian, then mapped through
    ``-(1/k) L^+`` and shifted to a minimum of exactly zero.
    """
    if isinstance(q, NetFlowSignal):
        if tuple(q.ids) != tuple(g.ids):
            raise ValueError("net-flow signal is not in the graph's station order")
        q = q.q
    q = np.asarray(q, dtype=float)
    if q.shape != (g.n,):
        raise ValueError(f"net-flow vector has shape {q.shape}, expected ({g.n},)")
    if not k > 0:
        raise ValueError("diffusivity must be positive")
    if not is_connected(g):
        raise GraphError("population recovery needs a connected graph")
    offset = float(q.mean())
    raw = -(laplacian_pinv(g) @ (q - offset)) / k
    phi = raw - raw.min()
    phi.setflags(write=False)
    return PopulationEstimate(ids=tuple(g.ids), phi_hat=phi, diffusivity=float(k), projected_offset=offset)
