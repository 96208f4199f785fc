"""CSV ingestion, graph export and deterministic report serialisation."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .diffusion import FLOW_COLUMNS, FlowTable
from .graph import GraphError, Link, MetroGraph, Station, build_graph

STATION_HEADER = ["id", "name", "lat", "lon", "zone"]
EDGE_HEADER = ["from_id", "to_id", "line"]
FLOW_HEADER = ["station_id", *FLOW_COLUMNS]
SCHEMA_VERSION = 1


class DataValidationError(ValueError):
    """Input files failed validation; ``problems`` holds one message per offending row."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class Dataset:
    graph: MetroGraph
    flows: FlowTable | None
    digests: dict[str, str]


def sample_dir() -> Path:
    """Directory of the bundled synthetic sample network."""
    return Path(str(resources.files("metrograph") / "data" / "sample"))


def sample_paths() -> dict[str, Path]:
    d = sample_dir()
    return {"stations": d / "stations.csv", "edges": d / "edges.csv", "flows": d / "flows.csv"}


def _read_rows(path: Path, header: list[str]):
    label = Path(path).name
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except FileNotFoundError:
        raise DataValidationError([f"{label}: file not found"]) from None
    except UnicodeDecodeError as exc:
        raise DataValidationError([f"{label}: not valid UTF-8 ({exc.reason})"]) from None
    if text.startswith("\ufeff"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text))
    got = next(reader, None)
    if got != header:
        raise DataValidationError([f"{label} line 1: expected header {','.join(header)!r}, got {','.join(got or [])!r}"])
    rows = []
    problems = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            problems.append(f"{label} line {lineno}: expected {len(header)} fields, got {len(row)}")
            continue
        rows.append((lineno, [c.strip() for c in row]))
    return label, rows, problems


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_stations(path) -> list[Station]:
    label, rows, problems = _read_rows(path, STATION_HEADER)
    stations = []
    seen: dict[str, int] = {}
    for lineno, (sid, name, lat, lon, zone) in rows:
        if not sid:
            problems.append(f"{label} line {lineno}: empty station id")
            continue
        if sid in seen:
            problems.append(f"{label} line {lineno}: duplicate station {sid!r} (first on line {seen[sid]})")
            continue
        try:
            st = Station(sid, name, float(lat), float(lon), int(zone))
        except (ValueError, GraphError) as exc:
            problems.append(f"{label} line {lineno}: {exc}")
            continue
        if not (math.isfinite(st.lat) and math.isfinite(st.lon)):
            problems.append(f"{label} line {lineno}: non-finite coordinates")
            continue
        seen[sid] = lineno
        stations.append(st)
    if problems:
        raise DataValidationError(problems)
    if not stations:
        raise DataValidationError([f"{label}: no stations"])
    return stations


def load_links(path, station_ids) -> list[Link]:
    label, rows, problems = _read_rows(path, EDGE_HEADER)
    known = set(station_ids)
    seen: dict[tuple[str, str, str], int] = {}
    links = []
    for lineno, (a, b, line) in rows:
        bad = [s for s in (a, b) if s not in known]
        if bad:
            problems.append(f"{label} line {lineno}: unknown station {', '.join(repr(s) for s in bad)}")
            continue
        if a == b:
            problems.append(f"{label} line {lineno}: self-loop at {a!r}")
            continue
        if not line:
            problems.append(f"{label} line {lineno}: empty line name")
            continue
        key = (min(a, b), max(a, b), line)
        if key in seen:
            problems.append(f"{label} line {lineno}: duplicate of line {seen[key]} ({a}-{b} on {line})")
            continue
        seen[key] = lineno
        links.append(Link((a, b), frozenset([line])))
    if problems:
        raise DataValidationError(problems)
    return links


def load_flows(path, station_ids) -> FlowTable:
    label, rows, problems = _read_rows(path, FLOW_HEADER)
    known = list(station_ids)
    known_set = set(known)
    by_id: dict[str, list[float]] = {}
    first: dict[str, int] = {}
    mentioned = set()
    for lineno, (sid, *vals) in rows:
        mentioned.add(sid)
        if sid not in known_set:
            problems.append(f"{label} line {lineno}: unknown station {sid!r}")
            continue
        if sid in by_id:
            problems.append(f"{label} line {lineno}: duplicate flows for {sid!r} (first on line {first[sid]})")
            continue
        try:
            nums = [float(v) for v in vals]
        except ValueError:
            problems.append(f"{label} line {lineno}: non-numeric count")
            continue
        if not all(math.isfinite(v) for v in nums):
            problems.append(f"{label} line {lineno}: non-finite count")
            continue
        neg = [c for c, v in zip(FLOW_COLUMNS, nums) if v < 0]
        if neg:
            problems.append(f"{label} line {lineno}: negative {', '.join(neg)} for {sid!r}")
            continue
        by_id[sid] = nums
        first[sid] = lineno
    missing = [sid for sid in known if sid not in mentioned]
    if missing:
        problems.append(f"{label}: missing stations {', '.join(missing)}")
    if problems:
        raise DataValidationError(problems)
    cols = np.array([by_id[sid] for sid in known], dtype=float).reshape(len(known), 4)
    return FlowTable(tuple(known), *(cols[:, j] for j in range(4)))


def load_dataset(stations, edges, flows=None) -> Dataset:
    """Load and validate the CSV trio; row order of the stations file fixes vertex order."""
    st = load_stations(stations)
    links = load_links(edges, [s.id for s in st])
    g = build_graph(st, links)
    digests = {"stations": sha256_file(stations), "edges": sha256_file(edges)}
    table = None
    if flows is not None:
        table = load_flows(flows, g.ids)
        digests["flows"] = sha256_file(flows)
    return Dataset(graph=g, flows=table, digests=digests)


# -- export -----------------------------------------------------------------

def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(g: MetroGraph, fmt: str, plan=None) -> str:
    """DOT or GeoJSON text; links proposed by ``plan`` are flagged as added."""
    added = list(plan.added) if plan is not None else []
    if fmt == "dot":
        out = ["graph metro {"]
        for s in g.stations:
            out.append(f"  {_dot_quote(s.id)} [label={_dot_quote(s.id)}];")
        for lk in g.links:
            a, b = lk.endpoints
            out.append(f"  {_dot_quote(a)} -- {_dot_quote(b)} [lines={_dot_quote(';'.join(sorted(lk.lines)))}];")
        for a, b in added:
            out.append(f"  {_dot_quote(a)} -- {_dot_quote(b)} [added=true, style=dashed];")
        out.append("}")
        return "\n".join(out) + "\n"
    if fmt == "geojson":
        features: list[dict[str, Any]] = []
        for s in g.stations:
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
                "properties": {"id": s.id, "name": s.name, "zone": s.zone},
            })

        def line_feature(a, b, props):
            sa, sb = g.station(a), g.station(b)
            return {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[sa.lon, sa.lat], [sb.lon, sb.lat]]},
                "properties": {"from_id": a, "to_id": b, **props},
            }

        for lk in g.links:
            features.append(line_feature(*lk.endpoints, {"lines": sorted(lk.lines), "added": False}))
        for a, b in added:
            features.append(line_feature(a, b, {"lines": [], "added": True}))
        return dumps({"type": "FeatureCollection", "features": features}) + "\n"
    raise ValueError("export format must be 'dot' or 'geojson'")


# -- deterministic serialisation -------------------------------------------

def fmt_number(x) -> str:
    """Fixed 9-significant-digit rendering; integers stay integral."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0"
    return format(x, ".9g")


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj, indent: int = 0, step: int | None = None) -> str:
    """Canonical JSON: sorted keys, numbers via :func:`fmt_number`.

    ``step`` pretty-prints with that many spaces per level.
    """
    obj = _plain(obj)
    nl = "" if step is None else "\n"
    pad = "" if step is None else " " * (indent + step)
    end = "" if step is None else " " * indent
    sep = ", " if step is None else ","
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, float)):
        return fmt_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = [
            f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps(v, indent + (step or 0), step)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{" + nl + (sep + nl).join(inner) + nl + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        inner = [f"{pad}{dumps(v, indent + (step or 0), step)}" for v in obj]
        return "[" + nl + (sep + nl).join(inner) + nl + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def envelope(command: str, digests: dict[str, str], parameters: dict, result: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": {k: {"sha256": v} for k, v in sorted(digests.items())},
        "parameters": parameters,
        "result": result,
    }


def render_json(env: dict) -> str:
    return dumps(env, step=2) + "\n"


def render_csv(env: dict, columns: list[str], rows: list[list]) -> str:
    """Delimited table preceded by ``#`` metadata lines for the envelope's scalar fields."""
    buf = io.StringIO()
    buf.write(f"# schema_version: {env['schema_version']}\n")
    buf.write(f"# command: {env['command']}\n")
    for k, v in env["inputs"].items():
        buf.write(f"# input.{k}.sha256: {v['sha256']}\n")
    for k, v in sorted(env["parameters"].items()):
        buf.write(f"# parameter.{k}: {dumps(v)}\n")
    for k, v in sorted(env["result"].items()):
        if v is None or isinstance(v, (bool, int, float, str, np.floating, np.integer)):
            buf.write(f"# result.{k}: {dumps(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt_number(c) if isinstance(c, (int, float, np.number)) and not isinstance(c, bool) else
                    ("" if c is None else c) for c in row])
    return buf.getvalue()
