"""Regenerate the bundled synthetic sample network (stations, edges, flows, manifest).

    python tools/build_sample.py [OUTDIR]
"""

import csv
import json
import math
import sys
from pathlib import Path

from metrograph.graph import Link, Station, build_graph
from metrograph.synthetic import synthetic_flows

LAT0, LON0 = 51.5074, -0.1278
FLOW_SEED = 2016


def to_latlon(x_km, y_km):
    lat = LAT0 + y_km / 111.195
    lon = LON0 + x_km / (111.195 * math.cos(math.radians(LAT0)))
    return round(lat, 6), round(lon, 6)


def polar(r, deg):
    return r * math.cos(math.radians(deg)), r * math.sin(math.radians(deg))


def chain(prefix, name, start, direction, count, spacing=0.9):
    dx, dy = direction
    norm = math.hypot(dx, dy)
    dx, dy = dx / norm, dy / norm
    return [(f"{prefix}{i + 1}", f"{name} {i + 1}", start[0] + dx * spacing * (i + 1), start[1] + dy * spacing * (i + 1))
            for i in range(count)]


def layout():
    pts = [("CEN", "Central Cross", 0.0, 0.0)]
    ring_names = ["East Gate", "Northeast Gate", "North Gate", "Northwest Gate",
                  "West Gate", "Southwest Gate", "South Gate", "Southeast Gate"]
    ring_ids = ["RE", "RNE", "RN", "RNW", "RW", "RSW", "RS", "RSE"]
    ring = []
    for k, (sid, nm) in enumerate(zip(ring_ids, ring_names)):
        x, y = polar(1.4, 45 * k)
        ring.append((sid, nm, x, y))
    pts += ring
    pos = {p[0]: (p[2], p[3]) for p in pts}

    west = chain("W", "Westfield", pos["RW"], (-1, 0), 5)
    east = chain("E", "Eastmarsh", pos["RE"], (1, 0), 5)
    ne_branch = chain("EB", "Eastmarsh Heath", (east[1][2], east[1][3]), (1, 1), 2)
    north = chain("N", "Northbury", pos["RN"], (0, 1), 4)
    nw_branch = chain("NB", "Northbury Vale", (north[1][2], north[1][3]), (-1, 1), 2)
    south = chain("S", "Southwick", pos["RS"], (0, -1), 4)
    sw_branch = chain("SB", "Southwick Moor", (south[1][2], south[1][3]), (-1, -1), 2)
    spur_ne = chain("X", "Loop Spur North", pos["RNE"], polar(1, 45), 4)
    spur_sw = chain("Y", "Loop Spur South", pos["RSW"], polar(1, 225), 3)
    for group in (west, east, ne_branch, north, nw_branch, south, sw_branch, spur_ne, spur_sw):
        pts += group

    edges = []
    for a, b in zip(ring_ids, ring_ids[1:] + ring_ids[:1]):
        edges.append((a, b, "Loop"))

    def path(ids, line):
        for a, b in zip(ids, ids[1:]):
            edges.append((a, b, line))

    ids = lambda group: [p[0] for p in group]
    path(list(reversed(ids(west))) + ["RW", "CEN", "RE"] + ids(east), "Red")
    path([east[1][0]] + ids(ne_branch), "Red")
    path(list(reversed(ids(north))) + ["RN", "CEN", "RS"] + ids(south), "Blue")
    path([north[1][0]] + ids(nw_branch), "Blue")
    path([south[1][0]] + ids(sw_branch), "Blue")
    path(["RNE"] + ids(spur_ne), "Loop")
    path(["RSW"] + ids(spur_sw), "Loop")
    # Blue also serves Central Cross - East Gate, sharing the link with Red
    edges.append(("CEN", "RE", "Blue"))
    return pts, edges


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    pts, edges = layout()
    stations = []
    for sid, name, x, y in pts:
        lat, lon = to_latlon(x, y)
        zone = 1 if math.hypot(x, y) < 2.5 else 2
        stations.append(Station(sid, name, lat, lon, zone))
    g = build_graph(stations, [Link((a, b), frozenset([line])) for a, b, line in edges])

    with open(outdir / "stations.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "name", "lat", "lon", "zone"])
        for s in stations:
            w.writerow([s.id, s.name, f"{s.lat:.6f}", f"{s.lon:.6f}", s.zone])
    with open(outdir / "edges.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from_id", "to_id", "line"])
        for a, b, line in edges:
            w.writerow([a, b, line])

    flows, _ = synthetic_flows(g, FLOW_SEED)
    with open(outdir / "flows.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "entries_am", "exits_am", "entries_pm", "exits_pm"])
        for i, sid in enumerate(flows.ids):
            w.writerow([sid] + [int(getattr(flows, c)[i]) for c in ("entries_am", "exits_am", "entries_pm", "exits_pm")])

    manifest = {
        "name": "synthetic-sample",
        "synthetic": True,
        "description": "Synthetic hub-and-spoke metro network with a loop line; not real station data.",
        "stations": g.n,
        "links": len(g.links),
        "edge_rows": len(edges),
        "lines": sorted(g.lines),
        "flow_seed": FLOW_SEED,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(manifest, sort_keys=True))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/metrograph/data/sample")
