import json
import subprocess
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphgen import path
from metrograph.dataio import (
    DataValidationError,
    dumps,
    export_graph,
    fmt_number,
    load_dataset,
    render_csv,
    envelope,
    sample_dir,
)
from metrograph.robustness import augment

STATIONS = "id,name,lat,lon,zone\na,Alpha,51.50,-0.10,1\nb,Beta,51.51,-0.11,1\nc,Gamma,51.52,-0.12,2\n"
EDGES = "from_id,to_id,line\na,b,Red\nb,c,Red\n"
FLOWS = "station_id,entries_am,exits_am,entries_pm,exits_pm\na,10,20,20,10\nb,5,5,5,5\nc,30,2,2,30\n"


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return _write


def trio(write, stations=STATIONS, edges=EDGES, flows=FLOWS):
    return write("stations.csv", stations), write("edges.csv", edges), write("flows.csv", flows)


def test_sample_matches_manifest(sample):
    manifest = json.loads((sample_dir() / "manifest.json").read_text())
    assert manifest["synthetic"] is True
    g = sample.graph
    assert g.n == manifest["stations"]
    assert len(g.links) == manifest["links"]
    assert sorted(g.lines) == manifest["lines"]
    rows = (sample_dir() / "edges.csv").read_text().strip().splitlines()
    assert len(rows) - 1 == manifest["edge_rows"]
    assert sample.flows.ids == tuple(g.ids)


def test_small_trio_loads(write):
    ds = load_dataset(*trio(write))
    assert ds.graph.ids == ["a", "b", "c"]
    assert len(ds.graph.links) == 2
    assert ds.flows.entries_am.tolist() == [10, 5, 30]
    assert set(ds.digests) == {"stations", "edges", "flows"}


def test_bom_is_accepted(write):
    ds = load_dataset(*trio(write, stations="﻿" + STATIONS))
    assert ds.graph.n == 3


def _problems(write, **kw):
    with pytest.raises(DataValidationError) as exc:
        load_dataset(*trio(write, **kw))
    return exc.value.problems


def test_unknown_station_in_edges(write):
    probs = _problems(write, edges=EDGES + "c,zz,Blue\n")
    assert probs == ["edges.csv line 4: unknown station 'zz'"]


def test_missing_flow_station(write):
    probs = _problems(write, flows=FLOWS.rsplit("c,", 1)[0])
    assert probs == ["flows.csv: missing stations c"]


def test_duplicate_station(write):
    probs = _problems(write, stations=STATIONS + "a,Again,51.0,0.0,1\n")
    assert "line 5" in probs[0] and "duplicate station 'a'" in probs[0]


def test_reversed_duplicate_edge(write):
    probs = _problems(write, edges=EDGES + "b,a,Red\n")
    assert probs[0].startswith("edges.csv line 4: duplicate of line 2")


def test_same_pair_on_another_line_is_allowed(write):
    ds = load_dataset(*trio(write, edges=EDGES + "b,a,Blue\n"))
    assert ds.graph.links[0].lines == {"Red", "Blue"}


def test_negative_count(write):
    probs = _problems(write, flows=FLOWS.replace("b,5,5,5,5", "b,5,-5,5,5"))
    assert probs == ["flows.csv line 3: negative exits_am for 'b'"]


def test_bad_header(write):
    probs = _problems(write, stations=STATIONS.replace("zone", "fare_zone"))
    assert probs[0].startswith("stations.csv line 1: expected header")


def test_all_problems_reported(write):
    probs = _problems(write, edges=EDGES + "a,a,Red\nq,r,Red\n")
    assert [p.split(":")[0] for p in probs] == ["edges.csv line 4", "edges.csv line 5"]


def test_missing_file(tmp_path):
    with pytest.raises(DataValidationError, match="file not found"):
        load_dataset(tmp_path / "nope.csv", tmp_path / "nope2.csv")


def test_dot_single_link():
    text = export_graph(path(2), "dot")
    assert sum(" -- " in line for line in text.splitlines()) == 1
    assert '"p0" [label="p0"];' in text


def test_geojson_counts(sample_graph):
    doc = json.loads(export_graph(sample_graph, "geojson"))
    feats = doc["features"]
    assert len(feats) == sample_graph.n + len(sample_graph.links)
    first = feats[0]
    s = sample_graph.stations[0]
    assert first["geometry"]["coordinates"] == [s.lon, s.lat]


def test_geojson_added_edges_match_plan(sample_graph):
    plan = augment(sample_graph, 2, 2.0)
    doc = json.loads(export_graph(sample_graph, "geojson", plan))
    added = [f for f in doc["features"] if f["properties"].get("added") is True]
    assert len(added) == plan.size
    assert {(f["properties"]["from_id"], f["properties"]["to_id"]) for f in added} == set(plan.added)
    dot = export_graph(sample_graph, "dot", plan)
    assert dot.count("added=true") == plan.size


def test_unknown_export_format():
    with pytest.raises(ValueError):
        export_graph(path(2), "svg")


@pytest.mark.parametrize("x,expected", [
    (1 / 3, "0.333333333"),
    (52395, "52395"),
    (2.0, "2"),
    (0.0, "0"),
    (-0.0, "0"),
    (1.23456789012e-7, "1.23456789e-07"),
    (float("nan"), "null"),
    (True, "true"),
])
def test_number_format(x, expected):
    assert fmt_number(x) == expected


def test_dumps_sorted_and_stable():
    a = dumps({"b": [1, 2.5], "a": {"y": None, "x": "é"}})
    assert a == '{"a": {"x": "é", "y": null}, "b": [1, 2.5]}'
    assert json.loads(dumps({"k": 1 / 7}, step=2)) == {"k": 0.142857143}


def test_csv_metadata_lines():
    env = envelope("augment", {"edges": "ab", "stations": "cd"}, {"k": 2}, {"size": 3, "added": []})
    text = render_csv(env, ["from_id", "to_id"], [["a", "b"]])
    lines = text.splitlines()
    assert lines[:6] == [
        "# schema_version: 1",
        "# command: augment",
        "# input.edges.sha256: ab",
        "# input.stations.sha256: cd",
        "# parameter.k: 2",
        "# result.size: 3",
    ]
    assert lines[6:] == ["from_id,to_id", "a,b"]


@settings(max_examples=300, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_number_format_keeps_nine_significant_digits(x):
    text = fmt_number(x)
    back = float(text)
    assert back == pytest.approx(x, rel=5e-9, abs=0.0) or (x == 0 and back == 0)
    assert fmt_number(back) == text


def test_sample_is_reproducible_from_generator(tmp_path):
    tools = Path(__file__).resolve().parents[1] / "tools" / "build_sample.py"
    if not tools.exists():
        pytest.skip("generator script not shipped")
    subprocess.run([sys.executable, str(tools), str(tmp_path)], check=True)
    for name in ("stations.csv", "edges.csv", "flows.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (sample_dir() / name).read_bytes(), name
