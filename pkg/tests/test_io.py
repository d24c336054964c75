import json

import numpy as np
import pytest

from recgraph.graph_io import (degree_sequence_from_csv,
                               degree_sequence_from_json,
                               degree_sequence_to_csv, ird_spec_from_csv,
                               ird_spec_from_json, load_digraph, save_digraph)
from recgraph.graphs import (DegreeSequence, DiGraph, GraphGenError,
                             generate_dcm)


def test_digraph_roundtrip(tmp_path):
    seq = DegreeSequence.from_pairs([(2, 1), (1, 2), (1, 1)])
    g = generate_dcm(seq, "raw", seed=3, attrs={"teleport": np.array([0.5, 1.0, 1.5])})
    path = tmp_path / "graph.edges"
    save_digraph(g, path)
    back = load_digraph(path)
    assert back.n == g.n
    assert sorted(back.edges()) == sorted(g.edges())
    assert back.mark_batch.attrs["teleport"].tolist() == [0.5, 1.0, 1.5]
    assert back.mode == "raw"


def test_edge_file_format(tmp_path):
    g = DiGraph.from_edges(3, [(2, 0), (1, 0)])
    path = tmp_path / "g.edges"
    save_digraph(g, path)
    assert path.read_text() == "1 0\n2 0\n"
    sidecar = json.loads((tmp_path / "g.edges.marks.json").read_text())
    assert sidecar["n"] == 3
    assert sidecar["marks"][0]["d_minus"] == 2


def test_missing_sidecar(tmp_path):
    path = tmp_path / "g.edges"
    path.write_text("0 1\n")
    with pytest.raises(GraphGenError):
        load_digraph(path)


def test_corrupt_sidecar_degrees(tmp_path):
    g = DiGraph.from_edges(2, [(0, 1)])
    path = tmp_path / "g.edges"
    save_digraph(g, path)
    side = tmp_path / "g.edges.marks.json"
    payload = json.loads(side.read_text())
    payload["marks"][0]["d_minus"] = 5
    side.write_text(json.dumps(payload))
    with pytest.raises(GraphGenError, match="disagree"):
        load_digraph(path)


def test_degree_sequence_csv(tmp_path):
    path = tmp_path / "deg.csv"
    path.write_text("# comment\n1,2\n2, 1\n")
    seq = degree_sequence_from_csv(path)
    assert seq.pairs == [(1, 2), (2, 1)]
    out = tmp_path / "deg2.csv"
    degree_sequence_to_csv(seq, out)
    assert degree_sequence_from_csv(out).pairs == seq.pairs
    empty = tmp_path / "empty.csv"
    empty.write_text("\n")
    with pytest.raises(GraphGenError):
        degree_sequence_from_csv(empty)


def test_degree_sequence_json(tmp_path):
    path = tmp_path / "deg.json"
    path.write_text(json.dumps({"pairs": [[1, 1], [1, 1]]}))
    assert degree_sequence_from_json(path).l_n == 2
    path.write_text(json.dumps({"d_minus": [1, 0], "d_plus": [0, 1]}))
    assert degree_sequence_from_json(path).pairs == [(1, 0), (0, 1)]


def test_ird_spec_csv_and_json(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    spec = ird_spec_from_csv(path)
    assert spec.n == 2
    # default scale is the mean of w_minus + w_plus
    assert spec.theta == pytest.approx(5.0)
    spec2 = ird_spec_from_csv(path, theta=2.0)
    assert spec2.theta == 2.0
    jpath = tmp_path / "w.json"
    jpath.write_text(json.dumps({"weights": [[1, 1], [2, 2]], "theta": 3.0}))
    assert ird_spec_from_json(jpath).theta == 3.0
