"""File formats: edge-list text ("u v" per line, zero-based) with a JSON
sidecar for marks, and CSV/JSON readers for degree sequences and
independent-edge specs."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .graphs import DegreeSequence, DiGraph, GraphGenError, IrdSpec

PathLike = Union[str, Path]


def _sidecar(path: PathLike) -> Path:
    return Path(str(path) + ".marks.json")


def save_digraph(g: DiGraph, path: PathLike) -> None:
    """Write edges in canonical (src, dst) order plus the marks sidecar."""
    path = Path(path)
    order = np.lexsort((g.edge_dst, g.edge_src))
    lines = [f"{int(g.edge_src[i])} {int(g.edge_dst[i])}" for i in order]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))
    payload = {
        "n": g.n,
        "mode": g.mode,
        "marks": [
            {"d_minus": int(m.d_minus), "d_plus": int(m.d_plus), "attr": m.attr}
            for m in g.marks
        ],
    }
    _sidecar(path).write_text(json.dumps(payload, indent=1, sort_keys=True))


def load_digraph(path: PathLike) -> DiGraph:
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise GraphGenError(f"missing marks sidecar {side}")
    payload = json.loads(side.read_text())
    n = int(payload["n"])
    edges = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        u, v = line.split()
        edges.append((int(u), int(v)))
    attr_keys = sorted({k for m in payload["marks"] for k in m.get("attr", {})})
    attrs = {k: np.array([m.get("attr", {}).get(k, 0.0) for m in payload["marks"]])
             for k in attr_keys}
    g = DiGraph.from_edges(n, edges, attrs=attrs, mode=payload.get("mode", "raw"))
    for i, m in enumerate(payload["marks"]):
        if g.in_degrees[i] != m["d_minus"] or g.out_degrees[i] != m["d_plus"]:
            raise GraphGenError(
                f"sidecar degrees disagree with edge list at vertex {i}")
    return g


def degree_sequence_from_csv(path: PathLike) -> DegreeSequence:
    """One vertex per row: d_minus,d_plus (comma or whitespace separated)."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        rows.append((int(parts[0]), int(parts[1])))
    if not rows:
        raise GraphGenError(f"no degree rows found in {path}")
    return DegreeSequence.from_pairs(rows)


def degree_sequence_from_json(path: PathLike) -> DegreeSequence:
    obj = json.loads(Path(path).read_text())
    if "pairs" in obj:
        return DegreeSequence.from_pairs(obj["pairs"])
    return DegreeSequence(np.asarray(obj["d_minus"]), np.asarray(obj["d_plus"]))


def degree_sequence_to_csv(seq: DegreeSequence, path: PathLike) -> None:
    lines = [f"{int(a)},{int(b)}" for a, b in zip(seq.d_minus, seq.d_plus)]
    Path(path).write_text("\n".join(lines) + "\n")


def ird_spec_from_csv(path: PathLike, theta: Optional[float] = None) -> IrdSpec:
    """One vertex per row: w_minus,w_plus.  theta defaults to the empirical
    mean of w_minus + w_plus, the scaling the kernel normalizes by."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        rows.append((float(parts[0]), float(parts[1])))
    if not rows:
        raise GraphGenError(f"no weight rows found in {path}")
    return IrdSpec.from_weights(rows, theta=theta)


def ird_spec_from_json(path: PathLike) -> IrdSpec:
    obj = json.loads(Path(path).read_text())
    return IrdSpec.from_weights(obj["weights"], theta=obj.get("theta"))
