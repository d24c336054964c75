"""Directed random graph generation and in-neighborhood exploration.

Two generators are provided: uniform half-edge pairing from a prescribed
degree sequence (raw / repeated-until-simple / erased variants) and
independent-edge digraphs with a product kernel on vertex weights.
Exploration walks edges backwards, so a vertex's depth-k neighborhood is
everything that can influence it within k steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import rng as streams
from .marks import MarkBatch, VertexMark


class GraphGenError(ValueError):
    pass


class PairingAttemptsExceeded(GraphGenError):
    pass


@dataclass(frozen=True)
class DegreeSequence:
    """Per-vertex (in, out) degree targets with matching half-edge totals."""

    d_minus: np.ndarray
    d_plus: np.ndarray

    def __post_init__(self):
        dm = np.asarray(self.d_minus, dtype=np.int64)
        dp = np.asarray(self.d_plus, dtype=np.int64)
        object.__setattr__(self, "d_minus", dm)
        object.__setattr__(self, "d_plus", dp)
        if dm.ndim != 1 or dm.size == 0 or dp.shape != dm.shape:
            raise GraphGenError("degree sequence must be nonempty with matching shapes")
        if (dm < 0).any() or (dp < 0).any():
            raise GraphGenError("degrees must be nonnegative")
        if int(dm.sum()) != int(dp.sum()):
            raise GraphGenError(
                f"half-edge totals differ: sum(in)={int(dm.sum())} != sum(out)={int(dp.sum())}")

    @property
    def n(self) -> int:
        return int(self.d_minus.size)

    @property
    def l_n(self) -> int:
        return int(self.d_minus.sum())

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return list(zip(self.d_minus.tolist(), self.d_plus.tolist()))

    @classmethod
    def from_pairs(cls, pairs) -> "DegreeSequence":
        arr = np.asarray(list(pairs), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GraphGenError("pairs must be a sequence of (d_minus, d_plus)")
        return cls(arr[:, 0], arr[:, 1])

    @classmethod
    def regular(cls, n: int, d: int) -> "DegreeSequence":
        return cls(np.full(n, d, dtype=np.int64), np.full(n, d, dtype=np.int64))


def iid_degree_sequence(n: int, values, probs=None, seed: int = 0) -> DegreeSequence:
    """Draw in/out degrees i.i.d. from a finite set, then balance the totals.

    Balancing nudges out-degrees of random vertices up or down within the
    value range; the perturbation is O(sqrt(n)) draws and vanishes in the
    empirical degree law as n grows.
    """
    vals = np.asarray(values, dtype=np.int64)
    if vals.size == 0 or (vals < 0).any():
        raise GraphGenError("degree values must be nonnegative and nonempty")
    gen = streams.stream(seed, streams.GRAPH, 1)
    dm = gen.choice(vals, size=n, p=probs)
    dp = gen.choice(vals, size=n, p=probs)
    lo, hi = int(vals.min()), int(vals.max())
    deficit = int(dm.sum() - dp.sum())  # out-stubs still needed
    while deficit != 0:
        i = int(gen.integers(0, n))
        if deficit > 0 and dp[i] < hi:
            dp[i] += 1
            deficit -= 1
        elif deficit < 0 and dp[i] > lo:
            dp[i] -= 1
            deficit += 1
    return DegreeSequence(dm, dp)


@dataclass(frozen=True)
class IrdSpec:
    """Independent-edge digraph spec: edge (i,j) appears w.p.
    1 ^ (w_plus[i] * w_minus[j] / (theta n)) * (1 + kernel_adjust(n, w_i, w_j))."""

    w_minus: np.ndarray
    w_plus: np.ndarray
    theta: float
    kernel_adjust: Optional[Callable] = None

    def __post_init__(self):
        wm = np.asarray(self.w_minus, dtype=float)
        wp = np.asarray(self.w_plus, dtype=float)
        object.__setattr__(self, "w_minus", wm)
        object.__setattr__(self, "w_plus", wp)
        if wm.ndim != 1 or wm.size == 0 or wp.shape != wm.shape:
            raise GraphGenError("weights must be nonempty with matching shapes")
        if not (np.isfinite(wm).all() and np.isfinite(wp).all()):
            raise GraphGenError("weights must be finite")
        if (wm < 0).any() or (wp < 0).any():
            raise GraphGenError("weights must be nonnegative")
        if not (self.theta > 0 and np.isfinite(self.theta)):
            raise GraphGenError("theta must be positive and finite")
        if self.kernel_adjust is not None:
            self._spot_check_kernel()

    def _spot_check_kernel(self):
        n = self.n
        gen = np.random.default_rng(0)
        idx = gen.integers(0, n, size=(min(64, n * n), 2))
        for i, j in idx:
            adj = self.kernel_adjust(n, (self.w_minus[i], self.w_plus[i]),
                                      (self.w_minus[j], self.w_plus[j]))
            if not adj > -1:
                raise GraphGenError(f"kernel_adjust must stay > -1, got {adj} at pair ({i},{j})")

    @property
    def n(self) -> int:
        return int(self.w_minus.size)

    @classmethod
    def from_weights(cls, pairs, theta: Optional[float] = None, kernel_adjust=None) -> "IrdSpec":
        arr = np.asarray(list(pairs), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GraphGenError("weights must be a sequence of (w_minus, w_plus)")
        if theta is None:
            theta = float((arr[:, 0] + arr[:, 1]).mean())
        return cls(arr[:, 0], arr[:, 1], theta, kernel_adjust)


@dataclass(frozen=True)
class DiGraph:
    """Immutable directed multigraph with per-vertex marks.

    Edges are stored once as (src, dst) arrays plus CSR views in both
    directions.  The in-CSR slot order defines the per-edge noise slots
    used by the recursion machinery.
    """

    n: int
    edge_src: np.ndarray
    edge_dst: np.ndarray
    in_ptr: np.ndarray
    in_src: np.ndarray
    out_ptr: np.ndarray
    out_dst: np.ndarray
    mark_batch: MarkBatch
    mode: str = "raw"

    @property
    def m(self) -> int:
        return int(self.edge_src.size)

    @property
    def in_degrees(self) -> np.ndarray:
        return self.mark_batch.d_minus

    @property
    def out_degrees(self) -> np.ndarray:
        return self.mark_batch.d_plus

    @cached_property
    def marks(self) -> List[VertexMark]:
        return self.mark_batch.marks()

    def in_neighbors(self, i: int) -> np.ndarray:
        return self.in_src[self.in_ptr[i]:self.in_ptr[i + 1]]

    def out_neighbors(self, i: int) -> np.ndarray:
        return self.out_dst[self.out_ptr[i]:self.out_ptr[i + 1]]

    def edges(self) -> List[Tuple[int, int]]:
        return list(zip(self.edge_src.tolist(), self.edge_dst.tolist()))

    @classmethod
    def from_edges(cls, n: int, edges, attrs: Optional[Dict[str, np.ndarray]] = None,
                   mode: str = "raw") -> "DiGraph":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise GraphGenError("edge endpoints out of range")
        return _assemble(n, arr[:, 0].copy(), arr[:, 1].copy(), attrs or {}, mode)


def _assemble(n: int, src: np.ndarray, dst: np.ndarray,
              attrs: Dict[str, np.ndarray], mode: str,
              extra_attrs: Optional[Dict[str, np.ndarray]] = None) -> DiGraph:
    order_in = np.argsort(dst, kind="stable")
    in_src = src[order_in]
    in_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(dst, minlength=n), out=in_ptr[1:])
    order_out = np.argsort(src, kind="stable")
    out_dst = dst[order_out]
    out_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=out_ptr[1:])
    all_attrs = {k: np.asarray(v, dtype=float) for k, v in attrs.items()}
    if extra_attrs:
        all_attrs.update(extra_attrs)
    batch = MarkBatch(np.diff(in_ptr), np.diff(out_ptr), all_attrs)
    for a in (src, dst, in_src, in_ptr, out_dst, out_ptr, batch.d_minus, batch.d_plus):
        a.setflags(write=False)
    return DiGraph(n, src, dst, in_ptr, in_src, out_ptr, out_dst, batch, mode)


def _pair_once(seq: DegreeSequence, gen: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    # Uniform pairing: outbound stub perm[i] is matched to inbound stub i,
    # equivalent to pairing one inbound stub at a time with a uniformly
    # chosen unpaired outbound stub.
    in_owner = np.repeat(np.arange(seq.n, dtype=np.int64), seq.d_minus)
    out_owner = np.repeat(np.arange(seq.n, dtype=np.int64), seq.d_plus)
    perm = gen.permutation(seq.l_n)
    return out_owner[perm], in_owner


def _is_simple(n: int, src: np.ndarray, dst: np.ndarray) -> bool:
    if (src == dst).any():
        return False
    codes = src * np.int64(n) + dst
    return np.unique(codes).size == codes.size


def generate_dcm(seq: DegreeSequence, mode: str = "raw", seed: int = 0,
                 attrs: Optional[Dict[str, np.ndarray]] = None,
                 max_attempts: int = 1000) -> DiGraph:
    """Random digraph by uniform pairing of inbound and outbound half-edges.

    mode "raw" keeps self-loops and parallel edges, "repeated" resamples
    until the graph is simple (failing loudly after max_attempts), and
    "erased" deletes self-loops and collapses parallel edges.  In erased
    mode the marks keep the realized degrees while the pre-erasure targets
    are stored in attrs orig_d_minus / orig_d_plus.
    """
    if mode not in ("raw", "repeated", "erased"):
        raise GraphGenError(f"unknown mode {mode!r}; use raw, repeated or erased")
    if attrs is not None:
        for k, v in attrs.items():
            if len(v) != seq.n:
                raise GraphGenError(f"attribute {k!r} has length {len(v)}, expected {seq.n}")
    gen = streams.stream(seed, streams.GRAPH)
    if mode == "repeated":
        for _ in range(max_attempts):
            src, dst = _pair_once(seq, gen)
            if _is_simple(seq.n, src, dst):
                return _assemble(seq.n, src, dst, attrs or {}, mode)
        raise PairingAttemptsExceeded(
            f"no simple pairing found within max_attempts={max_attempts}")
    src, dst = _pair_once(seq, gen)
    if mode == "raw":
        return _assemble(seq.n, src, dst, attrs or {}, mode)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    codes = np.unique(src * np.int64(seq.n) + dst)
    src, dst = codes // seq.n, codes % seq.n
    extra = {"orig_d_minus": seq.d_minus.astype(float),
             "orig_d_plus": seq.d_plus.astype(float)}
    return _assemble(seq.n, src, dst, attrs or {}, mode, extra_attrs=extra)


_IRD_BLOCK = 512  # fixed so draw order never depends on graph size


def generate_ird(spec: IrdSpec, seed: int = 0,
                 attrs: Optional[Dict[str, np.ndarray]] = None) -> DiGraph:
    """Independent-edge digraph with the product kernel on vertex weights."""
    n = spec.n
    gen = streams.stream(seed, streams.GRAPH)
    srcs, dsts = [], []
    scale = 1.0 / (spec.theta * n)
    for start in range(0, n, _IRD_BLOCK):
        stop = min(start + _IRD_BLOCK, n)
        rows = np.arange(start, stop)
        probs = np.multiply.outer(spec.w_plus[rows], spec.w_minus) * scale
        if spec.kernel_adjust is not None:
            adj = np.empty_like(probs)
            for a, i in enumerate(rows):
                wi = (spec.w_minus[i], spec.w_plus[i])
                adj[a] = [spec.kernel_adjust(n, wi, (spec.w_minus[j], spec.w_plus[j]))
                          for j in range(n)]
            probs = probs * (1.0 + adj)
        np.clip(probs, 0.0, 1.0, out=probs)
        probs[rows - start, rows] = 0.0  # no self-loops
        hit = gen.random(probs.shape) < probs
        r, c = np.nonzero(hit)
        srcs.append(rows[r])
        dsts.append(c)
    src = np.concatenate(srcs) if srcs else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dsts) if dsts else np.empty(0, dtype=np.int64)
    extra = {"w_minus": spec.w_minus.copy(), "w_plus": spec.w_plus.copy()}
    return _assemble(n, src.astype(np.int64), dst.astype(np.int64),
                     attrs or {}, "raw", extra_attrs=extra)


@dataclass
class RootedNeighborhood:
    """Depth-k inbound neighborhood of one vertex.

    layers[r] is the set of vertices with a directed path of length r into
    the root (layers may overlap on cyclic structures); is_tree says the
    induced subgraph on all explored vertices is exactly the exploration
    tree, in which case theta_map sends tuple labels (root = ()) to vertex
    ids, children numbered 1.. in in-edge slot order.
    """

    root: int
    depth: int
    layers: List[List[int]]
    edges: List[Tuple[int, int]]
    is_tree: bool
    theta_map: Optional[Dict[Tuple[int, ...], int]] = None


def explore_in_neighborhood(g: DiGraph, root: int, depth: int) -> RootedNeighborhood:
    """Breadth-first exploration of everything feeding into root within depth steps."""
    if not 0 <= root < g.n:
        raise GraphGenError(f"root {root} out of range for n={g.n}")
    if depth < 0:
        raise GraphGenError("depth must be >= 0")
    layers: List[List[int]] = [[root]]
    seen = {root}
    repeat = False
    for _ in range(depth):
        frontier = layers[-1]
        nxt: List[int] = []
        nxt_set = set()
        for u in frontier:
            for j in g.in_neighbors(u):
                j = int(j)
                if j in nxt_set:
                    repeat = True  # two parents or a parallel edge
                else:
                    nxt_set.add(j)
                    nxt.append(j)
        if nxt_set & seen:
            repeat = True
        seen |= nxt_set
        layers.append(sorted(nxt))
    induced = []
    for u in sorted(seen):
        for w in g.out_neighbors(u):
            if int(w) in seen:
                induced.append((u, int(w)))
    is_tree = (not repeat) and len(induced) == len(seen) - 1
    theta = _theta_map(g, root, depth) if is_tree else None
    return RootedNeighborhood(root, depth, [sorted(l) for l in layers], induced, is_tree, theta)


def _theta_map(g: DiGraph, root: int, depth: int) -> Dict[Tuple[int, ...], int]:
    theta = {(): root}
    frontier = [((), root)]
    for _ in range(depth):
        nxt = []
        for label, u in frontier:
            for idx, j in enumerate(g.in_neighbors(u), start=1):
                child = label + (idx,)
                theta[child] = int(j)
                nxt.append((child, int(j)))
        frontier = nxt
    return theta


def tree_likeness_rate(g: DiGraph, depth: int, sample_size: int, seed: int = 0) -> float:
    """Fraction of uniformly sampled roots whose depth-k neighborhood is a tree."""
    if sample_size < 1:
        raise GraphGenError("sample_size must be >= 1")
    gen = streams.stream(seed, streams.ROOTS)
    roots = gen.integers(0, g.n, size=sample_size)
    hits = sum(explore_in_neighborhood(g, int(r), depth).is_tree for r in roots)
    return hits / sample_size


def complete_digraph(n: int) -> DiGraph:
    """All ordered pairs (i, j), i != j; handy as a maximally cyclic fixture."""
    src, dst = np.nonzero(~np.eye(n, dtype=bool))
    return DiGraph.from_edges(n, np.stack([src, dst], axis=1))
