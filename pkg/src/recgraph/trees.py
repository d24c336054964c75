"""Branching-tree limits: spec construction, tree sampling, the recursion on
a sampled tree, and the pool-based fixed-point solver.

A tree spec holds two node laws, one for the root and one shared by all
other nodes: each law samples (offspring count, mark) jointly.  The pool
solver maintains M i.i.d. approximations of the non-root value law and
refreshes them by applying the composed update to resampled pool members;
root-law applications of the raw update then give the root value law.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import laws as L
from . import rng as streams
from .distances import EmpiricalDist, wasserstein_p
from .graphs import DegreeSequence, IrdSpec
from .marks import MarkBatch, VertexMark
from .models import ModelEvaluationError, RecursionModel


class TreeSizeError(RuntimeError):
    pass


class PopulationExplosionError(RuntimeError):
    pass


class NonContractionError(RuntimeError):
    def __init__(self, msg: str, trace: Optional[List[float]] = None):
        super().__init__(msg)
        self.trace = trace or []


@dataclass
class NodeLaw:
    """Joint sampler of (offspring count, mark) for one node class."""

    sample: Callable[[np.random.Generator], Tuple[int, VertexMark]]
    sample_batch: Optional[Callable[[np.random.Generator, int], MarkBatch]] = None
    describe: dict = field(default_factory=dict)


@dataclass
class GWTreeSpec:
    root_law: NodeLaw
    body_law: NodeLaw
    source: str = "explicit"

    def describe(self) -> dict:
        return {"source": self.source, "root": self.root_law.describe,
                "body": self.body_law.describe}


def _table_law(d_minus: np.ndarray, d_plus: np.ndarray, weights: np.ndarray,
               attr_cols: Dict[str, np.ndarray], attr_laws: Dict[str, L.Law],
               describe: dict) -> NodeLaw:
    """Law that picks a table row by weight; offspring is the row's d_minus.

    Column attributes travel with the row; law attributes are drawn i.i.d.
    """
    d_minus = np.asarray(d_minus, dtype=np.int64)
    d_plus = np.asarray(d_plus, dtype=np.int64)
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    law_items = sorted(attr_laws.items())

    def sample(rng: np.random.Generator) -> Tuple[int, VertexMark]:
        i = int(rng.choice(len(w), p=w))
        attr = {k: float(v[i]) for k, v in attr_cols.items()}
        attr.update({k: float(law.sample(rng)) for k, law in law_items})
        return int(d_minus[i]), VertexMark(int(d_minus[i]), int(d_plus[i]), attr)

    def sample_batch(rng: np.random.Generator, size: int) -> MarkBatch:
        idx = rng.choice(len(w), size=size, p=w)
        attrs = {k: v[idx].astype(float) for k, v in attr_cols.items()}
        attrs.update({k: np.asarray(law.sample(rng, size), dtype=float)
                      for k, law in law_items})
        return MarkBatch(d_minus[idx], d_plus[idx], attrs)

    return NodeLaw(sample, sample_batch, describe)


def _zero_offspring_law(attr_laws: Dict[str, L.Law]) -> NodeLaw:
    law_items = sorted(attr_laws.items())

    def sample(rng):
        attr = {k: float(law.sample(rng)) for k, law in law_items}
        return 0, VertexMark(0, 0, attr)

    def sample_batch(rng, size):
        z = np.zeros(size, dtype=np.int64)
        return MarkBatch(z, z.copy(), {k: np.asarray(law.sample(rng, size), dtype=float)
                                       for k, law in law_items})

    return NodeLaw(sample, sample_batch, {"kind": "leaf_only"})


def spec_from_degree_sequence(seq: DegreeSequence,
                              attr_cols: Optional[Dict[str, np.ndarray]] = None,
                              attr_laws: Optional[Dict[str, L.Law]] = None) -> GWTreeSpec:
    """Limit spec of the half-edge pairing family for a fixed degree table.

    Root: a uniform vertex contributes (in-degree, mark).  Non-root: a
    vertex picked proportionally to its out-degree contributes the same,
    reflecting that non-root nodes are reached along one of their out-edges.
    """
    cols = {k: np.asarray(v, dtype=float) for k, v in (attr_cols or {}).items()}
    laws = dict(attr_laws or {})
    root = _table_law(seq.d_minus, seq.d_plus, np.ones(seq.n), cols, laws,
                      {"kind": "degree_table", "bias": "uniform"})
    if seq.l_n == 0:
        body = _zero_offspring_law(laws)
    else:
        body = _table_law(seq.d_minus, seq.d_plus, seq.d_plus.astype(float), cols, laws,
                          {"kind": "degree_table", "bias": "out_degree"})
    return GWTreeSpec(root, body, source="dcm_limit")


def spec_from_joint_degree_law(probs, d_minus, d_plus,
                               attr_laws: Optional[Dict[str, L.Law]] = None) -> GWTreeSpec:
    """Limit spec from an exact joint (in, out) degree law given as atoms."""
    probs = np.asarray(probs, dtype=float)
    dm = np.asarray(d_minus, dtype=np.int64)
    dp = np.asarray(d_plus, dtype=np.int64)
    if not (len(probs) == len(dm) == len(dp)) or len(probs) == 0:
        raise ValueError("need matching nonempty atom arrays")
    if abs(probs.sum() - 1.0) > 1e-9 or (probs < 0).any():
        raise ValueError("probs must be a probability vector")
    laws = dict(attr_laws or {})
    root = _table_law(dm, dp, probs, {}, laws, {"kind": "joint_atoms", "bias": "plain"})
    size_bias = probs * dp
    if size_bias.sum() == 0:
        body = _zero_offspring_law(laws)
    else:
        body = _table_law(dm, dp, size_bias, {}, laws,
                          {"kind": "joint_atoms", "bias": "out_degree"})
    return GWTreeSpec(root, body, source="dcm_limit")


def spec_from_ird(spec: IrdSpec,
                  attr_laws: Optional[Dict[str, L.Law]] = None) -> GWTreeSpec:
    """Mixed-Poisson limit spec of the independent-edge family.

    Offspring of a node with weight pair (wm, wp) is Poisson(wm * mean
    out-weight / theta).  Non-root nodes take a weight pair size-biased by
    out-weight and carry out-degree 1 + Poisson (the edge they were reached
    along, plus the independent rest); the root's out-degree is plain
    Poisson.
    """
    n = spec.n
    mean_wp = float(spec.w_plus.mean())
    mean_wm = float(spec.w_minus.mean())
    laws = dict(attr_laws or {})
    law_items = sorted(laws.items())

    def make(bias_wp: bool, extra_out: int, describe) -> NodeLaw:
        if bias_wp:
            tot = spec.w_plus.sum()
            if tot == 0:
                return _zero_offspring_law(laws)
            w = spec.w_plus / tot
        else:
            w = np.full(n, 1.0 / n)

        def sample(rng):
            i = int(rng.choice(n, p=w))
            noff = int(rng.poisson(spec.w_minus[i] * mean_wp / spec.theta))
            dp = extra_out + int(rng.poisson(spec.w_plus[i] * mean_wm / spec.theta))
            attr = {"w_minus": float(spec.w_minus[i]), "w_plus": float(spec.w_plus[i])}
            attr.update({k: float(law.sample(rng)) for k, law in law_items})
            return noff, VertexMark(noff, dp, attr)

        def sample_batch(rng, size):
            idx = rng.choice(n, size=size, p=w)
            noff = rng.poisson(spec.w_minus[idx] * mean_wp / spec.theta)
            dp = extra_out + rng.poisson(spec.w_plus[idx] * mean_wm / spec.theta)
            attrs = {"w_minus": spec.w_minus[idx].copy(), "w_plus": spec.w_plus[idx].copy()}
            attrs.update({k: np.asarray(law.sample(rng, size), dtype=float)
                          for k, law in law_items})
            return MarkBatch(noff.astype(np.int64), dp.astype(np.int64), attrs)

        return NodeLaw(sample, sample_batch, describe)

    root = make(False, 0, {"kind": "ird_limit", "bias": "uniform"})
    body = make(True, 1, {"kind": "ird_limit", "bias": "out_weight"})
    return GWTreeSpec(root, body, source="ird_limit")


def spec_explicit(offspring: L.Law, d_plus: L.Law,
                  attr_laws: Optional[Dict[str, L.Law]] = None,
                  root_offspring: Optional[L.Law] = None,
                  root_d_plus: Optional[L.Law] = None) -> GWTreeSpec:
    """Spec with user-chosen laws; the sampled offspring count doubles as the
    node's in-degree mark."""
    laws = dict(attr_laws or {})
    law_items = sorted(laws.items())

    def make(off: L.Law, dpl: L.Law, describe) -> NodeLaw:
        def sample(rng):
            noff = int(round(float(off.sample(rng))))
            dp = int(round(float(dpl.sample(rng))))
            attr = {k: float(law.sample(rng)) for k, law in law_items}
            return noff, VertexMark(noff, dp, attr)

        def sample_batch(rng, size):
            noff = np.rint(np.asarray(off.sample(rng, size), dtype=float)).astype(np.int64)
            dp = np.rint(np.asarray(dpl.sample(rng, size), dtype=float)).astype(np.int64)
            attrs = {k: np.asarray(law.sample(rng, size), dtype=float)
                     for k, law in law_items}
            return MarkBatch(noff, dp, attrs)

        return NodeLaw(sample, sample_batch, describe)

    body = make(offspring, d_plus,
                {"kind": "explicit", "offspring": offspring.to_json(), "d_plus": d_plus.to_json()})
    root = make(root_offspring or offspring, root_d_plus or d_plus,
                {"kind": "explicit",
                 "offspring": (root_offspring or offspring).to_json(),
                 "d_plus": (root_d_plus or d_plus).to_json()})
    return GWTreeSpec(root, body, source="explicit")


def spec_regular(d: int, attr_laws: Optional[Dict[str, L.Law]] = None) -> GWTreeSpec:
    """Every node has exactly d offspring and out-degree d."""
    return spec_from_joint_degree_law([1.0], [d], [d], attr_laws)


def spec_from_json(obj: dict) -> GWTreeSpec:
    """Parse a tree spec from a JSON-style dict; see README for the schema."""
    source = obj.get("source", "explicit")
    attr_laws = {k: L.Law.from_json(v) for k, v in obj.get("attr", {}).items()}
    if source == "dcm_limit":
        if "pairs" in obj:
            seq = DegreeSequence.from_pairs(obj["pairs"])
        elif "degree_file" in obj:
            from .graph_io import degree_sequence_from_csv
            seq = degree_sequence_from_csv(obj["degree_file"])
        else:
            raise ValueError("dcm_limit spec needs 'pairs' or 'degree_file'")
        return spec_from_degree_sequence(seq, attr_laws=attr_laws)
    if source == "ird_limit":
        ird = IrdSpec.from_weights(obj["weights"], obj.get("theta"))
        return spec_from_ird(ird, attr_laws=attr_laws)
    if source == "explicit":
        if "atoms" in obj:
            atoms = obj["atoms"]
            return spec_from_joint_degree_law(
                [a["weight"] for a in atoms], [a["d_minus"] for a in atoms],
                [a["d_plus"] for a in atoms], attr_laws=attr_laws)
        body = obj["body"]
        root = obj.get("root", body)
        return spec_explicit(
            L.Law.from_json(body["offspring"]), L.Law.from_json(body["d_plus"]),
            attr_laws=attr_laws,
            root_offspring=L.Law.from_json(root["offspring"]),
            root_d_plus=L.Law.from_json(root["d_plus"]))
    raise ValueError(f"unknown tree spec source {source!r}")


@dataclass
class MarkedTree:
    """Finite tree with tuple labels; generation r holds the depth-r labels."""

    nodes: Dict[Tuple[int, ...], VertexMark]
    generations: List[List[Tuple[int, ...]]]

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    def __len__(self) -> int:
        return len(self.nodes)


def sample_tree(spec: GWTreeSpec, depth: int, seed: int = 0,
                node_cap: int = 10_000_000) -> MarkedTree:
    """Sample the first `depth` generations; aborts if the tree outgrows node_cap."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    gen = streams.stream(seed, streams.TREE)
    noff, mark = spec.root_law.sample(gen)
    nodes = {(): mark}
    generations: List[List[Tuple[int, ...]]] = [[()]]
    counts = {(): noff}
    for _ in range(depth):
        nxt: List[Tuple[int, ...]] = []
        for label in generations[-1]:
            for j in range(1, counts[label] + 1):
                child = label + (j,)
                noff, mark = spec.body_law.sample(gen)
                nodes[child] = mark
                counts[child] = noff
                nxt.append(child)
                if len(nodes) > node_cap:
                    raise TreeSizeError(
                        f"tree exceeded node_cap={node_cap} while filling depth {len(generations)}")
        generations.append(nxt)
    return MarkedTree(nodes, generations)


def tree_recursion(t: MarkedTree, model: RecursionModel, init: L.InitialLaw,
                   seed: int = 0) -> float:
    """Root value after t.depth update rounds on the sampled tree.

    Depth-k nodes start from g(initial draw, mark); interior nodes apply the
    composed update upward; the root applies the raw update.  Fresh noise
    per node and per child edge.
    """
    k = t.depth
    leaves = t.generations[k]
    init_rng = streams.stream(seed, streams.INIT)
    r0 = L.draw_initial(init, max(len(leaves), 1), init_rng)
    if k == 0:
        return float(r0[0])
    vals: Dict[Tuple[int, ...], float] = {
        lab: model.g(float(r0[i]), t.nodes[lab]) for i, lab in enumerate(leaves)}
    for r in range(1, k + 1):
        level = t.generations[k - r]
        zrng = streams.stream(seed, streams.ZETA, r)
        xrng = streams.stream(seed, streams.XI, r)
        zeta = model.zeta_law.sample(zrng, len(level)) if model.zeta_law else None
        new_vals: Dict[Tuple[int, ...], float] = {}
        for i, lab in enumerate(level):
            mark = t.nodes[lab]
            children = [lab + (j,) for j in range(1, mark.d_minus + 1)]
            xi = model.xi_law.sample(xrng, len(children)) if model.xi_law \
                else [None] * len(children)
            inputs = [(vals[ch], xi[j]) for j, ch in enumerate(children)]
            z = float(zeta[i]) if zeta is not None else None
            out = model.phi(mark, z, inputs)
            if not np.isfinite(out):
                raise ModelEvaluationError(
                    f"non-finite value at tree node {lab!r}, round {r}")
            new_vals[lab] = out if r == k else model.g(out, mark)
        vals = new_vals
    return float(vals[()])


@dataclass
class SamplePool:
    """M i.i.d. approximations of the non-root value law at one generation."""

    values: np.ndarray
    generation: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size < 1 or not np.isfinite(v).all():
            raise ValueError("pool values must be nonempty and finite")
        self.values = v

    def dist(self) -> EmpiricalDist:
        return EmpiricalDist.from_samples(self.values)


def _pool_refresh(pool: np.ndarray, spec: GWTreeSpec, model: RecursionModel,
                  rng: np.random.Generator, root_step: bool) -> np.ndarray:
    """One synchronous refresh: body/root draws + uniform resampling of pool."""
    M = pool.size
    law = spec.root_law if root_step else spec.body_law
    if model.has_fast_path and law.sample_batch is not None:
        batch = law.sample_batch(rng, M)
        total = int(batch.d_minus.sum())
        idx = rng.integers(0, M, size=total)
        owner = np.repeat(np.arange(M), batch.d_minus)
        sums = np.bincount(owner, weights=pool[idx], minlength=M)
        zeta = np.asarray(model.zeta_law.sample(rng, M)) if model.zeta_law else None
        out = np.asarray(model.phi_sums(batch, zeta, sums), dtype=float)
        if not root_step:
            out = np.asarray(model.g_batch(out, batch), dtype=float)
        return out
    out = np.empty(M)
    for m in range(M):
        noff, mark = law.sample(rng)
        idx = rng.integers(0, M, size=noff)
        zeta = model.zeta_law.sample(rng) if model.zeta_law else None
        xi = model.xi_law.sample(rng, noff) if model.xi_law else [None] * noff
        inputs = [(float(pool[idx[j]]), xi[j]) for j in range(noff)]
        try:
            val = model.phi(mark, zeta, inputs)
            out[m] = val if root_step else model.g(val, mark)
        except OverflowError:
            out[m] = np.inf
    return out


def _pool_zero(spec: GWTreeSpec, model: RecursionModel, M: int,
               init: L.InitialLaw, rng: np.random.Generator) -> np.ndarray:
    r0 = L.draw_initial(init, M, rng)
    if model.g_batch is not None and spec.body_law.sample_batch is not None:
        batch = spec.body_law.sample_batch(rng, M)
        return np.asarray(model.g_batch(r0, batch), dtype=float)
    out = np.empty(M)
    for m in range(M):
        _, mark = spec.body_law.sample(rng)
        out[m] = model.g(float(r0[m]), mark)
    return out


def population_dynamics(spec: GWTreeSpec, model: RecursionModel, pool_size: int,
                        iterations: int, init: L.InitialLaw = 0.0,
                        seed: int = 0) -> Tuple[SamplePool, EmpiricalDist]:
    """Pool approximation of the value law after `iterations` refreshes, plus
    the root-law readout distribution at that horizon.

    The default init (0) makes the starting pool the law of g(0, body mark),
    the choice whose iterates converge to the tree-measurable solution.
    """
    if pool_size < 10:
        raise ValueError("pool_size must be >= 10")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    pool = _pool_zero(spec, model, pool_size, init,
                      streams.stream(seed, streams.POOL, 0))
    if iterations == 0:
        r0 = L.draw_initial(init, pool_size, streams.stream(seed, streams.POOL_ROOT, 0))
        return SamplePool(pool, 0), EmpiricalDist.from_samples(r0)
    prev = pool
    for r in range(1, iterations + 1):
        prev = pool
        pool = _pool_refresh(pool, spec, model, streams.stream(seed, streams.POOL, r),
                             root_step=False)
        if not np.isfinite(pool).all():
            raise PopulationExplosionError(f"pool became non-finite at iteration {r}")
    # the horizon-k root readout consumes the generation k-1 pool
    root_vals = _pool_refresh(prev, spec, model,
                              streams.stream(seed, streams.POOL_ROOT, iterations),
                              root_step=True)
    return SamplePool(pool, iterations), EmpiricalDist.from_samples(root_vals)


def pool_trajectory(spec: GWTreeSpec, model: RecursionModel, pool_size: int,
                    iterations: int, init: L.InitialLaw = 0.0,
                    seed: int = 0) -> List[SamplePool]:
    """Pools for every generation 0..iterations (same streams as
    population_dynamics, so prefixes agree across horizons)."""
    if pool_size < 10:
        raise ValueError("pool_size must be >= 10")
    pool = _pool_zero(spec, model, pool_size, init,
                      streams.stream(seed, streams.POOL, 0))
    out = [SamplePool(pool.copy(), 0)]
    for r in range(1, iterations + 1):
        pool = _pool_refresh(pool, spec, model, streams.stream(seed, streams.POOL, r),
                             root_step=False)
        if not np.isfinite(pool).all():
            raise PopulationExplosionError(f"pool became non-finite at iteration {r}")
        out.append(SamplePool(pool.copy(), r))
    return out


@dataclass
class FixedPointDiagnostics:
    trace: List[float]
    c_hat: float
    c_stderr: float
    converged: bool
    iterations: int


def fixed_point_solve(spec: GWTreeSpec, model: RecursionModel, pool_size: int,
                      tol: float, max_iter: int, seed: int = 0,
                      override: bool = False,
                      init: L.InitialLaw = 0.0) -> Tuple[EmpiricalDist, FixedPointDiagnostics]:
    """Iterate the pool until the root-law readouts settle.

    Stops once three consecutive order-p gaps between successive readouts
    fall below tol (single-comparison stops are noisy at finite pool size).
    Refuses to run when the estimated contraction constant is >= 1 unless
    override is given; raises if the gap trace grows steadily.
    """
    from .bounds import contraction_estimate
    est = contraction_estimate(spec, model, max(100, min(pool_size, 20000)),
                               seed=streams.child_seed(seed, streams.MOMENTS))
    if est.value >= 1.0 and not override:
        raise NonContractionError(
            f"estimated contraction constant {est.value:.4g} >= 1 "
            f"(stderr {est.stderr:.2g}); pass override=True to iterate anyway")
    if est.value >= 1.0:
        warnings.warn(f"iterating despite estimated contraction constant {est.value:.4g} >= 1")
    pool = _pool_zero(spec, model, pool_size, init, streams.stream(seed, streams.POOL, 0))
    readout = None
    trace: List[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # horizon-it readout consumes the generation it-1 pool
        vals = _pool_refresh(pool, spec, model,
                             streams.stream(seed, streams.POOL_ROOT, it), root_step=True)
        prev_readout, readout = readout, EmpiricalDist.from_samples(vals)
        if prev_readout is not None:
            trace.append(wasserstein_p(prev_readout, readout, model.p))
            if len(trace) >= 3 and all(d < tol for d in trace[-3:]):
                converged = True
                break
            if _steadily_growing(trace, tol):
                raise NonContractionError(
                    "gap trace is growing; the map does not appear to contract", trace)
        pool = _pool_refresh(pool, spec, model, streams.stream(seed, streams.POOL, it),
                             root_step=False)
        if not np.isfinite(pool).all():
            raise PopulationExplosionError(f"pool became non-finite at iteration {it}")
    return readout, FixedPointDiagnostics(trace, est.value, est.stderr, converged, it)


def _steadily_growing(trace: List[float], tol: float, window: int = 5) -> bool:
    if len(trace) < window:
        return False
    tail = trace[-window:]
    rising = all(tail[i + 1] >= tail[i] for i in range(window - 1))
    # fire only well above tol so noise-floor wobble never trips this
    return rising and tail[-1] >= max(3.0 * tol, tail[0]) and tail[-1] > 0.0


def pool_to_csv(pool: SamplePool, path) -> None:
    np.savetxt(path, pool.values, fmt="%r", header=f"generation={pool.generation}")


def dist_to_csv(dist: EmpiricalDist, path) -> None:
    arr = np.column_stack([dist.values, dist.weights])
    np.savetxt(path, arr, fmt="%r", header="value weight")
