"""Synchronous iteration of a recursion model on a realized digraph.

All vertices update simultaneously from the previous state; per-step
noise is drawn from streams keyed by (seed, purpose, step) so results
are bit-identical regardless of execution order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import rng as streams
from .distances import EmpiricalDist
from .graphs import DiGraph
from .laws import InitialLaw, draw_initial
from .models import MatrixNormBound, ModelEvaluationError, RecursionModel


class ContractionPreconditionError(RuntimeError):
    pass


@dataclass
class GraphState:
    """One time slice: step index, per-vertex values, and their g-transforms."""

    k: int
    r: np.ndarray
    v: np.ndarray


def _g_all(g: DiGraph, model: RecursionModel, r: np.ndarray) -> np.ndarray:
    if model.g_batch is not None:
        return np.asarray(model.g_batch(r, g.mark_batch), dtype=float)
    return np.array([model.g(float(r[i]), g.marks[i]) for i in range(g.n)])


def initial_state(g: DiGraph, model: RecursionModel, init: InitialLaw,
                  seed: int, copy: int = 0) -> GraphState:
    r0 = draw_initial(init, g.n, streams.stream(seed, streams.INIT, copy))
    return GraphState(0, r0, _g_all(g, model, r0))


def step(g: DiGraph, model: RecursionModel, s: GraphState, seed: int) -> GraphState:
    """Advance one synchronous step; noise comes from (seed, step) streams."""
    if s.r.shape != (g.n,):
        raise ModelEvaluationError(f"state dimension {s.r.shape} does not match n={g.n}")
    k = s.k
    zeta = None
    if model.zeta_law is not None:
        zeta = np.asarray(model.zeta_law.sample(streams.stream(seed, streams.ZETA, k), g.n))
    if model.has_fast_path:
        sums = np.bincount(g.edge_dst, weights=s.v[g.edge_src], minlength=g.n) \
            if g.m else np.zeros(g.n)
        r_new = np.asarray(model.phi_sums(g.mark_batch, zeta, sums), dtype=float)
    else:
        xi = None
        if model.xi_law is not None:
            xi = np.asarray(model.xi_law.sample(streams.stream(seed, streams.XI, k), g.m))
        r_new = np.empty(g.n)
        marks = g.marks
        for i in range(g.n):
            lo, hi = g.in_ptr[i], g.in_ptr[i + 1]
            vals = s.v[g.in_src[lo:hi]]
            xis = xi[lo:hi] if xi is not None else [None] * (hi - lo)
            z = float(zeta[i]) if zeta is not None else None
            try:
                r_new[i] = model.phi(marks[i], z, list(zip(vals.tolist(), xis)))
            except OverflowError:
                r_new[i] = np.inf
    bad = ~np.isfinite(r_new)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ModelEvaluationError(
            f"model {model.name!r} produced a non-finite value at vertex {i}, step {k + 1}")
    return GraphState(k + 1, r_new, _g_all(g, model, r_new))


def iterate(g: DiGraph, model: RecursionModel, init: InitialLaw, k: int,
            seed: int) -> List[GraphState]:
    """Trajectory of k+1 states from the given initial spec; deterministic in seed."""
    if k < 0:
        raise ValueError("k must be >= 0")
    states = [initial_state(g, model, init, seed)]
    for _ in range(k):
        states.append(step(g, model, states[-1], seed))
    return states


def marginal_at(traj: Sequence[GraphState], k: int,
                sample: Optional[Tuple[int, int]] = None) -> EmpiricalDist:
    """Distribution of the step-k value over vertices, exact or subsampled.

    sample=(m, seed) draws m vertices uniformly with replacement; the
    default uses all vertices with equal weight.
    """
    if not 0 <= k < len(traj):
        raise ValueError(f"step {k} outside trajectory of length {len(traj)}")
    vals = traj[k].r
    if sample is not None:
        m, seed = sample
        idx = streams.stream(seed, streams.ROOTS).integers(0, len(vals), size=m)
        vals = vals[idx]
    return EmpiricalDist.from_samples(vals)


@dataclass
class EdgeMatrixSummary:
    """Exact 1- and inf-norms of the interaction matrix (entries
    sigma_minus(dst) * sigma_plus(src) per edge, parallel edges counted with
    multiplicity) and of its zero-input counterpart using |g(0, src mark)|."""

    norm1_C: float
    norminf_C: float
    norm1_C0: float
    norminf_C0: float

    def interp_bound(self, p: float, zero_input: bool = False) -> float:
        """Operator p-norm bound by interpolation: norm1^(1/p) * norminf^(1-1/p)."""
        if p < 1:
            raise ValueError("p must be >= 1")
        n1 = self.norm1_C0 if zero_input else self.norm1_C
        ninf = self.norminf_C0 if zero_input else self.norminf_C
        if math.isinf(p):
            return ninf
        return n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p)


def edge_matrix_summary(g: DiGraph, model: RecursionModel) -> EdgeMatrixSummary:
    if model.sigma_minus_batch is not None:
        sm = np.asarray(model.sigma_minus_batch(g.mark_batch), dtype=float)
        sp = np.asarray(model.sigma_plus_batch(g.mark_batch), dtype=float)
    else:
        sm = np.array([model.sigma_minus(m) for m in g.marks])
        sp = np.array([model.sigma_plus(m) for m in g.marks])
    g0 = np.abs(model.g_zero_batch(g.mark_batch))
    if g.m == 0:
        return EdgeMatrixSummary(0.0, 0.0, 0.0, 0.0)
    w = sm[g.edge_dst] * sp[g.edge_src]
    w0 = sm[g.edge_dst] * g0[g.edge_src]
    col = np.bincount(g.edge_src, weights=w, minlength=g.n)
    row = np.bincount(g.edge_dst, weights=w, minlength=g.n)
    col0 = np.bincount(g.edge_src, weights=w0, minlength=g.n)
    row0 = np.bincount(g.edge_dst, weights=w0, minlength=g.n)
    return EdgeMatrixSummary(float(col.max()), float(row.max()),
                             float(col0.max()), float(row0.max()))


def coupled_contraction_run(g: DiGraph, model: RecursionModel, init: InitialLaw,
                            k: int, seed: int, force: bool = False) -> List[float]:
    """Per-step lp gap between two runs sharing all noise but starting from
    independent initial vectors.

    Requires a declared operator-norm bound K < 1 (or force=True to run the
    diagnostic anyway, e.g. to exhibit non-contraction).
    """
    bm = model.bound_mode
    ok = isinstance(bm, MatrixNormBound)
    if ok:
        K = bm.K if bm.K is not None else edge_matrix_summary(g, model).interp_bound(model.p)
        ok = K < 1.0
    if not ok and not force:
        raise ContractionPreconditionError(
            "coupled run needs a declared operator-norm bound K < 1; pass force=True to override")
    a = initial_state(g, model, init, seed, copy=0)
    b = initial_state(g, model, init, seed, copy=1)
    dists = [_lp_gap(a.r, b.r, model.p)]
    for _ in range(k):
        a = step(g, model, a, seed)
        b = step(g, model, b, seed)
        dists.append(_lp_gap(a.r, b.r, model.p))
    return dists


def _lp_gap(x: np.ndarray, y: np.ndarray, p: float) -> float:
    return float(np.mean(np.abs(x - y) ** p) ** (1.0 / p))


def trajectory_to_csv(traj: Sequence[GraphState], path) -> None:
    """Write (step, vertex, value) rows for every state in the trajectory."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "vertex", "value"])
        for s in traj:
            for i, val in enumerate(s.r):
                w.writerow([s.k, i, repr(float(val))])


def trajectory_summary_rows(traj: Sequence[GraphState]) -> List[dict]:
    """Per-step summary: mean, std, min, max of the state vector."""
    return [{"step": s.k, "mean": float(s.r.mean()), "std": float(s.r.std()),
             "min": float(s.r.min()), "max": float(s.r.max())} for s in traj]
