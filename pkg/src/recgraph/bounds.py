"""Closed-form error and moment bounds evaluated from declared or
Monte-Carlo-estimated moment terms.

All quantities are p-th moment roots of functionals of the limiting node
laws: the root's fan-out and shift terms, and the body's scale, scaled-
shift and zero-input terms.  The calculators reproduce the displayed
inequalities numerically; they never sample unless asked to estimate
inputs from a tree spec.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import rng as streams
from .graphs import DiGraph
from .marks import MarkBatch
from .models import RecursionModel
from .trees import GWTreeSpec


@dataclass(frozen=True)
class ContractionEstimate:
    """Monte Carlo estimate of the contraction constant
    (E[(offspring * sigma_minus * sigma_plus)^p])^(1/p) under the body law."""

    value: float
    stderr: float
    p: float

    def __repr__(self):
        return f"ContractionEstimate({self.value:.6g} +- {self.stderr:.2g}, p={self.p})"


def _body_columns(spec: GWTreeSpec, model: RecursionModel, M: int,
                  rng: np.random.Generator, root: bool = False) -> Dict[str, np.ndarray]:
    law = spec.root_law if root else spec.body_law
    if law.sample_batch is not None:
        batch = law.sample_batch(rng, M)
    else:
        marks = []
        for _ in range(M):
            _, mk = law.sample(rng)
            marks.append(mk)
        batch = MarkBatch.from_marks(marks)
    cols = {"n": batch.d_minus.astype(float)}
    if model.sigma_minus_batch is not None:
        cols["sm"] = np.asarray(model.sigma_minus_batch(batch), dtype=float)
        cols["sp"] = np.asarray(model.sigma_plus_batch(batch), dtype=float)
        cols["beta"] = np.asarray(model.beta_batch(batch), dtype=float)
    else:
        ms = batch.marks()
        cols["sm"] = np.array([model.sigma_minus(m) for m in ms])
        cols["sp"] = np.array([model.sigma_plus(m) for m in ms])
        cols["beta"] = np.array([model.beta(m) for m in ms])
    cols["g0"] = np.abs(model.g_zero_batch(batch))
    return cols


def _mean_root(x: np.ndarray, p: float) -> Tuple[float, float]:
    """(E[x^p])^(1/p) with a delta-method standard error."""
    xp = np.asarray(x, dtype=float) ** p
    m = float(xp.mean())
    if m == 0.0:
        return 0.0, 0.0
    se = float(xp.std(ddof=1)) / math.sqrt(xp.size)
    return m ** (1.0 / p), se * m ** (1.0 / p - 1.0) / p


def contraction_estimate(spec: GWTreeSpec, model: RecursionModel, M: int,
                         seed: int = 0) -> ContractionEstimate:
    """Estimate the contraction constant from M body-law draws."""
    if M < 100:
        raise ValueError("need at least 100 draws")
    cols = _body_columns(spec, model, M, streams.stream(seed, streams.MOMENTS))
    value, stderr = _mean_root(cols["n"] * cols["sm"] * cols["sp"], model.p)
    return ContractionEstimate(value, stderr, model.p)


@dataclass
class BoundInputs:
    """Moment terms feeding the bound calculators.

    Root terms average over the root law, body terms over the shared law.
    m_body_scale_shift_or_init is E[(sigma_plus * max(beta, r0))^p]^(1/p);
    when not supplied it is replaced by the valid upper bound
    m_body_scale_shift + r0 * m_body_scale.
    """

    p: float
    c: float
    eps: float = 0.1
    r0: float = 0.0
    H: float = 1.0
    Q: float = 1.0
    alpha: float = 1.0
    gamma: float = 1.0
    m_root_fanout: float = 0.0       # E[(sigma_minus * offspring)^p]^(1/p), root law
    m_root_shift: float = 0.0        # E[beta^p]^(1/p), root law
    m_body_scale: float = 0.0        # E[sigma_plus^p]^(1/p)
    m_body_scale_shift: float = 0.0  # E[(sigma_plus*beta)^p]^(1/p)
    m_body_zero: float = 0.0         # E[|g(0, mark)|^p]^(1/p)
    m_body_scale_shift_or_init: Optional[float] = None
    stderrs: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must lie in (0,1)")
        for name in ("c", "r0", "H", "Q", "alpha", "gamma", "m_root_fanout",
                     "m_root_shift", "m_body_scale", "m_body_scale_shift",
                     "m_body_zero"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def with_eps(self, eps: float) -> "BoundInputs":
        return replace(self, eps=eps)


def estimate_bound_inputs(spec: GWTreeSpec, model: RecursionModel, M: int,
                          seed: int = 0, eps: float = 0.1, r0: float = 0.0,
                          holder=None) -> BoundInputs:
    """Monte Carlo moment terms from a tree spec, with standard errors.

    Bounds are later evaluated at the point estimates; estimation noise is
    reported but not propagated.
    """
    p = model.p
    rng_body = streams.stream(seed, streams.MOMENTS, 0)
    rng_root = streams.stream(seed, streams.MOMENTS, 1)
    body = _body_columns(spec, model, M, rng_body)
    root = _body_columns(spec, model, M, rng_root, root=True)
    ses: Dict[str, float] = {}
    vals = {}
    for key, col in (("m_root_fanout", root["sm"] * root["n"]),
                     ("m_root_shift", root["beta"]),
                     ("m_body_scale", body["sp"]),
                     ("m_body_scale_shift", body["sp"] * body["beta"]),
                     ("m_body_zero", body["g0"]),
                     ("m_body_scale_shift_or_init",
                      body["sp"] * np.maximum(body["beta"], r0)),
                     ("c", body["n"] * body["sm"] * body["sp"])):
        vals[key], ses[key] = _mean_root(col, p)
    hq = holder or model.holder
    kw = dict(H=hq.H, Q=hq.Q, alpha=hq.alpha, gamma=hq.gamma) if hq else {}
    return BoundInputs(p=p, eps=eps, r0=r0, stderrs=ses, **vals, **kw)


def perturbation_weight(b: BoundInputs) -> float:
    """w(eps) = Q eps^gamma + H eps^alpha + H Q eps^(alpha+gamma)."""
    e = b.eps
    return b.Q * e ** b.gamma + b.H * e ** b.alpha + b.H * b.Q * e ** (b.alpha + b.gamma)


def coupling_error_bound(b: BoundInputs, k: int) -> float:
    """Bound on the p-th moment root of the graph-vs-tree value gap at
    horizon k, on the event that all explored marks are eps-close."""
    if k < 0:
        raise ValueError("k must be >= 0")
    w = perturbation_weight(b)
    q = b.m_body_scale_shift_or_init
    if q is None:
        q = b.m_body_scale_shift + b.r0 * b.m_body_scale
    q = q + b.m_body_zero
    q_tilde = q + 1.0 + b.m_body_scale
    B = 1.0 + b.m_root_shift + 2.0 * b.m_root_fanout * q_tilde
    double_sum = 0.0
    for i in range(k):
        inner = sum(b.c ** j for j in range(k - i))
        double_sum += inner * ((1.0 + w) * b.c) ** i
    H_k = B * (1.0 + (1.0 + w) * double_sum)
    return H_k * w


def moment_bound(b: BoundInputs, k: int) -> Tuple[float, float]:
    """(bound on E|body value at gen k|^p)^(1/p) and the induced bound on
    the root value one step later."""
    if k < 0:
        raise ValueError("k must be >= 0")
    d = b.m_body_scale_shift + b.m_body_zero
    a0 = b.m_body_scale * b.r0 + b.m_body_zero
    v = d * sum(b.c ** r for r in range(k)) + b.c ** k * a0
    r = v * b.m_root_fanout + b.m_root_shift
    return v, r


def graph_moment_bound(g: DiGraph, model: RecursionModel, k: int,
                       r0: float = 0.0) -> float:
    """Mean-absolute-value bound for the step-k state on a realized graph:
    (1/n) * l1-norm of sum_{r<k} C^r (C0 e + shift) plus norm1(C)^k * r0,
    with C the interaction matrix and C0 its zero-input counterpart."""
    from .dynamics import edge_matrix_summary
    if k < 0:
        raise ValueError("k must be >= 0")
    batch = g.mark_batch
    if model.sigma_minus_batch is not None:
        sm = np.asarray(model.sigma_minus_batch(batch), dtype=float)
        sp = np.asarray(model.sigma_plus_batch(batch), dtype=float)
        beta = np.asarray(model.beta_batch(batch), dtype=float)
    else:
        ms = batch.marks()
        sm = np.array([model.sigma_minus(m) for m in ms])
        sp = np.array([model.sigma_plus(m) for m in ms])
        beta = np.array([model.beta(m) for m in ms])
    g0 = np.abs(model.g_zero_batch(batch))

    def apply_c(x, src_weight):
        if g.m == 0:
            return np.zeros(g.n)
        return sm * np.bincount(g.edge_dst, weights=src_weight[g.edge_src] * x[g.edge_src],
                                minlength=g.n)

    y = apply_c(np.ones(g.n), g0) + beta  # C0 e + shift
    acc = np.zeros(g.n)
    cur = y
    for _ in range(k):  # exactly the k terms r = 0 .. k-1
        acc += cur
        cur = apply_c(cur, sp)
    norm1 = edge_matrix_summary(g, model).norm1_C
    return float(acc.mean() + norm1 ** k * r0)
