"""Recursion models: the update map, the value-extraction map, noise laws,
and the declared regularity constants used by the bound calculators.

A model updates vertex i synchronously via
    new_i = phi(mark_i, zeta_i, [(v_j, xi_j) for each in-edge j -> i]),
where v_j = g(old_j, mark_j).  Four classic dynamics ship with their
published constants: opinion averaging with damped anchors (degroot),
noisy majority votes (voter), damped rank flow (pagerank), and a capped
wealth cascade (cascade).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from . import laws as L
from . import rng as streams
from .marks import MarkBatch, VertexMark


class ModelEvaluationError(RuntimeError):
    pass


class ModelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MatrixNormBound:
    """Operator-norm regime: interaction matrix norm <= K, zero-input matrix <= K0.
    None means "compute from the realized graph"."""
    K: Optional[float] = None
    K0: Optional[float] = None


@dataclass(frozen=True)
class BoundedSupportBound:
    """Bounded-orbit regime: states started in [-K, K] stay in [-K, K]."""
    K: float = 1.0


BoundMode = Union[MatrixNormBound, BoundedSupportBound]


@dataclass(frozen=True)
class HolderConstants:
    """Mark-perturbation smoothness constants (H, alpha) for the update map
    and (Q, gamma) for the value map; user-declared, not derived."""
    H: float
    Q: float
    alpha: float
    gamma: float


@dataclass
class RecursionModel:
    name: str
    p: float
    phi: Callable[[VertexMark, Optional[float], Sequence[Tuple[float, Optional[float]]]], float]
    g: Callable[[float, VertexMark], float]
    sigma_minus: Callable[[VertexMark], float]
    sigma_plus: Callable[[VertexMark], float]
    beta: Callable[[VertexMark], float]
    zeta_law: Optional[L.Law] = None
    xi_law: Optional[L.Law] = None
    bound_mode: Optional[BoundMode] = None
    holder: Optional[HolderConstants] = None
    attr_laws: Dict[str, L.Law] = field(default_factory=dict)
    # Optional columnar fast path, usable when xi_law is None and the update
    # depends on in-neighbor values only through their sum.
    phi_sums: Optional[Callable[[MarkBatch, Optional[np.ndarray], np.ndarray], np.ndarray]] = None
    g_batch: Optional[Callable[[np.ndarray, MarkBatch], np.ndarray]] = None
    sigma_minus_batch: Optional[Callable[[MarkBatch], np.ndarray]] = None
    sigma_plus_batch: Optional[Callable[[MarkBatch], np.ndarray]] = None
    beta_batch: Optional[Callable[[MarkBatch], np.ndarray]] = None

    @property
    def has_fast_path(self) -> bool:
        return self.phi_sums is not None and self.g_batch is not None and self.xi_law is None

    def g_zero(self, mark: VertexMark) -> float:
        return self.g(0.0, mark)

    def g_zero_batch(self, batch: MarkBatch) -> np.ndarray:
        if self.g_batch is not None:
            return self.g_batch(np.zeros(len(batch)), batch)
        return np.array([self.g(0.0, batch.mark(i)) for i in range(len(batch))])


def _safe_div(num, den):
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(np.asarray(num), den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def model_pagerank(c: float, q_spec="uniform", p: float = 1.0) -> RecursionModel:
    """Damped rank flow: new_i = (1-c) * teleport_i + sum over j->i of c*old_j/dplus_j.

    teleport is the personalization weight on the scale-free axis (mean 1
    for the uniform choice, so the ranks average to 1 in steady state).
    Vertices with no out-edges send nothing.  The update is noise-free, so
    the declared sensitivity constants are valid for any moment order p;
    the operator-norm certificate K = c is specific to p = 1.
    """
    if not 0.0 < c < 1.0:
        raise ModelConfigError("damping c must lie in (0,1)")
    if p < 1:
        raise ModelConfigError("moment order p must be >= 1")
    q_law = _attr_law(q_spec, uniform_value=1.0, what="teleport")

    def phi(mark, zeta, inputs):
        return (1.0 - c) * mark.attr["teleport"] + sum(v for v, _ in inputs)

    def g(r, mark):
        return c * r / mark.d_plus if mark.d_plus > 0 else 0.0

    return RecursionModel(
        name="pagerank", p=p, phi=phi, g=g,
        sigma_minus=lambda mark: 1.0,
        sigma_plus=lambda mark: c / mark.d_plus if mark.d_plus > 0 else 0.0,
        beta=lambda mark: (1.0 - c) * abs(mark.attr["teleport"]),
        bound_mode=MatrixNormBound(K=c, K0=0.0) if p == 1.0 else MatrixNormBound(),
        attr_laws={"teleport": q_law},
        phi_sums=lambda b, zeta, s: (1.0 - c) * b.attrs["teleport"] + s,
        g_batch=lambda r, b: _safe_div(c * r, b.d_plus),
        sigma_minus_batch=lambda b: np.ones(len(b)),
        sigma_plus_batch=lambda b: _safe_div(c, b.d_plus),
        beta_batch=lambda b: (1.0 - c) * np.abs(b.attrs["teleport"]),
    )


def model_voter(epsilon: float, p: float = 1.0) -> RecursionModel:
    """Noisy majority votes on {0,1}: adopt the in-neighbor majority, then
    flip with probability epsilon.  A vertex with no in-neighbors keeps the
    pre-flip value 0, i.e. its next vote is just the flip noise (documented
    convention; ties count as majority-1)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ModelConfigError("flip probability must lie in [0,1]")

    def phi(mark, zeta, inputs):
        if mark.d_minus > 0:
            maj = 1.0 if sum(v for v, _ in inputs) >= mark.d_minus / 2.0 else 0.0
        else:
            maj = 0.0
        return float((zeta + maj) % 2.0)

    def phi_sums(b, zeta, s):
        maj = np.where(b.d_minus > 0, (s >= b.d_minus / 2.0).astype(float), 0.0)
        return np.mod(zeta + maj, 2.0)

    return RecursionModel(
        name="voter", p=p, phi=phi, g=lambda r, mark: r,
        sigma_minus=lambda mark: 2.0 / mark.d_minus if mark.d_minus > 0 else 0.0,
        sigma_plus=lambda mark: 1.0,
        beta=lambda mark: epsilon ** (1.0 / p),
        zeta_law=L.bernoulli(epsilon),
        bound_mode=BoundedSupportBound(K=1.0),
        phi_sums=phi_sums,
        g_batch=lambda r, b: r,
        sigma_minus_batch=lambda b: _safe_div(2.0, b.d_minus),
        sigma_plus_batch=lambda b: np.ones(len(b)),
        beta_batch=lambda b: np.full(len(b), epsilon ** (1.0 / p)),
    )


def model_degroot(c: float, f_spec="stubborn", q_spec=1.0,
                  zeta_law: Optional[L.Law] = None, p: float = 1.0,
                  beta_const: Optional[float] = None) -> RecursionModel:
    """Opinion averaging with a damped anchor term:
    new_i = c * f(innate_i, zeta) + (1-c)/dminus_i * sum of in-neighbor values.

    f_spec "stubborn" anchors to the vertex's innate opinion (f = innate),
    "shock" anchors to the per-step noise (f = zeta), and any callable
    (innate, zeta) -> value is accepted, in which case beta_const must give
    the p-averaged anchor magnitude since it cannot be derived."""
    if not 0.0 <= c <= 1.0:
        raise ModelConfigError("damping c must lie in [0,1]")
    q_law = _attr_law(q_spec, uniform_value=0.0, what="innate")
    if f_spec == "stubborn":
        f = lambda q, z: q
        beta_fn = lambda mark: c * abs(mark.attr["innate"])
        beta_b = lambda b: c * np.abs(b.attrs["innate"])
        f_vec = lambda b, z: b.attrs["innate"]
        sup = q_law.abs_sup()
        zl = zeta_law
    elif f_spec == "shock":
        zl = zeta_law if zeta_law is not None else L.normal(0.0, 1.0)
        f = lambda q, z: z
        f_vec = lambda b, z: z
        bval = c * zl.abs_moment(p)
        beta_fn = lambda mark: bval
        beta_b = lambda b: np.full(len(b), bval)
        sup = zl.abs_sup()
    elif callable(f_spec):
        if beta_const is None:
            raise ModelConfigError("custom f needs beta_const (p-averaged anchor magnitude)")
        zl = zeta_law
        f = f_spec
        f_vec = None
        beta_fn = lambda mark: c * beta_const
        beta_b = lambda b: np.full(len(b), c * beta_const)
        sup = math.inf
    else:
        raise ModelConfigError(f"unknown f_spec {f_spec!r}; use stubborn, shock or a callable")

    def phi(mark, zeta, inputs):
        avg = sum(v for v, _ in inputs) / mark.d_minus if mark.d_minus > 0 else 0.0
        return c * f(mark.attr.get("innate", 0.0), zeta) + (1.0 - c) * avg

    fast = dict()
    if f_vec is not None:
        fast = dict(
            phi_sums=lambda b, z, s: c * f_vec(b, z) + (1.0 - c) * _safe_div(s, b.d_minus),
            g_batch=lambda r, b: r,
            sigma_minus_batch=lambda b: _safe_div(1.0 - c, b.d_minus),
            sigma_plus_batch=lambda b: np.ones(len(b)),
            beta_batch=beta_b,
        )
    bound = BoundedSupportBound(K=sup) if math.isfinite(sup) else MatrixNormBound()
    return RecursionModel(
        name="degroot", p=p, phi=phi, g=lambda r, mark: r,
        sigma_minus=lambda mark: (1.0 - c) / mark.d_minus if mark.d_minus > 0 else 0.0,
        sigma_plus=lambda mark: 1.0,
        beta=beta_fn,
        zeta_law=zl,
        bound_mode=bound,
        attr_laws={"innate": q_law} if f_spec == "stubborn" else {},
        **fast,
    )


def model_cascade(q_spec, v_spec, b_spec) -> RecursionModel:
    """Capped wealth cascade: new_i = assets_i + sum over j->i of
    clip(old_j - liability_j, 0, loan_cap_j) / dplus_j.  Vertices with no
    out-edges transmit nothing."""
    q_law = _attr_law(q_spec, uniform_value=1.0, what="assets")
    v_law = _attr_law(v_spec, uniform_value=0.0, what="liability")
    b_law = _attr_law(b_spec, uniform_value=1.0, what="loan_cap")

    def phi(mark, zeta, inputs):
        return mark.attr["assets"] + sum(v for v, _ in inputs)

    def g(r, mark):
        if mark.d_plus == 0:
            return 0.0
        return min(max(r - mark.attr["liability"], 0.0), mark.attr["loan_cap"]) / mark.d_plus

    return RecursionModel(
        name="cascade", p=1.0, phi=phi, g=g,
        sigma_minus=lambda mark: 1.0,
        sigma_plus=lambda mark: 1.0 / mark.d_plus if mark.d_plus > 0 else 0.0,
        beta=lambda mark: abs(mark.attr["assets"]),
        bound_mode=MatrixNormBound(K=1.0, K0=None),
        attr_laws={"assets": q_law, "liability": v_law, "loan_cap": b_law},
        phi_sums=lambda b, zeta, s: b.attrs["assets"] + s,
        g_batch=lambda r, b: _safe_div(
            np.clip(r - b.attrs["liability"], 0.0, b.attrs["loan_cap"]), b.d_plus),
        sigma_minus_batch=lambda b: np.ones(len(b)),
        sigma_plus_batch=lambda b: _safe_div(1.0, b.d_plus),
        beta_batch=lambda b: np.abs(b.attrs["assets"]),
    )


def _attr_law(spec, uniform_value: float, what: str) -> L.Law:
    if spec == "uniform":
        return L.constant(uniform_value)
    if isinstance(spec, L.Law):
        return spec
    if isinstance(spec, (int, float)):
        return L.constant(float(spec))
    if isinstance(spec, dict):
        return L.Law.from_json(spec)
    raise ModelConfigError(f"cannot interpret {what} spec {spec!r}")


KNOWN_MODELS = ("cascade", "degroot", "pagerank", "voter")


def model_from_config(cfg: dict) -> RecursionModel:
    """Build a model from a JSON/TOML-style block: {"name": ..., params...}."""
    if not isinstance(cfg, dict) or "name" not in cfg:
        raise ModelConfigError("model block needs a 'name' field")
    name = cfg["name"]
    params = {k: v for k, v in cfg.items() if k != "name"}
    if name == "pagerank":
        return model_pagerank(params.get("c", 0.5), params.get("q", "uniform"))
    if name == "voter":
        return model_voter(params.get("epsilon", 0.1), params.get("p", 1.0))
    if name == "degroot":
        zl = params.get("zeta")
        return model_degroot(params.get("c", 0.5), params.get("f", "stubborn"),
                             params.get("q", 1.0),
                             L.Law.from_json(zl) if zl is not None else None,
                             params.get("p", 1.0))
    if name == "cascade":
        return model_cascade(params.get("q", 1.0), params.get("v", 0.0),
                             params.get("b", 1.0))
    raise ModelConfigError(
        f"unknown model {name!r}; known models: {', '.join(KNOWN_MODELS)}")


def sample_attrs(model: RecursionModel, n: int, seed: int = 0) -> Dict[str, np.ndarray]:
    """Draw the vertex attribute columns a model needs, i.i.d. per vertex."""
    gen = streams.stream(seed, streams.ATTRS)
    return {name: np.asarray(law.sample(gen, n), dtype=float)
            for name, law in sorted(model.attr_laws.items())}


def lipschitz_audit(model: RecursionModel, trials: int = 1000, seed: int = 0,
                    d_range: Tuple[int, int] = (0, 5), binary_values: bool = False,
                    noise_draws: int = 64) -> float:
    """Worst observed slack of the declared in-neighbor sensitivity bound.

    Returns max over random (mark, values, perturbed values) of
    lhs - sigma_minus(mark) * sum |v - v~|, where lhs averages the update
    gap over shared noise draws to the model's p-th moment.  Nonpositive
    means the declared constant held on every probe.
    """
    gen = streams.stream(seed, streams.MOMENTS)
    worst = -math.inf
    for _ in range(trials):
        d = int(gen.integers(d_range[0], d_range[1] + 1))
        attr = {name: float(law.sample(gen)) for name, law in model.attr_laws.items()}
        mark = VertexMark(d, int(gen.integers(0, 4)), attr)
        if binary_values:
            v = gen.integers(0, 2, d).astype(float)
            vt = gen.integers(0, 2, d).astype(float)
        else:
            v = gen.normal(0.0, 1.0, d)
            vt = gen.normal(0.0, 1.0, d)
        draws = noise_draws if (model.zeta_law or model.xi_law) else 1
        gaps = np.empty(draws)
        for t in range(draws):
            zeta = model.zeta_law.sample(gen) if model.zeta_law else None
            xi = model.xi_law.sample(gen, d) if model.xi_law else [None] * d
            a = model.phi(mark, zeta, list(zip(v, xi)))
            b = model.phi(mark, zeta, list(zip(vt, xi)))
            gaps[t] = abs(a - b) ** model.p
        lhs = float(np.mean(gaps)) ** (1.0 / model.p)
        rhs = model.sigma_minus(mark) * float(np.abs(v - vt).sum())
        worst = max(worst, lhs - rhs)
    return worst
