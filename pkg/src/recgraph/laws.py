"""Named scalar distributions for noises, vertex attributes and initial values.

A ``Law`` is a small serializable description (name + parameters) with
seeded sampling and the absolute-moment helpers the bound calculators
need.  Supported families: constant, bernoulli, uniform, normal,
exponential, poisson, geometric (support 0, 1, ...), choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


class LawError(ValueError):
    pass


_FAMILIES = ("constant", "bernoulli", "uniform", "normal", "exponential",
             "poisson", "geometric", "choice")


@dataclass(frozen=True)
class Law:
    name: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in _FAMILIES:
            raise LawError(f"unknown law {self.name!r}; known: {', '.join(_FAMILIES)}")
        p = self.params
        if self.name == "constant" and "value" not in p:
            raise LawError("constant law needs 'value'")
        if self.name == "bernoulli":
            if not 0.0 <= p.get("prob", -1) <= 1.0:
                raise LawError("bernoulli law needs 'prob' in [0,1]")
        if self.name == "uniform":
            if p.get("low", 0.0) > p.get("high", 1.0):
                raise LawError("uniform law needs low <= high")
        if self.name == "normal" and p.get("std", 1.0) < 0:
            raise LawError("normal law needs std >= 0")
        if self.name == "exponential" and p.get("scale", 1.0) <= 0:
            raise LawError("exponential law needs scale > 0")
        if self.name == "poisson" and p.get("mean", 1.0) < 0:
            raise LawError("poisson law needs mean >= 0")
        if self.name == "geometric":
            if not 0.0 < p.get("prob", 0.0) <= 1.0:
                raise LawError("geometric law needs 'prob' in (0,1]")
        if self.name == "choice":
            vals = p.get("values")
            if vals is None or len(vals) == 0:
                raise LawError("choice law needs nonempty 'values'")
            probs = p.get("probs")
            if probs is not None:
                if len(probs) != len(vals) or any(q < 0 for q in probs):
                    raise LawError("choice probs must be nonnegative, one per value")
                if abs(sum(probs) - 1.0) > 1e-9:
                    raise LawError("choice probs must sum to 1")

    def sample(self, rng: np.random.Generator, size=None) -> Union[float, np.ndarray]:
        p = self.params
        if self.name == "constant":
            v = float(p["value"])
            return v if size is None else np.full(size, v)
        if self.name == "bernoulli":
            out = (rng.random(size if size is not None else ()) < p["prob"]).astype(float)
            return float(out) if size is None else out
        if self.name == "uniform":
            return rng.uniform(p.get("low", 0.0), p.get("high", 1.0), size)
        if self.name == "normal":
            return rng.normal(p.get("mean", 0.0), p.get("std", 1.0), size)
        if self.name == "exponential":
            return rng.exponential(p.get("scale", 1.0), size)
        if self.name == "poisson":
            out = rng.poisson(p["mean"], size)
            return out.astype(float) if size is not None else float(out)
        if self.name == "geometric":
            out = rng.geometric(p["prob"], size) - 1
            return out.astype(float) if size is not None else float(out)
        vals = np.asarray(self.params["values"], dtype=float)
        idx = rng.choice(len(vals), size=size, p=self.params.get("probs"))
        return vals[idx]

    def mean(self) -> float:
        p = self.params
        if self.name == "constant":
            return float(p["value"])
        if self.name == "bernoulli":
            return float(p["prob"])
        if self.name == "uniform":
            return 0.5 * (p.get("low", 0.0) + p.get("high", 1.0))
        if self.name == "normal":
            return float(p.get("mean", 0.0))
        if self.name == "exponential":
            return float(p.get("scale", 1.0))
        if self.name == "poisson":
            return float(p["mean"])
        if self.name == "geometric":
            return (1.0 - p["prob"]) / p["prob"]
        vals = np.asarray(p["values"], dtype=float)
        probs = p.get("probs")
        w = np.full(len(vals), 1.0 / len(vals)) if probs is None else np.asarray(probs)
        return float(vals @ w)

    def abs_moment(self, order: float) -> float:
        """(E|X|^order)^(1/order), exact or via quadrature/truncated series."""
        if order < 1:
            raise LawError("moment order must be >= 1")
        p = self.params
        if self.name == "constant":
            return abs(float(p["value"]))
        if self.name == "bernoulli":
            return float(p["prob"]) ** (1.0 / order)
        if self.name == "uniform":
            a, b = p.get("low", 0.0), p.get("high", 1.0)
            if a == b:
                return abs(a)
            q = order + 1.0
            anti = lambda x: math.copysign(abs(x) ** q / q, x)
            return ((anti(b) - anti(a)) / (b - a)) ** (1.0 / order)
        if self.name == "normal":
            mu, sd = p.get("mean", 0.0), p.get("std", 1.0)
            if sd == 0:
                return abs(mu)
            if mu == 0:
                # E|Z|^q = 2^(q/2) Gamma((q+1)/2) / sqrt(pi)
                m = 2.0 ** (order / 2.0) * math.gamma((order + 1.0) / 2.0) / math.sqrt(math.pi)
                return sd * m ** (1.0 / order)
            from scipy.integrate import quad
            pdf = lambda x: math.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi))
            f = lambda x: abs(x) ** order * pdf(x)
            lo, _ = quad(f, -np.inf, 0.0)
            hi, _ = quad(f, 0.0, np.inf)
            return (lo + hi) ** (1.0 / order)
        if self.name == "exponential":
            return float(p.get("scale", 1.0)) * math.gamma(order + 1.0) ** (1.0 / order)
        if self.name == "poisson":
            lam = float(p["mean"])
            kmax = int(lam + 20.0 * math.sqrt(lam + 1.0) + 40)
            ks = np.arange(kmax + 1)
            logpmf = ks * math.log(lam) - lam - np.cumsum(np.log(np.maximum(ks, 1))) if lam > 0 else None
            if lam == 0:
                return 0.0
            pmf = np.exp(logpmf)
            return float((pmf @ ks.astype(float) ** order)) ** (1.0 / order)
        if self.name == "geometric":
            pr = float(p["prob"])
            # truncate where the geometric tail is negligible
            kmax = max(10, int(60.0 / max(pr, 1e-6)))
            ks = np.arange(kmax + 1)
            pmf = pr * (1.0 - pr) ** ks
            return float(pmf @ ks.astype(float) ** order) ** (1.0 / order)
        vals = np.abs(np.asarray(p["values"], dtype=float)) ** order
        probs = p.get("probs")
        w = np.full(len(vals), 1.0 / len(vals)) if probs is None else np.asarray(probs)
        return float(vals @ w) ** (1.0 / order)

    def abs_sup(self) -> float:
        """Supremum of |X| over the support (may be inf)."""
        p = self.params
        if self.name == "constant":
            return abs(float(p["value"]))
        if self.name == "bernoulli":
            return 1.0 if p["prob"] > 0 else 0.0
        if self.name == "uniform":
            return max(abs(p.get("low", 0.0)), abs(p.get("high", 1.0)))
        if self.name == "normal":
            return abs(p.get("mean", 0.0)) if p.get("std", 1.0) == 0 else math.inf
        if self.name == "choice":
            return float(np.max(np.abs(np.asarray(p["values"], dtype=float))))
        if self.name == "poisson":
            return 0.0 if p["mean"] == 0 else math.inf
        return math.inf

    def to_json(self) -> dict:
        return {"name": self.name, **self.params}

    @classmethod
    def from_json(cls, obj) -> "Law":
        if isinstance(obj, Law):
            return obj
        if isinstance(obj, (int, float)):
            return constant(float(obj))
        if not isinstance(obj, dict) or "name" not in obj:
            raise LawError(f"cannot parse law from {obj!r}")
        params = {k: v for k, v in obj.items() if k != "name"}
        return cls(obj["name"], params)


def constant(value: float) -> Law:
    return Law("constant", {"value": float(value)})


def bernoulli(prob: float) -> Law:
    return Law("bernoulli", {"prob": float(prob)})


def uniform(low: float, high: float) -> Law:
    return Law("uniform", {"low": float(low), "high": float(high)})


def normal(mean: float = 0.0, std: float = 1.0) -> Law:
    return Law("normal", {"mean": float(mean), "std": float(std)})


def exponential(scale: float = 1.0) -> Law:
    return Law("exponential", {"scale": float(scale)})


def poisson(mean: float) -> Law:
    return Law("poisson", {"mean": float(mean)})


def geometric(prob: float) -> Law:
    return Law("geometric", {"prob": float(prob)})


def choice(values, probs=None) -> Law:
    params = {"values": [float(v) for v in values]}
    if probs is not None:
        params["probs"] = [float(q) for q in probs]
    return Law("choice", params)


# An initial value specification: a Law (i.i.d. draws), a number
# (deterministic vector), or an explicit vector.
InitialLaw = Union[Law, float, int, np.ndarray, list]


def draw_initial(init: InitialLaw, n: int, rng: np.random.Generator) -> np.ndarray:
    """Realize an initial vector of length n from an initial-value spec."""
    if isinstance(init, Law):
        return np.asarray(init.sample(rng, n), dtype=float)
    if isinstance(init, (int, float)):
        return np.full(n, float(init))
    vec = np.asarray(init, dtype=float)
    if vec.shape != (n,):
        raise LawError(f"explicit initial vector has shape {vec.shape}, expected ({n},)")
    return vec.copy()
