"""Atomic distributions on the line and exact order-p transport distances.

The distance is computed as the L_p norm of the difference of quantile
functions, integrated exactly over the union of cumulative-weight
breakpoints, so no sample-size matching or binning error enters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalDist:
    """Sorted atoms with positive weights summing to one (duplicates merged)."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if v.ndim != 1 or v.size == 0 or w.shape != v.shape:
            raise ValueError("need matching nonempty value/weight arrays")
        if (w <= 0).any():
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        if (np.diff(v) < 0).any():
            raise ValueError("values must be sorted ascending")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, values, weights=None) -> "EmpiricalDist":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("need at least one sample")
        if not np.isfinite(v).all():
            raise ValueError("samples must be finite")
        if weights is None:
            w = np.full(v.size, 1.0 / v.size)
        else:
            w = np.asarray(weights, dtype=float).ravel()
            w = w / w.sum()
        uniq, inv = np.unique(v, return_inverse=True)
        merged = np.bincount(inv, weights=w, minlength=uniq.size)
        merged /= merged.sum()
        return cls(uniq, merged)

    @classmethod
    def point_mass(cls, value: float) -> "EmpiricalDist":
        return cls(np.array([float(value)]), np.array([1.0]))

    @property
    def atoms(self) -> List[Tuple[float, float]]:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    def mean(self) -> float:
        return float(self.values @ self.weights)

    def abs_moment(self, p: float) -> float:
        return float(np.abs(self.values) ** p @ self.weights) ** (1.0 / p)

    def quantile(self, u) -> np.ndarray:
        cum = np.cumsum(self.weights)
        idx = np.minimum(np.searchsorted(cum, u, side="left"), self.values.size - 1)
        return self.values[idx]


def wasserstein_p(a: EmpiricalDist, b: EmpiricalDist, p: float = 1.0) -> float:
    """Exact order-p transport distance between atomic distributions."""
    if p < 1:
        raise ValueError("p must be >= 1")
    ca = np.cumsum(a.weights)[:-1]
    cb = np.cumsum(b.weights)[:-1]
    edges = np.concatenate(([0.0], np.union1d(ca, cb), [1.0]))
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    gaps = np.abs(a.quantile(mids) - b.quantile(mids)) ** p
    return float(widths @ gaps) ** (1.0 / p)


def wasserstein_decay_trace(dists: Sequence[EmpiricalDist], p: float = 1.0):
    """Consecutive distances of a distribution sequence plus the fitted
    log-distance slope (over the prefix before the first exact zero)."""
    if len(dists) < 3:
        raise ValueError("need at least 3 distributions to fit a decay trace")
    gaps = [wasserstein_p(dists[i], dists[i + 1], p) for i in range(len(dists) - 1)]
    return gaps, fit_log_slope(gaps)


def fit_log_slope(gaps: Sequence[float]) -> float:
    """Least-squares slope of log(gap) against index, on the nonzero prefix."""
    arr = np.asarray(gaps, dtype=float)
    nz = np.flatnonzero(arr <= 0)
    if nz.size:
        arr = arr[: nz[0]]
    if arr.size < 2:
        return float("nan")
    x = np.arange(arr.size)
    return float(np.polyfit(x, np.log(arr), 1)[0])


def trace_to_csv(values: Sequence[float], path, stderrs: Sequence[float] = None,
                 start: int = 0) -> None:
    """Write (k, value, stderr) rows, the plot-ready form of a distance or
    bound trace; stderr is left empty when not estimated."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "value", "stderr"])
        for i, v in enumerate(values):
            se = "" if stderrs is None else repr(float(stderrs[i]))
            w.writerow([start + i, repr(float(v)), se])
