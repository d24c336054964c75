"""Vertex marks: the (in-degree, out-degree, attributes) triple carried by
every graph vertex and tree node, in scalar and columnar form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np


@dataclass
class VertexMark:
    d_minus: int
    d_plus: int
    attr: Dict[str, float] = field(default_factory=dict)


@dataclass
class MarkBatch:
    """Columnar marks for a set of vertices or tree nodes."""

    d_minus: np.ndarray
    d_plus: np.ndarray
    attrs: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.d_minus = np.asarray(self.d_minus, dtype=np.int64)
        self.d_plus = np.asarray(self.d_plus, dtype=np.int64)
        n = len(self.d_minus)
        if len(self.d_plus) != n:
            raise ValueError("d_minus and d_plus must have equal length")
        self.attrs = {k: np.asarray(v, dtype=float) for k, v in self.attrs.items()}
        for k, v in self.attrs.items():
            if len(v) != n:
                raise ValueError(f"attribute {k!r} has length {len(v)}, expected {n}")

    def __len__(self) -> int:
        return len(self.d_minus)

    def mark(self, i: int) -> VertexMark:
        return VertexMark(int(self.d_minus[i]), int(self.d_plus[i]),
                          {k: float(v[i]) for k, v in self.attrs.items()})

    def marks(self) -> list:
        return [self.mark(i) for i in range(len(self))]

    @classmethod
    def from_marks(cls, marks) -> "MarkBatch":
        keys = sorted({k for m in marks for k in m.attr})
        return cls(
            d_minus=np.array([m.d_minus for m in marks], dtype=np.int64),
            d_plus=np.array([m.d_plus for m in marks], dtype=np.int64),
            attrs={k: np.array([m.attr.get(k, 0.0) for m in marks]) for k in keys},
        )
