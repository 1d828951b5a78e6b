"""Sample sets and finite signed-weight RKHS vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .kernels import KernelSpec, as_points, gram_dot


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Points observed at one time step, optionally labeled.

    A 1-D ``points`` array is read as scalar samples, i.e. shape ``(n, 1)``.
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    time_index: int = 0

    def __post_init__(self):
        X = as_points(self.points).copy()
        if len(X) == 0:
            raise ValueError("sample set must be nonempty")
        object.__setattr__(self, "points", _frozen(X))
        if self.labels is not None:
            y = np.asarray(self.labels).reshape(-1)
            if len(y) != len(X):
                raise ValueError("labels must align 1:1 with points")
            if not np.issubdtype(y.dtype, np.integer):
                if not np.all(np.mod(y, 1) == 0):
                    raise ValueError("labels must be integers")
                y = y.astype(np.int64)
            object.__setattr__(self, "labels", _frozen(y.copy()))
        object.__setattr__(self, "time_index", int(self.time_index))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class WeightedEmbedding:
    """The RKHS vector ``sum_i weights[i] * phi(points[i])``.

    Weights may be negative.  ``sources`` optionally records the time index
    of the sample set each atom came from.
    """

    weights: np.ndarray
    points: np.ndarray
    labels: Optional[np.ndarray] = None
    sources: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        X = as_points(self.points).copy()
        if len(X) == 0:
            raise ValueError("embedding needs at least one atom")
        if len(w) != len(X):
            raise ValueError("weights must align with points")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "points", _frozen(X))
        for name in ("labels", "sources"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=np.int64).reshape(-1).copy()
                if len(v) != len(X):
                    raise ValueError(f"{name} must align with points")
                object.__setattr__(self, name, _frozen(v))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def compact(self) -> "WeightedEmbedding":
        """Drop atoms whose weight is exactly zero."""
        keep = self.weights != 0
        if not keep.any():
            raise ValueError("all weights are zero")
        return WeightedEmbedding(
            self.weights[keep],
            self.points[keep],
            None if self.labels is None else self.labels[keep],
            None if self.sources is None else self.sources[keep],
        )

    def scaled(self, c: float) -> "WeightedEmbedding":
        return WeightedEmbedding(self.weights * c, self.points, self.labels, self.sources)


def embed(S: SampleSet) -> WeightedEmbedding:
    """Empirical mean embedding: uniform weights ``1/n`` on the points of S."""
    n = len(S)
    return WeightedEmbedding(
        np.full(n, 1.0 / n), S.points, S.labels, np.full(n, S.time_index)
    )


def combine(coefs, sets) -> WeightedEmbedding:
    """Embedding of ``sum_t coefs[t] * embed(sets[t])`` as one atom list."""
    if len(coefs) != len(sets) or not sets:
        raise ValueError("need one coefficient per sample set")
    labeled = all(S.labels is not None for S in sets)
    return WeightedEmbedding(
        np.concatenate([np.full(len(S), c / len(S)) for c, S in zip(coefs, sets)]),
        np.concatenate([S.points for S in sets]),
        np.concatenate([S.labels for S in sets]) if labeled else None,
        np.concatenate([np.full(len(S), S.time_index) for S in sets]),
    )


def inner(e: WeightedEmbedding, e2: WeightedEmbedding, spec: KernelSpec) -> float:
    """``<e, e2>_H = sum_ij w_i w2_j k(z_i, z2_j)``."""
    if e.dim != e2.dim:
        raise ValueError(f"dimension mismatch: {e.dim} vs {e2.dim}")
    if len(e) < len(e2):
        v = gram_dot(spec, e2.points, e.points, e.weights, e2.labels, e.labels)
        return float(e2.weights @ v)
    v = gram_dot(spec, e.points, e2.points, e2.weights, e.labels, e2.labels)
    return float(e.weights @ v)


def sq_norm(e: WeightedEmbedding, spec: KernelSpec) -> float:
    return inner(e, e, spec)


def rkhs_distance(e: WeightedEmbedding, e2: WeightedEmbedding, spec: KernelSpec) -> float:
    """Hilbert-space (MMD) distance between two embeddings."""
    if e is e2:
        return 0.0
    # Both cross terms keep the result bitwise symmetric in (e, e2).
    sq = (inner(e, e, spec) + inner(e2, e2, spec)) - (inner(e, e2, spec) + inner(e2, e, spec))
    return float(np.sqrt(max(sq, 0.0)))


def pseudo_expectation(e: WeightedEmbedding, f: Callable[[np.ndarray], float]) -> float:
    """``sum_i w_i f(z_i)``; the empirical mean of f when weights are uniform.

    ``f`` receives one point (a 1-D array) at a time.
    """
    vals = np.array([f(z) for z in e.points], dtype=float)
    return float(e.weights @ vals)

