"""Kernel herding: turn an RKHS vector into a uniformly weighted sample set.

Each step picks the candidate maximizing ``<phi(z), eta - mean of phi over
previous picks>``, with the mean divided by the current step count.  The
continuous argmax is replaced by a scan over a finite candidate pool,
optionally polished by gradient ascent for the gaussian kernel.  Candidates
may be picked more than once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .embedding import SampleSet, WeightedEmbedding
from .kernels import KernelSpec, as_points, gram, gram_dot


@dataclass(frozen=True, eq=False)
class HerdingConfig:
    m: int
    candidate_pool: SampleSet
    refine_steps: int = 0
    refine_step_size: float = 0.1

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        pool = self.candidate_pool
        if not isinstance(pool, SampleSet):
            pool = as_points(pool)
            if len(pool) == 0:
                raise ValueError("candidate pool is empty")
            pool = SampleSet(pool)
        object.__setattr__(self, "candidate_pool", pool)
        if self.refine_steps < 0:
            raise ValueError("refine_steps must be nonnegative")
        if not self.refine_step_size > 0:
            raise ValueError("refine_step_size must be positive")


def candidate_pool(
    sets: Sequence[SampleSet],
    grid_size: int = 2048,
    margin: float = 3.0,
) -> SampleSet:
    """Union of observed points, plus a uniform grid for 1-D data.

    The grid spans the observed range widened by ``margin`` on each side.
    Labels are kept only when every set is labeled (no grid is added then).
    """
    X = np.concatenate([S.points for S in sets])
    labeled = all(S.labels is not None for S in sets)
    if labeled:
        return SampleSet(X, np.concatenate([S.labels for S in sets]))
    if X.shape[1] == 1 and grid_size > 0:
        grid = np.linspace(X.min() - margin, X.max() + margin, grid_size)
        X = np.concatenate([X, grid[:, None]])
    return SampleSet(X)


def herding_objective(
    target: WeightedEmbedding,
    selected,
    z,
    spec: KernelSpec,
    selected_labels=None,
    z_label=None,
) -> float:
    """``sum_i w_i k(z, z_i) - (1/n) sum_{j<n} k(z, zbar_j)``, n = len(selected) + 1."""
    z = as_points(np.atleast_1d(np.asarray(z, dtype=float))[None, :])
    zl = None if z_label is None else [z_label]
    val = float(gram_dot(spec, z, target.points, target.weights, zl, target.labels)[0])
    selected = np.asarray(selected, dtype=float)
    if selected.size:
        sel = as_points(selected) if selected.ndim > 1 else selected.reshape(-1, z.shape[1])
        n = len(sel) + 1
        val -= gram(spec, z, sel, zl, selected_labels).sum() / n
    return val


def _refine(z, target, picked, n, spec, cfg):
    """Gradient ascent on the herding objective from a pool candidate."""
    bw = spec.bandwidth
    P = target.points
    w = target.weights
    Q = np.asarray(picked) if picked else np.empty((0, z.shape[0]))

    def value_grad(x):
        k_t = gram(spec, x[None, :], P)[0] * w
        g = (k_t[:, None] * (P - x)).sum(axis=0) / bw
        v = k_t.sum()
        if len(Q):
            k_s = gram(spec, x[None, :], Q)[0] / n
            g -= (k_s[:, None] * (Q - x)).sum(axis=0) / bw
            v -= k_s.sum()
        return v, g

    best_v, grad = value_grad(z)
    best = z
    x = z
    for _ in range(cfg.refine_steps):
        x = x + cfg.refine_step_size * grad
        v, grad = value_grad(x)
        if v > best_v:
            best, best_v = x, v
    return best


def herd(
    target: WeightedEmbedding,
    spec: KernelSpec,
    cfg: HerdingConfig,
    time_index: int = 0,
) -> SampleSet:
    """Greedy herding of ``cfg.m`` samples approximating ``target``.

    Ties in the pool scan go to the lowest candidate index.
    """
    pool = cfg.candidate_pool
    if pool.dim != target.dim:
        raise ValueError(f"dimension mismatch: pool {pool.dim} vs target {target.dim}")
    if cfg.refine_steps and spec.kind != "gaussian":
        raise ValueError("gradient refinement needs the gaussian kernel")
    X, yl = pool.points, pool.labels
    if spec.needs_labels and yl is None:
        raise ValueError("joint_label kernel needs a labeled candidate pool")
    attract = gram_dot(spec, X, target.points, target.weights, yl, target.labels)
    repel = np.zeros(len(X))
    picked, picked_labels = [], []
    for n in range(1, cfg.m + 1):
        obj = attract - repel / n if n > 1 else attract
        i = int(np.argmax(obj))
        z = X[i]
        label = None if yl is None else yl[i]
        if cfg.refine_steps:
            z = _refine(z, target, picked, n, spec, cfg)
        picked.append(z)
        picked_labels.append(label)
        lab = None if label is None else [label]
        repel += gram(spec, X, z[None, :], yl, lab)[:, 0]
    labels = None if yl is None else np.array(picked_labels)
    return SampleSet(np.array(picked), labels, time_index)
