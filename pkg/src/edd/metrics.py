"""Prediction quality measures: RKHS distance and KDE-based KL divergence."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid

from .embedding import SampleSet, WeightedEmbedding, embed, rkhs_distance
from .kernels import KernelSpec

DENSITY_FLOOR = 1e-12
GRID_SIZE = 2048
_KDE_BLOCK = 1 << 21


@dataclass(frozen=True, eq=False)
class DensityGrid:
    xs: np.ndarray
    ps: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ps = np.asarray(self.ps, dtype=float)
        if xs.ndim != 1 or len(xs) < 2 or xs.shape != ps.shape:
            raise ValueError("need matching 1-D grids with at least two points")
        if not (np.diff(xs) > 0).all():
            raise ValueError("grid must be strictly increasing")
        if (ps < 0).any():
            raise ValueError("densities must be nonnegative")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ps", ps)

    @property
    def spacing(self) -> float:
        return float(np.diff(self.xs).mean())

    def integral(self) -> float:
        return float(trapezoid(self.ps, self.xs))

    def normalized(self) -> "DensityGrid":
        return DensityGrid(self.xs, self.ps / self.integral())


def make_grid(points, bandwidth: float, size: int = GRID_SIZE) -> np.ndarray:
    """Uniform grid over the range of ``points`` widened by 3 bandwidths."""
    x = np.asarray(points, dtype=float).ravel()
    return np.linspace(x.min() - 3 * bandwidth, x.max() + 3 * bandwidth, size)


def kde(S: SampleSet, bandwidth: float, grid) -> DensityGrid:
    """Gaussian kernel density estimate on ``grid``, renormalized to integrate to 1.

    ``bandwidth`` is the standard deviation of the smoothing kernel.
    """
    if S.dim != 1:
        raise ValueError("kde supports 1-D samples only")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    xs = np.asarray(grid, dtype=float)
    z = np.sort(S.points[:, 0])
    # Sorting makes the summation order, and hence the result, permutation invariant.
    ps = np.empty(len(xs))
    step = max(1, _KDE_BLOCK // len(z))
    for i in range(0, len(xs), step):
        u = (xs[i : i + step, None] - z[None, :]) / bandwidth
        ps[i : i + step] = np.exp(-0.5 * u * u).sum(axis=1)
    ps /= len(z) * bandwidth * np.sqrt(2 * np.pi)
    return DensityGrid(xs, ps).normalized()


def kl_divergence(p: DensityGrid, q: DensityGrid) -> float:
    """``KL(p || q)`` by the trapezoid rule, densities floored at 1e-12."""
    if p.xs.shape != q.xs.shape or not np.array_equal(p.xs, q.xs):
        raise ValueError("densities live on different grids")
    pp = np.maximum(p.ps, DENSITY_FLOOR)
    qq = np.maximum(q.ps, DENSITY_FLOOR)
    return float(trapezoid(p.ps * np.log(pp / qq), p.xs))


@dataclass
class Report:
    hs_distance: float
    n_pred: int
    n_ref: int
    kl: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "hs_distance": self.hs_distance,
            "kl": self.kl,
            "n_pred": self.n_pred,
            "n_ref": self.n_ref,
        }


def evaluate_prediction(
    pred: Union[WeightedEmbedding, SampleSet],
    reference: SampleSet,
    spec: KernelSpec,
    kl: Optional[bool] = None,
    bandwidth: Optional[float] = None,
    grid_size: int = GRID_SIZE,
) -> Report:
    """Compare a prediction to a reference sample set.

    The RKHS distance is always reported.  KL divergence ``KL(reference ||
    prediction)`` between kernel density estimates needs a proper sample
    set; by default it is computed whenever ``pred`` is one and the data are
    1-D.  Asking for it on a signed-weight prediction raises ``ValueError``.
    """
    is_set = isinstance(pred, SampleSet)
    e_pred = embed(pred) if is_set else pred
    report = Report(
        rkhs_distance(e_pred, embed(reference), spec),
        n_pred=len(pred),
        n_ref=len(reference),
    )
    if kl is None:
        kl = is_set and reference.dim == 1
    if kl:
        if not is_set:
            raise ValueError("KL needs a uniformly weighted sample set; herd the prediction first")
        h = bandwidth if bandwidth is not None else default_kde_bandwidth(spec)
        xs = make_grid(np.concatenate([pred.points[:, 0], reference.points[:, 0]]), h, grid_size)
        report.kl = kl_divergence(kde(reference, h, xs), kde(pred, h, xs))
    return report


def default_kde_bandwidth(spec: KernelSpec) -> float:
    """Standard deviation of the RKHS kernel when it is gaussian, else 1."""
    inner = spec.base if spec.needs_labels else spec
    return float(np.sqrt(inner.bandwidth)) if inner.kind == "gaussian" else 1.0
