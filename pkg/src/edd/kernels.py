"""Positive-definite kernels and batched Gram computations.

Every inner product in the package reduces to :func:`gram` or
:func:`gram_dot`.  Points are passed as arrays of shape ``(n, d)``; a 1-D
array is read as ``n`` scalar points.  The joint label kernel additionally
needs integer label arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.spatial.distance import cdist

KINDS = ("gaussian", "histogram_intersection", "rbf_chi2", "linear", "joint_label")

# Upper bound on the number of float64 temporaries materialized per block.
_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice and parameters.

    Parameters
    ----------
    kind : str
        One of ``gaussian``, ``histogram_intersection``, ``rbf_chi2``,
        ``linear`` or ``joint_label``.
    bandwidth : float
        Variance ``sigma**2`` of the gaussian kernel.  Ignored by the others.
    base : KernelSpec, optional
        Input kernel wrapped by ``joint_label``.
    normalized : bool
        Gaussian only.  Scale the kernel by ``(2 pi sigma**2) ** (-d/2)`` so
        that ``k(., z)`` is the normal density centred at ``z``.
    """

    kind: str = "gaussian"
    bandwidth: float = 1.0
    base: Optional["KernelSpec"] = None
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian" and not self.bandwidth > 0:
            raise ValueError("gaussian bandwidth must be positive")
        if self.kind == "joint_label":
            if self.base is None:
                raise ValueError("joint_label needs a base kernel")
            if self.base.kind == "joint_label":
                raise ValueError("joint_label base must act on inputs only")
        elif self.base is not None:
            raise ValueError(f"{self.kind} kernel takes no base kernel")
        if self.normalized and self.kind != "gaussian":
            raise ValueError("only the gaussian kernel can be normalized")

    @property
    def needs_labels(self) -> bool:
        return self.kind == "joint_label"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "bandwidth": self.bandwidth}
        if self.base is not None:
            out["base"] = self.base.to_dict()
        if self.normalized:
            out["normalized"] = True
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "KernelSpec":
        base = d.get("base")
        return cls(
            kind=d["kind"],
            bandwidth=float(d.get("bandwidth", 1.0)),
            base=cls.from_dict(base) if base is not None else None,
            normalized=bool(d.get("normalized", False)),
        )


def as_points(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    elif X.ndim != 2:
        raise ValueError(f"points must be 1-D or 2-D, got shape {X.shape}")
    return X


def _check_pair(spec: KernelSpec, A, B, ya, yb):
    A = as_points(A)
    B = as_points(B)
    if len(A) and len(B) and A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    inner = spec.base if spec.kind == "joint_label" else spec
    if inner.kind in ("histogram_intersection", "rbf_chi2"):
        if (A < 0).any() or (B < 0).any():
            raise ValueError(f"{inner.kind} kernel needs nonnegative coordinates")
        if inner.kind == "histogram_intersection":
            for X in (A, B):
                if len(X) and (X.mean(axis=1) > 1.0 + 1e-12).any():
                    warnings.warn(
                        "histogram with k(z, z) > 1; unit feature-norm bound violated",
                        RuntimeWarning,
                        stacklevel=3,
                    )
                    break
    if spec.needs_labels:
        if ya is None or yb is None:
            raise ValueError("joint_label kernel needs labels on both sides")
        ya = np.asarray(ya).reshape(-1)
        yb = np.asarray(yb).reshape(-1)
        if len(ya) != len(A) or len(yb) != len(B):
            raise ValueError("labels must align with points")
    return A, B, ya, yb


def _block(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kernel matrix for a block of validated, label-free inputs."""
    kind = spec.kind
    d = A.shape[1]
    if kind == "gaussian":
        K = np.exp(cdist(A, B, "sqeuclidean") / (-2.0 * spec.bandwidth))
        if spec.normalized:
            K *= (2.0 * np.pi * spec.bandwidth) ** (-0.5 * d)
        return K
    if kind == "linear":
        return (A @ B.T) / d
    if kind == "histogram_intersection":
        return np.minimum(A[:, None, :], B[None, :, :]).mean(axis=2)
    if kind == "rbf_chi2":
        diff = A[:, None, :] - B[None, :, :]
        half_sum = 0.5 * (A[:, None, :] + B[None, :, :])
        with np.errstate(invalid="ignore", divide="ignore"):
            terms = np.where(half_sum > 0, diff * diff / half_sum, 0.0)
        return np.exp(-0.5 * terms.mean(axis=2))
    raise AssertionError(kind)


def _row_chunk(spec: KernelSpec, n_cols: int, d: int) -> int:
    inner = spec.base if spec.kind == "joint_label" else spec
    per_row = n_cols * (d if inner.kind in ("histogram_intersection", "rbf_chi2") else 1)
    return max(1, _BLOCK_ELEMS // max(per_row, 1))


def _label_mask(ya, yb) -> np.ndarray:
    return ya[:, None] == yb[None, :]


def gram(spec: KernelSpec, A, B, ya=None, yb=None) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(A[i], B[j])``."""
    A, B, ya, yb = _check_pair(spec, A, B, ya, yb)
    if len(A) == 0 or len(B) == 0:
        return np.zeros((len(A), len(B)))
    inner = spec.base if spec.needs_labels else spec
    step = _row_chunk(spec, len(B), A.shape[1])
    out = np.empty((len(A), len(B)))
    for i in range(0, len(A), step):
        out[i : i + step] = _block(inner, A[i : i + step], B)
        if spec.needs_labels:
            out[i : i + step] *= _label_mask(ya[i : i + step], yb)
    return out


def gram_dot(spec: KernelSpec, A, B, w, ya=None, yb=None) -> np.ndarray:
    """``gram(spec, A, B) @ w`` without holding the full matrix."""
    A, B, ya, yb = _check_pair(spec, A, B, ya, yb)
    w = np.asarray(w, dtype=float)
    if len(w) != len(B):
        raise ValueError("weight vector must align with B")
    if len(A) == 0 or len(B) == 0:
        return np.zeros(len(A))
    inner = spec.base if spec.needs_labels else spec
    step = _row_chunk(spec, len(B), A.shape[1])
    out = np.empty(len(A))
    for i in range(0, len(A), step):
        K = _block(inner, A[i : i + step], B)
        if spec.needs_labels:
            K *= _label_mask(ya[i : i + step], yb)
        out[i : i + step] = K @ w
    return out


def evaluate(spec: KernelSpec, z, z2) -> float:
    """Single kernel evaluation ``k(z, z2)``.

    For the joint label kernel pass each argument as an ``(x, y)`` pair.
    """
    if spec.needs_labels:
        try:
            (x, y), (x2, y2) = z, z2
        except (TypeError, ValueError):
            raise ValueError("joint_label kernel needs (point, label) pairs") from None
        if y is None or y2 is None:
            raise ValueError("joint_label kernel needs labels on both sides")
        x = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))[None, :]
        return float(gram(spec, x, x2, [y], [y2])[0, 0])
    z = np.atleast_1d(np.asarray(z, dtype=float))[None, :]
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))[None, :]
    return float(gram(spec, z, z2)[0, 0])


def cross_mean(spec: KernelSpec, S, S2) -> float:
    """Inner product of two empirical mean embeddings.

    ``(1 / (n m)) sum_i sum_j k(S[i], S2[j])``; accepts :class:`SampleSet`
    objects or raw point arrays.
    """
    X, y = _unpack(S)
    X2, y2 = _unpack(S2)
    if len(X) == 0 or len(X2) == 0:
        raise ValueError("cross_mean of an empty sample set")
    # Smaller side goes in the weight vector.
    if len(X) < len(X2):
        X, y, X2, y2 = X2, y2, X, y
    v = gram_dot(spec, X, X2, np.full(len(X2), 1.0 / len(X2)), y, y2)
    return float(v.mean())


def _unpack(S):
    if hasattr(S, "points"):
        return S.points, getattr(S, "labels", None)
    return as_points(S), None
