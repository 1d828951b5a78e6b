"""Linear SVM trained on a predicted, signed-weight distribution.

Negative coefficients are removed by flipping labels: for 0/1 loss,
``beta * loss(y, f) = |beta| * loss(-y, f) + beta`` when ``beta < 0``.
The resulting positive-weight problem is bounded by the weighted hinge loss
and solved by dual coordinate descent with per-sample box constraints
``0 <= alpha_i <= C * b_i``.  The bias is the weight of a constant feature
and is regularized with the rest of ``w``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .embedding import SampleSet, WeightedEmbedding
from .kernels import as_points

C_GRID = tuple(10.0 ** np.arange(0, 7))


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class WeightedTrainingSet:
    """Positive-weight training items after the label flip.

    ``signs[i]`` is -1 for items whose source coefficient was negative; the
    effective binary target for class ``k`` is ``signs[i] * (+1 if
    labels[i] == k else -1)``.  ``offset`` is the constant separating the
    signed 0/1 risk from the positive-weight one.
    """

    weights: np.ndarray
    points: np.ndarray
    labels: np.ndarray
    signs: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        b = np.asarray(self.weights, dtype=float).reshape(-1)
        X = as_points(self.points)
        y = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        s = np.asarray(self.signs, dtype=np.int64).reshape(-1)
        if not (len(b) == len(X) == len(y) == len(s)):
            raise ValueError("weights, points, labels and signs must align")
        if not (b > 0).all():
            raise ValueError("training weights must be positive")
        if not np.isin(s, (-1, 1)).all():
            raise ValueError("signs must be +1 or -1")
        for name, v in (("weights", b), ("points", X), ("labels", y), ("signs", s)):
            object.__setattr__(self, name, v)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def classes(self) -> np.ndarray:
        return np.unique(self.labels)

    def subset(self, idx) -> "WeightedTrainingSet":
        return WeightedTrainingSet(
            self.weights[idx], self.points[idx], self.labels[idx], self.signs[idx], self.offset
        )

    def binary_targets(self, positive=None) -> np.ndarray:
        """Flipped +-1 targets for ``positive`` vs rest (binary: larger class)."""
        if positive is None:
            classes = self.classes
            if len(classes) > 2:
                raise ValueError("binary_targets needs a positive class for multiclass data")
            positive = classes[-1]
        return self.signs * np.where(self.labels == positive, 1, -1)


def flip_transform(pred: WeightedEmbedding, set_sizes: Optional[dict] = None) -> WeightedTrainingSet:
    """Turn a labeled signed-weight prediction into positive-weight items.

    Each atom with weight ``w = beta_t / n_t`` becomes ``(|w|, x, sign(w) y)``;
    zero-weight atoms are dropped.  ``set_sizes`` (time index -> n_t), when
    given, is checked against the atom sources.
    """
    if pred.labels is None:
        raise ValueError("flip_transform needs labeled atoms")
    if set_sizes is not None:
        if pred.sources is None:
            raise ValueError("set_sizes given but atoms carry no source index")
        for t in np.unique(pred.sources):
            n_t = set_sizes.get(int(t), 0)
            if n_t <= 0:
                raise ValueError(f"source {int(t)} has no positive set size")
            if np.count_nonzero(pred.sources == t) != n_t:
                raise ValueError(f"source {int(t)} does not have {n_t} atoms")
    w = pred.weights
    keep = w != 0
    return WeightedTrainingSet(
        np.abs(w[keep]),
        pred.points[keep],
        pred.labels[keep],
        np.where(w[keep] > 0, 1, -1),
        offset=float(w[w < 0].sum()),
    )


def from_sample_set(S: SampleSet, weight: Optional[float] = None) -> WeightedTrainingSet:
    """Plain training set: every point weighted ``weight`` (default ``1/n``)."""
    if S.labels is None:
        raise ValueError("sample set has no labels")
    n = len(S)
    b = 1.0 / n if weight is None else weight
    return WeightedTrainingSet(np.full(n, b), S.points, S.labels, np.ones(n, dtype=np.int64))


@njit(cache=True)
def _dual_cd(X, y, U, alpha, w, max_epochs, tol):
    n, d = X.shape
    Q = np.empty(n)
    for i in range(n):
        Q[i] = X[i] @ X[i]
    gap = np.inf
    for epoch in range(max_epochs):
        for i in range(n):
            G = y[i] * (w @ X[i]) - 1.0
            a = alpha[i]
            new = min(max(a - G / Q[i], 0.0), U[i])
            if new != a:
                w += (new - a) * y[i] * X[i]
                alpha[i] = new
        ww = w @ w
        hinge = 0.0
        for i in range(n):
            m = 1.0 - y[i] * (w @ X[i])
            if m > 0:
                hinge += U[i] * m
        primal = 0.5 * ww + hinge
        gap = primal - (alpha.sum() - 0.5 * ww)
        if gap <= tol * max(1.0, primal):
            return epoch + 1, gap, True
    return max_epochs, gap, False


def _solve_binary(X, y, U, tol, max_epochs):
    Xa = np.hstack([X, np.ones((len(X), 1))])
    alpha = np.zeros(len(X))
    w = np.zeros(Xa.shape[1])
    epochs, gap, ok = _dual_cd(Xa, y.astype(float), U, alpha, w, max_epochs, tol)
    return w[:-1].copy(), float(w[-1]), float(gap), bool(ok)


@dataclass(frozen=True, eq=False)
class LinearClassifier:
    classes: np.ndarray
    coef: np.ndarray
    intercept: np.ndarray
    C: float
    converged: bool = True
    gap: float = 0.0

    def decision_function(self, X) -> np.ndarray:
        X = as_points(X)
        if X.shape[1] != self.coef.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {self.coef.shape[1]}")
        return X @ self.coef.T + self.intercept

    def predict(self, X) -> np.ndarray:
        D = self.decision_function(X)
        if len(self.classes) == 2:
            return np.where(D[:, 0] >= 0, self.classes[1], self.classes[0])
        return self.classes[np.argmax(D, axis=1)]

    def to_dict(self) -> dict:
        return {
            "classes": self.classes.tolist(),
            "w": self.coef.tolist(),
            "bias": self.intercept.tolist(),
            "C": self.C,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearClassifier":
        return cls(
            np.asarray(d["classes"]),
            np.asarray(d["w"], dtype=float),
            np.asarray(d["bias"], dtype=float),
            float(d["C"]),
        )


def train(
    ts: WeightedTrainingSet,
    C: float,
    tol: float = 1e-6,
    max_epochs: int = 10_000,
) -> LinearClassifier:
    """Minimize ``0.5 ||w||^2 + C sum_i b_i hinge(ybar_i, <w, x_i> + bias)``.

    Binary problems use the flipped +-1 targets directly; more than two
    classes are handled one-vs-rest.  Training stops once the duality gap is
    below ``tol * max(1, primal)``; hitting ``max_epochs`` first emits a
    :class:`ConvergenceWarning` and sets ``converged=False``.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    classes = ts.classes
    if len(classes) < 2:
        raise ValueError("training data has a single class")
    positives = classes[-1:] if len(classes) == 2 else classes
    U = C * ts.weights
    coef, intercept, gaps, ok = [], [], [], True
    for k in positives:
        y = ts.binary_targets(k)
        if (y > 0).all() or (y < 0).all():
            raise ValueError(f"flipped targets for class {k} are all one sign")
        w, b, gap, conv = _solve_binary(ts.points, y, U, tol, max_epochs)
        coef.append(w)
        intercept.append(b)
        gaps.append(gap)
        ok &= conv
    if not ok:
        warnings.warn(
            f"dual coordinate descent stopped after {max_epochs} epochs (gap {max(gaps):.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return LinearClassifier(classes, np.array(coef), np.array(intercept), float(C), ok, max(gaps))


def primal_objective(clf: LinearClassifier, ts: WeightedTrainingSet) -> float:
    """Weighted hinge objective of a binary classifier, bias included in the norm."""
    if len(clf.classes) != 2:
        raise ValueError("primal_objective is defined for binary classifiers")
    y = ts.binary_targets(clf.classes[1])
    margin = y * clf.decision_function(ts.points)[:, 0]
    w2 = clf.coef[0] @ clf.coef[0] + clf.intercept[0] ** 2
    return float(0.5 * w2 + clf.C * (ts.weights * np.maximum(0.0, 1.0 - margin)).sum())


def signed_risk(clf: LinearClassifier, ts: WeightedTrainingSet) -> float:
    """Predicted 0/1 risk ``sum_i b_i loss_i`` with flipped items scoring ``1 - loss``.

    Equals the risk under the original signed weights minus ``ts.offset``.
    """
    wrong = clf.predict(ts.points) != ts.labels
    loss = np.where(ts.signs > 0, wrong, ~wrong)
    return float(ts.weights @ loss)


def select_C(
    ts: WeightedTrainingSet,
    grid: Sequence[float] = C_GRID,
    folds: int = 5,
    seed: int = 0,
    **train_kw,
) -> float:
    """Pick C by k-fold cross-validation of the predicted 0/1 risk.

    For a plain training set this is the held-out error rate.  Ties go to
    the smallest C.
    """
    n = len(ts)
    order = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(order, min(folds, n))
    scores = np.zeros(len(grid))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for held in parts:
            mask = np.ones(n, dtype=bool)
            mask[held] = False
            train_part, test_part = ts.subset(mask), ts.subset(held)
            for j, C in enumerate(grid):
                try:
                    clf = train(train_part, C, **train_kw)
                except ValueError:
                    scores[j] = np.inf
                    continue
                scores[j] += signed_risk(clf, test_part)
    return float(grid[int(np.argmin(scores))])
