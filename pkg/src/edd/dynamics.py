"""Learning and extrapolating the dynamics of a sequence of distributions.

The operator ``A`` mapping the embedding of step ``t`` to step ``t+1`` is
fit by vector-valued ridge regression on the empirical embeddings.  Its
action on any vector in the span of the inputs only needs the coefficient
matrix ``W = (K + lam * diag(1/gamma))^-1`` and cross-mean inner products,
so the prediction is itself a signed combination of observed sample sets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .embedding import SampleSet, WeightedEmbedding, combine, embed, inner
from .kernels import KernelSpec, cross_mean


class SingularSystemError(np.linalg.LinAlgError):
    """The regularized Gram system has no numerically stable inverse."""


# Relative eigenvalue floor below which the system counts as singular.
_RCOND = 1e-12


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    sets: tuple
    spec: KernelSpec
    lam: float
    gamma: Optional[np.ndarray]
    K: np.ndarray
    W: np.ndarray
    # Cross means between every pair of the T sets; K is its leading block.
    G: np.ndarray
    singular: bool = False

    @property
    def T(self) -> int:
        return len(self.sets)

    @property
    def beta(self) -> np.ndarray:
        """Coefficients of the prediction on ``embed(sets[1:])``."""
        return self.W @ self.G[:-1, -1]


def gamma_weights(rule: str, sets: Sequence[SampleSet], rho: Optional[float] = None):
    """Per-term regression weights for the ``T - 1`` transitions.

    ``none`` returns None (uniform), ``exponential`` gives ``rho ** -t`` for
    ``t = 1 .. T-1`` and ``sqrt_n`` gives the square root of the size of the
    input set of each transition.
    """
    m = len(sets) - 1
    if rule == "none":
        return None
    if rule == "exponential":
        if rho is None or not 0 < rho < 1:
            raise ValueError("exponential weights need 0 < rho < 1")
        return rho ** -np.arange(1.0, m + 1)
    if rule == "sqrt_n":
        return np.sqrt([len(S) for S in sets[:m]], dtype=float)
    raise ValueError(f"unknown gamma rule {rule!r}")


def default_lambda(sets: Sequence[SampleSet]) -> float:
    return 1.0 / float(np.mean([len(S) for S in sets]))


def cross_mean_matrix(spec: KernelSpec, sets: Sequence[SampleSet]) -> np.ndarray:
    T = len(sets)
    G = np.empty((T, T))
    for s in range(T):
        for t in range(s, T):
            G[s, t] = G[t, s] = cross_mean(spec, sets[s], sets[t])
    return G


def _solve_spd(A: np.ndarray, B: np.ndarray, on_singular: str):
    evals = np.linalg.eigvalsh(A)
    top = max(abs(evals[-1]), np.finfo(float).tiny)
    if evals[0] > _RCOND * top:
        try:
            return linalg.cho_solve(linalg.cho_factor(A), B), False
        except linalg.LinAlgError:
            pass
    if on_singular == "raise":
        raise SingularSystemError(
            f"system matrix is singular (eigenvalues {evals[0]:.3g} .. {evals[-1]:.3g})"
        )
    warnings.warn(
        "singular system; falling back to the minimum-norm least-squares solution",
        RuntimeWarning,
        stacklevel=3,
    )
    return linalg.pinvh(A, atol=_RCOND * top) @ B, True


def fit(
    sets: Sequence[SampleSet],
    spec: KernelSpec,
    lam: Optional[float] = None,
    gamma=None,
    on_singular: str = "pinv",
) -> DynamicsModel:
    """Fit the linear dynamics operator on the embedded sample sets.

    Parameters
    ----------
    sets : sequence of SampleSet
        Observations ``S_1 .. S_T`` in temporal order, ``T >= 2``.
    spec : KernelSpec
        Kernel defining the embedding.
    lam : float, optional
        Ridge constant.  Defaults to ``1 / mean(n_t)``.
    gamma : array_like, optional
        Positive weight for each of the ``T - 1`` transitions.
    on_singular : {"pinv", "raise"}
        What to do when ``K + lam * diag(1/gamma)`` is numerically singular
        (only possible for ``lam = 0``).

    Returns
    -------
    DynamicsModel
    """
    sets = tuple(sets)
    if len(sets) < 2:
        raise ValueError("need at least two sample sets")
    if on_singular not in ("pinv", "raise"):
        raise ValueError("on_singular must be 'pinv' or 'raise'")
    lam = default_lambda(sets) if lam is None else float(lam)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    m = len(sets) - 1
    if gamma is not None:
        gamma = np.asarray(gamma, dtype=float).reshape(-1)
        if len(gamma) != m:
            raise ValueError(f"gamma needs {m} entries, got {len(gamma)}")
        if not (gamma > 0).all():
            raise ValueError("gamma entries must be positive")
    G = cross_mean_matrix(spec, sets)
    K = G[:-1, :-1]
    reg = np.full(m, lam) if gamma is None else lam / gamma
    W, singular = _solve_spd(K + np.diag(reg), np.eye(m), on_singular)
    W = 0.5 * (W + W.T)
    for a in (G, K, W):
        a.flags.writeable = False
    return DynamicsModel(sets, spec, lam, gamma, K, W, G, singular)


def extrapolate(model: DynamicsModel) -> WeightedEmbedding:
    """One-step prediction as the weighted sample set over ``S_2 .. S_T``."""
    return combine(model.beta, model.sets[1:])


def apply(model: DynamicsModel, e: WeightedEmbedding) -> WeightedEmbedding:
    """Apply the learned operator to an arbitrary embedding."""
    kappa = np.array([inner(embed(S), e, model.spec) for S in model.sets[:-1]])
    return combine(model.W @ kappa, model.sets[1:])


def extrapolate_steps(model: DynamicsModel, steps: int) -> WeightedEmbedding:
    """Experimental: apply the learned operator ``steps`` times.

    Only the one-step prediction is backed by the regression model; repeated
    application compounds its error.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    coefs = model.beta
    for _ in range(steps - 1):
        # Current prediction is sum_t coefs[t] * mu_{t+2}; its inner products
        # with mu_1 .. mu_{T-1} come straight from the cross-mean matrix.
        kappa = model.G[:-1, 1:] @ coefs
        coefs = model.W @ kappa
    return combine(coefs, model.sets[1:])


def explicit_oracle_fit(pairs, lam: float, gamma=None) -> np.ndarray:
    """Ridge regression of the operator directly in a finite feature space.

    Solves ``min_A sum_t gamma_t ||out_t - A in_t||^2 + lam ||A||_F^2`` for
    ``(in_t, out_t)`` pairs of feature vectors.  At ``lam = 0`` the
    minimum-norm least-squares solution (the ``lam -> 0`` limit) is returned.
    """
    M = np.array([np.asarray(a, dtype=float) for a, _ in pairs]).T
    N = np.array([np.asarray(b, dtype=float) for _, b in pairs]).T
    if M.shape != N.shape:
        raise ValueError("input and output features must have the same dimension")
    g = np.ones(M.shape[1]) if gamma is None else np.asarray(gamma, dtype=float)
    if len(g) != M.shape[1] or not (g > 0).all():
        raise ValueError("gamma must hold one positive weight per pair")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0:
        sq = np.sqrt(g)
        At, *_ = np.linalg.lstsq((M * sq).T, (N * sq).T, rcond=None)
        return At.T
    S = (M * g) @ M.T + lam * np.eye(M.shape[0])
    return np.linalg.solve(S, (M * g) @ N.T).T


def lemma1_gap(A, mu, mu_hat, eps, A_tilde, f) -> tuple[float, float]:
    """Both sides of the expectation error bound in a finite feature space.

    ``lhs = |<A mu + eps, f> - <A_tilde mu_hat, f>|`` and
    ``rhs = ||A||_F ||mu - mu_hat|| + ||A - A_tilde||_F + ||eps||``.
    Needs ``||f|| <= 1`` and ``||mu_hat|| <= 1`` (an embedding of a
    distribution under a kernel with unit-bounded features).
    """
    A, A_tilde = np.asarray(A, float), np.asarray(A_tilde, float)
    mu, mu_hat, eps, f = (np.asarray(v, float) for v in (mu, mu_hat, eps, f))
    if np.linalg.norm(f) > 1 + 1e-12:
        raise ValueError("test function must have norm <= 1")
    if np.linalg.norm(mu_hat) > 1 + 1e-12:
        raise ValueError("empirical embedding must have norm <= 1")
    lhs = abs((A @ mu + eps) @ f - (A_tilde @ mu_hat) @ f)
    rhs = (
        np.linalg.norm(A, "fro") * np.linalg.norm(mu - mu_hat)
        + np.linalg.norm(A - A_tilde, "fro")
        + np.linalg.norm(eps)
    )
    return float(lhs), float(rhs)
