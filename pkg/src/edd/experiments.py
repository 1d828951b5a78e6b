"""Synthetic drifting distributions and the benchmark harness.

Three 1-D settings with known dynamics (observed steps ``t = 0 .. T-1``,
target ``t = T``):

* ``mixture``: ``alpha_t N(3, 1) + (1 - alpha_t) N(-3, 1)``, ``alpha_t = 0.2 + 0.1 t``
* ``translation``: ``N(T + 1 - t, 1)``
* ``concentration``: ``N(0, (T + 1 - t)**2)``, i.e. standard deviation ``T + 1 - t``

Gaussian parameters are (mean, standard deviation).  Distances to the
target are measured against its exact embedding, which is available in
closed form for gaussian kernels and gaussian mixtures.

``pda_rotation`` is a labeled 2-D problem: two gaussian classes whose means
rotate about the origin by a fixed angle per step.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import dynamics, herding, metrics, predsvm
from .embedding import SampleSet, WeightedEmbedding, combine, embed, inner, rkhs_distance
from .kernels import KernelSpec

DEFAULT_T = {"mixture": 6, "translation": 9, "concentration": 9, "pda_rotation": 6}
TABLE1_METHODS = ("true_dist", "last_obs", "edd", "edd_herding")
TABLE2_METHODS = ("true_dist", "last_obs", "edd_herding")

# Kernel of the synthetic benchmarks: unit-variance gaussian, normalized to a density.
EXPERIMENT_KERNEL = KernelSpec("gaussian", 1.0, normalized=True)


@dataclass(frozen=True)
class SyntheticSetting:
    kind: str
    T: Optional[int] = None
    n: int = 100
    seed: int = 0
    # Mixture only: draw exactly round(alpha_t n) points from the first component.
    fixed_proportions: bool = True

    def __post_init__(self):
        if self.kind not in DEFAULT_T:
            raise ValueError(f"unknown setting {self.kind!r}")
        if self.T is None:
            object.__setattr__(self, "T", DEFAULT_T[self.kind])
        if self.T < 2:
            raise ValueError("need at least two observed steps")
        if self.kind == "mixture" and self.T > 8:
            raise ValueError("mixture coefficient leaves [0, 1] for T > 8")
        if self.n < 1:
            raise ValueError("n must be positive")


@dataclass(frozen=True)
class GaussianMixture:
    """1-D mixture sum_j weights[j] N(means[j], sds[j]**2); sd 0 is a point mass."""

    weights: tuple
    means: tuple
    sds: tuple

    def sample(self, rng: np.random.Generator, n: int, fixed_proportions: bool = False) -> np.ndarray:
        """Draw n points.

        With ``fixed_proportions`` the component counts are the weights times
        n rounded by largest remainder, and only within-component noise is
        random.
        """
        p = np.asarray(self.weights, dtype=float)
        if fixed_proportions:
            raw = p * n
            counts = np.floor(raw).astype(int)
            short = n - counts.sum()
            counts[np.argsort(-(raw - counts), kind="stable")[:short]] += 1
            comp = np.repeat(np.arange(len(p)), counts)
            rng.shuffle(comp)
        else:
            comp = rng.choice(len(p), size=n, p=p)
        return np.asarray(self.means)[comp] + np.asarray(self.sds)[comp] * rng.standard_normal(n)

    def pdf(self, xs, extra_var: float = 0.0) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.zeros_like(xs)
        for a, m, s in zip(self.weights, self.means, self.sds):
            v = s * s + extra_var
            out += a * np.exp(-((xs - m) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)
        return out


def _kernel_scale(spec: KernelSpec) -> float:
    if spec.kind != "gaussian":
        raise ValueError("closed-form embeddings need a gaussian kernel")
    return 1.0 if spec.normalized else np.sqrt(2 * np.pi * spec.bandwidth)


def mixture_inner(p: GaussianMixture, q: GaussianMixture, spec: KernelSpec) -> float:
    """``<mu_p, mu_q>`` for a 1-D gaussian kernel."""
    c = _kernel_scale(spec)
    total = 0.0
    for a, m, s in zip(p.weights, p.means, p.sds):
        for b, m2, s2 in zip(q.weights, q.means, q.sds):
            v = spec.bandwidth + s * s + s2 * s2
            total += a * b * np.exp(-((m - m2) ** 2) / (2 * v)) / np.sqrt(2 * np.pi * v)
    return c * total


def mixture_witness(p: GaussianMixture, xs, spec: KernelSpec) -> np.ndarray:
    """``mu_p(x) = <phi(x), mu_p>`` at each point."""
    return _kernel_scale(spec) * p.pdf(np.asarray(xs, dtype=float).ravel(), spec.bandwidth)


def distance_to_truth(e: WeightedEmbedding, p: GaussianMixture, spec: KernelSpec) -> float:
    sq = inner(e, e, spec) - 2 * e.weights @ mixture_witness(p, e.points, spec) + mixture_inner(p, p, spec)
    return float(np.sqrt(max(sq, 0.0)))


def distribution(setting: SyntheticSetting, t: int) -> GaussianMixture:
    """True 1-D distribution at step t (0 .. T)."""
    T = setting.T
    if not 0 <= t <= T:
        raise ValueError(f"time index {t} outside 0..{T}")
    if setting.kind == "mixture":
        a = round(0.2 + 0.1 * t, 10)
        return GaussianMixture((a, 1 - a), (3.0, -3.0), (1.0, 1.0))
    if setting.kind == "translation":
        return GaussianMixture((1.0,), (float(T + 1 - t),), (1.0,))
    if setting.kind == "concentration":
        return GaussianMixture((1.0,), (0.0,), (float(T + 1 - t),))
    raise ValueError(f"{setting.kind} has no 1-D distribution")


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([seed, *keys])


def generate(setting: SyntheticSetting, t: int, n: Optional[int] = None, stream: int = 0) -> SampleSet:
    """``n`` draws from the setting's distribution at step t.

    Draws are i.i.d. except that mixture component counts are fixed when
    ``setting.fixed_proportions`` is set.  They are a deterministic function
    of ``(seed, t, stream)``.
    """
    n = setting.n if n is None else n
    if n < 1:
        raise ValueError("n must be positive")
    if setting.kind == "pda_rotation":
        return rotating_blobs(t, n, _rng(setting.seed, t, stream), T=setting.T)
    x = distribution(setting, t).sample(_rng(setting.seed, t, stream), n, setting.fixed_proportions)
    return SampleSet(x, time_index=t)


def observed_sets(setting: SyntheticSetting) -> list:
    return [generate(setting, t) for t in range(setting.T)]


# ---------------------------------------------------------------------------
# Synthetic benchmark: tables of HS distance and KL divergence


def _kl_to_truth(S: SampleSet, p: GaussianMixture, h: float, grid_size: int) -> float:
    sd = np.asarray(p.sds)
    m = np.asarray(p.means)
    lo = min(S.points.min(), (m - 3 * sd).min()) - 3 * h
    hi = max(S.points.max(), (m + 3 * sd).max()) + 3 * h
    xs = np.linspace(lo, hi, grid_size)
    truth = metrics.DensityGrid(xs, p.pdf(xs, h * h)).normalized()
    return metrics.kl_divergence(truth, metrics.kde(S, h, xs))


def run_repeat(
    kind: str,
    n: int,
    seed: int,
    spec: KernelSpec = EXPERIMENT_KERNEL,
    herd: bool = True,
    reference: str = "analytic",
    grid_size: int = metrics.GRID_SIZE,
    herd_target: str = "literal",
) -> dict:
    """One repeat of the synthetic benchmark: ``{method: {"hs": .., "kl": ..}}``.

    ``reference="analytic"`` compares against the exact target embedding and
    smoothed target density; ``"sample"`` against a fresh size-n sample.
    ``herd_target="mass_normalized"`` herds the prediction divided by its
    total weight instead of the prediction itself.
    """
    setting = SyntheticSetting(kind, n=n, seed=seed)
    sets = observed_sets(setting)
    truth = distribution(setting, setting.T)
    fresh = generate(setting, setting.T, stream=1)
    h = metrics.default_kde_bandwidth(spec)

    if reference == "analytic":
        def hs(e):
            return distance_to_truth(e, truth, spec)

        def kl(S):
            return _kl_to_truth(S, truth, h, grid_size)
    elif reference == "sample":
        ref = generate(setting, setting.T, stream=2)

        def hs(e):
            return rkhs_distance(e, embed(ref), spec)

        def kl(S):
            return metrics.evaluate_prediction(S, ref, spec, kl=True, grid_size=grid_size).kl
    else:
        raise ValueError("reference must be 'analytic' or 'sample'")

    model = dynamics.fit(sets, spec, lam=1.0 / n)
    pred = dynamics.extrapolate(model)
    out = {
        "true_dist": {"hs": hs(embed(fresh)), "kl": kl(fresh)},
        "last_obs": {"hs": hs(embed(sets[-1])), "kl": kl(sets[-1])},
        "edd": {"hs": hs(pred), "kl": None},
        "beta": model.beta,
    }
    if herd:
        cfg = herding.HerdingConfig(n, herding.candidate_pool(sets, margin=3 * np.sqrt(spec.bandwidth)))
        target = pred
        if herd_target == "mass_normalized":
            target = pred.scaled(1.0 / pred.weights.sum())
        elif herd_target != "literal":
            raise ValueError("herd_target must be 'literal' or 'mass_normalized'")
        herded = herding.herd(target, spec, cfg, time_index=setting.T)
        out["edd_herding"] = {"hs": hs(embed(herded)), "kl": kl(herded)}
    return out


def repeat_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([seed, r]).generate_state(1)[0])


def run_synthetic(
    kinds: Iterable[str] = ("mixture", "translation", "concentration"),
    ns: Iterable[int] = (10, 100, 1000),
    repeats: int = 100,
    seed: int = 0,
    **kw,
) -> list:
    """Raw per-repeat records ``(kind, n, repeat, result)``."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    records = []
    for kind in kinds:
        for n in ns:
            for r in range(repeats):
                records.append((kind, n, r, run_repeat(kind, n, repeat_seed(seed, r), **kw)))
    return records


def summarize(records, metric: str, methods: Sequence[str], seed: int = 0) -> list:
    """Mean and standard deviation over repeats, one row per (setting, n, method)."""
    groups: dict = {}
    for kind, n, _, res in records:
        for m in methods:
            if m in res and res[m][metric] is not None:
                groups.setdefault((kind, n, m), []).append(res[m][metric])
    rows = []
    for (kind, n, m), vals in groups.items():
        vals = np.asarray(vals)
        rows.append(
            {
                "setting": kind,
                "n": n,
                "method": m,
                "mean": float(vals.mean()),
                "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "repeats": len(vals),
                "seed": seed,
            }
        )
    return rows


def run_table1(kinds=("mixture", "translation", "concentration"), ns=(10, 100, 1000), repeats=100, seed=0, **kw):
    """HS distance table (mean and std over repeats) for four methods."""
    if repeats < 2:
        raise ValueError("need at least two repeats for a spread")
    return summarize(run_synthetic(kinds, ns, repeats, seed, **kw), "hs", TABLE1_METHODS, seed)


def run_table2(kinds=("mixture", "translation", "concentration"), ns=(10, 100, 1000), repeats=100, seed=0, **kw):
    """KL divergence table for the true-sample, last-observed and herded predictions."""
    if repeats < 2:
        raise ValueError("need at least two repeats for a spread")
    return summarize(run_synthetic(kinds, ns, repeats, seed, **kw), "kl", TABLE2_METHODS, seed)


def limit_distances(kind: str, spec: KernelSpec = EXPERIMENT_KERNEL) -> dict:
    """HS distances of last-observed and prediction for exact embeddings (n -> inf, lam = 0)."""
    setting = SyntheticSetting(kind)
    dists = [distribution(setting, t) for t in range(setting.T + 1)]
    T = setting.T
    G = np.array([[mixture_inner(p, q, spec) for q in dists] for p in dists])
    with warnings.catch_warnings():
        # Exact embeddings of nearby distributions are close to collinear.
        warnings.simplefilter("ignore", RuntimeWarning)
        W, _ = dynamics._solve_spd(G[: T - 1, : T - 1], np.eye(T - 1), "pinv")
    beta = W @ G[: T - 1, T - 1]
    # Prediction sum_t beta_t mu_{t+1} over observed t+1 = 1 .. T-1; target is index T.
    idx = np.arange(1, T)
    pred_sq = beta @ G[np.ix_(idx, idx)] @ beta
    edd = pred_sq - 2 * beta @ G[idx, T] + G[T, T]
    last = G[T - 1, T - 1] - 2 * G[T - 1, T] + G[T, T]
    return {"last_obs": float(np.sqrt(max(last, 0))), "edd": float(np.sqrt(max(edd, 0))), "beta": beta}


def write_results(rows: Sequence[dict], csv_path=None, json_path=None) -> None:
    cols = ("setting", "n", "method", "mean", "std", "repeats", "seed")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            for row in rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(list(rows), fh, indent=1)


# ---------------------------------------------------------------------------
# Synthetic predictive domain adaptation


def rotating_blobs(
    t: int,
    n: int,
    rng: np.random.Generator,
    T: int = 6,
    step: float = np.deg2rad(15),
    radius: float = 2.0,
    offset: float = 1.0,
    noise: float = 0.6,
) -> SampleSet:
    """Two classes at ``R(t * step) (radius, -+offset)`` with isotropic noise.

    Labels are 0 and 1, in equal proportion up to rounding.
    """
    y = np.arange(n) % 2
    rng.shuffle(y)
    angle = t * step
    R = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    centers = np.array([[radius, -offset], [radius, offset]]) @ R.T
    X = centers[y] + noise * rng.standard_normal((n, 2))
    return SampleSet(X, y, time_index=t)


def _accuracy(clf, S: SampleSet) -> float:
    return float(np.mean(clf.predict(S.points) == S.labels))


def _fit_svm(ts, C, seed, cv_kw):
    if C == "cv":
        C = predsvm.select_C(ts, seed=seed, **cv_kw)
    return predsvm.train(ts, C, **cv_kw)


PDA_METHODS = ("single_t*", "last_set", "union", "predsvm", "predsvm_unlabeled_dynamics")


def pda_repeat(
    T: int,
    n: int,
    step: float,
    seed: int,
    n_test: int = 1000,
    C="cv",
    dyn_kernel: KernelSpec = KernelSpec("joint_label", base=KernelSpec("gaussian", 1.0)),
    svm_kw: Optional[dict] = None,
    methods: Sequence[str] = PDA_METHODS,
) -> dict:
    """Test accuracy at step T for single-set, union and PredSVM classifiers.

    ``methods`` restricts which classifiers are trained; ``"single_t*"``
    stands for one classifier per observed set.
    """
    unknown = set(methods) - set(PDA_METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    svm_kw = {"max_epochs": 300, "tol": 1e-3} if svm_kw is None else svm_kw
    rng_sets = [_rng(seed, t, 0) for t in range(T + 1)]
    sets = [rotating_blobs(t, n, rng_sets[t], T, step) for t in range(T)]
    test = rotating_blobs(T, n_test, rng_sets[T], T, step)

    def acc(ts):
        return _accuracy(_fit_svm(ts, C, seed, svm_kw), test)

    out = {}
    if "single_t*" in methods:
        for S in sets:
            out[f"single_t{S.time_index}"] = acc(predsvm.from_sample_set(S))
    if "last_set" in methods:
        key = f"single_t{T - 1}"
        out["last_set"] = out[key] if key in out else acc(predsvm.from_sample_set(sets[-1]))
    if "union" in methods:
        union = SampleSet(
            np.concatenate([S.points for S in sets]), np.concatenate([S.labels for S in sets]), T - 1
        )
        out["union"] = acc(predsvm.from_sample_set(union))
    model = dynamics.fit(sets, dyn_kernel)
    if "predsvm" in methods:
        out["predsvm"] = acc(predsvm.flip_transform(dynamics.extrapolate(model)))
    if "predsvm_unlabeled_dynamics" in methods:
        base = dyn_kernel.base if dyn_kernel.needs_labels else dyn_kernel
        unlabeled = [SampleSet(S.points, None, S.time_index) for S in sets]
        beta = dynamics.fit(unlabeled, base).beta
        out["predsvm_unlabeled_dynamics"] = acc(predsvm.flip_transform(combine(beta, sets[1:])))
    out["beta"] = model.beta
    return out


def run_pda_synthetic(
    T: int = 6,
    n: int = 200,
    rotation: float = np.deg2rad(15),
    repeats: int = 20,
    seed: int = 0,
    **kw,
) -> list:
    """Mean and std of test accuracy over repeats for each method."""
    records = [
        ("pda_rotation", n, r, {k: {"acc": v} for k, v in pda_repeat(T, n, rotation, repeat_seed(seed, r), **kw).items() if k != "beta"})
        for r in range(repeats)
    ]
    methods = sorted(records[0][3])
    return summarize(records, "acc", methods, seed)


# ---------------------------------------------------------------------------
# Randomized finite-dimensional checks of the regression


def oracle_equivalence_trial(rng: np.random.Generator, T: Optional[int] = None, use_gamma: Optional[bool] = None) -> float:
    """Distance between kernel-path and explicit feature-space predictions.

    Uses the linear kernel ``<z, z'>/d``, whose RKHS is ``R^d`` with feature
    map ``z / sqrt(d)``.  The distance is measured in that feature space:
    expanding it through kernel sums would cancel to ``~sqrt(eps)``.
    """
    T = int(rng.integers(2, 7)) if T is None else T
    use_gamma = bool(rng.integers(2)) if use_gamma is None else use_gamma
    d = int(rng.integers(1, 6))
    lam = float(10 ** rng.uniform(-3, 0))
    spec = KernelSpec("linear")
    drift = rng.normal(size=d) * 0.3
    sets = [
        SampleSet(rng.uniform(-1, 1, size=(int(rng.integers(3, 20)), d)) + t * drift, time_index=t)
        for t in range(T)
    ]
    gamma = rng.uniform(0.2, 3.0, size=T - 1) if use_gamma else None
    feats = [S.points.mean(axis=0) / np.sqrt(d) for S in sets]
    A = dynamics.explicit_oracle_fit(list(zip(feats[:-1], feats[1:])), lam, gamma)
    pred = dynamics.extrapolate(dynamics.fit(sets, spec, lam, gamma))
    return float(np.linalg.norm(pred.weights @ pred.points / np.sqrt(d) - A @ feats[-1]))


def lemma1_trial(rng: np.random.Generator) -> tuple:
    """Random finite-dimensional instance of the expectation error bound."""
    d = int(rng.integers(1, 11))
    # Atoms in the unit ball so every embedding has norm <= 1.
    atoms = rng.normal(size=(int(rng.integers(2, 12)), d))
    atoms /= np.maximum(1.0, np.linalg.norm(atoms, axis=1))[:, None]
    p = rng.dirichlet(np.ones(len(atoms)))
    mu = p @ atoms
    mu_hat = atoms[rng.choice(len(atoms), size=int(rng.integers(1, 50)), p=p)].mean(axis=0)
    A = rng.normal(size=(d, d)) * rng.uniform(0.1, 2.0) / np.sqrt(d)
    eps = rng.normal(size=d) * rng.uniform(0, 0.5)
    # A fitted operator from noisy transitions of random embeddings.
    ins = [rng.dirichlet(np.ones(len(atoms))) @ atoms for _ in range(int(rng.integers(2, 8)))]
    pairs = [(m, A @ m + rng.normal(size=d) * 0.1) for m in ins]
    A_tilde = dynamics.explicit_oracle_fit(pairs, float(10 ** rng.uniform(-3, 1)))
    f = rng.normal(size=d)
    f *= rng.uniform(0, 1) / np.linalg.norm(f)
    return dynamics.lemma1_gap(A, mu, mu_hat, eps, A_tilde, f)

