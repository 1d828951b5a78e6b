import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from edd.embedding import SampleSet
from edd.kernels import KernelSpec, cross_mean, evaluate, gram, gram_dot

GAUSS = KernelSpec("gaussian", 1.0)
HIST = KernelSpec("histogram_intersection")
CHI2 = KernelSpec("rbf_chi2")
JOINT = KernelSpec("joint_label", base=GAUSS)


def test_gaussian_diagonal_is_one():
    assert evaluate(GAUSS, [0.0, 0.0], [0.0, 0.0]) == 1.0


def test_gaussian_unit_distance():
    assert evaluate(GAUSS, 0.0, 1.0) == pytest.approx(np.exp(-0.5), abs=1e-15)
    assert evaluate(GAUSS, 0.0, 1.0) == pytest.approx(0.60653, abs=1e-5)


def test_gaussian_bandwidth_is_variance():
    spec = KernelSpec("gaussian", 4.0)
    assert evaluate(spec, 0.0, 2.0) == pytest.approx(np.exp(-0.5))


def test_normalized_gaussian_is_a_density():
    spec = KernelSpec("gaussian", 2.0, normalized=True)
    assert evaluate(spec, 0.0, 0.0) == pytest.approx(1 / np.sqrt(4 * np.pi))


def test_joint_label_mismatch_is_zero():
    for base in (GAUSS, HIST, CHI2):
        assert evaluate(KernelSpec("joint_label", base=base), ([0.3], 1), ([0.3], 2)) == 0.0


def test_joint_label_match_is_base():
    assert evaluate(JOINT, ([0.0], 1), ([1.0], 1)) == evaluate(GAUSS, 0.0, 1.0)


def test_histogram_intersection_diagonal():
    assert evaluate(HIST, [0.2, 0.8], [0.2, 0.8]) == pytest.approx(0.5)


def test_rbf_chi2_formula_and_zero_bins():
    a, b = np.array([0.5, 0.0, 0.5]), np.array([0.25, 0.0, 0.75])
    chi2 = ((0.25**2) / 0.375 + (0.25**2) / 0.625) / 3
    assert evaluate(CHI2, a, b) == pytest.approx(np.exp(-0.5 * chi2))
    assert evaluate(CHI2, a, a) == 1.0


def test_gram_two_points():
    K = gram(GAUSS, [0.0, 1.0], [0.0, 1.0])
    e = np.exp(-0.5)
    np.testing.assert_allclose(K, [[1, e], [e, 1]], rtol=0, atol=1e-15)


def test_gram_empty():
    assert gram(GAUSS, np.empty((0, 1)), [[1.0]]).shape == (0, 1)


def test_cross_mean_two_point_set():
    S = SampleSet([0.0, 1.0])
    assert cross_mean(GAUSS, S, S) == pytest.approx((2 + 2 * np.exp(-0.5)) / 4, abs=1e-15)
    assert cross_mean(GAUSS, S, S) == pytest.approx(0.80327, abs=1e-5)


def test_cross_mean_singletons_match_eval():
    assert cross_mean(GAUSS, SampleSet([0.3]), SampleSet([-1.2])) == evaluate(GAUSS, 0.3, -1.2)


def test_errors():
    with pytest.raises(ValueError, match="dimension"):
        evaluate(GAUSS, [0.0, 1.0], [0.0])
    with pytest.raises(ValueError, match="nonnegative"):
        evaluate(HIST, [-0.1], [0.2])
    with pytest.raises(ValueError, match="nonnegative"):
        evaluate(CHI2, [0.1], [-0.2])
    with pytest.raises(ValueError, match="labels"):
        evaluate(JOINT, ([0.0], None), ([0.0], 1))
    with pytest.raises(ValueError, match="labels"):
        gram(JOINT, [[0.0]], [[0.0]])
    with pytest.raises(ValueError, match="empty"):
        cross_mean(GAUSS, np.empty((0, 1)), [[0.0]])


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("gaussian", 0.0)
    with pytest.raises(ValueError):
        KernelSpec("joint_label")
    with pytest.raises(ValueError):
        KernelSpec("joint_label", base=JOINT)
    with pytest.raises(ValueError):
        KernelSpec("linear", base=GAUSS)
    with pytest.raises(ValueError):
        KernelSpec("nope")


def test_histogram_above_one_warns():
    with pytest.warns(RuntimeWarning, match="unit feature-norm"):
        evaluate(HIST, [2.0, 2.0], [1.0, 1.0])


def test_spec_json_round_trip():
    for spec in (GAUSS, JOINT, KernelSpec("gaussian", 0.5, normalized=True), CHI2):
        assert KernelSpec.from_dict(spec.to_dict()) == spec
    assert JOINT.to_dict() == {"kind": "joint_label", "bandwidth": 1.0, "base": {"kind": "gaussian", "bandwidth": 1.0}}


def test_gram_chunking_matches_unchunked(monkeypatch):
    import edd.kernels as K

    rng = np.random.default_rng(1)
    A, B = rng.random((37, 3)), rng.random((11, 3))
    w = rng.normal(size=11)
    full = gram(HIST, A, B)
    monkeypatch.setattr(K, "_BLOCK_ELEMS", 40)
    np.testing.assert_array_equal(gram(HIST, A, B), full)
    np.testing.assert_allclose(gram_dot(HIST, A, B, w), full @ w, rtol=1e-13)


# --- properties -------------------------------------------------------------

SPECS = st.sampled_from(
    [GAUSS, KernelSpec("gaussian", 0.3), HIST, CHI2, JOINT, KernelSpec("joint_label", base=HIST)]
)


def _points(n, d):
    return arrays(np.float64, (n, d), elements=st.floats(0, 1, allow_nan=False))


@st.composite
def labeled_points(draw, max_n=20):
    n = draw(st.integers(1, max_n))
    d = draw(st.integers(1, 4))
    X = draw(_points(n, d))
    y = draw(arrays(np.int64, n, elements=st.integers(0, 2)))
    return X, y


@settings(max_examples=60, deadline=None)
@given(SPECS, labeled_points(max_n=2))
def test_symmetry_exact(spec, data):
    X, y = data
    a, b = X[0], X[-1]
    if spec.needs_labels:
        assert evaluate(spec, (a, y[0]), (b, y[-1])) == evaluate(spec, (b, y[-1]), (a, y[0]))
    else:
        assert evaluate(spec, a, b) == evaluate(spec, b, a)


@settings(max_examples=60, deadline=None)
@given(SPECS, labeled_points())
def test_unit_diagonal_bound(spec, data):
    X, y = data
    diag = np.diag(gram(spec, X, X, y, y))
    assert (diag <= 1 + 1e-12).all()
    inner = spec.base if spec.needs_labels else spec
    if inner.kind in ("gaussian", "rbf_chi2"):
        np.testing.assert_array_equal(diag, 1.0)


@settings(max_examples=60, deadline=None)
@given(SPECS, labeled_points())
def test_gram_psd(spec, data):
    X, y = data
    K = gram(spec, X, X, y, y)
    assert np.linalg.eigvalsh(K).min() >= -1e-9


@settings(max_examples=40, deadline=None)
@given(SPECS, labeled_points(), labeled_points())
def test_cross_mean_is_gram_mean(spec, a, b):
    (X, y), (X2, y2) = a, b
    d = min(X.shape[1], X2.shape[1])
    S, S2 = SampleSet(X[:, :d], y), SampleSet(X2[:, :d], y2)
    assert abs(cross_mean(spec, S, S2) - gram(spec, S.points, S2.points, y, y2).mean()) <= 1e-12
    assert cross_mean(spec, S, S2) == pytest.approx(cross_mean(spec, S2, S), abs=1e-15)


def test_random_five_point_gram_psd():
    rng = np.random.default_rng(0)
    for _ in range(200):
        A = rng.normal(size=(5, 2))
        assert np.linalg.eigvalsh(gram(GAUSS, A, A)).min() >= -1e-10


def test_gram_with_warning_free_default_inputs():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gram(HIST, np.full((3, 2), 0.5), np.full((2, 2), 0.25))
