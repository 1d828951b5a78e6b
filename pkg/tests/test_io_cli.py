import json

import numpy as np
import pytest

from edd import cli, dynamics, experiments, io
from edd.embedding import SampleSet, WeightedEmbedding, embed, rkhs_distance
from edd.kernels import KernelSpec
from edd.metrics import evaluate_prediction

GAUSS = KernelSpec("gaussian", 1.0)


def write_lines(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return path


def drift_file(path, T=5, n=40, labeled=False, seed=0):
    rng = np.random.default_rng(seed)
    sets = []
    for t in range(T):
        x = rng.normal(0.5 * t, 1.0, n)
        y = (x > 0.5 * t).astype(int) if labeled else None
        sets.append(SampleSet(x, y, t))
    io.write_samples(path, sets)
    return sets


# --- file formats -----------------------------------------------------------


def test_samples_round_trip(tmp_path):
    sets = drift_file(tmp_path / "s.jsonl", T=3, labeled=True)
    back = io.read_samples(tmp_path / "s.jsonl")
    assert [S.time_index for S in back] == [0, 1, 2]
    for a, b in zip(sets, back):
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.labels, b.labels)


def test_samples_grouped_and_sorted_by_t(tmp_path):
    p = write_lines(tmp_path / "s.jsonl", [{"t": 5, "x": [1.0]}, {"t": 2, "x": [2.0]}, {"t": 5, "x": [3.0]}])
    sets = io.read_samples(p)
    assert [S.time_index for S in sets] == [2, 5]
    np.testing.assert_array_equal(sets[1].points[:, 0], [1.0, 3.0])


@pytest.mark.parametrize(
    "recs",
    [
        [{"t": 0}],
        [{"t": 0.5, "x": [1.0]}],
        [{"t": 0, "x": []}],
        [{"t": 0, "x": ["a"]}],
        [{"t": 0, "x": [1.0]}, {"t": 0, "x": [1.0, 2.0]}],
        [{"t": 0, "x": [1.0], "y": 1}, {"t": 0, "x": [2.0]}],
        [{"t": 0, "x": [1.0], "y": 0.5}],
        [],
    ],
)
def test_malformed_samples(tmp_path, recs):
    with pytest.raises(io.FormatError):
        io.read_samples(write_lines(tmp_path / "bad.jsonl", recs))


def test_embedding_round_trip_is_exact():
    rng = np.random.default_rng(0)
    e = WeightedEmbedding(rng.normal(size=5), rng.normal(size=(5, 2)), [0, 1, 0, 1, 1], [1, 1, 2, 2, 2])
    d = json.loads(json.dumps(io.embedding_to_dict(e)))
    back = io.embedding_from_dict(d)
    np.testing.assert_array_equal(back.weights, e.weights)
    np.testing.assert_array_equal(back.points, e.points)
    np.testing.assert_array_equal(back.labels, e.labels)
    np.testing.assert_array_equal(back.sources, e.sources)
    assert set(d["atoms"][0]) == {"w", "x", "y", "t"}
    with pytest.raises(io.FormatError):
        io.embedding_from_dict({"atoms": []})


def test_model_file_references_inputs(tmp_path):
    sets = drift_file(tmp_path / "s.jsonl")
    model = dynamics.fit(sets, GAUSS, 0.05)
    d = io.model_to_dict(model, [tmp_path / "s.jsonl"])
    assert d["inputs"][0]["sha256"] == io.file_sha256(tmp_path / "s.jsonl")
    assert "atoms" not in d and np.asarray(d["W"]).shape == (4, 4)
    back = io.model_from_dict(json.loads(json.dumps(d)))
    np.testing.assert_array_equal(back.W, model.W)
    (tmp_path / "s.jsonl").write_text((tmp_path / "s.jsonl").read_text() + '{"t": 9, "x": [0.0]}\n')
    with pytest.raises(io.FormatError, match="hash"):
        io.model_from_dict(d)


# --- command line -----------------------------------------------------------


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    return code


def test_predict_stationary_pair(tmp_path):
    p = write_lines(tmp_path / "s.jsonl", [{"t": 0, "x": [0.0]}, {"t": 1, "x": [0.0]}])
    out = tmp_path / "pred.json"
    assert run(["predict", p, "--lambda", "0", "--out", out]) == 0
    d = json.loads(out.read_text())
    assert d["beta"] == [1.0]
    assert d["atoms"] == [{"w": 1.0, "x": [0.0], "t": 1}]


def test_predict_mixture_shape(tmp_path):
    s = experiments.SyntheticSetting("mixture", T=7, n=30, seed=0)
    io.write_samples(tmp_path / "m.jsonl", experiments.observed_sets(s))
    assert run(["predict", tmp_path / "m.jsonl", "--out", tmp_path / "p.json"]) == 0
    assert len(json.loads((tmp_path / "p.json").read_text())["beta"]) == 6


def test_exit_codes(tmp_path):
    one = write_lines(tmp_path / "one.jsonl", [{"t": 0, "x": [0.0]}])
    assert run(["predict", one]) == cli.EXIT_CONTRACT
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"t": 0, "x": [0.0]\n')
    assert run(["predict", bad]) == cli.EXIT_IO
    assert run(["predict", tmp_path / "missing.jsonl"]) == cli.EXIT_IO
    dup = write_lines(tmp_path / "dup.jsonl", [{"t": t, "x": [v]} for t in range(3) for v in (0.0, 1.0)])
    assert run(["predict", dup, "--lambda", "0"]) == cli.EXIT_SINGULAR
    with pytest.warns(RuntimeWarning):
        assert run(["predict", dup, "--lambda", "0", "--allow-singular", "--out", tmp_path / "o.json"]) == 0
    assert run(["predict", dup, "--gamma", "exponential"]) == cli.EXIT_CONTRACT
    assert run(["predict", dup, "--lambda", "abc"]) == cli.EXIT_CONTRACT


def test_round_trip_hs_distance_exact(tmp_path):
    sets = drift_file(tmp_path / "s.jsonl", T=5)
    ref = SampleSet(np.random.default_rng(9).normal(2.5, 1.0, 40), time_index=5)
    io.write_samples(tmp_path / "ref.jsonl", [ref])
    assert run(["predict", tmp_path / "s.jsonl", "--out", tmp_path / "p.json", "--bandwidth", "2.0"]) == 0
    assert run(["eval", tmp_path / "p.json", tmp_path / "ref.jsonl", "--out", tmp_path / "r.json"]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    spec = KernelSpec("gaussian", 2.0)
    pred = dynamics.extrapolate(dynamics.fit(sets, spec))
    assert report["hs_distance"] == rkhs_distance(pred, embed(ref), spec)
    assert report["kl"] is None and report["n_pred"] == 160 and report["n_ref"] == 40


def test_herd_then_eval(tmp_path):
    drift_file(tmp_path / "s.jsonl", T=4)
    write_lines(tmp_path / "ref.jsonl", [{"t": 4, "x": [v]} for v in np.linspace(0, 3, 30)])
    assert run(["predict", tmp_path / "s.jsonl", "--out", tmp_path / "p.json"]) == 0
    assert run(["herd", tmp_path / "p.json", "--pool", tmp_path / "s.jsonl", "--herd-m", 25, "--t", 4, "--out", tmp_path / "h.jsonl"]) == 0
    herded = io.read_samples(tmp_path / "h.jsonl")
    assert len(herded) == 1 and len(herded[0]) == 25 and herded[0].time_index == 4
    assert run(["eval", tmp_path / "h.jsonl", tmp_path / "ref.jsonl", "--out", tmp_path / "r.json"]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    want = evaluate_prediction(herded[0], io.read_samples(tmp_path / "ref.jsonl")[0], GAUSS)
    assert report == want.to_dict()


def test_svm_command(tmp_path):
    drift_file(tmp_path / "s.jsonl", T=4, labeled=True)
    assert run(["predict", tmp_path / "s.jsonl", "--kernel", "joint_label", "--out", tmp_path / "p.json"]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["kernel"]["kind"] == "joint_label"
    assert run(["svm", tmp_path / "p.json", "--C", "10", "--out", tmp_path / "c.json"]) == 0
    clf = json.loads((tmp_path / "c.json").read_text())
    assert set(clf) == {"classes", "w", "bias", "C"} and clf["C"] == 10.0
    assert run(["svm", tmp_path / "p.json", "--C", "x"]) == cli.EXIT_CONTRACT


def test_svm_on_unlabeled_prediction_fails_cleanly(tmp_path):
    drift_file(tmp_path / "s.jsonl", T=3)
    run(["predict", tmp_path / "s.jsonl", "--out", tmp_path / "p.json"])
    assert run(["svm", tmp_path / "p.json", "--C", "1"]) == cli.EXIT_CONTRACT


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kernel": {"kind": "gaussian", "bandwidth": 4.0}, "lambda": 0.5, "gamma": "sqrt_n"}))
    sets = drift_file(tmp_path / "s.jsonl", T=4)
    assert run(["predict", tmp_path / "s.jsonl", "--config", cfg, "--out", tmp_path / "a.json"]) == 0
    a = json.loads((tmp_path / "a.json").read_text())
    spec = KernelSpec("gaussian", 4.0)
    want = dynamics.fit(sets, spec, 0.5, dynamics.gamma_weights("sqrt_n", sets)).beta
    assert a["beta"] == want.tolist() and a["lambda"] == 0.5
    assert run(["predict", tmp_path / "s.jsonl", "--config", cfg, "--lambda", "auto", "--out", tmp_path / "b.json"]) == 0
    assert json.loads((tmp_path / "b.json").read_text())["lambda"] == pytest.approx(1 / 40)
    cfg.write_text(json.dumps({"kernal": {}}))
    assert run(["predict", tmp_path / "s.jsonl", "--config", cfg]) == cli.EXIT_IO


def test_model_out(tmp_path):
    drift_file(tmp_path / "s.jsonl", T=3)
    assert run(["predict", tmp_path / "s.jsonl", "--out", tmp_path / "p.json", "--model-out", tmp_path / "m.json"]) == 0
    m = json.loads((tmp_path / "m.json").read_text())
    assert set(m) >= {"kernel", "lambda", "gamma", "W", "inputs"}


def test_experiment_command_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run(["experiment", "table1", "--n", "15", "--repeats", 2, "--seed", 3, "--out", out]) == 0
    assert a.read_text() == b.read_text()
    assert a.with_suffix(".json").exists()
    assert a.read_text().splitlines()[0] == "setting,n,method,mean,std,repeats,seed"
    assert run(["experiment", "table2", "--n", "15", "--repeats", 1]) == cli.EXIT_CONTRACT


def test_stdout_output(tmp_path, capsys):
    p = write_lines(tmp_path / "s.jsonl", [{"t": 0, "x": [0.0]}, {"t": 1, "x": [0.5]}])
    assert run(["predict", p]) == 0
    assert json.loads(capsys.readouterr().out)["beta"]


def test_floats_round_trip_losslessly(tmp_path):
    x = [0.1 + 0.2, 1 / 3, np.nextafter(1.0, 2.0)]
    io.write_samples(tmp_path / "f.jsonl", [SampleSet(np.array(x))])
    np.testing.assert_array_equal(io.read_samples(tmp_path / "f.jsonl")[0].points[:, 0], x)
