"""Command-line interface.

Exit codes: 0 success, 1 I/O or parse error, 2 contract violation,
3 singular linear system.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import dynamics, experiments, herding, metrics, predsvm
from .dynamics import SingularSystemError
from .embedding import SampleSet, WeightedEmbedding
from .io import (
    FormatError,
    embedding_from_dict,
    embedding_to_dict,
    model_to_dict,
    read_json,
    read_samples,
    sample_records,
    write_json,
    write_samples,
)
from .kernels import KINDS, KernelSpec

EXIT_OK, EXIT_IO, EXIT_CONTRACT, EXIT_SINGULAR = 0, 1, 2, 3
GAMMA_RULES = ("none", "exponential", "sqrt_n")
EXPERIMENTS = ("table1", "table2", "pda")


class ContractError(ValueError):
    pass


@dataclass
class RunConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    lam: Union[float, str] = "auto"
    gamma_rule: str = "none"
    rho: Optional[float] = None
    herd_m: Optional[int] = None
    seed: int = 0
    repeats: int = 100

    def __post_init__(self):
        if self.gamma_rule not in GAMMA_RULES:
            raise ContractError(f"gamma must be one of {GAMMA_RULES}")
        if self.gamma_rule == "exponential" and (self.rho is None or not 0 < self.rho < 1):
            raise ContractError("exponential gamma needs 0 < rho < 1")
        if self.lam != "auto" and (not isinstance(self.lam, float) or self.lam < 0):
            raise ContractError("lambda must be 'auto' or a nonnegative number")
        if self.herd_m is not None and self.herd_m < 1:
            raise ContractError("herd-m must be positive")
        if self.repeats < 1:
            raise ContractError("repeats must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise FormatError("config must be a JSON object")
        unknown = set(d) - {"kernel", "lambda", "gamma", "rho", "herd_m", "seed", "repeats"}
        if unknown:
            raise FormatError(f"unknown config keys {sorted(unknown)}")
        kw = {}
        if "kernel" in d:
            kw["kernel"] = KernelSpec.from_dict(d["kernel"])
        if "lambda" in d:
            kw["lam"] = _parse_lambda(d["lambda"])
        if "gamma" in d:
            kw["gamma_rule"] = d["gamma"]
        for key in ("rho", "herd_m", "seed", "repeats"):
            if key in d:
                kw[key] = d[key]
        return cls(**kw)


def _parse_lambda(v) -> Union[float, str]:
    if v == "auto":
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ContractError(f"lambda must be 'auto' or a number, got {v!r}") from None


def _kernel_from_flags(base: KernelSpec, kind: Optional[str], bandwidth: Optional[float]) -> KernelSpec:
    if kind is None and bandwidth is None:
        return base
    kind = kind or base.kind
    if kind == "joint_label":
        inner = base.base if base.kind == "joint_label" else KernelSpec("gaussian", 1.0)
        if bandwidth is not None:
            inner = replace(inner, bandwidth=bandwidth)
        return KernelSpec("joint_label", base=inner)
    bw = bandwidth if bandwidth is not None else (base.bandwidth if base.kind == kind else 1.0)
    return KernelSpec(kind, bw)


def resolve_config(args, stored_kernel: Optional[KernelSpec] = None) -> RunConfig:
    """Defaults, then the config file, then flags.

    ``stored_kernel`` (from a prediction file) replaces the default kernel
    when no config file is given.
    """
    cfg = RunConfig.from_dict(read_json(args.config)) if args.config else RunConfig()
    if stored_kernel is not None and not args.config:
        cfg = replace(cfg, kernel=stored_kernel)
    kw = {"kernel": _kernel_from_flags(cfg.kernel, args.kernel, args.bandwidth)}
    if args.lam is not None:
        kw["lam"] = _parse_lambda(args.lam)
    if args.gamma is not None:
        kw["gamma_rule"] = args.gamma
    for name in ("rho", "herd_m", "seed", "repeats"):
        v = getattr(args, name)
        if v is not None:
            kw[name] = v
    return replace(cfg, **kw)


def _read_prediction(path) -> tuple:
    """A ``.json`` weighted set, or the last time step of a JSON-lines file.

    Returns the prediction and the kernel stored with it, if any.
    """
    if str(path).endswith(".json"):
        d = read_json(path)
        kernel = d.get("kernel") if isinstance(d, dict) else None
        return embedding_from_dict(d), None if kernel is None else KernelSpec.from_dict(kernel)
    return read_samples(path)[-1], None


def _as_embedding(pred) -> WeightedEmbedding:
    if isinstance(pred, SampleSet):
        n = len(pred)
        return WeightedEmbedding(np.full(n, 1.0 / n), pred.points, pred.labels)
    return pred


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    sets = read_samples(args.input)
    if len(sets) < 2:
        raise ContractError(f"need at least two time steps, found {len(sets)}")
    gamma = dynamics.gamma_weights(cfg.gamma_rule, sets, cfg.rho)
    lam = None if cfg.lam == "auto" else cfg.lam
    model = dynamics.fit(sets, cfg.kernel, lam, gamma, on_singular="pinv" if args.allow_singular else "raise")
    out = {
        "beta": model.beta.tolist(),
        "lambda": model.lam,
        "kernel": cfg.kernel.to_dict(),
        **embedding_to_dict(dynamics.extrapolate(model)),
    }
    write_json(args.out, out)
    if args.model_out:
        write_json(args.model_out, model_to_dict(model, [args.input]))
    return EXIT_OK


def cmd_herd(args) -> int:
    pred, stored = _read_prediction(args.prediction)
    cfg = resolve_config(args, stored)
    target = _as_embedding(pred)
    if args.pool:
        pool = herding.candidate_pool(read_samples(args.pool))
    else:
        pool = herding.candidate_pool([SampleSet(target.points, target.labels)])
    m = cfg.herd_m if cfg.herd_m is not None else len(target)
    herded = herding.herd(target, cfg.kernel, herding.HerdingConfig(m, pool), time_index=args.t)
    if args.out is None or args.out == "-":
        for rec in sample_records([herded]):
            print(json.dumps(rec))
    else:
        write_samples(args.out, [herded])
    return EXIT_OK


def cmd_eval(args) -> int:
    pred, stored = _read_prediction(args.prediction)
    cfg = resolve_config(args, stored)
    ref = read_samples(args.reference)[-1]
    kl = False if args.no_kl else None
    report = metrics.evaluate_prediction(pred, ref, cfg.kernel, kl=kl, bandwidth=args.kde_bandwidth)
    write_json(args.out, report.to_dict())
    return EXIT_OK


def cmd_svm(args) -> int:
    cfg = resolve_config(args)
    pred, _ = _read_prediction(args.prediction)
    if isinstance(pred, SampleSet):
        ts = predsvm.from_sample_set(pred)
    else:
        ts = predsvm.flip_transform(pred)
    if args.C == "cv":
        C = predsvm.select_C(ts, seed=cfg.seed)
    else:
        try:
            C = float(args.C)
        except ValueError:
            raise ContractError(f"C must be 'cv' or a number, got {args.C!r}") from None
    clf = predsvm.train(ts, C)
    write_json(args.out, clf.to_dict())
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = resolve_config(args)
    if cfg.repeats < 2:
        raise ContractError("experiments need at least two repeats")
    if args.name == "pda":
        rows = experiments.run_pda_synthetic(repeats=cfg.repeats, seed=cfg.seed)
    else:
        ns = tuple(int(v) for v in args.n.split(","))
        run = experiments.run_table1 if args.name == "table1" else experiments.run_table2
        rows = run(ns=ns, repeats=cfg.repeats, seed=cfg.seed)
    if args.out is None or args.out == "-":
        experiments.write_results(rows, csv_path="/dev/stdout")
    else:
        out = Path(args.out)
        experiments.write_results(rows, csv_path=out, json_path=out.with_suffix(".json"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration; flags override it")
    common.add_argument("--kernel", choices=KINDS)
    common.add_argument("--bandwidth", type=float, help="kernel variance (base kernel for joint_label)")
    common.add_argument("--lambda", dest="lam", help="ridge constant or 'auto' (1 / mean set size)")
    common.add_argument("--gamma", choices=GAMMA_RULES, help="per-transition weight rule")
    common.add_argument("--rho", type=float, help="decay for --gamma exponential, 0 < rho < 1")
    common.add_argument("--herd-m", dest="herd_m", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--repeats", type=int)
    common.add_argument("--out", help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="edd", description="Extrapolate distribution dynamics from sample sets.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("predict", parents=[common], help="predict the next distribution")
    s.add_argument("input", help="JSON-lines samples with at least two time steps")
    s.add_argument("--model-out", help="also write the fitted model")
    s.add_argument("--allow-singular", action="store_true", help="use a pseudo-inverse instead of failing")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("herd", parents=[common], help="turn a prediction into a sample set")
    s.add_argument("prediction")
    s.add_argument("--pool", help="JSON-lines candidate points (default: prediction atoms)")
    s.add_argument("--t", type=int, default=0, help="time index of the herded samples")
    s.set_defaults(func=cmd_herd)

    s = sub.add_parser("eval", parents=[common], help="compare a prediction to a reference sample")
    s.add_argument("prediction")
    s.add_argument("reference")
    s.add_argument("--kde-bandwidth", type=float)
    s.add_argument("--no-kl", action="store_true")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("svm", parents=[common], help="train a linear SVM on a labeled prediction")
    s.add_argument("prediction")
    s.add_argument("--C", default="cv", help="regularization constant or 'cv'")
    s.set_defaults(func=cmd_svm)

    s = sub.add_parser("experiment", parents=[common], help="run a synthetic benchmark")
    s.add_argument("name", choices=EXPERIMENTS)
    s.add_argument("--n", default="10,100,1000", help="comma-separated sample sizes")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, FormatError, json.JSONDecodeError, KeyError) as exc:
        print(f"edd: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SingularSystemError as exc:
        print(f"edd: singular system: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except ValueError as exc:
        print(f"edd: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
