"""File formats: JSON-lines sample sets and JSON for everything else.

Floats are written with Python's shortest round-trip repr, so reading a
file back gives bitwise the same values.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dynamics import DynamicsModel, fit
from .embedding import SampleSet, WeightedEmbedding
from .kernels import KernelSpec


class FormatError(ValueError):
    """A file could not be parsed into the expected structure."""


def _floats(v, where: str) -> list:
    if not isinstance(v, list) or not v:
        raise FormatError(f"{where}: 'x' must be a nonempty list of numbers")
    out = []
    for a in v:
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not math.isfinite(a):
            raise FormatError(f"{where}: 'x' holds a non-finite or non-numeric value")
        out.append(float(a))
    return out


def _int(v, where: str, key: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"{where}: '{key}' must be an integer")
    return v


def parse_samples(lines) -> list[SampleSet]:
    """Group JSON-lines records ``{"t", "x", "y"?}`` into sets ordered by t."""
    groups: dict[int, list] = {}
    dim = None
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"line {no}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{where}: {exc.msg}") from exc
        if not isinstance(rec, dict) or "t" not in rec or "x" not in rec:
            raise FormatError(f"{where}: expected an object with 't' and 'x'")
        t = _int(rec["t"], where, "t")
        x = _floats(rec["x"], where)
        if dim is None:
            dim = len(x)
        elif len(x) != dim:
            raise FormatError(f"{where}: point has dimension {len(x)}, expected {dim}")
        y = rec.get("y")
        if y is not None:
            y = _int(y, where, "y")
        groups.setdefault(t, []).append((x, y))
    if not groups:
        raise FormatError("no samples found")
    sets = []
    for t in sorted(groups):
        xs = [x for x, _ in groups[t]]
        ys = [y for _, y in groups[t]]
        if all(y is None for y in ys):
            labels = None
        elif any(y is None for y in ys):
            raise FormatError(f"time step {t}: labels given for some points only")
        else:
            labels = np.array(ys, dtype=np.int64)
        sets.append(SampleSet(np.array(xs), labels, t))
    return sets


def read_samples(path) -> list[SampleSet]:
    with open(path, encoding="utf-8") as fh:
        return parse_samples(fh)


def sample_records(sets: Sequence[SampleSet]) -> list[dict]:
    recs = []
    for S in sets:
        for i, x in enumerate(S.points):
            rec = {"t": S.time_index, "x": x.tolist()}
            if S.labels is not None:
                rec["y"] = int(S.labels[i])
            recs.append(rec)
    return recs


def write_samples(path, sets: Sequence[SampleSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in sample_records(sets):
            fh.write(json.dumps(rec) + "\n")


def embedding_to_dict(e: WeightedEmbedding) -> dict:
    atoms = []
    for i in range(len(e)):
        atom = {"w": float(e.weights[i]), "x": e.points[i].tolist()}
        if e.labels is not None:
            atom["y"] = int(e.labels[i])
        if e.sources is not None:
            atom["t"] = int(e.sources[i])
        atoms.append(atom)
    return {"atoms": atoms}


def embedding_from_dict(d: dict) -> WeightedEmbedding:
    atoms = d.get("atoms") if isinstance(d, dict) else None
    if not isinstance(atoms, list) or not atoms:
        raise FormatError("expected an object with a nonempty 'atoms' list")
    w, xs, ys, ts = [], [], [], []
    for i, a in enumerate(atoms):
        where = f"atom {i}"
        if not isinstance(a, dict) or "w" not in a or "x" not in a:
            raise FormatError(f"{where}: expected an object with 'w' and 'x'")
        if isinstance(a["w"], bool) or not isinstance(a["w"], (int, float)):
            raise FormatError(f"{where}: 'w' must be a number")
        w.append(float(a["w"]))
        xs.append(_floats(a["x"], where))
        ys.append(a.get("y"))
        ts.append(a.get("t"))
    if len({len(x) for x in xs}) != 1:
        raise FormatError("atoms have different dimensions")

    def column(vals, key):
        if all(v is None for v in vals):
            return None
        if any(v is None for v in vals):
            raise FormatError(f"'{key}' given for some atoms only")
        return np.array([_int(v, "atom", key) for v in vals], dtype=np.int64)

    return WeightedEmbedding(np.array(w), np.array(xs), column(ys, "y"), column(ts, "t"))


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc.msg} (line {exc.lineno})") from exc


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=1, allow_nan=False) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
        return
    Path(path).write_text(text, encoding="utf-8")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def model_to_dict(model: DynamicsModel, inputs: Sequence) -> dict:
    """Model parameters plus path and hash of each input file (data not inlined)."""
    return {
        "kernel": model.spec.to_dict(),
        "lambda": model.lam,
        "gamma": None if model.gamma is None else model.gamma.tolist(),
        "W": model.W.tolist(),
        "time_indices": [S.time_index for S in model.sets],
        "inputs": [{"path": str(p), "sha256": file_sha256(p)} for p in inputs],
    }


def model_from_dict(d: dict, base_dir: Optional[Path] = None) -> DynamicsModel:
    """Re-read and hash-check the referenced sample files, then refit."""
    sets = []
    for ref in d["inputs"]:
        p = Path(ref["path"])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        if file_sha256(p) != ref["sha256"]:
            raise FormatError(f"{p}: content hash does not match the model")
        sets.extend(read_samples(p))
    want = d.get("time_indices")
    if want is not None:
        sets = [S for S in sets if S.time_index in set(want)]
    model = fit(sets, KernelSpec.from_dict(d["kernel"]), d["lambda"], d["gamma"])
    if not np.allclose(model.W, np.asarray(d["W"]), rtol=1e-9, atol=1e-12):
        raise FormatError("refitted coefficients differ from the stored W")
    return model
