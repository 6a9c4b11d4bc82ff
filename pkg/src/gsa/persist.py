"""On-disk artefacts shared by the CLI stages.

``design.csv`` holds one column per sampled input; ``design.json`` next to
it records how the design was built (kind, seed, block structure). The
evaluation stage writes ``eval.csv`` (design columns, then output columns)
and ``eval.json`` (design metadata plus outputs, fixed inputs, failures).
Floats are written with ``repr`` so a round trip through disk is exact.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import GSAError, SchemaError
from .models import EvaluationSet, write_matrix_csv
from .sampling import MORRIS, PICK_FREEZE, MorrisDesign, PickFreezeDesign, SampleMatrix


class ArtifactError(GSAError):
    """A persisted file is missing or unreadable."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def dump_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ArtifactError(path, "file not found") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(path, f"corrupt JSON ({exc})") from None


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except FileNotFoundError:
        raise ArtifactError(path, "file not found") from None
    if not rows:
        raise ArtifactError(path, "empty file")
    header = [h.strip() for h in rows[0]]
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ArtifactError(path, f"non-numeric cell ({exc})") from None
    if values.size == 0:
        values = values.reshape(0, len(header))
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ArtifactError(path, "ragged rows")
    return header, values


def design_meta(design) -> dict:
    """JSON-serialisable description of a design object."""
    if isinstance(design, PickFreezeDesign):
        s = design.sample
        return {"design": PICK_FREEZE, "names": list(s.names), "n": s.n, "seed": s.seed,
                "base_n": design.base_n, "second_order": design.second_order}
    if isinstance(design, MorrisDesign):
        s = design.sample
        return {"design": MORRIS, "names": list(s.names), "n": s.n, "seed": s.seed,
                "r": design.r, "levels": design.levels, "delta": design.delta,
                "moved": design.moved.tolist(), "direction": design.direction.tolist(),
                "unit": design.unit.tolist()}
    s = design
    return {"design": s.design, "names": list(s.names), "n": s.n, "seed": s.seed}


def rebuild_design(meta: dict, sample: SampleMatrix):
    kind = meta.get("design")
    if kind == PICK_FREEZE:
        return PickFreezeDesign(sample, int(meta["base_n"]), bool(meta["second_order"]))
    if kind == MORRIS:
        return MorrisDesign(sample, np.array(meta["unit"], dtype=float), int(meta["r"]),
                            int(meta["levels"]), float(meta["delta"]),
                            np.array(meta["moved"], dtype=int), np.array(meta["direction"], dtype=int))
    return sample


def write_design(out_dir, design, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sample = design.sample if hasattr(design, "sample") else design
    write_matrix_csv(out / "design.csv", sample.names, sample.values)
    dump_json(out / "design.json", {**design_meta(design), **(extra or {})})
    return out / "design.csv"


def read_design(path):
    """Return ``(structured design, metadata)`` from ``design.csv`` (+ optional ``design.json``)."""
    path = Path(path)
    names, values = read_matrix_csv(path)
    meta_path = path.with_suffix(".json")
    meta = load_json(meta_path) if meta_path.exists() else {"design": "external", "seed": None}
    if meta.get("names") and list(meta["names"]) != names:
        raise SchemaError(f"{path}: header {names} disagrees with {meta_path.name} {meta['names']}")
    sample = SampleMatrix(values, tuple(names), meta.get("design", "external"), meta.get("seed"))
    return rebuild_design(meta, sample), meta


def write_eval(out_dir, ev: EvaluationSet, meta: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = [*ev.sample.names, *ev.outputs]
    values = np.column_stack([ev.sample.values, *ev.outputs.values()])
    write_matrix_csv(out / "eval.csv", names, values)
    dump_json(out / "eval.json", {
        **meta, "outputs": list(ev.outputs), "model": ev.model, "fixed": ev.fixed,
        "failures": [[i, m] for i, m in ev.failures],
    })
    return out / "eval.csv"


def read_eval(path, outputs=None, inputs=None):
    """Load an evaluation set.

    With a companion ``eval.json`` the column roles come from it. Otherwise
    ``outputs`` must name the output columns; ``inputs`` defaults to every
    remaining column, so evaluations produced elsewhere can be analysed too.
    Returns ``(EvaluationSet, structured design or sample, metadata)``.
    """
    path = Path(path)
    header, values = read_matrix_csv(path)
    meta_path = path.with_suffix(".json")
    meta = load_json(meta_path) if meta_path.exists() else {}
    out_names = list(meta.get("outputs") or outputs or [])
    if not out_names:
        raise SchemaError(f"{path}: no eval.json found; name the output column(s) explicitly")
    missing = [o for o in out_names if o not in header]
    if missing:
        raise SchemaError(f"{path}: output column(s) {missing} not found in header {header}")
    in_names = list(meta.get("names") or inputs or [h for h in header if h not in out_names])
    missing = [c for c in in_names if c not in header]
    if missing:
        raise SchemaError(f"{path}: input column(s) {missing} not found in header {header}")
    cols = {h: values[:, k] for k, h in enumerate(header)}
    x = np.column_stack([cols[c] for c in in_names]) if values.shape[0] else np.empty((0, len(in_names)))
    sample = SampleMatrix(x, tuple(in_names), meta.get("design", "external"), meta.get("seed"))
    ev = EvaluationSet(sample, {o: cols[o] for o in out_names}, meta.get("model", ""),
                       tuple((int(i), m) for i, m in meta.get("failures", [])),
                       dict(meta.get("fixed", {})))
    return ev, rebuild_design(meta, sample), meta
