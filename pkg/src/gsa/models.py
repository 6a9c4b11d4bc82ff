"""Evaluable models: the flood benchmark, analytic test functions and external simulators.

A :class:`Model` wraps a vectorised function of an (n, k) array whose
columns follow ``Model.inputs``. :func:`evaluate` joins a design with the
model outputs into an :class:`EvaluationSet`, keeping row order whatever the
number of workers.
"""
from __future__ import annotations

import csv
import logging
import os
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .distributions import InputSpace, TruncGumbel, TruncNormal, Triangular, Uniform
from .errors import ExternalModelError, ModelDomainError, ProtocolError, SchemaError
from .sampling import SampleMatrix

log = logging.getLogger(__name__)

# Rows are always evaluated in chunks with these boundaries, serial or not,
# so the worker count cannot change a single bit of the result.
CHUNK_ROWS = 4096

FLOOD_NAMES = ("Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B")
FLOOD_ACTIVE = ("Q", "Ks", "Zv", "Hd", "Cb")
FLOOD_SCREENED_OUT = ("Zm", "L", "B")


def flood_space() -> InputSpace:
    """The eight flood inputs with their marginal distributions."""
    return InputSpace(
        FLOOD_NAMES,
        (
            TruncGumbel(loc=1013.0, scale=558.0, lo=500.0, hi=3000.0),
            TruncNormal(mean=30.0, sd=8.0, lo=15.0),
            Triangular(49.0, 50.0, 51.0),
            Triangular(54.0, 55.0, 56.0),
            Uniform(7.0, 9.0),
            Triangular(55.0, 55.5, 56.0),
            Triangular(4990.0, 5000.0, 5010.0),
            Triangular(295.0, 300.0, 305.0),
        ),
    )


def flood_fixed() -> dict[str, float]:
    """Nominal values of the three inputs screened out by Morris."""
    space = flood_space()
    return {name: float(space[name].nominal()) for name in FLOOD_SCREENED_OUT}


def _flood_domain_mask(q, ks, zv, zm, l, b):
    return (ks > 0) & (b > 0) & (l > 0) & (zm > zv) & (q >= 0)


def flood_overflow(q, ks, zv, zm, hd, cb, l, b):
    """Maximal annual overflow S and river height H, both in metres.

    Accepts scalars or arrays. Raises :class:`ModelDomainError` when the
    river slope is not positive or a size parameter is not positive.
    """
    q, ks, zv, zm, hd, cb, l, b = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (q, ks, zv, zm, hd, cb, l, b))
    )
    if np.any(zm <= zv):
        raise ModelDomainError("upstream level must exceed downstream level (zm > zv)")
    if np.any(ks <= 0) or np.any(b <= 0) or np.any(l <= 0):
        raise ModelDomainError("ks, b and l must be positive")
    if np.any(q < 0):
        raise ModelDomainError("flowrate q must be non-negative")
    h = (q / (b * ks * np.sqrt((zm - zv) / l))) ** 0.6
    s = zv + h - hd - cb
    if s.ndim == 0:
        return float(s), float(h)
    return s, h


def cost_from_overflow(s, hd):
    """Dyke cost in million euros from the overflow ``s`` and dyke height ``hd``.

    ``s == 0`` falls on the maintenance branch, whose limit there is 1.0.
    """
    s = np.asarray(s, dtype=float)
    hd = np.asarray(hd, dtype=float)
    s4 = s**4
    with np.errstate(divide="ignore", over="ignore"):
        decay = np.where(s4 > 0, np.exp(-1000.0 / np.where(s4 > 0, s4, 1.0)), 0.0)
    maintenance = 0.2 + 0.8 * (1.0 - decay)
    cost = np.where(s > 0, 1.0, maintenance) + np.where(hd > 8, hd, 8.0) / 20.0
    return float(cost) if cost.ndim == 0 else cost


@dataclass(frozen=True)
class Model:
    """A vectorised model.

    ``func`` maps an (n, k) array, columns ordered as ``inputs``, to a dict of
    output vectors. ``inputs=None`` means "every column the design provides".
    ``check`` optionally flags rows outside the model domain before ``func``
    runs; flagged rows get NaN outputs and a recorded failure.
    """

    name: str
    inputs: tuple[str, ...] | None
    outputs: tuple[str, ...]
    func: Callable[[np.ndarray], Mapping[str, np.ndarray]]
    check: Callable[[np.ndarray], np.ndarray] | None = None
    params: dict = field(default_factory=dict)


def _flood_check(x):
    q, ks, zv, zm, hd, cb, l, b = x.T
    return ~_flood_domain_mask(q, ks, zv, zm, l, b)


def _flood_outputs(x):
    q, ks, zv, zm, hd, cb, l, b = x.T
    s, h = flood_overflow(q, ks, zv, zm, hd, cb, l, b)
    return {"S": s, "H": h, "Cp": cost_from_overflow(s, hd)}


def flood_model(outputs: Sequence[str] = ("S", "Cp")) -> Model:
    outputs = tuple(outputs)

    def func(x):
        out = _flood_outputs(x)
        return {k: out[k] for k in outputs}

    name = "flood_" + outputs[0] if len(outputs) == 1 else "flood"
    return Model(name, FLOOD_NAMES, outputs, func, _flood_check)


def linear_model(coefficients: Sequence[float], inputs: Sequence[str], intercept: float = 0.0,
                 output: str = "y") -> Model:
    a = np.asarray(coefficients, dtype=float)
    if a.shape != (len(inputs),):
        raise SchemaError("one coefficient per input is required")
    return Model("linear", tuple(inputs), (output,), lambda x: {output: intercept + x @ a},
                 params={"coefficients": a.tolist(), "intercept": intercept})


def product_model(inputs: Sequence[str], output: str = "y") -> Model:
    return Model("product", tuple(inputs), (output,), lambda x: {output: np.prod(x, axis=1)})


def ishigami_model(inputs: Sequence[str] = ("X1", "X2", "X3"), a: float = 7.0, b: float = 0.1,
                   output: str = "y") -> Model:
    def func(x):
        return {output: np.sin(x[:, 0]) + a * np.sin(x[:, 1]) ** 2
                + b * x[:, 2] ** 4 * np.sin(x[:, 0])}

    return Model("ishigami", tuple(inputs), (output,), func, params={"a": a, "b": b})


def callable_model(func: Callable[[np.ndarray], np.ndarray], inputs: Sequence[str] | None,
                   output: str = "y", name: str = "callable") -> Model:
    """Wrap a plain ``f(x) -> (n,)`` array function."""
    return Model(name, None if inputs is None else tuple(inputs), (output,),
                 lambda x: {output: np.asarray(func(x), dtype=float)})


BUILTINS: dict[str, Callable[[], Model]] = {
    "flood": lambda: flood_model(("S", "Cp")),
    "flood_S": lambda: flood_model(("S",)),
    "flood_Cp": lambda: flood_model(("Cp",)),
    "flood_H": lambda: flood_model(("H",)),
}


def builtin(name: str) -> Model:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise SchemaError(f"unknown builtin model {name!r}; choose from {sorted(BUILTINS)}") from None


@dataclass(frozen=True)
class EvaluationSet:
    """A design joined with one or more named output vectors, row for row."""

    sample: SampleMatrix
    outputs: dict[str, np.ndarray]
    model: str = ""
    failures: tuple[tuple[int, str], ...] = ()
    fixed: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, y in self.outputs.items():
            if np.shape(y) != (self.sample.n,):
                raise SchemaError(
                    f"output {name!r} has {np.shape(y)} values for {self.sample.n} rows"
                )

    @property
    def n(self) -> int:
        return self.sample.n

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.outputs[name]
        except KeyError:
            raise SchemaError(
                f"unknown output {name!r}; available: {sorted(self.outputs)}"
            ) from None

    def output_names(self) -> list[str]:
        return list(self.outputs)


def model_matrix(model: Model, sample: SampleMatrix, fixed: Mapping[str, float] | None = None
                 ) -> tuple[np.ndarray, tuple[str, ...]]:
    """Assemble the (n, k) array handed to ``model.func``, injecting fixed inputs."""
    fixed = dict(fixed or {})
    clash = set(fixed) & set(sample.names)
    if clash:
        raise SchemaError(f"inputs {sorted(clash)} are both sampled and fixed")
    columns = {name: sample.values[:, j] for j, name in enumerate(sample.names)}
    for name, value in fixed.items():
        columns[name] = np.full(sample.n, float(value))
    names = model.inputs if model.inputs is not None else tuple(columns)
    missing = [n for n in names if n not in columns]
    if missing:
        raise SchemaError(f"model {model.name!r} needs inputs {missing} missing from the design")
    if model.inputs is not None:
        extra = [n for n in sample.names if n not in model.inputs]
        if extra:
            raise SchemaError(f"design columns {extra} are not inputs of model {model.name!r}")
    return np.column_stack([columns[n] for n in names]), tuple(names)


def _eval_chunk(model: Model, x: np.ndarray):
    n = x.shape[0]
    bad = np.zeros(n, dtype=bool) if model.check is None else np.asarray(model.check(x), bool)
    failures: list[tuple[int, str]] = [(int(i), "outside model domain") for i in np.flatnonzero(bad)]
    out = {k: np.full(n, np.nan) for k in model.outputs}
    good = np.flatnonzero(~bad)
    if good.size == 0:
        return out, failures
    try:
        res = model.func(x[good])
        for k in model.outputs:
            out[k][good] = np.asarray(res[k], dtype=float)
    except (ExternalModelError, ProtocolError):
        raise
    except Exception as exc:  # isolate the failing rows one by one
        log.debug("chunk evaluation failed (%s); retrying row by row", exc)
        for i in good:
            try:
                res = model.func(x[i : i + 1])
                for k in model.outputs:
                    out[k][i] = float(np.asarray(res[k])[0])
            except Exception as row_exc:
                failures.append((int(i), f"{type(row_exc).__name__}: {row_exc}"))
    return out, failures


def default_workers() -> int:
    env = os.environ.get("GSA_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def evaluate(model: Model, sample: SampleMatrix, fixed: Mapping[str, float] | None = None,
             workers: int = 1) -> EvaluationSet:
    """Evaluate ``model`` on every row of ``sample``.

    Rows violating the model domain do not abort the run: their outputs are
    NaN and ``(row, message)`` pairs are collected in ``failures``.
    """
    x, _ = model_matrix(model, sample, fixed)
    starts = list(range(0, sample.n, CHUNK_ROWS))
    chunks = [x[s : s + CHUNK_ROWS] for s in starts]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _eval_chunk(model, c), chunks))
    else:
        results = [_eval_chunk(model, c) for c in chunks]
    outputs = {k: np.concatenate([r[0][k] for r in results]) for k in model.outputs}
    failures = tuple((s + i, msg) for s, r in zip(starts, results) for i, msg in sorted(r[1]))
    if failures:
        log.warning("%d of %d rows failed for model %s", len(failures), sample.n, model.name)
    return EvaluationSet(sample, outputs, model.name, failures, dict(fixed or {}))


def write_matrix_csv(path: Path, names: Sequence[str], values: np.ndarray):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


def run_external_values(command: Sequence[str], names: Sequence[str], values: np.ndarray,
                        workdir: str | os.PathLike | None = None, header: bool = True,
                        timeout: float | None = None) -> np.ndarray:
    """Batch file exchange with an external simulator.

    Writes ``design.csv`` (header = input names), runs ``command + [design,
    output]`` once, and reads one value per row from ``output.csv`` (single
    column ``y``; set ``header=False`` if the simulator writes bare values).
    """
    own_dir = workdir is None
    wd = Path(tempfile.mkdtemp(prefix="gsa-ext-") if own_dir else workdir)
    wd.mkdir(parents=True, exist_ok=True)
    design_path, output_path = wd / "design.csv", wd / "output.csv"
    try:
        write_matrix_csv(design_path, names, values)
        proc = subprocess.run(
            [*command, str(design_path), str(output_path)],
            capture_output=True, text=True, timeout=timeout,
        )
        if proc.returncode != 0:
            raise ExternalModelError(
                f"external model exited with status {proc.returncode}: {proc.stderr.strip()[-500:]}",
                proc.returncode, proc.stderr,
            )
        if not output_path.exists():
            raise ProtocolError(f"external model did not write {output_path.name}", len(values), 0)
        with open(output_path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if header:
            if not rows or rows[0][0].strip() != "y":
                raise ProtocolError("output.csv must start with a 'y' header line")
            rows = rows[1:]
        if len(rows) != len(values):
            raise ProtocolError(
                f"output.csv has {len(rows)} rows, expected {len(values)}",
                len(values), len(rows),
            )
        try:
            return np.array([float(r[0]) for r in rows])
        except ValueError as exc:
            raise ProtocolError(f"non-numeric value in output.csv: {exc}") from None
    finally:
        if own_dir:
            shutil.rmtree(wd, ignore_errors=True)


def external_model(command: Sequence[str], inputs: Sequence[str] | None = None, output: str = "y",
                   header: bool = True, timeout: float | None = None) -> Model:
    """A :class:`Model` backed by an external command; each chunk is one batch call."""
    command = tuple(command)

    def func(x):
        names = inputs if inputs is not None else [f"x{j + 1}" for j in range(x.shape[1])]
        return {output: run_external_values(command, names, x, header=header, timeout=timeout)}

    return Model("external", None if inputs is None else tuple(inputs), (output,), func,
                 params={"command": list(command)})


def run_external(command: Sequence[str], sample: SampleMatrix, workdir=None, header: bool = True,
                 output: str = "y", timeout: float | None = None,
                 fixed: Mapping[str, float] | None = None) -> EvaluationSet:
    """Evaluate the whole design in one external batch.

    Unlike :func:`evaluate`, errors from the simulator propagate: a nonzero
    exit raises :class:`ExternalModelError`, a malformed output file
    :class:`ProtocolError`.
    """
    placeholder = Model("external", None, (output,), lambda x: {})
    x, names = model_matrix(placeholder, sample, fixed)
    y = run_external_values(command, names, x, workdir=workdir, header=header, timeout=timeout)
    return EvaluationSet(sample, {output: y}, "external", (), dict(fixed or {}))
