"""Polynomial response-surface metamodels.

Inputs are standardised with the training mean and standard deviation
before the basis is built. The basis holds a constant, pure powers x_j^p for
p = 1..degree and, optionally, every pairwise product x_i * x_j.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .distributions import InputSpace
from .errors import CollinearityError, ParameterError, SchemaError
from .models import Model
from .regression import _xy, q2 as _q2
from .sobol import SobolResult, sobol_analysis

FORMAT_HEADER = "# gsa polynomial metamodel"
# Refitting every fold is O(n) fits; above this size the hat-matrix identity
# (exactly equivalent for least squares) is used instead.
LOO_REFIT_MAX = 1000


def basis_terms(d: int, degree: int, interactions: bool) -> list[tuple[int, ...]]:
    """Exponent tuples, one per basis column, constant first."""
    if degree < 1:
        raise ParameterError(f"degree must be >= 1, got {degree}")
    terms = [(0,) * d]
    for p in range(1, degree + 1):
        for j in range(d):
            e = [0] * d
            e[j] = p
            terms.append(tuple(e))
    if interactions:
        for i, j in combinations(range(d), 2):
            e = [0] * d
            e[i] = e[j] = 1
            terms.append(tuple(e))
    return terms


def design_matrix(z: np.ndarray, terms: Sequence[tuple[int, ...]]) -> np.ndarray:
    return np.column_stack([np.prod(z ** np.array(t), axis=1) for t in terms])


def term_label(term: tuple[int, ...], names: Sequence[str]) -> str:
    parts = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, term) if e]
    return "*".join(parts) if parts else "1"


def _parse_term(label: str, names: Sequence[str]) -> tuple[int, ...]:
    e = [0] * len(names)
    if label == "1":
        return tuple(e)
    for part in label.split("*"):
        name, _, power = part.partition("^")
        e[list(names).index(name)] += int(power or 1)
    return tuple(e)


@dataclass(frozen=True)
class Metamodel:
    names: tuple[str, ...]
    output: str
    degree: int
    interactions: bool
    mean: np.ndarray
    scale: np.ndarray
    terms: tuple[tuple[int, ...], ...]
    coefficients: np.ndarray
    n_train: int
    r_squared: float
    loo_q2: float | None = None

    def predict(self, x) -> np.ndarray:
        x = getattr(x, "values", x)
        z = (np.asarray(x, dtype=float) - self.mean) / self.scale
        return design_matrix(z, self.terms) @ self.coefficients

    def as_model(self) -> Model:
        return Model("metamodel", self.names, (self.output,), lambda x: {self.output: self.predict(x)})

    def linear_coefficients(self) -> tuple[float, np.ndarray]:
        """Intercept and slopes in physical units (degree 1, no interactions only)."""
        if self.degree != 1 or self.interactions:
            raise ParameterError("physical-unit slopes are only defined for a linear metamodel")
        beta = self.coefficients[1:] / self.scale
        return float(self.coefficients[0] - self.mean @ beta), beta

    def to_text(self) -> str:
        lines = [
            FORMAT_HEADER, "format 1", f"output {self.output}", f"degree {self.degree}",
            f"interactions {'true' if self.interactions else 'false'}", f"n_train {self.n_train}",
            f"r_squared {self.r_squared!r}",
            f"loo_q2 {'none' if self.loo_q2 is None else repr(self.loo_q2)}",
        ]
        for n, m, s in zip(self.names, self.mean, self.scale):
            lines.append(f"input {n} {float(m)!r} {float(s)!r}")
        lines.append("terms")
        for t, c in zip(self.terms, self.coefficients):
            lines.append(f"{term_label(t, self.names)} {float(c)!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> Metamodel:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != FORMAT_HEADER:
            raise SchemaError("not a gsa polynomial metamodel file")
        head, names, mean, scale, body = {}, [], [], [], None
        for ln in lines[1:]:
            if body is not None:
                label, coef = ln.rsplit(" ", 1)
                body.append((label, float(coef)))
            elif ln == "terms":
                body = []
            elif ln.startswith("input "):
                _, n, m, s = ln.split()
                names.append(n)
                mean.append(float(m))
                scale.append(float(s))
            else:
                key, _, val = ln.partition(" ")
                head[key] = val
        try:
            terms = tuple(_parse_term(lbl, names) for lbl, _ in body or [])
            return cls(
                tuple(names), head["output"], int(head["degree"]), head["interactions"] == "true",
                np.array(mean), np.array(scale), terms, np.array([c for _, c in body]),
                int(head["n_train"]), float(head["r_squared"]),
                None if head.get("loo_q2", "none") == "none" else float(head["loo_q2"]),
            )
        except (KeyError, ValueError) as exc:
            raise SchemaError(f"corrupt metamodel file: {exc}") from None

    @classmethod
    def load(cls, path) -> Metamodel:
        return cls.from_text(Path(path).read_text())


def _lstsq(f: np.ndarray, y: np.ndarray, labels: Sequence[str]):
    n, p = f.shape
    if n <= p:
        raise ParameterError(f"underdetermined fit: {n} rows for {p} basis terms")
    _, r, piv = linalg.qr(f, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > max(n, p) * np.finfo(float).eps * diag[0]))
    if rank < p:
        cols = [labels[k] for k in sorted(piv[rank:])]
        raise CollinearityError(f"polynomial basis is rank deficient; dependent term(s): {cols}", cols)
    coef, *_ = linalg.lstsq(f, y)
    return coef


def _fit(x, y, names, degree, interactions):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    terms = basis_terms(x.shape[1], degree, interactions)
    f = design_matrix((x - mean) / scale, terms)
    coef = _lstsq(f, y, [term_label(t, names) for t in terms])
    return mean, scale, tuple(terms), coef, f


def loo_predictions(sample, y, degree: int = 1, interactions: bool = False, names=None,
                    refit: bool | None = None) -> np.ndarray:
    """Leave-one-out predictions; each fold re-standardises on its own training rows."""
    x, names, y = _xy(sample, y, names)
    n = x.shape[0]
    p = len(basis_terms(x.shape[1], degree, interactions))
    if n < p + 2:
        raise ParameterError(f"leave-one-out needs n >= basis size + 2 = {p + 2}, got {n}")
    if refit is None:
        refit = n <= LOO_REFIT_MAX
    if not refit:
        # closed form: e_(-i) = e_i / (1 - h_ii); identical to refitting for OLS
        mean, scale, terms, coef, f = _fit(x, y, names, degree, interactions)
        q, _ = linalg.qr(f, mode="economic")
        h = np.einsum("ij,ij->i", q, q)
        return y - (y - f @ coef) / (1.0 - h)
    pred = np.empty(n)
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        mask[i] = False
        mean, scale, terms, coef, _ = _fit(x[mask], y[mask], names, degree, interactions)
        pred[i] = (design_matrix((x[i : i + 1] - mean) / scale, terms) @ coef)[0]
        mask[i] = True
    return pred


def loo_q2(sample, y, degree: int = 1, interactions: bool = False, names=None,
           refit: bool | None = None) -> float:
    """Predictivity coefficient of the leave-one-out predictions."""
    x, names, y = _xy(sample, y, names)
    pred = loo_predictions(x, y, degree, interactions, names, refit)
    return _q2(lambda _: pred, x, y)


def fit_polynomial(sample, y, degree: int = 1, interactions: bool = False, names=None,
                   output: str = "y", loo: bool = True) -> Metamodel:
    """Least-squares polynomial surrogate; records training R^2 and, if asked, LOO Q^2."""
    x, names, y = _xy(sample, y, names)
    mean, scale, terms, coef, f = _fit(x, y, names, degree, interactions)
    resid = y - f @ coef
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 0.0 if sst == 0 else float(1.0 - resid @ resid / sst)
    q2v = None
    if loo and sst > 0 and x.shape[0] >= len(terms) + 2:
        q2v = loo_q2(x, y, degree, interactions, names)
    return Metamodel(tuple(names), output, degree, interactions, mean, scale, terms, coef,
                     x.shape[0], r2, q2v)


@dataclass(frozen=True)
class MetamodelSobol:
    result: SobolResult
    q2: float | None

    @property
    def unexplained(self) -> float | None:
        """Share of output variance the surrogate misses, 1 - Q^2."""
        return None if self.q2 is None else 1.0 - self.q2


def sobol_via_metamodel(mm: Metamodel, space: InputSpace, base_n: int, seed: int,
                        q2: float | None = None, **estimator) -> MetamodelSobol:
    """Sobol' indices of the surrogate by pick-freeze sampling on ``space``.

    ``q2`` defaults to the metamodel's recorded LOO Q^2.
    """
    if set(space.names) != set(mm.names):
        raise SchemaError(f"metamodel inputs {mm.names} do not match space inputs {space.names}")
    space = space.subset(mm.names)
    res = sobol_analysis(mm.as_model(), space, base_n, seed, **estimator)
    return MetamodelSobol(res, mm.loo_q2 if q2 is None else q2)
