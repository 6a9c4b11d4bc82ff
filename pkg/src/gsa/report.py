"""Exploration datasets: scatter clouds, binned main-effect curves and cobweb data.

Nothing is rendered here; every dataset has a CSV writer for external tools.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .models import EvaluationSet
from .regression import rank_transform


@dataclass(frozen=True)
class MainEffectCurve:
    """Binned estimate of E(Y | X_i) - E(Y) over equal-probability bins of X_i."""

    name: str
    center_p: np.ndarray
    center_x: np.ndarray
    effect: np.ndarray
    count: np.ndarray

    @property
    def variance(self) -> float:
        """Count-weighted variance of the bin means, a crude Var[E(Y|X_i)]."""
        w = self.count / self.count.sum()
        return float(np.sum(w * self.effect**2))


def main_effects(ev: EvaluationSet, output: str, bins: int = 20) -> list[MainEffectCurve]:
    """One curve per input; needs at least 5 rows per bin."""
    y = ev[output]
    n = ev.n
    if bins < 1:
        raise ParameterError("bins must be positive")
    if n < 5 * bins:
        raise ParameterError(
            f"{n} rows are too few for {bins} bins (need >= {5 * bins}); use at most {n // 5} bins"
        )
    grand = y.mean()
    curves = []
    for j, name in enumerate(ev.sample.names):
        x = ev.sample.values[:, j]
        # stable sort keeps the binning a function of the values, not of row order
        order = np.lexsort((y, x))
        pos = (np.arange(n) + 0.5) / n
        groups = np.array_split(np.arange(n), bins)
        cp, cx, eff, cnt = [], [], [], []
        for g in groups:
            idx = order[g]
            cp.append(pos[g].mean())
            cx.append(x[idx].mean())
            eff.append(y[idx].mean() - grand)
            cnt.append(len(g))
        curves.append(MainEffectCurve(name, np.array(cp), np.array(cx), np.array(eff), np.array(cnt)))
    return curves


@dataclass(frozen=True)
class CobwebDataset:
    """Rank-normalised coordinates (rank / n) for every input and the output."""

    columns: tuple[str, ...]
    values: np.ndarray
    highlight: np.ndarray
    output: str
    top_fraction: float
    direction: str

    @property
    def n_highlighted(self) -> int:
        return int(self.highlight.sum())


def cobweb(ev: EvaluationSet, output: str, top_fraction: float = 0.05,
           direction: str = "largest") -> CobwebDataset:
    """Flag the ``top_fraction`` rows with the largest (or smallest) ``output``."""
    if not 0 < top_fraction <= 1:
        raise ParameterError("top_fraction must lie in (0, 1]")
    if direction not in ("largest", "smallest"):
        raise ParameterError("direction must be 'largest' or 'smallest'")
    y = ev[output]
    n = ev.n
    k = min(n, max(1, int(round(top_fraction * n))))
    key = -y if direction == "largest" else y
    order = np.argsort(key, kind="stable")
    flag = np.zeros(n, dtype=bool)
    flag[order[:k]] = True
    raw = np.column_stack([ev.sample.values, y])
    norm = rank_transform(raw) / n
    return CobwebDataset((*ev.sample.names, output), norm, flag, output, top_fraction, direction)


def scatter_rows(ev: EvaluationSet, output: str):
    y = ev[output]
    for j, name in enumerate(ev.sample.names):
        for xv, yv in zip(ev.sample.values[:, j], y):
            yield name, xv, yv


def write_scatter_csv(path, ev: EvaluationSet, output: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input", "x", "y"])
        for name, xv, yv in scatter_rows(ev, output):
            w.writerow([name, repr(float(xv)), repr(float(yv))])


def write_main_effects_csv(path, curves: list[MainEffectCurve]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input", "bin_center_p", "bin_center_x", "effect", "count"])
        for c in curves:
            for p, x, e, k in zip(c.center_p, c.center_x, c.effect, c.count):
                w.writerow([c.name, repr(float(p)), repr(float(x)), repr(float(e)), int(k)])


def write_cobweb_csv(path, data: CobwebDataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*data.columns, "highlight"])
        for row, h in zip(data.values, data.highlight):
            w.writerow([*(repr(float(v)) for v in row), int(h)])

