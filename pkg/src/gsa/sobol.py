"""Variance-based (Sobol') indices from pick-freeze designs.

Notation: yA, yB are outputs on the independent blocks A and B, yAB[i] on
A with column i taken from B, yBA[i] on B with column i taken from A. All
outputs are centred on the pooled A/B mean before any estimator is applied
and the variance normaliser is the pooled A/B variance. Centring leaves every
estimator's expectation unchanged but removes the mean-squared term that
otherwise dominates the Monte Carlo noise when |E(Y)| >> sd(Y).

First-order estimators
    saltelli     V_i = mean(yB * (yAB[i] - yA))
                 (Saltelli et al. 2010, Comput. Phys. Commun. 181, table 2 (b))
    janon_monod  pairs (yB, yAB[i]) share X_i only; normalised by their own
                 symmetric variance estimate (Janon et al. 2014, ESAIM P&S 18)
Total-effect estimators
    jansen       VT_i = mean((yA - yAB[i])^2) / 2   (Jansen 1999)
    saltelli     VT_i = mean(yA * (yA - yAB[i]))    (Homma & Saltelli 1996 form)
Second order
    closed index of {i, j} from Cov(yBA[i], yAB[j]) (rows share X_i from A
    and X_j from B), minus the first-order covariances Cov(yA, yBA[i]) and
    Cov(yB, yAB[j]) measured on the same rows; averaged with the mirrored
    arrangement (yAB[i], yBA[j]). Both arrangements need the B_A blocks.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Sequence

import numpy as np

from .errors import DesignError, IncompleteDesignError, ParameterError, UndefinedIndexError
from .sampling import PickFreezeDesign

FIRST_ORDER = ("saltelli", "janon_monod")
TOTAL = ("jansen", "saltelli")


class NegativeIndexWarning(UserWarning):
    """A raw index estimate is negative, a sign of Monte Carlo noise."""


@dataclass(frozen=True)
class SobolResult:
    names: tuple[str, ...]
    first: np.ndarray
    total: np.ndarray
    first_ci: np.ndarray
    total_ci: np.ndarray
    first_se: np.ndarray
    total_se: np.ndarray
    base_n: int
    variance: float
    first_estimator: str = "saltelli"
    total_estimator: str = "jansen"
    level: float = 0.95
    ci_method: str = "bootstrap"
    n_resamples: int = 0
    second: dict[tuple[str, str], float] = field(default_factory=dict)
    second_ci: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    second_se: dict[tuple[str, str], float] = field(default_factory=dict)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def S(self, name: str) -> float:
        return float(self.first[self.index(name)])

    def ST(self, name: str) -> float:
        return float(self.total[self.index(name)])

    def S2(self, a: str, b: str) -> float:
        return self.second[(a, b)] if (a, b) in self.second else self.second[(b, a)]

    def to_dict(self) -> dict:
        inputs = {}
        for k, name in enumerate(self.names):
            inputs[name] = {
                "Si": float(self.first[k]), "Si_lo": float(self.first_ci[k, 0]),
                "Si_hi": float(self.first_ci[k, 1]), "Si_se": float(self.first_se[k]),
                "STi": float(self.total[k]), "STi_lo": float(self.total_ci[k, 0]),
                "STi_hi": float(self.total_ci[k, 1]), "STi_se": float(self.total_se[k]),
            }
        pairs = [
            {"i": a, "j": b, "Sij": float(v), "Sij_lo": float(self.second_ci[(a, b)][0]),
             "Sij_hi": float(self.second_ci[(a, b)][1]), "Sij_se": float(self.second_se[(a, b)])}
            for (a, b), v in self.second.items()
        ]
        return {
            "estimator": {"first_order": self.first_estimator, "total": self.total_estimator},
            "n": self.base_n, "variance": self.variance, "level": self.level,
            "ci_method": self.ci_method, "n_resamples": self.n_resamples,
            "inputs": inputs, "pairs": pairs,
        }


def _blocks(design: PickFreezeDesign, y) -> dict[str, np.ndarray]:
    blocks = design.split(y)
    for key, arr in blocks.items():
        bad = ~np.isfinite(arr)
        if bad.any():
            where = np.argwhere(bad)[:3].tolist()
            raise IncompleteDesignError(f"non-finite outputs in block {key} at {where}")
    return blocks


def _point(blocks, first: str, total: str, pairs: Sequence[tuple[int, int]]):
    ya, yb, yab = blocks["A"], blocks["B"], blocks["AB"]
    pooled = np.concatenate([ya, yb])
    c = pooled.mean()
    var = pooled.var()
    if not var > 0:
        raise UndefinedIndexError("output variance is zero; Sobol' indices are undefined")
    ya, yb, yab = ya - c, yb - c, yab - c

    if first == "saltelli":
        s1 = np.mean(yb * (yab - ya), axis=1) / var
    else:
        m = 0.5 * (yb + yab).mean(axis=1)
        num = np.mean(yb * yab, axis=1) - m**2
        den = 0.5 * np.mean(yb**2 + yab**2, axis=1) - m**2
        s1 = num / den

    if total == "jansen":
        st = 0.5 * np.mean((ya - yab) ** 2, axis=1) / var
    else:
        st = np.mean(ya * (ya - yab), axis=1) / var

    s2 = []
    if pairs:
        yba = blocks["BA"] - c

        def cov(u, v):
            return np.mean(u * v) - u.mean() * v.mean()

        for i, j in pairs:
            e1 = cov(yba[i], yab[j]) - cov(ya, yba[i]) - cov(yb, yab[j])
            e2 = cov(yab[i], yba[j]) - cov(yb, yab[i]) - cov(ya, yba[j])
            s2.append(0.5 * (e1 + e2) / var)
    return s1, st, np.array(s2), var


def _resample(blocks, idx):
    out = {"A": blocks["A"][idx], "B": blocks["B"][idx], "AB": blocks["AB"][:, idx]}
    if "BA" in blocks:
        out["BA"] = blocks["BA"][:, idx]
    return out


def _interval(point, reps, level):
    a = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [a, 1.0 - a], axis=0)
    # percentile intervals can miss a biased point estimate; widen to include it
    return np.column_stack([np.minimum(lo, point), np.maximum(hi, point)])


def _warn_negative(names, values, label):
    neg = [n for n, v in zip(names, values) if v < 0]
    if neg:
        warnings.warn(f"negative {label} estimates for {neg} (kept as-is)", NegativeIndexWarning,
                      stacklevel=3)


def estimate_sobol(design: PickFreezeDesign, y, first_order: str = "saltelli",
                   total: str = "jansen", second_order: bool | None = None,
                   n_boot: int = 200, level: float = 0.95, seed: int = 0) -> SobolResult:
    """First-order and total indices, with percentile bootstrap intervals.

    The bootstrap resamples base row indices jointly across all blocks, which
    keeps the pick-freeze coupling between A, B and the hybrid blocks.
    ``second_order=None`` estimates pair indices whenever the design has the
    B_A blocks. ``n_boot=0`` skips the bootstrap (degenerate intervals, NaN
    standard errors).
    """
    if first_order not in FIRST_ORDER:
        raise ParameterError(f"first-order estimator must be one of {FIRST_ORDER}")
    if total not in TOTAL:
        raise ParameterError(f"total estimator must be one of {TOTAL}")
    if second_order is None:
        second_order = design.second_order
    if second_order and not design.second_order:
        raise DesignError("second-order indices need a design built with second_order=True")
    if n_boot == 1 or n_boot < 0:
        raise ParameterError("bootstrap needs B >= 2 resamples")

    blocks = _blocks(design, y)
    names = design.names
    pairs = list(combinations(range(design.d), 2)) if second_order else []
    s1, st, s2, var = _point(blocks, first_order, total, pairs)

    if n_boot:
        if n_boot < 100:
            warnings.warn(f"only {n_boot} bootstrap resamples; intervals will be rough", stacklevel=2)
        rng = np.random.default_rng(seed)
        n = design.base_n
        r1, rt, r2 = [], [], []
        for _ in range(n_boot):
            b1, bt, b2, _ = _point(_resample(blocks, rng.integers(0, n, n)), first_order, total, pairs)
            r1.append(b1)
            rt.append(bt)
            r2.append(b2)
        r1, rt, r2 = np.array(r1), np.array(rt), np.array(r2)
        ci1, cit = _interval(s1, r1, level), _interval(st, rt, level)
        se1, set_ = r1.std(axis=0, ddof=1), rt.std(axis=0, ddof=1)
        ci2 = _interval(s2, r2, level) if pairs else np.empty((0, 2))
        se2 = r2.std(axis=0, ddof=1) if pairs else np.empty(0)
    else:
        ci1, cit = np.column_stack([s1, s1]), np.column_stack([st, st])
        se1 = set_ = np.full(design.d, np.nan)
        ci2 = np.column_stack([s2, s2]) if pairs else np.empty((0, 2))
        se2 = np.full(len(pairs), np.nan)

    _warn_negative(names, s1, "first-order")
    _warn_negative(names, st, "total")
    keys = [(names[i], names[j]) for i, j in pairs]
    return SobolResult(
        names, s1, st, ci1, cit, se1, set_, design.base_n, float(var), first_order, total, level,
        "bootstrap" if n_boot else "none", n_boot,
        second={k: float(v) for k, v in zip(keys, s2)},
        second_ci={k: (float(a), float(b)) for k, (a, b) in zip(keys, ci2)},
        second_se={k: float(v) for k, v in zip(keys, se2)},
    )


def estimate_second_order(design: PickFreezeDesign, y, level: float = 0.95, n_boot: int = 200,
                          seed: int = 0) -> dict[tuple[str, str], float]:
    """Pair indices S_ij only; the design must carry the B_A blocks."""
    if not design.second_order:
        raise DesignError("second-order indices need a design built with second_order=True")
    return estimate_sobol(design, y, second_order=True, n_boot=n_boot, level=level,
                          seed=seed).second


def confidence_intervals(design: PickFreezeDesign | None = None, y=None, method: str = "bootstrap",
                         B: int = 500, level: float = 0.95, seed: int = 0,
                         repetitions: Sequence[tuple[PickFreezeDesign, np.ndarray]] | None = None,
                         **estimator) -> SobolResult:
    """Sobol' indices with intervals by bootstrap or by independent repetitions.

    For ``method="repetition"`` pass ``repetitions=[(design, y), ...]``: the
    point estimate is the mean over repetitions and the interval the
    percentile range of the repeated estimates.
    """
    if B < 2:
        raise ParameterError("need B >= 2 resamples or repetitions")
    if method == "bootstrap":
        if design is None or y is None:
            raise ParameterError("bootstrap intervals need a design and its outputs")
        return estimate_sobol(design, y, n_boot=B, level=level, seed=seed, **estimator)
    if method != "repetition":
        raise ParameterError(f"unknown interval method {method!r}")
    if not repetitions or len(repetitions) < 2:
        raise ParameterError("repetition intervals need at least two (design, outputs) pairs")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeIndexWarning)
        runs = [estimate_sobol(dz, yz, n_boot=0, **estimator) for dz, yz in repetitions]
    return combine_repetitions(runs, level)


def combine_repetitions(runs: Sequence[SobolResult], level: float = 0.95) -> SobolResult:
    s1 = np.array([r.first for r in runs])
    st = np.array([r.total for r in runs])
    m1, mt = s1.mean(axis=0), st.mean(axis=0)
    keys = list(runs[0].second)
    s2 = np.array([[r.second[k] for k in keys] for r in runs]) if keys else np.empty((len(runs), 0))
    m2 = s2.mean(axis=0)
    ci2 = _interval(m2, s2, level) if keys else np.empty((0, 2))
    return replace(
        runs[0],
        first=m1, total=mt,
        first_ci=_interval(m1, s1, level), total_ci=_interval(mt, st, level),
        first_se=s1.std(axis=0, ddof=1), total_se=st.std(axis=0, ddof=1),
        variance=float(np.mean([r.variance for r in runs])),
        level=level, ci_method="repetition", n_resamples=len(runs),
        second={k: float(v) for k, v in zip(keys, m2)},
        second_ci={k: (float(a), float(b)) for k, (a, b) in zip(keys, ci2)},
        second_se={k: float(v) for k, v in zip(keys, s2.std(axis=0, ddof=1))},
    )


def sobol_analysis(model, space, base_n: int, seed: int, output: str | None = None,
                   fixed=None, second_order: bool = False, workers: int = 1, base: str = "monte_carlo",
                   **estimator) -> SobolResult:
    """Build a pick-freeze design, evaluate ``model`` on it and estimate the indices."""
    from .models import evaluate
    from .sampling import saltelli_design

    design = saltelli_design(space, base_n, seed, second_order=second_order, base=base)
    ev = evaluate(model, design.sample, fixed=fixed, workers=workers)
    name = output or model.outputs[0]
    return estimate_sobol(design, ev[name], second_order=second_order, **estimator)


def repeated_sobol(model, space, base_n: int, repetitions: int, seed: int, output: str | None = None,
                   fixed=None, level: float = 0.95, workers: int = 1, **estimator) -> SobolResult:
    """Independent repetitions of the whole estimation (fresh designs from derived seeds)."""
    from .models import evaluate
    from .sampling import saltelli_design

    pairs = []
    seeds = np.random.SeedSequence(seed).generate_state(repetitions)
    for s in seeds:
        design = saltelli_design(space, base_n, int(s), second_order=estimator.get("second_order", False))
        ev = evaluate(model, design.sample, fixed=fixed, workers=workers)
        pairs.append((design, ev[output or model.outputs[0]]))
    return confidence_intervals(method="repetition", repetitions=pairs, level=level, B=repetitions,
                                **estimator)
