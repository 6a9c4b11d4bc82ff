"""Linear and rank-based importance measures: Pearson, SRC, PCC and their rank
analogues (Spearman, SRRC, PRCC), with R^2 / Q^2 diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, stats

from .errors import CollinearityError, ParameterError, UndefinedIndexError
from .sampling import SampleMatrix


def _xy(sample, y=None, names=None):
    if isinstance(sample, SampleMatrix):
        x, names = sample.values, sample.names
    else:
        x = np.asarray(sample, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        names = tuple(names) if names is not None else tuple(f"X{j + 1}" for j in range(x.shape[1]))
    if y is None:
        return x, tuple(names)
    y = np.asarray(y, dtype=float)
    if y.shape != (x.shape[0],):
        raise ParameterError(f"{y.shape[0]} outputs for {x.shape[0]} rows")
    return x, tuple(names), y


def pearson(x, y) -> float:
    """Sample product-moment correlation."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("pearson needs two vectors of equal length")
    if x.size < 3:
        raise ParameterError("pearson needs at least 3 points")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(xc, xc), np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise UndefinedIndexError("correlation undefined for a zero-variance vector")
    return float(np.clip(np.dot(xc, yc) / np.sqrt(sxx * syy), -1.0, 1.0))


@dataclass(frozen=True)
class LinearFit:
    names: tuple[str, ...]
    intercept: float
    coefficients: np.ndarray
    residuals: np.ndarray
    r_squared: float

    def predict(self, x) -> np.ndarray:
        if isinstance(x, SampleMatrix):
            x = x.values
        x = np.asarray(x, dtype=float)
        return self.intercept + x @ self.coefficients


def _check_rank(xc: np.ndarray, names):
    scale = np.abs(xc).max(axis=0)
    scale[scale == 0] = 1.0
    _, r, piv = linalg.qr(xc / scale, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(xc.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > max(tol, 1e-12)))
    if rank < xc.shape[1]:
        cols = [names[k] for k in sorted(piv[rank:])]
        raise CollinearityError(f"design matrix is rank deficient; dependent column(s): {cols}", cols)


def _lstsq_centered(x, y, names):
    xm, ym = x.mean(axis=0), y.mean()
    xc, yc = x - xm, y - ym
    _check_rank(xc, names)
    beta, *_ = linalg.lstsq(xc, yc)
    return beta, ym - xm @ beta


def fit_linear(sample, y, names=None) -> LinearFit:
    """Ordinary least squares with intercept; needs n > d + 1 and a full-rank design."""
    x, names, y = _xy(sample, y, names)
    n, d = x.shape
    if n <= d + 1:
        raise ParameterError(f"linear fit needs n > d + 1 rows, got n={n}, d={d}")
    beta, intercept = _lstsq_centered(x, y, names)
    resid = y - intercept - x @ beta
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 0.0 if sst == 0 else float(1.0 - np.sum(resid**2) / sst)
    return LinearFit(names, float(intercept), beta, resid, r2)


def src(fit: LinearFit, sample, y) -> np.ndarray:
    """Standardized regression coefficients beta_j * sd(X_j) / sd(Y), empirical sds."""
    x, _, y = _xy(sample, y, fit.names)
    sy = y.std()
    if sy == 0:
        raise UndefinedIndexError("SRC undefined for a constant output")
    return fit.coefficients * x.std(axis=0) / sy


def _residual(target, others):
    if others.shape[1] == 0:
        return target - target.mean()
    beta, intercept = _lstsq_centered(others, target, [f"c{k}" for k in range(others.shape[1])])
    return target - intercept - others @ beta


def pcc(sample, y, j: int, names=None) -> float:
    """Partial correlation of input j and Y with the other inputs' linear effects removed."""
    x, names, y = _xy(sample, y, names)
    n, d = x.shape
    if n <= d + 1:
        raise ParameterError(f"PCC needs n > d + 1 rows, got n={n}, d={d}")
    _check_rank(x - x.mean(axis=0), names)
    others = np.delete(x, j, axis=1)
    return pearson(_residual(x[:, j], others), _residual(y, others))


def pcc_all(sample, y, names=None) -> np.ndarray:
    x, names, y = _xy(sample, y, names)
    return np.array([pcc(x, y, j, names) for j in range(x.shape[1])])


def rank_transform(values) -> np.ndarray:
    """Column-wise ranks 1..n, ties receiving their average rank."""
    return stats.rankdata(np.asarray(values, dtype=float), axis=0, method="average")


def q2(predictor, x_test, y_test) -> float:
    """Predictivity coefficient 1 - sum (y - yhat)^2 / sum (y - mean y)^2 on a test set."""
    y_test = np.asarray(y_test, dtype=float)
    if y_test.size < 2:
        raise ParameterError("Q2 needs at least two test points")
    sst = np.sum((y_test - y_test.mean()) ** 2)
    if sst == 0:
        raise UndefinedIndexError("Q2 undefined for a constant test output")
    pred = predictor.predict(x_test) if hasattr(predictor, "predict") else predictor(x_test)
    return float(1.0 - np.sum((y_test - np.asarray(pred, dtype=float)) ** 2) / sst)


def _normalized_ranks(a):
    return rank_transform(a) / (len(a) + 1)


def q2_ranks(x_train, y_train, x_test, y_test) -> float:
    """Q2 of a rank regression; each set is ranked on its own (scaled to (0, 1)).

    Ranking train and test separately avoids leaking test information into
    the fit; the scaling puts both sets on a comparable rank scale.
    """
    fit = fit_linear(_normalized_ranks(x_train), _normalized_ranks(y_train))
    return q2(fit, _normalized_ranks(x_test), _normalized_ranks(y_test))


def fisher_interval(r, n: int, controlled: int = 0, level: float = 0.95) -> np.ndarray:
    """Fisher z-transform interval for a (partial) correlation, rows (lo, hi)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    dof = n - 3 - controlled
    if dof <= 0:
        return np.full((r.size, 2), np.nan)
    z = np.arctanh(np.clip(r, -1 + 1e-15, 1 - 1e-15))
    half = stats.norm.ppf(0.5 + level / 2) / np.sqrt(dof)
    return np.column_stack([np.tanh(z - half), np.tanh(z + half)])


@dataclass(frozen=True)
class RegressionIndices:
    names: tuple[str, ...]
    n: int
    pearson: np.ndarray
    src: np.ndarray
    pcc: np.ndarray
    spearman: np.ndarray
    srrc: np.ndarray
    prcc: np.ndarray
    r_squared: float
    r_squared_ranks: float
    q2: float | None = None
    q2_ranks: float | None = None
    intervals: dict[str, np.ndarray] = field(default_factory=dict)
    level: float = 0.95

    MEASURES = ("pearson", "src", "pcc", "spearman", "srrc", "prcc")

    def table(self) -> list[dict]:
        rows = []
        for j, name in enumerate(self.names):
            row = {"input": name}
            for m in self.MEASURES:
                row[m] = float(getattr(self, m)[j])
                if m in self.intervals:
                    row[m + "_lo"], row[m + "_hi"] = (float(v) for v in self.intervals[m][j])
            rows.append(row)
        return rows


def _point_indices(x, y, names):
    fit = fit_linear(x, y, names)
    rx, ry = rank_transform(x), rank_transform(y)
    rfit = fit_linear(rx, ry, names)
    return {
        "pearson": np.array([pearson(x[:, j], y) for j in range(x.shape[1])]),
        "src": src(fit, x, y),
        "pcc": pcc_all(x, y, names),
        "spearman": np.array([pearson(rx[:, j], ry) for j in range(x.shape[1])]),
        "srrc": src(rfit, rx, ry),
        "prcc": pcc_all(rx, ry, names),
    }, fit, rfit


def regression_indices(sample, y, names=None, test=None, level: float = 0.95,
                       bootstrap: int = 0, seed: int = 0) -> RegressionIndices:
    """All linear and rank measures for one output.

    ``test`` is an optional ``(x_test, y_test)`` pair disjoint from the
    training rows, giving Q2 and rank Q2. Correlation-type measures get Fisher
    intervals; with ``bootstrap=B`` every measure gets a percentile interval
    over B row resamples instead.
    """
    x, names, y = _xy(sample, y, names)
    n, d = x.shape
    point, fit, rfit = _point_indices(x, y, names)

    intervals: dict[str, np.ndarray] = {}
    if bootstrap:
        if bootstrap < 2:
            raise ParameterError("bootstrap needs B >= 2")
        rng = np.random.default_rng(seed)
        reps = {m: [] for m in point}
        for _ in range(bootstrap):
            idx = rng.integers(0, n, n)
            try:
                p, _, _ = _point_indices(x[idx], y[idx], names)
            except (CollinearityError, UndefinedIndexError):
                continue
            for m in point:
                reps[m].append(p[m])
        a = (1 - level) / 2
        for m, v in reps.items():
            intervals[m] = np.quantile(np.array(v), [a, 1 - a], axis=0).T
    else:
        for m, ctrl in (("pearson", 0), ("spearman", 0), ("pcc", d - 1), ("prcc", d - 1)):
            intervals[m] = fisher_interval(point[m], n, ctrl, level)

    q2v = q2r = None
    if test is not None:
        xt, yt = test
        xt = xt.values if isinstance(xt, SampleMatrix) else np.asarray(xt, dtype=float)
        q2v = q2(fit, xt, yt)
        q2r = q2_ranks(x, y, xt, yt)
    return RegressionIndices(names, n, r_squared=fit.r_squared, r_squared_ranks=rfit.r_squared,
                             q2=q2v, q2_ranks=q2r, intervals=intervals, level=level, **point)
