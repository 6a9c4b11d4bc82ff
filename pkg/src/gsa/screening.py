"""Morris elementary-effects screening."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteDesignError, ParameterError
from .sampling import MorrisDesign

NEGLIGIBLE = "negligible"
LINEAR = "linear_additive"
NONLINEAR = "nonlinear_or_interacting"


def elementary_effects(design: MorrisDesign, y, space: str = "unit") -> np.ndarray:
    """(r, d) matrix of elementary effects, column j for input j.

    ``space="unit"`` divides by the signed unit-space step (+/- delta), which
    makes effects comparable across inputs of different physical scales.
    ``space="physical"`` divides by the actual change of the moved input.
    """
    y = np.asarray(y, dtype=float)
    d, r = design.d, design.r
    if y.shape != (r * (d + 1),):
        raise IncompleteDesignError(
            f"expected {r * (d + 1)} outputs for {r} trajectories, got {y.shape[0]}"
        )
    if space not in ("unit", "physical"):
        raise ParameterError(f"space must be 'unit' or 'physical', got {space!r}")
    effects = np.empty((r, d))
    x = design.sample.values
    for t in range(r):
        rows = design.trajectory_rows(t)
        yt = y[rows]
        bad = np.flatnonzero(~np.isfinite(yt))
        if bad.size:
            raise IncompleteDesignError(
                f"trajectory {t} has missing evaluations at rows {(bad + rows.start).tolist()}"
            )
        dy = np.diff(yt)
        for s, j in enumerate(design.moved[t]):
            if space == "unit":
                step = design.direction[t, s] * design.delta
            else:
                xt = x[rows, j]
                step = xt[s + 1] - xt[s]
            effects[t, j] = dy[s] / step
    return effects


@dataclass(frozen=True)
class MorrisResult:
    names: tuple[str, ...]
    mu: np.ndarray
    mu_star: np.ndarray
    sigma: np.ndarray
    r: int
    classification: tuple[str, ...]

    def rows(self):
        for i, name in enumerate(self.names):
            yield name, self.mu[i], self.mu_star[i], self.sigma[i], self.classification[i]

    def __getitem__(self, name: str) -> dict:
        i = self.names.index(name)
        return {"mu": self.mu[i], "mu_star": self.mu_star[i], "sigma": self.sigma[i],
                "group": self.classification[i]}


def classify(mu_star, sigma, negligible: float = 0.05, linear: float = 0.5) -> tuple[str, ...]:
    """Three-group reading of the (mu*, sigma) plane.

    negligible if mu*_j < ``negligible`` * max mu*; otherwise linear/additive
    if sigma_j < ``linear`` * mu*_j; otherwise non-linear or interacting.
    """
    mu_star = np.asarray(mu_star)
    top = mu_star.max() if mu_star.size else 0.0
    groups = []
    for m, s in zip(mu_star, sigma):
        if top == 0 or m < negligible * top:
            groups.append(NEGLIGIBLE)
        elif s < linear * m:
            groups.append(LINEAR)
        else:
            groups.append(NONLINEAR)
    return tuple(groups)


def morris_measures(effects, names=None, sigma: bool = True, negligible: float = 0.05,
                    linear: float = 0.5) -> MorrisResult:
    """mu, mu* and sigma per input.

    sigma uses divisor r (population form), not r - 1.
    """
    effects = np.asarray(effects, dtype=float)
    r, d = effects.shape
    if r < 1:
        raise ParameterError("no elementary effects")
    if sigma and r < 2:
        raise ParameterError("sigma needs at least two repetitions (r >= 2)")
    mu = effects.mean(axis=0)
    mu_star = np.abs(effects).mean(axis=0)
    sd = effects.std(axis=0) if sigma else np.full(d, np.nan)
    names = tuple(names) if names is not None else tuple(f"X{j + 1}" for j in range(d))
    groups = classify(mu_star, np.nan_to_num(sd), negligible, linear)
    return MorrisResult(names, mu, mu_star, sd, r, groups)


def morris(design: MorrisDesign, y, space: str = "unit", **thresholds) -> MorrisResult:
    """Elementary effects and their summary measures in one call."""
    return morris_measures(elementary_effects(design, y, space), design.names, **thresholds)
