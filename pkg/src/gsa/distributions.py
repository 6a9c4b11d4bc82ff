"""Marginal input distributions and independent input spaces.

Four families are supported: uniform, triangular, truncated normal and
truncated (maximum) Gumbel. Truncated families are sampled by inverse CDF
over the renormalised interval, so any stratified unit-space design keeps its
structure after the mapping to physical space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar, Iterator, Sequence

import numpy as np
from scipy import special

from .errors import ParameterError


def _as_bound(value: Any) -> float:
    if value is None:
        return math.inf
    if isinstance(value, str):
        try:
            return float(value.strip().lstrip("+"))
        except ValueError:
            raise ParameterError(f"cannot read bound {value!r}") from None
    return float(value)


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p >= 0.0) & (p <= 1.0))):
        raise ParameterError("probabilities must lie in [0, 1]")
    return p


class Distribution:
    """Common interface; concrete families are frozen dataclasses."""

    kind: ClassVar[str]

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def nominal(self) -> float:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.quantile(rng.random(n))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        for key, val in self.__dict__.items():
            out[key] = val if math.isfinite(val) else ("inf" if val > 0 else "-inf")
        return out


@dataclass(frozen=True)
class Uniform(Distribution):
    lo: float
    hi: float
    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ParameterError(f"uniform requires finite lo < hi, got [{self.lo}, {self.hi}]")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def quantile(self, p):
        p = _check_p(p)
        return self.lo + p * (self.hi - self.lo)

    @property
    def support(self):
        return (self.lo, self.hi)

    def nominal(self):
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class Triangular(Distribution):
    min: float
    mode: float
    max: float
    kind: ClassVar[str] = "triangular"

    def __post_init__(self):
        if not (self.min <= self.mode <= self.max and self.min < self.max):
            raise ParameterError(
                f"triangular requires min <= mode <= max and min < max, got "
                f"({self.min}, {self.mode}, {self.max})"
            )

    def cdf(self, x):
        a, c, b = self.min, self.mode, self.max
        x = np.clip(np.asarray(x, dtype=float), a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            left = (x - a) ** 2 / ((b - a) * (c - a))
            right = 1.0 - (b - x) ** 2 / ((b - a) * (b - c))
        return np.where(x <= c, np.where(c > a, left, 0.0), np.where(b > c, right, 1.0))

    def quantile(self, p):
        p = _check_p(p)
        a, c, b = self.min, self.mode, self.max
        split = (c - a) / (b - a)
        left = a + np.sqrt(p * (b - a) * (c - a))
        right = b - np.sqrt((1.0 - p) * (b - a) * (b - c))
        return np.where(p <= split, left, right)

    @property
    def support(self):
        return (self.min, self.max)

    def nominal(self):
        return self.mode


@dataclass(frozen=True)
class TruncNormal(Distribution):
    """Normal(mean, sd) restricted to [lo, hi]; ``sd`` is a standard deviation."""

    mean: float
    sd: float
    lo: float = -math.inf
    hi: float = math.inf
    kind: ClassVar[str] = "trunc_normal"

    def __post_init__(self):
        if not self.sd > 0:
            raise ParameterError(f"trunc_normal requires sd > 0, got {self.sd}")
        if not self.lo < self.hi:
            raise ParameterError(f"trunc_normal requires lo < hi, got [{self.lo}, {self.hi}]")
        if self._mass() <= 0.0:
            raise ParameterError("trunc_normal bounds carry no probability mass")

    # Work in the tail where the mass is: for truncation intervals in the
    # upper tail the survival function keeps full relative precision.
    @property
    def _upper(self) -> bool:
        return (self.lo - self.mean) / self.sd > 0

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.sd

    def _mass(self) -> float:
        a, b = self._z(self.lo), self._z(self.hi)
        if self._upper:
            return float(special.ndtr(-a) - special.ndtr(-b))
        return float(special.ndtr(b) - special.ndtr(a))

    def cdf(self, x):
        z = self._z(np.clip(np.asarray(x, dtype=float), self.lo, self.hi))
        a = self._z(self.lo)
        if self._upper:
            return (special.ndtr(-a) - special.ndtr(-z)) / self._mass()
        return (special.ndtr(z) - special.ndtr(a)) / self._mass()

    def quantile(self, p):
        p = _check_p(p)
        a = self._z(self.lo)
        if self._upper:
            sa = special.ndtr(-a)
            z = -special.ndtri(sa - p * self._mass())
        else:
            fa = special.ndtr(a)
            z = special.ndtri(fa + p * self._mass())
        return np.clip(self.mean + self.sd * z, self.lo, self.hi)

    @property
    def support(self):
        return (self.lo, self.hi)

    def nominal(self):
        return min(max(self.mean, self.lo), self.hi)


@dataclass(frozen=True)
class TruncGumbel(Distribution):
    """Maximum-Gumbel with location ``loc`` and scale ``scale``, truncated to [lo, hi]."""

    loc: float
    scale: float
    lo: float = -math.inf
    hi: float = math.inf
    kind: ClassVar[str] = "trunc_gumbel"

    def __post_init__(self):
        if not self.scale > 0:
            raise ParameterError(f"trunc_gumbel requires scale > 0, got {self.scale}")
        if not self.lo < self.hi:
            raise ParameterError(f"trunc_gumbel requires lo < hi, got [{self.lo}, {self.hi}]")
        if self._parent_cdf(self.hi) - self._parent_cdf(self.lo) <= 0.0:
            raise ParameterError("trunc_gumbel bounds carry no probability mass")

    def _parent_cdf(self, x):
        with np.errstate(over="ignore"):
            return np.exp(-np.exp(-(np.asarray(x, dtype=float) - self.loc) / self.scale))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        fa, fb = self._parent_cdf(self.lo), self._parent_cdf(self.hi)
        return (self._parent_cdf(x) - fa) / (fb - fa)

    def quantile(self, p):
        p = _check_p(p)
        fa, fb = self._parent_cdf(self.lo), self._parent_cdf(self.hi)
        with np.errstate(divide="ignore"):
            x = self.loc - self.scale * np.log(-np.log(fa + p * (fb - fa)))
        return np.clip(x, self.lo, self.hi)

    @property
    def support(self):
        return (self.lo, self.hi)

    def nominal(self):
        return min(max(self.loc, self.lo), self.hi)


FAMILIES: dict[str, type[Distribution]] = {
    cls.kind: cls for cls in (Uniform, Triangular, TruncNormal, TruncGumbel)
}

_FIELDS = {
    "uniform": ("lo", "hi"),
    "triangular": ("min", "mode", "max"),
    "trunc_normal": ("mean", "sd", "lo", "hi"),
    "trunc_gumbel": ("loc", "scale", "lo", "hi"),
}


def from_dict(spec: dict[str, Any]) -> Distribution:
    """Build a distribution from ``{"kind": ..., <params>}``.

    Infinite bounds may be given as ``"inf"``, ``"-inf"`` or omitted.
    """
    kind = spec.get("kind")
    if kind not in FAMILIES:
        raise ParameterError(f"unknown distribution kind {kind!r}")
    fields = _FIELDS[kind]
    unknown = set(spec) - set(fields) - {"kind"}
    if unknown:
        raise ParameterError(f"unknown parameter(s) {sorted(unknown)} for {kind}")
    kwargs = {}
    for name in fields:
        if name in spec:
            kwargs[name] = _as_bound(spec[name])
        elif name not in ("lo", "hi") or kind in ("uniform",):
            raise ParameterError(f"missing parameter {name!r} for {kind}")
    return FAMILIES[kind](**kwargs)


def cdf(dist: Distribution, x):
    return dist.cdf(x)


def quantile(dist: Distribution, p):
    return dist.quantile(p)


def nominal_value(dist: Distribution) -> float:
    return float(dist.nominal())


@dataclass(frozen=True)
class InputSpace:
    """Ordered collection of independent named inputs."""

    names: tuple[str, ...]
    dists: tuple[Distribution, ...]

    def __post_init__(self):
        if len(self.names) == 0:
            raise ParameterError("an input space needs at least one input")
        if len(self.names) != len(self.dists):
            raise ParameterError("names and distributions differ in length")
        if len(set(self.names)) != len(self.names):
            raise ParameterError(f"duplicate input names in {self.names}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, Distribution]]) -> InputSpace:
        return cls(tuple(n for n, _ in pairs), tuple(d for _, d in pairs))

    @property
    def d(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return self.d

    def __iter__(self) -> Iterator[tuple[str, Distribution]]:
        return iter(zip(self.names, self.dists))

    def __getitem__(self, name: str) -> Distribution:
        try:
            return self.dists[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def subset(self, names: Sequence[str]) -> InputSpace:
        return InputSpace(tuple(names), tuple(self[n] for n in names))

    def without(self, names: Sequence[str]) -> InputSpace:
        keep = [n for n in self.names if n not in set(names)]
        return self.subset(keep)

    def nominal(self) -> dict[str, float]:
        return {n: nominal_value(d) for n, d in self}

    def to_physical(self, u: np.ndarray) -> np.ndarray:
        """Map an (n, d) array of probabilities column-wise through the quantiles."""
        u = np.asarray(u, dtype=float)
        if u.ndim != 2 or u.shape[1] != self.d:
            raise ParameterError(f"expected an (n, {self.d}) array, got {u.shape}")
        return np.column_stack([dist.quantile(u[:, j]) for j, dist in enumerate(self.dists)])

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.column_stack([dist.cdf(x[:, j]) for j, dist in enumerate(self.dists)])

    def to_dict(self) -> list[dict[str, Any]]:
        return [{"name": n, "dist": d.to_dict()} for n, d in self]
