"""Design generators: Monte Carlo, Latin hypercube, pick-freeze and Morris.

Every generator builds a unit-space design first and maps it to physical
space through the marginal quantiles, so stratification and grid structure
survive non-uniform marginals. All generators are pure functions of
(space, sizes, seed).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distributions import InputSpace
from .errors import DesignError

MONTE_CARLO = "monte_carlo"
LHS = "lhs"
PICK_FREEZE = "pick_freeze"
MORRIS = "morris"

# Offsets used to derive independent streams for the two pick-freeze blocks.
_STREAM_A = 0
_STREAM_B = 1


@dataclass(frozen=True)
class SampleMatrix:
    values: np.ndarray
    names: tuple[str, ...]
    design: str
    seed: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.names):
            raise DesignError(f"values of shape {values.shape} do not match names {self.names}")
        if values.shape[0] < 1:
            raise DesignError("a design needs at least one row")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows) -> SampleMatrix:
        return SampleMatrix(self.values[rows], self.names, self.design, self.seed)


def _rng(seed: int, offset: int = 0) -> np.random.Generator:
    return np.random.default_rng([offset, seed])


def _check_n(n: int, minimum: int = 1):
    if n < minimum:
        raise DesignError(f"design size must be >= {minimum}, got {n}")


def unit_monte_carlo(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    return rng.random((n, d))


def unit_lhs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """One point per stratum ((k-1)/n, k/n) in each column, columns permuted independently."""
    jitter = rng.random((n, d))
    strata = np.column_stack([rng.permutation(n) for _ in range(d)])
    return (strata + jitter) / n


def monte_carlo(space: InputSpace, n: int, seed: int) -> SampleMatrix:
    _check_n(n)
    u = unit_monte_carlo(n, space.d, _rng(seed))
    return SampleMatrix(space.to_physical(u), space.names, MONTE_CARLO, seed)


def lhs(space: InputSpace, n: int, seed: int) -> SampleMatrix:
    _check_n(n)
    u = unit_lhs(n, space.d, _rng(seed))
    return SampleMatrix(space.to_physical(u), space.names, LHS, seed)


@dataclass(frozen=True)
class PickFreezeDesign:
    """Stacked rows A, B, A_B^(1..d) and optionally B_A^(1..d).

    ``A_B^(i)`` is A with column i taken from B; ``B_A^(i)`` is B with
    column i taken from A.
    """

    sample: SampleMatrix
    base_n: int
    second_order: bool = False

    @property
    def d(self) -> int:
        return self.sample.d

    @property
    def names(self) -> tuple[str, ...]:
        return self.sample.names

    @property
    def n_blocks(self) -> int:
        return 2 * self.d + 2 if self.second_order else self.d + 2

    def block_slice(self, block: int) -> slice:
        return slice(block * self.base_n, (block + 1) * self.base_n)

    @property
    def A(self) -> np.ndarray:
        return self.sample.values[self.block_slice(0)]

    @property
    def B(self) -> np.ndarray:
        return self.sample.values[self.block_slice(1)]

    def AB(self, i: int) -> np.ndarray:
        return self.sample.values[self.block_slice(2 + i)]

    def BA(self, i: int) -> np.ndarray:
        if not self.second_order:
            raise DesignError("design was built without second-order blocks")
        return self.sample.values[self.block_slice(2 + self.d + i)]

    def split(self, y: np.ndarray) -> dict[str, np.ndarray]:
        """Cut an output vector aligned with the design rows into its blocks.

        Returns ``{"A": (n,), "B": (n,), "AB": (d, n), "BA": (d, n) or absent}``.
        """
        y = np.asarray(y, dtype=float)
        n, d = self.base_n, self.d
        if y.shape != (n * self.n_blocks,):
            raise DesignError(
                f"expected {n * self.n_blocks} outputs for this design, got {y.shape[0]}"
            )
        blocks = y.reshape(self.n_blocks, n)
        out = {"A": blocks[0], "B": blocks[1], "AB": blocks[2 : 2 + d]}
        if self.second_order:
            out["BA"] = blocks[2 + d :]
        return out


def pick_freeze_from_unit(
    space: InputSpace, ua: np.ndarray, ub: np.ndarray, seed: int | None, second_order: bool = False
) -> PickFreezeDesign:
    n, d = ua.shape
    blocks = [ua, ub]
    for i in range(d):
        m = ua.copy()
        m[:, i] = ub[:, i]
        blocks.append(m)
    if second_order:
        for i in range(d):
            m = ub.copy()
            m[:, i] = ua[:, i]
            blocks.append(m)
    values = space.to_physical(np.vstack(blocks))
    sample = SampleMatrix(values, space.names, PICK_FREEZE, seed)
    return PickFreezeDesign(sample, n, second_order)


def saltelli_design(
    space: InputSpace, n: int, seed: int, second_order: bool = False, base: str = MONTE_CARLO
) -> PickFreezeDesign:
    """Pick-freeze design costing n(d+2) rows, or n(2d+2) with second-order blocks.

    ``base`` selects how A and B are drawn (``"monte_carlo"`` or ``"lhs"``).
    """
    _check_n(n, 2)
    gen = unit_lhs if base == LHS else unit_monte_carlo
    ua = gen(n, space.d, _rng(seed, _STREAM_A))
    ub = gen(n, space.d, _rng(seed, _STREAM_B))
    return pick_freeze_from_unit(space, ua, ub, seed, second_order)


@dataclass(frozen=True)
class MorrisDesign:
    """r one-at-a-time trajectories of d+1 rows each.

    ``moved[t, s]`` is the input changed between rows s and s+1 of trajectory
    t and ``direction[t, s]`` its sign (+1 up, -1 down) in unit space.
    """

    sample: SampleMatrix
    unit: np.ndarray
    r: int
    levels: int
    delta: float
    moved: np.ndarray
    direction: np.ndarray
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "names", self.sample.names)

    @property
    def d(self) -> int:
        return self.sample.d

    def trajectory_rows(self, t: int) -> slice:
        return slice(t * (self.d + 1), (t + 1) * (self.d + 1))


def default_delta(levels: int) -> float:
    return levels / (2.0 * (levels - 1))


def grid_probability(u: np.ndarray, levels: int) -> np.ndarray:
    """Probability assigned to a Morris grid coordinate before the quantile map.

    Grid level k of ``levels`` maps to the centre (k + 1/2)/levels of the
    k-th equal-probability stratum; this keeps unbounded marginals finite and
    preserves equal spacing in unit space.
    """
    return (np.asarray(u) * (levels - 1) + 0.5) / levels


def morris_trajectories(
    space: InputSpace, r: int, levels: int = 4, delta: float | None = None, seed: int = 0
) -> MorrisDesign:
    if r < 1:
        raise DesignError(f"need at least one trajectory, got r={r}")
    if levels < 2:
        raise DesignError(f"need at least two grid levels, got {levels}")
    if delta is None:
        delta = default_delta(levels)
    steps = delta * (levels - 1)
    k = int(round(steps))
    if not (0 < delta <= 1) or abs(steps - k) > 1e-9 or k < 1:
        raise DesignError(f"delta={delta} is not a positive multiple of 1/(levels-1) in (0, 1]")

    rng = _rng(seed)
    d = space.d
    unit = np.empty((r * (d + 1), d))
    moved = np.empty((r, d), dtype=int)
    direction = np.empty((r, d), dtype=int)
    for t in range(r):
        # base level drawn on the admissible sub-grid so that base + k stays on the grid
        base = rng.integers(0, levels - k, size=d)
        up = rng.random(d) < 0.5
        x = np.where(up, base, base + k)
        order = rng.permutation(d)
        rows = [x.copy()]
        for j in order:
            x = x.copy()
            x[j] += k if up[j] else -k
            rows.append(x)
        unit[t * (d + 1) : (t + 1) * (d + 1)] = np.array(rows) / (levels - 1)
        moved[t] = order
        direction[t] = np.where(up[order], 1, -1)
    values = space.to_physical(grid_probability(unit, levels))
    sample = SampleMatrix(values, space.names, MORRIS, seed)
    return MorrisDesign(sample, unit, r, levels, float(delta), moved, direction)
