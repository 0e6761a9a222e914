"""Shifted dyadic grids with exact rational geometry.

A grid is indexed by a shift ``t`` in ``{0, 1/3}^n``; its cubes are

    2^{-k} ([0, 1)^n + m + (-1)^k t),    k in Z, m in Z^n.

Coordinates are carried as :class:`fractions.Fraction` throughout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import ConfigError, GeometryError

ZERO = Fraction(0)
THIRD = Fraction(1, 3)


def _pow2(e: int) -> Fraction:
    return Fraction(2) ** e


def _sign(k: int) -> int:
    return 1 if k % 2 == 0 else -1


@dataclass(frozen=True, order=True)
class GridShift:
    t: tuple[Fraction, ...]

    def __post_init__(self):
        t = tuple(Fraction(x) for x in self.t)
        if not t:
            raise ConfigError("grid shift needs at least one coordinate")
        if any(x not in (ZERO, THIRD) for x in t):
            raise ConfigError(f"shift entries must be 0 or 1/3, got {t}")
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return len(self.t)

    @cached_property
    def tau(self) -> tuple[int, ...]:
        """Shift in thirds: each entry 0 or 1."""
        return tuple(int(3 * x) for x in self.t)

    @property
    def is_standard(self) -> bool:
        return all(x == 0 for x in self.t)

    @classmethod
    def zero(cls, n: int) -> "GridShift":
        return cls((ZERO,) * n)

    @classmethod
    def third(cls, n: int) -> "GridShift":
        return cls((THIRD,) * n)

    @classmethod
    def from_tau(cls, tau: Sequence[int]) -> "GridShift":
        return cls(tuple(Fraction(int(x), 3) for x in tau))

    def label(self) -> str:
        return ",".join(str(x) for x in self.t)

    def __str__(self) -> str:
        return f"D_({self.label()})"


def all_shifts(n: int) -> list[GridShift]:
    """The 2^n shifts in deterministic order (standard grid first)."""
    return [GridShift(t) for t in itertools.product((ZERO, THIRD), repeat=n)]


@dataclass(frozen=True)
class RationalBox:
    """Half-open axis-aligned box ``prod [lo_i, hi_i)`` with rational ends."""

    intervals: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        iv = tuple((Fraction(a), Fraction(b)) for a, b in self.intervals)
        for a, b in iv:
            if not a < b:
                raise ConfigError(f"empty interval [{a}, {b})")
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def _trusted(cls, intervals) -> "RationalBox":
        # skips validation for intervals already known to be nonempty Fractions
        box = object.__new__(cls)
        object.__setattr__(box, "intervals", intervals)
        return box

    @classmethod
    def cube(cls, lo: Sequence, side) -> "RationalBox":
        side = Fraction(side)
        return cls(tuple((Fraction(a), Fraction(a) + side) for a in lo))

    @property
    def n(self) -> int:
        return len(self.intervals)

    @property
    def lo(self) -> tuple[Fraction, ...]:
        return tuple(a for a, _ in self.intervals)

    @property
    def hi(self) -> tuple[Fraction, ...]:
        return tuple(b for _, b in self.intervals)

    @property
    def sides(self) -> tuple[Fraction, ...]:
        return tuple(b - a for a, b in self.intervals)

    @property
    def is_cube(self) -> bool:
        return len(set(self.sides)) == 1

    @property
    def side(self) -> Fraction:
        if not self.is_cube:
            raise ConfigError(f"box {self} is not a cube")
        return self.sides[0]

    @property
    def volume(self) -> Fraction:
        v = Fraction(1)
        for s in self.sides:
            v *= s
        return v

    def contains(self, other: "RationalBox") -> bool:
        return all(a <= c and d <= b for (a, b), (c, d) in zip(self.intervals, other.intervals))

    def disjoint(self, other: "RationalBox") -> bool:
        return any(d <= a or b <= c for (a, b), (c, d) in zip(self.intervals, other.intervals))

    def contains_point(self, x: Sequence) -> bool:
        return all(a <= Fraction(v) < b for (a, b), v in zip(self.intervals, x))

    def __str__(self) -> str:
        return " x ".join(f"[{a}, {b})" for a, b in self.intervals)


@dataclass(frozen=True)
class Window:
    """The computational domain ``[-2^L, 2^L)^n``."""

    L: int

    def __post_init__(self):
        if self.L < 0:
            raise ConfigError("window exponent L must be >= 0")

    @property
    def half(self) -> Fraction:
        return _pow2(self.L)

    def box(self, n: int) -> RationalBox:
        return RationalBox(((-self.half, self.half),) * n)

    def contains(self, box: RationalBox) -> bool:
        return self.box(box.n).contains(box)


@dataclass(frozen=True, order=True)
class DyadicCube:
    shift: GridShift
    k: int
    m: tuple[int, ...]

    def __post_init__(self):
        m = tuple(int(x) for x in self.m)
        if len(m) != self.shift.n:
            raise ConfigError("index length must match the grid dimension")
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.shift.n

    @property
    def side(self) -> Fraction:
        return _pow2(-self.k)

    def key(self) -> tuple:
        return (self.shift.tau, self.k, self.m)

    def __str__(self) -> str:
        return f"{self.shift}[k={self.k}, m={self.m}]"


def cube_box(cube: DyadicCube) -> RationalBox:
    # corner (m + s t) 2^-k = (3m + s tau) / (3 2^k), in integers
    k = cube.k
    sg = _sign(k)
    num, den = (1, 3 << k) if k >= 0 else (1 << -k, 3)
    return RationalBox._trusted(tuple(
        (Fraction((3 * mi + sg * ti) * num, den), Fraction((3 * mi + sg * ti + 3) * num, den))
        for mi, ti in zip(cube.m, cube.shift.tau)
    ))


def _axis_index_containing(x: Fraction, k: int, t: Fraction) -> int:
    """Index along one axis of the scale-k cube whose interval contains x."""
    return math.floor(x * _pow2(k) - _sign(k) * t)


def parent(cube: DyadicCube) -> DyadicCube:
    # the scale k-1 corner (m' - s t) 2^{1-k} lies at or below (m + s t) 2^-k, s = (-1)^k
    sg = _sign(cube.k)
    m = tuple((mi + sg * ti) // 2 for mi, ti in zip(cube.m, cube.shift.tau))
    return DyadicCube(cube.shift, cube.k - 1, m)


def children(cube: DyadicCube) -> list[DyadicCube]:
    sg = _sign(cube.k)
    per_axis = [(2 * mi + sg * ti, 2 * mi + sg * ti + 1) for mi, ti in zip(cube.m, cube.shift.tau)]
    return [DyadicCube(cube.shift, cube.k + 1, m) for m in itertools.product(*per_axis)]


def parent_and_children(cube: DyadicCube) -> tuple[DyadicCube, list[DyadicCube]]:
    return parent(cube), children(cube)


def _axis_range(window: Window, k: int, t: Fraction) -> range:
    # indices m with [ (m + s t) 2^-k, (m + s t + 1) 2^-k ) inside [-2^L, 2^L)
    sg = _sign(k)
    lo = -window.half * _pow2(k) - sg * t
    hi = window.half * _pow2(k) - 1 - sg * t
    return range(math.ceil(lo), math.floor(hi) + 1)


def enumerate_cubes(
    window: Window, grid: GridShift, scale_min: int, scale_max: int
) -> list[DyadicCube]:
    """All cubes of ``grid`` inside ``window`` with ``scale_min <= k <= scale_max``."""
    if scale_min > scale_max:
        raise ConfigError("scale_min must not exceed scale_max")
    out = []
    for k in range(scale_min, scale_max + 1):
        ranges = [_axis_range(window, k, t) for t in grid.t]
        out.extend(DyadicCube(grid, k, m) for m in itertools.product(*ranges))
    return out


def iter_cubes(window: Window, n: int, scale_min: int, scale_max: int) -> Iterator[DyadicCube]:
    for g in all_shifts(n):
        yield from enumerate_cubes(window, g, scale_min, scale_max)


def cover_cube(box: RationalBox, window: Window) -> DyadicCube:
    """Smallest shifted-grid cube inside ``window`` containing ``box`` with side <= 6 side(box).

    Ties go to the standard grid, then to the lexicographically smallest index.
    """
    if not box.is_cube:
        raise ConfigError(f"cover_cube needs a cube, got {box}")
    if not window.contains(box):
        raise ConfigError(f"box {box} is not inside the window [-2^{window.L}, 2^{window.L})")
    s = box.side
    # admissible k: s <= 2^-k <= 6 s
    k_hi = math.floor(-math.log2(s)) + 1
    k_lo = k_hi - 5
    best = None
    for g in all_shifts(box.n):
        for k in range(k_lo, k_hi + 1):
            side = _pow2(-k)
            if not (s <= side <= 6 * s):
                continue
            m = tuple(_axis_index_containing(a, k, t) for a, t in zip(box.lo, g.t))
            cand = DyadicCube(g, k, m)
            cb = cube_box(cand)
            if cb.contains(box) and window.contains(cb):
                key = (side, g.tau, m)
                if best is None or key < best[0]:
                    best = (key, cand)
    if best is None:
        raise GeometryError(f"no shifted dyadic cube inside the window covers {box}")
    return best[1]
