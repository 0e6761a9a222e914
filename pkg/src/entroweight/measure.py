"""Piecewise-constant weights on a bounded mesh, and their integrals and norms.

A :class:`Mesh` splits the window ``[-2^L, 2^L)^n`` into cells of side
``2^-J``.  Operators work on the *lattice*, the same window cut into cells
of side ``2^-J / 3``; every shifted dyadic cube with ``k <= J`` is a union of
lattice cells.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DegenerateWeightError, ExponentError
from .geometry import DyadicCube, RationalBox, Window, cube_box

WEIGHT_FLOOR = 1e-12
DEFAULT_CELL_BUDGET = 1 << 22
LATTICE_REFINE = 3


@dataclass(frozen=True)
class Mesh:
    n: int
    L: int
    J: int
    budget: int = field(default=DEFAULT_CELL_BUDGET, compare=False)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ConfigError(f"dimension must be 1 or 2, got {self.n}")
        if self.L < 0 or self.J < 0:
            raise ConfigError("mesh needs L >= 0 and J >= 0")
        if self.lattice_size ** self.n > self.budget:
            raise ConfigError(
                f"mesh n={self.n}, L={self.L}, J={self.J} has "
                f"{self.lattice_size ** self.n} lattice cells, over the budget {self.budget}"
            )

    @property
    def window(self) -> Window:
        return Window(self.L)

    @property
    def size(self) -> int:
        """Cells per axis."""
        return 2 ** (self.L + self.J + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.size,) * self.n

    @property
    def h(self) -> Fraction:
        return Fraction(1, 2 ** self.J)

    @property
    def lattice_size(self) -> int:
        return LATTICE_REFINE * self.size

    @property
    def lattice_shape(self) -> tuple[int, ...]:
        return (self.lattice_size,) * self.n

    @property
    def lattice_h(self) -> Fraction:
        return Fraction(1, LATTICE_REFINE * 2 ** self.J)

    @property
    def origin_offset(self) -> int:
        """Lattice index of the cell whose lower edge is 0."""
        return self.lattice_size // 2

    def centers(self, lattice: bool = False) -> np.ndarray:
        """Cell midpoints along one axis."""
        cnt = self.lattice_size if lattice else self.size
        h = float(self.lattice_h if lattice else self.h)
        return -(2.0 ** self.L) + (np.arange(cnt) + 0.5) * h

    def refine(self, dJ: int = 1) -> "Mesh":
        return Mesh(self.n, self.L, self.J + dJ, self.budget)

    def lattice_range(self, box: RationalBox) -> tuple[tuple[int, int], ...]:
        """Lattice index ranges ``[a, b)`` per axis; the box must be lattice aligned."""
        out = []
        lh = self.lattice_h
        for lo, hi in box.intervals:
            a = (lo + 2 ** self.L) / lh
            b = (hi + 2 ** self.L) / lh
            if a.denominator != 1 or b.denominator != 1:
                raise ConfigError(f"box {box} is not aligned with the lattice of side {lh}")
            if a < 0 or b > self.lattice_size:
                raise ConfigError(f"box {box} leaves the window")
            out.append((int(a), int(b)))
        return tuple(out)


BoxLike = Union[RationalBox, DyadicCube]


def as_box(b: BoxLike) -> RationalBox:
    return cube_box(b) if isinstance(b, DyadicCube) else b


class _CellFunction:
    """Shared behaviour of step functions on mesh cells or lattice cells."""

    refine = 1

    mesh: Mesh
    values: np.ndarray

    @property
    def cell_size(self) -> Fraction:
        return self.mesh.h / self.refine

    @property
    def cell_volume(self) -> float:
        return float(self.cell_size ** self.mesh.n)

    def lattice(self) -> np.ndarray:
        v = self.values
        if self.refine == LATTICE_REFINE:
            return v
        for ax in range(self.mesh.n):
            v = np.repeat(v, LATTICE_REFINE, axis=ax)
        return v

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.mesh.n, self.mesh.L, self.mesh.J, self.refine)).encode())
        h.update(np.ascontiguousarray(self.values, dtype=np.float64).tobytes())
        return h.hexdigest()

    def _check_values(self):
        v = np.asarray(self.values, dtype=np.float64)
        shape = (self.mesh.size * self.refine,) * self.mesh.n
        if v.shape != shape:
            raise ConfigError(f"values have shape {v.shape}, expected {shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("values must be finite")
        if np.any(v < 0):
            raise ConfigError("values must be nonnegative")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class StepFunction(_CellFunction):
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self._check_values()

    @classmethod
    def weight(cls, mesh: Mesh, values, floor: float = WEIGHT_FLOOR) -> "StepFunction":
        """A weight: values clamped below at ``floor``."""
        return cls(mesh, np.maximum(np.asarray(values, dtype=np.float64), floor))

    @classmethod
    def constant(cls, mesh: Mesh, c: float) -> "StepFunction":
        return cls(mesh, np.full(mesh.shape, float(c)))

    @classmethod
    def zeros(cls, mesh: Mesh) -> "StepFunction":
        return cls(mesh, np.zeros(mesh.shape))

    @classmethod
    def indicator(cls, mesh: Mesh, box: BoxLike) -> "StepFunction":
        """Cell averages of the indicator of ``box``."""
        frac = [_axis_overlaps(mesh, lo, hi, 1) for lo, hi in as_box(box).intervals]
        v = frac[0] if mesh.n == 1 else np.multiply.outer(frac[0], frac[1])
        return cls(mesh, v / float(mesh.h ** mesh.n))

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            _same_mesh(self, other)
            return StepFunction(self.mesh, self.values * other.values)
        return StepFunction(self.mesh, self.values * float(other))

    __rmul__ = __mul__

    def __pow__(self, e: float) -> "StepFunction":
        return StepFunction(self.mesh, self.values ** float(e))

    def to_csv(self, path=None) -> str:
        return _write_cells(path, self.mesh, self.values, tag=None)

    @classmethod
    def from_csv(cls, source) -> "StepFunction":
        mesh, values, tag = _read_cells(source)
        if tag is not None:
            raise ConfigError("CSV carries an operator tag; use OperatorField.from_csv")
        return cls(mesh, values)


@dataclass(frozen=True, eq=False)
class OperatorField(_CellFunction):
    """An operator output, constant on lattice cells."""

    mesh: Mesh
    values: np.ndarray
    tag: str = ""

    refine = LATTICE_REFINE

    def __post_init__(self):
        self._check_values()

    def to_csv(self, path=None) -> str:
        return _write_cells(path, self.mesh, self.values, tag=self.tag or "field")

    @classmethod
    def from_csv(cls, source) -> "OperatorField":
        mesh, values, tag = _read_cells(source, lattice=True)
        return cls(mesh, values, tag or "")


def _same_mesh(a, b):
    if a.mesh != b.mesh:
        raise ConfigError(f"mesh mismatch: {a.mesh} vs {b.mesh}")


def on_lattice(f) -> np.ndarray:
    if isinstance(f, _CellFunction):
        return f.lattice()
    raise TypeError(f"expected a StepFunction or OperatorField, got {type(f).__name__}")


def _axis_overlaps(mesh: Mesh, lo: Fraction, hi: Fraction, refine: int) -> np.ndarray:
    """Exact overlap length of each cell along one axis with ``[lo, hi)``."""
    h = mesh.h / refine
    cnt = mesh.size * refine
    left = -Fraction(2) ** mesh.L
    out = np.zeros(cnt)
    a = max(0, math.floor((lo - left) / h))
    b = min(cnt, math.ceil((hi - left) / h))
    for i in range(a, b):
        c0 = left + i * h
        ov = min(hi, c0 + h) - max(lo, c0)
        if ov > 0:
            out[i] = float(ov)
    return out


def _overlap_weights(f: _CellFunction, box: RationalBox) -> np.ndarray:
    if box.n != f.mesh.n:
        raise ConfigError("box dimension does not match the mesh")
    if not f.mesh.window.contains(box):
        raise ConfigError(f"box {box} is not inside the window")
    ov = [_axis_overlaps(f.mesh, lo, hi, f.refine) for lo, hi in box.intervals]
    return ov[0] if f.mesh.n == 1 else np.multiply.outer(ov[0], ov[1])


def integrate(f: _CellFunction, box: BoxLike) -> float:
    box = as_box(box)
    w = _overlap_weights(f, box)
    nz = w > 0
    return math.fsum((w[nz] * f.values[nz]).ravel().tolist())


def average(f: _CellFunction, box: BoxLike) -> float:
    box = as_box(box)
    return integrate(f, box) / float(box.volume)


def weighted_average(f: _CellFunction, sigma: _CellFunction, box: BoxLike) -> float:
    """``int_Q f sigma / sigma(Q)``."""
    box = as_box(box)
    if f.refine != sigma.refine:
        raise ConfigError("f and sigma must live on the same cells")
    w = _overlap_weights(sigma, box)
    nz = w > 0
    mass = math.fsum((w[nz] * sigma.values[nz]).ravel().tolist())
    if mass <= 0:
        raise DegenerateWeightError(f"weight has zero mass on {box}")
    num = math.fsum((w[nz] * sigma.values[nz] * f.values[nz]).ravel().tolist())
    return num / mass


def log_average(w: _CellFunction, box: BoxLike) -> float:
    """Average of ``log(1/w)`` over the box."""
    box = as_box(box)
    ov = _overlap_weights(w, box)
    nz = ov > 0
    vals = w.values[nz]
    if np.any(vals <= 0):
        raise DegenerateWeightError(f"weight vanishes on {box}; log average undefined")
    s = math.fsum((ov[nz] * -np.log(vals)).ravel().tolist())
    return s / float(box.volume)


def _pair(f, w):
    if w is None:
        return f.values, None, f.cell_volume
    if f.refine == w.refine:
        _same_mesh(f, w)
        return f.values, w.values, f.cell_volume
    _same_mesh(f, w)
    return on_lattice(f), on_lattice(w), float(f.mesh.lattice_h ** f.mesh.n)


def lp_norm(f: _CellFunction, w: _CellFunction | None, p: float) -> float:
    """``||f||_{L^p(w)}`` over the window (``w=None`` is Lebesgue measure)."""
    if p <= 0:
        raise ConfigError("p must be positive")
    fv, wv, vol = _pair(f, w)
    terms = np.abs(fv) ** p * vol
    if wv is not None:
        terms = terms * wv
    return math.fsum(terms.ravel().tolist()) ** (1.0 / p)


def _levels(f: _CellFunction, w: _CellFunction | None):
    """Distinct positive levels (descending) and the w-mass of ``{|f| >= level}``."""
    fv, wv, vol = _pair(f, w)
    fv = np.abs(fv).ravel()
    mass = np.full(fv.shape, vol) if wv is None else wv.ravel() * vol
    pos = fv > 0
    if not np.any(pos):
        return np.zeros(0), np.zeros(0)
    levels, inv = np.unique(fv[pos], return_inverse=True)
    per_level = np.bincount(inv, weights=mass[pos], minlength=levels.size)
    levels = levels[::-1]
    cum = np.cumsum(per_level[::-1])
    return levels, cum


def lorentz_norm(f: _CellFunction, w: _CellFunction | None, p: float, q: float) -> float:
    """``[int_0^inf (lambda w(|f| > lambda)^{1/p})^q dlambda/lambda]^{1/q}``, exact for step f."""
    if p <= 0 or q <= 0:
        raise ConfigError("Lorentz exponents must be positive")
    levels, mass = _levels(f, w)
    if levels.size == 0:
        return 0.0
    nxt = np.append(levels[1:], 0.0)
    terms = mass ** (q / p) * (levels ** q - nxt ** q) / q
    return math.fsum(terms.tolist()) ** (1.0 / q)


def weak_norm(f: _CellFunction, w: _CellFunction | None, r: float) -> float:
    """``sup_lambda lambda w(|f| > lambda)^{1/r}``, exact for step f."""
    levels, mass = _levels(f, w)
    if levels.size == 0:
        return 0.0
    return float(np.max(levels * mass ** (1.0 / r)))


def dual(x: float) -> float:
    """Hoelder dual ``x / (x - 1)``; ``inf`` at 1 and negative below 1."""
    if x == 1:
        return math.inf
    if math.isinf(x):
        return 1.0
    return x / (x - 1.0)


def _pos_float(x) -> float:
    return float(Fraction(x)) if isinstance(x, str) else float(x)


@dataclass(frozen=True)
class ExponentTuple:
    """Lebesgue exponents of a multilinear problem.

    ``ps`` holds ``p_1..p_m``; ``1/p = sum 1/p_i``.  In the testing setting
    the third exponent is read off ``q`` through ``q = p_3'``.
    """

    n: int
    alpha: float
    ps: tuple[float, ...]
    q: float

    def __post_init__(self):
        ps = tuple(_pos_float(x) for x in self.ps)
        object.__setattr__(self, "ps", ps)
        object.__setattr__(self, "alpha", _pos_float(self.alpha))
        object.__setattr__(self, "q", _pos_float(self.q))
        if len(ps) < 1:
            raise ExponentError("need at least one exponent p_i")
        if not 0 <= self.alpha < self.m * self.n:
            raise ExponentError(f"alpha must lie in [0, {self.m * self.n}), got {self.alpha}")
        if any(not (1 < x < math.inf) for x in ps):
            raise ExponentError(f"each p_i must lie in (1, inf), got {ps}")
        if not 0 < self.q < math.inf:
            raise ExponentError("q must lie in (0, inf)")
        if self.p > self.q * (1 + 1e-12):
            raise ExponentError(f"need p <= q, got p={self.p}, q={self.q}")

    @classmethod
    def bilinear(cls, n: int, alpha, p1, p2, q) -> "ExponentTuple":
        return cls(n, alpha, (p1, p2), q)

    @property
    def m(self) -> int:
        return len(self.ps)

    @property
    def p(self) -> float:
        return 1.0 / sum(1.0 / x for x in self.ps)

    @property
    def p1(self) -> float:
        return self.ps[0]

    @property
    def p2(self) -> float:
        return self.ps[1]

    @property
    def q_dual(self) -> float:
        return dual(self.q)

    def p_dual(self, i: int) -> float:
        return dual(self.p_(i))

    def p_(self, i: int) -> float:
        """``p_i`` for i = 1..m; ``p_{m+1}`` is ``q'``."""
        if 1 <= i <= self.m:
            return self.ps[i - 1]
        if i == self.m + 1:
            if self.q <= 1:
                raise ExponentError("p_3 = q' needs q > 1")
            return dual(self.q)
        raise ExponentError(f"no exponent with index {i}")

    def p_pair(self, i: int, j: int) -> float:
        """``p_ij`` with ``1/p_ij = 1/p_i + 1/p_j``."""
        return 1.0 / (1.0 / self.p_(i) + 1.0 / self.p_(j))

    def check_testing(self) -> None:
        """Domain of the three-weight testing setting."""
        if self.m != 2:
            raise ExponentError("the testing setting is bilinear")
        if self.q <= 1:
            raise ExponentError("the testing setting needs q = p_3' > 1")
        for i, j in ((1, 2), (1, 3), (2, 3)):
            if 1.0 / self.p_(i) + 1.0 / self.p_(j) < 1 - 1e-12:
                raise ExponentError(f"need 1/p_{i} + 1/p_{j} >= 1")

    def as_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha, "ps": list(self.ps), "q": self.q, "p": self.p}


def _write_cells(path, mesh: Mesh, values: np.ndarray, tag: str | None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    if tag is not None:
        wr.writerow(["tag", tag])
    wr.writerow(["n", "L", "J"])
    wr.writerow([mesh.n, mesh.L, mesh.J])
    wr.writerow(["cell_index", "value"])
    for i, v in enumerate(np.asarray(values).ravel().tolist()):
        wr.writerow([i, repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        from .reporting import atomic_write

        atomic_write(Path(path), text)
    return text


def _read_cells(source, lattice: bool = False):
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    elif isinstance(source, str) and "\n" in source:
        text = source
    elif hasattr(source, "read"):
        text = source.read()
    else:
        raise ConfigError(f"cannot read cells from {source!r}")
    rows = list(csv.reader(io.StringIO(text)))
    tag = None
    if rows and rows[0] and rows[0][0] == "tag":
        tag = rows[0][1]
        rows = rows[1:]
    try:
        if rows[0] != ["n", "L", "J"] or rows[2] != ["cell_index", "value"]:
            raise ConfigError("malformed cell CSV header")
        n, L, J = (int(x) for x in rows[1])
        mesh = Mesh(n, L, J)
        size = mesh.lattice_size if (lattice or tag is not None) else mesh.size
        values = np.zeros(size ** n)
        seen = np.zeros(size ** n, dtype=bool)
        for r in rows[3:]:
            idx = int(r[0])
            values[idx] = float(r[1])
            seen[idx] = True
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed cell CSV: {exc}") from exc
    if not seen.all():
        raise ConfigError("cell CSV does not list every cell")
    return mesh, values.reshape((size,) * n), tag
