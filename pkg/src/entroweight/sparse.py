"""Sparse families of dyadic cubes: stopping-time construction and checks.

A family is sparse when its cubes carry pairwise disjoint sets ``E(Q)`` with
``|Q| <= 2 |E(Q)|``.  The sets are stored as explicit lattice-cell indices so
that disjointness is checked exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ConstructionError
from .geometry import DyadicCube, GridShift, RationalBox, cube_box
from .lattice import CubeTable
from .measure import Mesh, OperatorField, StepFunction
from .operators import (
    _alpha,
    _mesh_of,
    cube_values,
    multi_integral_dyadic,
    multi_maximal_dyadic,
    multi_sparse_apply,
)

MAX_RETRIES = 5


@dataclass(frozen=True, eq=False)
class SparseFamily:
    mesh: Mesh
    grid: GridShift
    cubes: tuple[DyadicCube, ...]
    exceptional: tuple[np.ndarray, ...]
    a: float | None = None
    k_min: int | None = None
    retries: int = 0

    def __post_init__(self):
        if len(self.cubes) != len(self.exceptional):
            raise ConfigError("one exceptional set per cube is required")
        if len(set(self.cubes)) != len(self.cubes):
            raise ConfigError("sparse family lists a cube twice")
        for c in self.cubes:
            if c.shift != self.grid:
                raise ConfigError(f"{c} is not a cube of {self.grid}")
        ex = tuple(np.unique(np.asarray(E, dtype=np.int64)) for E in self.exceptional)
        object.__setattr__(self, "exceptional", ex)

    def __len__(self) -> int:
        return len(self.cubes)

    def ranges(self, cube: DyadicCube) -> tuple[tuple[int, int], ...]:
        return self.mesh.lattice_range(cube_box(cube))

    def slices(self, cube: DyadicCube) -> tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in self.ranges(cube))

    def E(self, cube: DyadicCube) -> np.ndarray:
        return self.exceptional[self.cubes.index(cube)]

    @classmethod
    def from_cubes(cls, mesh: Mesh, grid: GridShift, cubes: Iterable[DyadicCube],
                   exceptional: Mapping[DyadicCube, Iterable[int]] | None = None,
                   **meta) -> "SparseFamily":
        """Family from a list of cubes.

        Without ``exceptional``, each ``E(Q)`` is ``Q`` minus the cubes of the
        family strictly inside it.
        """
        cubes = tuple(sorted(set(cubes), key=lambda c: (c.k, c.m)))
        if exceptional is None:
            ex = _removal_sets(mesh, cubes)
        else:
            ex = tuple(np.asarray(list(exceptional.get(c, ())), dtype=np.int64) for c in cubes)
        return cls(mesh, grid, cubes, ex, **meta)

    def to_csv(self, path=None, cells_path=None) -> tuple[str, str]:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "k", "m", "E_cells"])
        side = io.StringIO()
        sw = csv.writer(side, lineterminator="\n")
        sw.writerow(["cube", "cell_index"])
        for i, (c, E) in enumerate(zip(self.cubes, self.exceptional)):
            wr.writerow([c.shift.label().replace(",", ";"), c.k,
                         ";".join(str(x) for x in c.m), int(E.size)])
            for e in E.tolist():
                sw.writerow([i, e])
        text, cells = buf.getvalue(), side.getvalue()
        if path is not None:
            from .reporting import atomic_write

            atomic_write(Path(path), text)
            atomic_write(Path(cells_path or _sidecar(path)), cells)
        return text, cells


def _sidecar(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + "_cells.csv")


def _removal_sets(mesh: Mesh, cubes: Sequence[DyadicCube]) -> tuple[np.ndarray, ...]:
    owner = np.full(mesh.lattice_shape, -1, dtype=np.int64)
    for i, c in enumerate(cubes):  # coarse to fine, so finer cubes overwrite
        owner[tuple(slice(a, b) for a, b in mesh.lattice_range(cube_box(c)))] = i
    return _split_owner(owner.reshape(-1), len(cubes))


def _split_owner(owner: np.ndarray, count: int) -> tuple[np.ndarray, ...]:
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(count + 1))
    return tuple(order[bounds[i]:bounds[i + 1]].astype(np.int64) for i in range(count))


def _level_below(v: np.ndarray, a: float) -> np.ndarray:
    """Largest integer k with ``a^k < v`` (v > 0)."""
    k = np.floor(np.log(v) / math.log(a)).astype(np.int64)
    for _ in range(3):
        k = np.where(np.power(a, k.astype(float)) >= v, k - 1, k)
        k = np.where(np.power(a, (k + 1).astype(float)) < v, k + 1, k)
    return k


def select_levels(table: CubeTable, V: np.ndarray, A: np.ndarray, a: float) -> np.ndarray:
    """Cubes that are maximal in ``{V > a^k}`` for some level ``k``.

    ``A`` holds the largest value over the strict ancestors of each cube.
    Such a level exists iff the largest ``k`` with ``a^k < V`` has ``a^k >= A``.
    """
    pos = V > 0
    sel = np.zeros(V.size, dtype=bool)
    if not np.any(pos):
        return sel
    k = _level_below(V[pos], a)
    sel[pos] = np.power(a, k.astype(float)) >= A[pos]
    return sel


def ancestor_max(table: CubeTable, V: np.ndarray) -> np.ndarray:
    par = table.parent_index
    A = np.zeros(V.size)
    for i in range(V.size):  # parents precede children
        p = par[i]
        if p >= 0:
            A[i] = max(V[p], A[p])
    return A


def _family_from_selection(table: CubeTable, sel: np.ndarray, **meta) -> SparseFamily:
    mesh = table.mesh
    owner = np.full(mesh.lattice_shape, -1.0)
    ids = np.full(len(table), -1.0)
    chosen = np.nonzero(sel)[0]
    ids[chosen] = np.arange(chosen.size)
    for lay, a, b in zip(table.layouts, table.offsets[:-1], table.offsets[1:]):
        sp = lay.spread(ids[a:b] + 1.0)
        owner = np.where(sp > 0, sp - 1.0, owner)
    cubes = tuple(table.cubes[i] for i in chosen)
    ex = _split_owner(owner.reshape(-1).astype(np.int64), chosen.size)
    return SparseFamily(mesh, table.grid, cubes, ex, **meta)


def _build(table: CubeTable, V: np.ndarray, A: np.ndarray, a: float, max_retries: int,
           what: str) -> SparseFamily:
    pos = V > 0
    if not np.any(pos):
        return SparseFamily(table.mesh, table.grid, (), (), a=a)
    for attempt in range(max_retries + 1):
        k_min = int(_level_below(np.array([V[pos].min()]), a)[0])
        S = _family_from_selection(table, select_levels(table, V, A, a),
                                   a=a, k_min=k_min, retries=attempt)
        rep = verify_sparse(S)
        if rep.passed:
            return S
        a *= 2.0
    raise ConstructionError(
        f"{what}: sparsity still fails after {max_retries} retries (last a={a / 2}); "
        f"{rep.summary()}"
    )


def build_sparse(f1: StepFunction, f2: StepFunction, exps, grid: GridShift,
                 a: float | None = None, max_retries: int = MAX_RETRIES) -> SparseFamily:
    """Stopping-time family for the dyadic fractional maximal function.

    Levels are ``a^k``; at each level the maximal cubes with
    ``|Q|^{alpha/n} <f1>_Q <f2>_Q > a^k`` are selected.  When the result is
    not sparse, ``a`` is doubled and the construction rerun.
    """
    return multi_build_sparse((f1, f2), _alpha(exps), grid, a, max_retries)


def multi_build_sparse(fs: Sequence[StepFunction], alpha: float, grid: GridShift,
                       a: float | None = None, max_retries: int = MAX_RETRIES,
                       table: CubeTable | None = None) -> SparseFamily:
    mesh = _mesh_of(fs)
    m = len(fs)
    a = float(2 ** (m * mesh.n + 1)) if a is None else float(a)
    if not a > 2 ** (m * mesh.n):
        raise ConfigError(f"selection ratio must exceed 2^(mn) = {2 ** (m * mesh.n)}")
    table = table or CubeTable(mesh, grid)
    V = cube_values(table, fs, alpha)
    return _build(table, V, ancestor_max(table, V), a, max_retries, "maximal operator")


def _cube_min(table: CubeTable, g: np.ndarray) -> np.ndarray:
    parts = []
    for lay in table.layouts:
        seg = lay.segments(g)
        parts.append(seg.reshape(seg.shape[0], -1).min(axis=1))
    return np.concatenate(parts)


def build_sparse_integral(fs: Sequence[StepFunction], alpha: float, grid: GridShift,
                          a: float | None = None, max_retries: int = MAX_RETRIES,
                          table: CubeTable | None = None,
                          field: OperatorField | None = None) -> SparseFamily:
    """Family from the level sets ``{I > a^k}`` of the dyadic fractional integral.

    At each level the maximal grid cubes contained in the level set are taken.
    """
    mesh = _mesh_of(fs)
    m = len(fs)
    a = float(2 ** (m * mesh.n + 1)) if a is None else float(a)
    table = table or CubeTable(mesh, grid)
    if field is None:
        field = multi_integral_dyadic(fs, alpha, grid, table=table)
    mu = _cube_min(table, field.values)
    par = table.parent_index
    A = np.where(par >= 0, mu[np.maximum(par, 0)], 0.0)
    return _build(table, mu, A, a, max_retries, "integral operator")


@dataclass
class SparseReport:
    passed: bool
    disjoint: bool
    per_cube: list[dict] = field(default_factory=list)

    def failures(self) -> list[dict]:
        return [r for r in self.per_cube if not r["ok"]]

    def summary(self) -> str:
        bad = self.failures()
        s = f"{len(self.per_cube)} cubes, disjoint={self.disjoint}, {len(bad)} failing"
        if bad:
            r = bad[0]
            s += f"; first: {r['cube']} |Q|={r['cells']} |E|={r['E_cells']}"
        return s


def verify_sparse(S: SparseFamily) -> SparseReport:
    """Exact cell-count check of the sparsity conditions."""
    mesh = S.mesh
    n = mesh.n
    total = sum(int(E.size) for E in S.exceptional)
    allE = np.concatenate(S.exceptional) if S.exceptional else np.zeros(0, dtype=np.int64)
    disjoint = np.unique(allE).size == total
    ranges = [S.ranges(c) for c in S.cubes]
    shape = mesh.lattice_shape
    rows = []
    for i, (c, E) in enumerate(zip(S.cubes, S.exceptional)):
        rg = ranges[i]
        cells = 1
        for a, b in rg:
            cells *= b - a
        coords = np.unravel_index(E, shape) if E.size else [np.zeros(0, dtype=np.int64)] * n
        subset = all(bool(np.all((x >= a) & (x < b))) for x, (a, b) in zip(coords, rg))
        mask = np.zeros(tuple(b - a for a, b in rg), dtype=bool)
        for j, r2 in enumerate(ranges):
            if j == i:
                continue
            if all(a <= c2 and d2 <= b for (a, b), (c2, d2) in zip(rg, r2)):
                mask[tuple(slice(c2 - a, d2 - a) for (a, _), (c2, d2) in zip(rg, r2))] = True
        union = int(mask.sum())
        measure_ok = cells <= 2 * int(E.size)
        child_ok = 2 * union <= cells
        rows.append({
            "cube": c, "cells": cells, "E_cells": int(E.size), "child_union_cells": union,
            "measure_ok": measure_ok, "subset_ok": subset, "child_ok": child_ok,
            "ok": measure_ok and subset and child_ok,
        })
    passed = disjoint and all(r["ok"] for r in rows)
    return SparseReport(passed, disjoint, rows)


@dataclass
class DominationReport:
    a: float
    family_size: int
    k_min: int | None
    ratio_min: float
    ratio_max: float
    active_ratio_max: float
    dominated: bool               # T <= M everywhere
    bounded: bool                 # M <= a T on the active set
    integral: dict | None = None

    def as_dict(self) -> dict:
        return {
            "a": self.a, "family_size": self.family_size, "k_min": self.k_min,
            "ratio_min": self.ratio_min, "ratio_max": self.ratio_max,
            "active_ratio_max": self.active_ratio_max, "dominated": self.dominated,
            "bounded": self.bounded, "integral": self.integral,
        }


def _ratio_range(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    pos = den > 0
    if not np.any(pos):
        return math.nan, math.nan
    r = num[pos] / den[pos]
    return float(r.min()), float(r.max())


def domination_report(f1: StepFunction, f2: StepFunction, exps, grid: GridShift,
                      a: float | None = None, rel_tol: float = 1e-9) -> DominationReport:
    """Pointwise comparison of the dyadic operators with their sparse models."""
    fs = (f1, f2)
    alpha = _alpha(exps)
    mesh = _mesh_of(fs)
    table = CubeTable(mesh, grid)
    S = multi_build_sparse(fs, alpha, grid, a, table=table)
    M = multi_maximal_dyadic(fs, alpha, grid, table=table).values
    T = multi_sparse_apply(S, fs, alpha).values
    lo, hi = _ratio_range(M, T)
    dominated = bool(np.all(T <= M * (1 + rel_tol)))
    if S.k_min is None:
        active = np.zeros(M.shape, dtype=bool)
    else:
        active = M > S.a ** S.k_min
    act_max = math.nan
    if np.any(active):
        Ta, Ma = T[active], M[active]
        act_max = float(np.max(np.where(Ta > 0, Ma / np.where(Ta > 0, Ta, 1.0), math.inf)))
    bounded = bool(np.all(M[active] <= S.a * T[active] * (1 + rel_tol)))
    integral = None
    if alpha > 0:
        I = multi_integral_dyadic(fs, alpha, grid, table=table)
        try:
            S2 = build_sparse_integral(fs, alpha, grid, a, table=table, field=I)
            T2 = multi_sparse_apply(S2, fs, alpha).values
            ilo, ihi = _ratio_range(I.values, T2)
            integral = {"a": S2.a, "family_size": len(S2), "ratio_min": ilo, "ratio_max": ihi}
        except ConstructionError as exc:
            integral = {"error": str(exc)}
    return DominationReport(S.a, len(S), S.k_min, lo, hi, act_max, dominated, bounded, integral)
