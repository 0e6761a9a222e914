"""Multilinear fractional maximal and integral operators on a step-function mesh.

Every operator returns an :class:`~entroweight.measure.OperatorField` on the
refined lattice.  The continuum suprema range over all lattice-aligned cubes
in the window, which include every shifted dyadic cube with ``k <= J``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, DegenerateWeightError, ExponentError
from .geometry import GridShift, RationalBox, Window
from .lattice import CubeTable, subcube_maximal
from .measure import (
    ExponentTuple,
    OperatorField,
    StepFunction,
    _axis_overlaps,
    as_box,
    on_lattice,
)


def _alpha(exps) -> float:
    return exps.alpha if isinstance(exps, ExponentTuple) else float(exps)


def _mesh_of(fs: Sequence[StepFunction]):
    mesh = fs[0].mesh
    for f in fs[1:]:
        if f.mesh != mesh:
            raise ConfigError(f"mesh mismatch: {f.mesh} vs {mesh}")
    return mesh


def _check_alpha(alpha: float, m: int, n: int):
    if not 0 <= alpha < m * n:
        raise ExponentError(f"alpha must lie in [0, {m * n}), got {alpha}")


def hl_maximal(w: StepFunction, restrict: RationalBox | None = None) -> OperatorField:
    """Uncentered maximal function of ``1_Q w`` over lattice cubes in the window."""
    mesh = w.mesh
    g = on_lattice(w)
    if restrict is not None:
        box = as_box(restrict)
        lh = float(mesh.lattice_h)
        frac = [_axis_overlaps(mesh, lo, hi, 3) / lh for lo, hi in box.intervals]
        mask = frac[0] if mesh.n == 1 else np.multiply.outer(frac[0], frac[1])
        g = g * mask
    field, _ = subcube_maximal([g[None]], -1.0, float(mesh.lattice_h))
    return OperatorField(mesh, field[0], "hl_maximal")


def frac_maximal_oracle(f1: StepFunction, f2: StepFunction, exps) -> OperatorField:
    """``sup_Q |Q|^{alpha/n} <f1>_Q <f2>_Q`` over every lattice cube holding the point."""
    return multi_maximal_oracle((f1, f2), _alpha(exps))


def multi_maximal_oracle(fs: Sequence[StepFunction], alpha: float) -> OperatorField:
    mesh = _mesh_of(fs)
    _check_alpha(alpha, len(fs), mesh.n)
    gs = [on_lattice(f)[None] for f in fs]
    field, _ = subcube_maximal(gs, alpha / mesh.n - len(fs), float(mesh.lattice_h))
    return OperatorField(mesh, field[0], "frac_maximal_oracle")


def cube_values(table: CubeTable, fs: Sequence[StepFunction], alpha: float) -> np.ndarray:
    """``|Q|^{alpha/n} prod <f_i>_Q`` for every cube of the table."""
    n = table.mesh.n
    out = table.volumes ** (alpha / n - len(fs))
    for f in fs:
        out = out * table.integrals(on_lattice(f))
    return out


def frac_maximal_dyadic(f1: StepFunction, f2: StepFunction, exps, grid: GridShift,
                        window: Window | None = None) -> OperatorField:
    """Dyadic maximal over the cubes of a single grid inside ``window``."""
    return multi_maximal_dyadic((f1, f2), _alpha(exps), grid, window)


def multi_maximal_dyadic(fs: Sequence[StepFunction], alpha: float, grid: GridShift,
                         window: Window | None = None,
                         table: CubeTable | None = None) -> OperatorField:
    mesh = _mesh_of(fs)
    _check_alpha(alpha, len(fs), mesh.n)
    table = table or CubeTable(mesh, grid, window)
    return OperatorField(mesh, table.field_max(cube_values(table, fs, alpha)), "frac_maximal_dyadic")


def weighted_dyadic_maximal(f1: StepFunction, f2: StepFunction, sigma1: StepFunction,
                            sigma2: StepFunction, grid: GridShift,
                            window: Window | None = None) -> OperatorField:
    """``sup_Q prod_i (int_Q f_i sigma_i / sigma_i(Q)) 1_Q``."""
    mesh = _mesh_of((f1, f2, sigma1, sigma2))
    table = CubeTable(mesh, grid, window)
    vals = np.ones(len(table))
    for f, s in ((f1, sigma1), (f2, sigma2)):
        sl = on_lattice(s)
        mass = table.integrals(sl)
        if np.any(mass <= 0):
            bad = table.cubes[int(np.argmin(mass))]
            raise DegenerateWeightError(f"weight has zero mass on {bad}")
        vals = vals * table.integrals(on_lattice(f) * sl) / mass
    return OperatorField(mesh, table.field_max(vals), "weighted_dyadic_maximal")


def frac_integral_dyadic(f1: StepFunction, f2: StepFunction, exps, grid: GridShift,
                         window: Window | None = None) -> OperatorField:
    """Truncated ``sum_Q |Q|^{alpha/n} <f1>_Q <f2>_Q 1_Q`` over the window scales."""
    return multi_integral_dyadic((f1, f2), _alpha(exps), grid, window)


def multi_integral_dyadic(fs: Sequence[StepFunction], alpha: float, grid: GridShift,
                          window: Window | None = None,
                          table: CubeTable | None = None) -> OperatorField:
    mesh = _mesh_of(fs)
    if alpha <= 0:
        raise ExponentError("the dyadic fractional integral needs alpha > 0")
    _check_alpha(alpha, len(fs), mesh.n)
    table = table or CubeTable(mesh, grid, window)
    return OperatorField(mesh, table.field_sum(cube_values(table, fs, alpha)), "frac_integral_dyadic")


def _singular_kernel(N: int, h: float, alpha: float) -> np.ndarray:
    j = np.arange(-(N - 1), N, dtype=np.float64)
    r2 = j[:, None] ** 2 + j[None, :] ** 2
    r2[N - 1, N - 1] = 1.0
    K = (np.sqrt(r2) * h) ** (alpha - 2.0)
    K[N - 1, N - 1] = 0.0
    return K


def frac_integral_quadrature(f1: StepFunction, f2: StepFunction, exps, points=None):
    """Bilinear fractional integral in one dimension by a midpoint rule.

    ``y``-nodes sit at multiples of ``h = 2^-J``.  The node cell at the
    singularity is split 3 x 3 and its central sub-cell dropped.  Without
    ``points`` the result is an OperatorField at lattice centers; otherwise
    an array of values at the given coordinates.
    """
    alpha = _alpha(exps)
    mesh = _mesh_of((f1, f2))
    if mesh.n != 1:
        raise ConfigError("the quadrature integral is implemented for n = 1 only")
    if alpha == 0:
        raise ExponentError("alpha = 0 makes the kernel non-integrable at infinity")
    if not 0 < alpha < 2:
        raise ExponentError(f"alpha must lie in (0, 2), got {alpha}")
    N = mesh.size
    h = float(mesh.h)
    a = f1.values
    b = f2.values
    # G[i1, c] = sum_j2 K[j1, j2] f2[c - j2]; row i1 holds offset j1 = i1 - (N - 1)
    K = _singular_kernel(N, h, alpha)
    G = fftconvolve(K, b[None, :], axes=1)[:, N - 1: 2 * N - 1]
    np.maximum(G, 0.0, out=G)
    i1 = np.arange(2 * N - 1)
    idx = np.arange(N)[:, None] + (N - 1) - i1[None, :]
    ok = (idx >= 0) & (idx < N)
    A = np.where(ok, a[np.clip(idx, 0, N - 1)], 0.0)
    main = h * h * np.einsum("cj,jc->c", A, G)

    left = -(2.0 ** mesh.L)
    if points is None:
        xs = mesh.centers(lattice=True)
    else:
        xs = np.atleast_1d(np.asarray(points, dtype=np.float64))
        if np.any((xs < left) | (xs >= -left)):
            raise ConfigError("quadrature points must lie in the window")

    def at(v, x):
        c = np.floor((x - left) / h).astype(np.int64)
        inside = (c >= 0) & (c < N)
        return np.where(inside, v[np.clip(c, 0, N - 1)], 0.0)

    sub = h / 3.0
    sing = np.zeros_like(xs)
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            if da == 0 and db == 0:
                continue
            r = math.hypot(da, db) * sub
            sing += sub * sub * r ** (alpha - 2.0) * at(a, xs - da * sub) * at(b, xs - db * sub)
    cell = np.floor((xs - left) / h).astype(np.int64)
    vals = main[cell] + sing
    if points is None:
        return OperatorField(mesh, vals, "frac_integral_quadrature")
    return vals


def sparse_apply(S, f1: StepFunction, f2: StepFunction, exps) -> OperatorField:
    """``sum_{Q in S} |Q|^{alpha/n} <f1>_Q <f2>_Q 1_{E(Q)}``."""
    return multi_sparse_apply(S, (f1, f2), _alpha(exps))


def multi_sparse_apply(S, fs: Sequence[StepFunction], alpha: float) -> OperatorField:
    mesh = S.mesh
    if _mesh_of(fs) != mesh:
        raise ConfigError("sparse family and inputs live on different meshes")
    out = np.zeros(mesh.lattice_shape)
    flat = out.reshape(-1)
    lats = [on_lattice(f) for f in fs]
    vol_cell = float(mesh.lattice_h ** mesh.n)
    for cube, E in zip(S.cubes, S.exceptional):
        if E.size == 0:
            continue
        sl = S.slices(cube)
        vol = float(cube.side ** mesh.n)
        v = vol ** (alpha / mesh.n)
        for g in lats:
            v *= float(g[sl].sum()) * vol_cell / vol
        flat[E] += v
    return OperatorField(mesh, out, "sparse")
