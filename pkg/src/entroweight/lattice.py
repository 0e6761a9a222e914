"""Integer lattice bookkeeping shared by operators and constants.

Positions are measured in lattice units ``h = 2^-J / 3``.  A scale-``k``
cube of the grid with shift ``t = tau/3`` occupies, along each axis,

    [S m + off, S (m + 1) + off),   S = 3 * 2^(J-k),  off = (-1)^k tau 2^(J-k),

which is exact integer arithmetic whenever ``k <= J``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.ndimage import maximum_filter, maximum_filter1d

from .errors import ConfigError
from .geometry import DyadicCube, GridShift, Window
from .measure import Mesh


@dataclass(frozen=True)
class AxisLayout:
    side: int                 # S, cube side in lattice units
    labels: np.ndarray        # per lattice cell: local cube label along this axis
    m: np.ndarray             # dyadic index of each local label
    lo: np.ndarray            # lattice index of each cube's lower edge (may leave the mesh)
    valid: np.ndarray         # local labels of cubes inside the grid window


def axis_layout(mesh: Mesh, tau: int, k: int, window: Window) -> AxisLayout:
    if k > mesh.J:
        raise ConfigError(f"scale {k} is finer than the lattice allows (J={mesh.J})")
    S = 3 * 2 ** (mesh.J - k)
    off = (1 if k % 2 == 0 else -1) * tau * 2 ** (mesh.J - k)
    origin = mesh.origin_offset
    u = np.arange(mesh.lattice_size, dtype=np.int64) - origin
    mi = (u - off) // S
    m0 = int(mi[0])
    K = int(mi[-1]) - m0 + 1
    m = np.arange(m0, m0 + K, dtype=np.int64)
    lo_u = S * m + off
    edge = 3 * 2 ** (mesh.J + window.L)
    valid = np.nonzero((lo_u >= -edge) & (lo_u + S <= edge))[0]
    return AxisLayout(S, (mi - m0).astype(np.intp), m, lo_u + origin, valid)


@dataclass(frozen=True)
class ScaleLayout:
    grid: GridShift
    k: int
    axes: tuple[AxisLayout, ...]

    @property
    def side(self) -> int:
        return self.axes[0].side

    @property
    def count(self) -> int:
        c = 1
        for a in self.axes:
            c *= a.valid.size
        return c

    def cubes(self) -> list[DyadicCube]:
        if len(self.axes) == 1:
            return [DyadicCube(self.grid, self.k, (int(v),)) for v in self.axes[0].m[self.axes[0].valid]]
        a0, a1 = self.axes
        return [
            DyadicCube(self.grid, self.k, (int(x), int(y)))
            for x in a0.m[a0.valid]
            for y in a1.m[a1.valid]
        ]

    def sums(self, g: np.ndarray) -> np.ndarray:
        """Lattice-cell sums of ``g`` over each cube (cells outside the mesh count as zero)."""
        if len(self.axes) == 1:
            a = self.axes[0]
            tot = np.bincount(a.labels, weights=g, minlength=a.m.size)
            return tot[a.valid]
        a0, a1 = self.axes
        K1 = a1.m.size
        flat = (a0.labels[:, None] * K1 + a1.labels[None, :]).ravel()
        tot = np.bincount(flat, weights=g.ravel(), minlength=a0.m.size * K1)
        tot = tot.reshape(a0.m.size, K1)
        return tot[np.ix_(a0.valid, a1.valid)].ravel()

    def spread(self, vals: np.ndarray) -> np.ndarray:
        """Lattice field taking each cube's value on its cells; 0 off the valid cubes."""
        if len(self.axes) == 1:
            a = self.axes[0]
            full = np.zeros(a.m.size)
            full[a.valid] = vals
            return full[a.labels]
        a0, a1 = self.axes
        full = np.zeros((a0.m.size, a1.m.size))
        full[np.ix_(a0.valid, a1.valid)] = vals.reshape(a0.valid.size, a1.valid.size)
        return full[np.ix_(a0.labels, a1.labels)]

    def covered(self) -> np.ndarray:
        """Boolean lattice mask of cells lying in some valid cube."""
        return self.spread(np.ones(self.count)) > 0

    def inside_mesh(self, mesh: Mesh) -> np.ndarray:
        """Mask over cubes: cube lies entirely within the mesh lattice."""
        masks = []
        for a in self.axes:
            lo = a.lo[a.valid]
            masks.append((lo >= 0) & (lo + a.side <= mesh.lattice_size))
        if len(masks) == 1:
            return masks[0]
        return np.logical_and.outer(masks[0], masks[1]).ravel()

    def segments(self, g: np.ndarray) -> np.ndarray:
        """Stack the lattice values of every cube: shape ``(count, S[, S])``.

        Every valid cube must lie within the mesh lattice.
        """
        S = self.side
        ar = np.arange(S)
        if len(self.axes) == 1:
            a = self.axes[0]
            lo = a.lo[a.valid]
            return g[lo[:, None] + ar[None, :]]
        a0, a1 = self.axes
        lo0 = a0.lo[a0.valid]
        lo1 = a1.lo[a1.valid]
        rows = (lo0[:, None] + ar[None, :])[:, None, :, None]
        cols = (lo1[:, None] + ar[None, :])[None, :, None, :]
        out = g[rows, cols]
        return out.reshape(lo0.size * lo1.size, S, S)

    def lattice_starts(self) -> np.ndarray:
        """Per cube, the lattice index of its lower corner: shape ``(count, n)``."""
        if len(self.axes) == 1:
            a = self.axes[0]
            return a.lo[a.valid][:, None]
        a0, a1 = self.axes
        x, y = np.meshgrid(a0.lo[a0.valid], a1.lo[a1.valid], indexing="ij")
        return np.stack([x.ravel(), y.ravel()], axis=1)


class CubeTable:
    """All cubes of one grid meeting the mesh, inside ``window``, scales ``k_min..k_max``.

    Cubes are ordered by scale (coarse first), then lexicographically by index.
    """

    def __init__(self, mesh: Mesh, grid: GridShift, window: Window | None = None,
                 scales: tuple[int, int] | None = None):
        if grid.n != mesh.n:
            raise ConfigError("grid and mesh dimensions differ")
        self.mesh = mesh
        self.grid = grid
        self.window = window or mesh.window
        if self.window.L < mesh.L:
            raise ConfigError("grid window must contain the mesh window")
        k_min, k_max = scales if scales is not None else (-self.window.L, mesh.J)
        if k_max > mesh.J:
            raise ConfigError("scales finer than 2^-J are not lattice aligned")
        self.scales = (k_min, k_max)
        self.layouts = [
            ScaleLayout(grid, k, tuple(axis_layout(mesh, tau, k, self.window) for tau in grid.tau))
            for k in range(k_min, k_max + 1)
        ]
        self.layouts = [lay for lay in self.layouts if lay.count > 0]
        self.offsets = np.cumsum([0] + [lay.count for lay in self.layouts])

    def __len__(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def cubes(self) -> list[DyadicCube]:
        out = []
        for lay in self.layouts:
            out.extend(lay.cubes())
        return out

    @cached_property
    def index(self) -> dict:
        return {c: i for i, c in enumerate(self.cubes)}

    @cached_property
    def scale_of(self) -> np.ndarray:
        return np.concatenate([np.full(lay.count, lay.k) for lay in self.layouts]).astype(int)

    @cached_property
    def volumes(self) -> np.ndarray:
        """Lebesgue measure of each cube (whole cube, even where it leaves the mesh)."""
        h = float(self.mesh.lattice_h)
        return np.concatenate(
            [np.full(lay.count, (lay.side * h) ** self.mesh.n) for lay in self.layouts]
        )

    @cached_property
    def inside_mesh(self) -> np.ndarray:
        return np.concatenate([lay.inside_mesh(self.mesh) for lay in self.layouts])

    def integrals(self, g: np.ndarray) -> np.ndarray:
        """``int_Q g`` for each cube, ``g`` a lattice array (zero outside the mesh)."""
        vol = float(self.mesh.lattice_h ** self.mesh.n)
        return np.concatenate([lay.sums(g) for lay in self.layouts]) * vol

    def field_max(self, vals: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mesh.lattice_shape)
        for lay, a, b in zip(self.layouts, self.offsets[:-1], self.offsets[1:]):
            np.maximum(out, lay.spread(vals[a:b]), out=out)
        return out

    def field_sum(self, vals: np.ndarray) -> np.ndarray:
        out = np.zeros(self.mesh.lattice_shape)
        for lay, a, b in zip(self.layouts, self.offsets[:-1], self.offsets[1:]):
            out += lay.spread(vals[a:b])
        return out

    @cached_property
    def parent_index(self) -> np.ndarray:
        """Index of each cube's parent in the table, -1 when the parent is absent."""
        out = np.full(len(self), -1, dtype=np.int64)
        prev = None
        for lay, a in zip(self.layouts, self.offsets[:-1]):
            if prev is not None and prev[0].k == lay.k - 1:
                player, pa = prev
                cells = lay.lattice_starts()
                # parent = the coarser cube holding this cube's first lattice cell
                label = self._label_at(player, cells)
                out[a:a + lay.count] = np.where(label >= 0, pa + label, -1)
            prev = (lay, a)
        return out

    @staticmethod
    def _label_at(lay: ScaleLayout, cells: np.ndarray) -> np.ndarray:
        """Position (within ``lay``) of the valid cube containing each lattice cell, else -1."""
        idx = np.zeros(cells.shape[0], dtype=np.int64)
        ok = np.ones(cells.shape[0], dtype=bool)
        stride = 1
        for ax in reversed(range(len(lay.axes))):
            a = lay.axes[ax]
            c = cells[:, ax]
            inside = (c >= 0) & (c < a.labels.size)
            lab = np.where(inside, a.labels[np.clip(c, 0, a.labels.size - 1)], -1)
            pos = np.full(a.m.size, -1, dtype=np.int64)
            pos[a.valid] = np.arange(a.valid.size)
            p = np.where(lab >= 0, pos[np.maximum(lab, 0)], -1)
            ok &= p >= 0
            idx += np.maximum(p, 0) * stride
            stride *= a.valid.size
        return np.where(ok, idx, -1)


def subcube_maximal(gs: list[np.ndarray], exponent: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force maximal function restricted to sub-cubes.

    ``gs`` are stacked lattice blocks of shape ``(C, S)`` or ``(C, S, S)``.
    For every block and every cell ``x`` returns

        max over lattice sub-cubes P of the block with x in P of |P|^exponent * prod_i int_P g_i

    together with the value of the whole block.  Window sums are grown one
    lattice step at a time from nonnegative terms (no prefix-sum cancellation).
    """
    g0 = gs[0]
    n = g0.ndim - 1
    C, S = g0.shape[0], g0.shape[1]
    cell = h ** n
    field = np.zeros(g0.shape)
    whole = np.zeros(C)
    if n == 1:
        W = [g.astype(np.float64, copy=True) for g in gs]
        for s in range(1, S + 1):
            if s > 1:
                W = [w[:, :-1] + g[:, s - 1:] for w, g in zip(W, gs)]
            val = ((s * h) ** n) ** exponent * np.prod([w * cell for w in W], axis=0)
            U = np.zeros((C, S))
            U[:, : S - s + 1] = val
            np.maximum(field, maximum_filter1d(U, size=s, axis=1, mode="constant", cval=0.0,
                                               origin=(s - 1) // 2), out=field)
        whole = val[:, 0]
        return field, whole
    if n != 2:
        raise ConfigError("only n = 1, 2 are supported")
    W = [g.astype(np.float64, copy=True) for g in gs]
    H = [g.astype(np.float64, copy=True) for g in gs]
    V = [g.astype(np.float64, copy=True) for g in gs]
    for s in range(1, S + 1):
        if s > 1:
            t = s - 1  # grow blocks from side t to side s
            V = [v[:, :-1, :] + g[:, t:, :] for v, g in zip(V, gs)]
            W = [w[:, :-1, :-1] + hh[:, t:, : S - t] + v[:, :, t:] for w, hh, v in zip(W, H, V)]
            H = [hh[:, :, :-1] + g[:, :, t:] for hh, g in zip(H, gs)]
        val = ((s * h) ** n) ** exponent * np.prod([w * cell for w in W], axis=0)
        U = np.zeros((C, S, S))
        U[:, : S - s + 1, : S - s + 1] = val
        o = (s - 1) // 2
        np.maximum(field, maximum_filter(U, size=(1, s, s), mode="constant", cval=0.0,
                                         origin=(0, o, o)), out=field)
    whole = val[:, 0, 0]
    return field, whole
