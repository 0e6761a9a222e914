"""Per-cube weight functionals and their suprema over a cube set.

Scalar functions (``a_inf_exp``, ``calA``, ``rho``, ``gamma_ijk``) evaluate one
cube.  :func:`global_constant` evaluates a whole cube set at once, scale by
scale, and returns a :class:`ConstantReport`.

``rho`` and ``gamma_ijk`` need a supremum over all cubes of the window.  When
the input is cut off to ``Q``, a competitor ``P`` can be replaced by a cube
inside ``Q`` that contains ``P n Q`` and is no larger than ``P``; that never
lowers the value, so only sub-cubes of ``Q`` are searched.
"""

from __future__ import annotations

import json
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateWeightError, ExponentError, IntegrabilityError
from .geometry import DyadicCube, GridShift, RationalBox, all_shifts, cube_box
from .lattice import CubeTable, ScaleLayout, subcube_maximal
from .measure import (
    ExponentTuple,
    StepFunction,
    as_box,
    average,
    dual,
    integrate,
    log_average,
)
from .parallel import pmap

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class EpsilonSpec:
    """Increasing function ``c t^s`` (power) or ``c (1 + log t)^s`` (log-power).

    Arguments below 1 are read as 1.
    """

    family: str = "log-power"
    s: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.family not in ("power", "log-power"):
            raise ConfigError(f"unknown epsilon family {self.family!r}")
        if not self.c > 0 or not self.s >= 0:
            raise ConfigError("epsilon needs c > 0 and s >= 0")

    @classmethod
    def power(cls, s: float, c: float = 1.0) -> "EpsilonSpec":
        return cls("power", float(s), float(c))

    @classmethod
    def log_power(cls, s: float, c: float = 1.0) -> "EpsilonSpec":
        return cls("log-power", float(s), float(c))

    def __call__(self, t):
        t = np.maximum(np.asarray(t, dtype=np.float64), 1.0)
        if self.family == "power":
            out = self.c * t ** self.s
        else:
            out = self.c * (1.0 + np.log(t)) ** self.s
        return float(out) if out.ndim == 0 else out

    def as_dict(self) -> dict:
        return {"family": self.family, "s": self.s, "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "EpsilonSpec":
        return cls(d.get("family", "log-power"), float(d.get("s", 0.0)), float(d.get("c", 1.0)))


def epsilon_check(eps: EpsilonSpec, r: float) -> bool:
    """Whether ``int_1^inf dt / (t eps(t)^r)`` is finite."""
    if not r > 0:
        raise ConfigError("epsilon_check needs r > 0")
    if eps.family == "power":
        return eps.s * r > 0
    return eps.s * r > 1


def require_integrable(eps: EpsilonSpec, r: float, what: str) -> None:
    if not epsilon_check(eps, r):
        raise IntegrabilityError(
            f"{what}: int dt/(t eps(t)^{r:g}) diverges for {eps.family} eps with s={eps.s:g}"
        )


# ---------------------------------------------------------------- per cube


def _mass(f: StepFunction, Q) -> float:
    m = integrate(f, Q)
    if not m > 0:
        raise DegenerateWeightError(f"weight has zero mass on {as_box(Q)}")
    return m


def a_inf_exp(w: StepFunction, Q) -> float:
    """``<w>_Q exp(<log 1/w>_Q)``."""
    _mass(w, Q)
    return average(w, Q) * math.exp(log_average(w, Q))


def calA(w: StepFunction, sigma1: StepFunction, sigma2: StepFunction, Q, exps: ExponentTuple) -> float:
    return _calA_multi(w, (sigma1, sigma2), Q, exps)


def _calA_multi(w, sigmas, Q, exps: ExponentTuple) -> float:
    box = as_box(Q)
    vol = float(box.volume)
    v = vol ** (1.0 / exps.q - 1.0 / exps.p + exps.alpha / exps.n) * average(w, box) ** (1.0 / exps.q)
    for i, s in enumerate(sigmas, start=1):
        v *= average(s, box) ** (1.0 / exps.p_dual(i))
    return v


def _block(f: StepFunction, Q) -> np.ndarray:
    box = as_box(Q)
    sl = tuple(slice(a, b) for a, b in f.mesh.lattice_range(box))
    if not box.is_cube:
        raise ConfigError(f"{box} is not a cube")
    return f.lattice()[sl]


def _rho_blocks(blocks: np.ndarray, h: float) -> np.ndarray:
    field_, whole = subcube_maximal([blocks], -1.0, h)
    if np.any(whole <= 0):
        raise DegenerateWeightError("weight has zero mass on a cube")
    cells = np.prod(blocks.shape[1:])
    excess = (field_ - whole.reshape((-1,) + (1,) * (blocks.ndim - 1))).reshape(blocks.shape[0], -1)
    # field >= whole cellwise, so the correction is a sum of nonnegative terms
    return 1.0 + excess.sum(axis=1) / (cells * whole)


def rho(w: StepFunction, Q) -> float:
    """``int_Q M(1_Q w) / w(Q)`` with the maximal function taken over lattice cubes."""
    return float(_rho_blocks(_block(w, Q)[None], float(w.mesh.lattice_h))[0])


def rho_eps(w: StepFunction, Q, eps: EpsilonSpec) -> float:
    r = rho(w, Q)
    return r * eps(r)


def _triple(triple) -> tuple[int, int, int]:
    t = tuple(int(x) for x in triple)
    if sorted(t) != [1, 2, 3]:
        raise ConfigError(f"triple must be a permutation of (1, 2, 3), got {triple}")
    return t


def _gamma_blocks(bi: np.ndarray, bj: np.ndarray, exps: ExponentTuple, i: int, j: int, k: int,
                  h: float) -> np.ndarray:
    n = bi.ndim - 1
    pij = exps.p_pair(i, j)
    r = exps.p_dual(k) / pij
    field_, _ = subcube_maximal([bi, bj], exps.alpha / n - 2.0, h)
    cell = h ** n
    num = (field_ ** r).reshape(bi.shape[0], -1).sum(axis=1) * cell
    den = ((bi ** (pij / exps.p_(i)) * bj ** (pij / exps.p_(j))).reshape(bi.shape[0], -1).sum(axis=1)
           * cell)
    if np.any(den <= 0):
        raise DegenerateWeightError("gamma denominator vanishes on a cube")
    return num / den ** r


def _check_pair(exps: ExponentTuple, i: int, j: int):
    if 1.0 / exps.p_(i) + 1.0 / exps.p_(j) < 1 - 1e-12:
        raise ExponentError(f"gamma needs 1/p_{i} + 1/p_{j} >= 1")


def gamma_ijk(sigmas: Sequence[StepFunction], Q, exps: ExponentTuple, triple=(1, 2, 3)) -> float:
    """``gamma_(i,j,k)(Q)``; ``sigmas`` holds sigma_1, sigma_2, sigma_3 (1-based)."""
    i, j, k = _triple(triple)
    _check_pair(exps, i, j)
    si, sj = sigmas[i - 1], sigmas[j - 1]
    h = float(si.mesh.lattice_h)
    return float(_gamma_blocks(_block(si, Q)[None], _block(sj, Q)[None], exps, i, j, k, h)[0])


# ---------------------------------------------------------------- cube sets


class CubeSet:
    """All cubes of the given grids (default: every shift) for one mesh, scale by scale."""

    def __init__(self, mesh, grids: Sequence[GridShift] | None = None,
                 scales: tuple[int, int] | None = None):
        self.mesh = mesh
        self.grids = tuple(grids) if grids is not None else tuple(all_shifts(mesh.n))
        self.tables = [CubeTable(mesh, g, None, scales) for g in self.grids]
        self.scales = self.tables[0].scales

    @property
    def key(self) -> tuple:
        return (self.mesh, tuple(g.tau for g in self.grids), self.scales)

    @property
    def cubes(self) -> list[DyadicCube]:
        out = []
        for t in self.tables:
            out.extend(t.cubes)
        return out

    def __len__(self) -> int:
        return sum(len(t) for t in self.tables)

    @property
    def layouts(self) -> list[ScaleLayout]:
        return [lay for t in self.tables for lay in t.layouts]

    @property
    def volumes(self) -> np.ndarray:
        return np.concatenate([t.volumes for t in self.tables])

    def integrals(self, g: np.ndarray) -> np.ndarray:
        return np.concatenate([t.integrals(g) for t in self.tables])

    def averages(self, f: StepFunction) -> np.ndarray:
        return self.integrals(f.lattice()) / self.volumes

    def per_layout(self, fn, threads: int | None = None) -> np.ndarray:
        return np.concatenate(pmap(fn, self.layouts, threads))


_RHO_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_RHO_CACHE_SIZE = 32
_RHO_LOCK = threading.Lock()


def rho_values(w: StepFunction, cs: CubeSet, threads: int | None = None) -> np.ndarray:
    key = (w.digest(), cs.key)
    with _RHO_LOCK:
        hit = _RHO_CACHE.get(key)
        if hit is not None:
            _RHO_CACHE.move_to_end(key)
            return hit
    g = w.lattice()
    h = float(w.mesh.lattice_h)
    vals = cs.per_layout(lambda lay: _rho_blocks(lay.segments(g), h), threads)
    vals.setflags(write=False)
    with _RHO_LOCK:
        _RHO_CACHE[key] = vals
        if len(_RHO_CACHE) > _RHO_CACHE_SIZE:
            _RHO_CACHE.popitem(last=False)
    return vals


def gamma_values(sigmas: Sequence[StepFunction], cs: CubeSet, exps: ExponentTuple, triple,
                 threads: int | None = None) -> np.ndarray:
    i, j, k = _triple(triple)
    _check_pair(exps, i, j)
    gi, gj = sigmas[i - 1].lattice(), sigmas[j - 1].lattice()
    h = float(cs.mesh.lattice_h)
    return cs.per_layout(
        lambda lay: _gamma_blocks(lay.segments(gi), lay.segments(gj), exps, i, j, k, h), threads
    )


def nu_weight(sigmas: Sequence[StepFunction], exps: ExponentTuple) -> StepFunction:
    """``prod_i sigma_i^{p/p_i}`` cellwise."""
    v = np.ones(sigmas[0].mesh.shape)
    for i, s in enumerate(sigmas, start=1):
        v = v * s.values ** (exps.p / exps.p_(i))
    return StepFunction(sigmas[0].mesh, v)


def _a_exp_values(w: StepFunction, cs: CubeSet) -> np.ndarray:
    if np.any(w.values <= 0):
        raise DegenerateWeightError("A_inf^exp needs a strictly positive weight")
    vol = cs.volumes
    avg = cs.integrals(w.lattice()) / vol
    nlog = cs.integrals(-np.log(w.lattice())) / vol
    return avg * np.exp(nlog)


def _calA_values(w, sigmas, cs: CubeSet, exps: ExponentTuple) -> np.ndarray:
    vol = cs.volumes
    out = vol ** (1.0 / exps.q - 1.0 / exps.p + exps.alpha / exps.n) * cs.averages(w) ** (1.0 / exps.q)
    for i, s in enumerate(sigmas, start=1):
        out = out * cs.averages(s) ** (1.0 / exps.p_dual(i))
    return out


def _rh_values(sigmas, cs: CubeSet, exps: ExponentTuple) -> np.ndarray:
    nu = cs.integrals(nu_weight(sigmas, exps).lattice())
    if np.any(nu <= 0):
        raise DegenerateWeightError("nu has zero mass on a cube")
    out = 1.0 / nu
    for i, s in enumerate(sigmas, start=1):
        out = out * cs.integrals(s.lattice()) ** (exps.p / exps.p_(i))
    return out


# ---------------------------------------------------------------- reports


def _frac_str(x: Fraction) -> str:
    return str(Fraction(x))


def cube_dict(c) -> dict:
    if isinstance(c, DyadicCube):
        return {"t": [_frac_str(x) for x in c.shift.t], "k": c.k, "m": list(c.m)}
    box = as_box(c)
    return {"box": [[_frac_str(a), _frac_str(b)] for a, b in box.intervals]}


@dataclass
class ConstantReport:
    kind: str
    exponents: dict
    cubes: list
    values: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.cubes) == 0:
            raise ConfigError("cube set is empty")
        if self.values.shape != (len(self.cubes),):
            raise ConfigError("one value per cube is required")
        if not np.all(np.isfinite(self.values)):
            bad = self.cubes[int(np.nonzero(~np.isfinite(self.values))[0][0])]
            raise DegenerateWeightError(f"{self.kind}: non-finite value on {bad}")

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))

    @property
    def sup(self) -> float:
        return float(self.values[self.argmax])

    @property
    def argmax_cube(self):
        return self.cubes[self.argmax]

    def to_dict(self, per_cube: bool = True) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "exponents": self.exponents,
            "sup": self.sup,
            "argmax_cube": cube_dict(self.argmax_cube),
            "cube_count": len(self.cubes),
            "notes": self.notes,
        }
        if per_cube:
            d["per_cube"] = [dict(cube_dict(c), value=float(v))
                             for c, v in zip(self.cubes, self.values.tolist())]
        return d

    def to_json(self, per_cube: bool = True) -> str:
        return json.dumps(self.to_dict(per_cube), indent=2, sort_keys=True)


KINDS = ("A", "A_Aexp", "A_H", "H", "RH", "Aexp_nu", "ceil", "floor", "bracket")

_ALIASES = {
    "A_pq": "A", "A_(p,q)": "A", "A_pq_Aexp": "A_Aexp", "A_pq_H": "A_H", "Hinf": "H",
    "nu_Aexp": "Aexp_nu", "lceil": "ceil", "lfloor": "floor", "testing": "bracket",
}


def _as_eps(e) -> EpsilonSpec:
    if isinstance(e, EpsilonSpec):
        return e
    if isinstance(e, dict):
        return EpsilonSpec.from_dict(e)
    raise ConfigError(f"expected an EpsilonSpec, got {e!r}")


def _eps_list(eps, count: int, what: str) -> list[EpsilonSpec]:
    if eps is None:
        raise ConfigError(f"{what} needs epsilon functions")
    if isinstance(eps, (EpsilonSpec, dict)):
        return [_as_eps(eps)] * count
    eps = [_as_eps(e) for e in eps]
    if len(eps) != count:
        raise ConfigError(f"{what} needs {count} epsilon functions, got {len(eps)}")
    return eps


def _scalar_values(kind, w, sigmas, exps, eps, cubes, triple) -> np.ndarray:
    """Slow path for a custom cube list: evaluate cube by cube."""
    mesh = sigmas[0].mesh
    cs_vals = []
    for c in cubes:
        if isinstance(c, DyadicCube):
            cs = CubeSet(mesh, [c.shift], (c.k, c.k))
            t = cs.tables[0]
            if c not in t.index:
                raise ConfigError(f"{c} is not a cube of the window at a lattice-aligned scale")
            v = _table_values(kind, w, sigmas, exps, eps, cs, triple, threads=1)
            cs_vals.append(v[t.index[c]])
        else:
            raise ConfigError("custom cube sets must list DyadicCube objects")
    return np.array(cs_vals)


def _table_values(kind, w, sigmas, exps, eps, cs: CubeSet, triple, threads) -> np.ndarray:
    p, q = exps.p, exps.q
    if kind == "A":
        return _calA_values(w, sigmas, cs, exps)
    if kind == "A_Aexp":
        nu = nu_weight(sigmas, exps)
        return _calA_values(w, sigmas, cs, exps) * _a_exp_values(nu, cs) ** (1.0 / p)
    if kind == "A_H":
        out = _calA_values(w, sigmas, cs, exps)
        for i, s in enumerate(sigmas, start=1):
            out = out * _a_exp_values(s, cs) ** (1.0 / exps.p_(i))
        return out
    if kind == "H":
        out = np.ones(len(cs))
        for i, s in enumerate(sigmas, start=1):
            out = out * _a_exp_values(s, cs) ** (p / exps.p_(i))
        return out
    if kind == "RH":
        return _rh_values(sigmas, cs, exps)
    if kind == "Aexp_nu":
        return _a_exp_values(nu_weight(sigmas, exps), cs)
    if kind == "ceil":
        (e,) = _eps_list(eps, 1, "ceil")
        r = rho_values(nu_weight(sigmas, exps), cs, threads)
        return _calA_values(w, sigmas, cs, exps) * r ** (1.0 / p) * e(r)
    if kind == "floor":
        e1, e2, eta = _eps_list(eps, 3, "floor")
        out = _calA_values(w, sigmas, cs, exps)
        rw = rho_values(w, cs, threads)
        out = out * (rw * eta(rw)) ** (1.0 / dual(q))
        for i, (s, e) in enumerate(zip(sigmas, (e1, e2)), start=1):
            r = rho_values(s, cs, threads)
            out = out * (r * e(r)) ** (1.0 / exps.p_(i))
        return out
    if kind == "bracket":
        i, j, k = _triple(triple)
        es = _eps_list(eps, 3, "bracket")
        sig3 = (sigmas[0], sigmas[1], w)
        avg = [cs.averages(s) for s in sig3]
        base = cs.volumes ** (exps.alpha / exps.n) * avg[i - 1] * avg[j - 1]
        g = gamma_values(sig3, cs, exps, (i, j, k), threads)
        expo = exps.p_dual(k) / dual(exps.p_pair(i, j))
        return base ** expo * avg[k - 1] * g * es[i - 1](g)
    raise ConfigError(f"unknown constant kind {kind!r}; known: {', '.join(KINDS)}")


def _integrability_notes(kind, exps, eps, triple) -> dict:
    if kind == "ceil":
        (e,) = _eps_list(eps, 1, kind)
        require_integrable(e, exps.q, "ceil")
        return {"integrability": {"eps_exponent": exps.q, "ok": True}}
    if kind == "floor":
        if exps.q <= 1:
            raise ExponentError("the floor constant needs q > 1")
        e1, e2, eta = _eps_list(eps, 3, kind)
        for idx, e in ((1, e1), (2, e2)):
            require_integrable(e, exps.p_(idx), f"floor eps_{idx}")
        require_integrable(eta, dual(exps.q), "floor eta")
        return {"integrability": {"ok": True}}
    if kind == "bracket":
        i, j, k = _triple(triple)
        exps.check_testing()
        es = _eps_list(eps, 3, kind)
        e = es[i - 1]
        proof_r = 1.0 / exps.p_dual(k)
        stated_r = 1.0 / exps.p_dual(i)
        require_integrable(e, proof_r, f"bracket eps_{i}")
        return {"integrability": {
            "exponent_used": proof_r, "ok": True,
            "stated_exponent": stated_r, "stated_ok": epsilon_check(e, stated_r),
        }}
    return {}


def global_constant(kind: str, w: StepFunction, sigma1: StepFunction, sigma2: StepFunction,
                    exps: ExponentTuple, eps=None, cubes=None, triple=None,
                    threads: int | None = None) -> ConstantReport:
    """Supremum of a per-cube functional over a cube set.

    ``cubes`` is a :class:`CubeSet`, a list of DyadicCube objects, or None for
    every cube of every shifted grid inside the mesh window.  For ``bracket``
    the weight ``w`` plays the role of sigma_3.
    """
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ConfigError(f"unknown constant kind {kind!r}; known: {', '.join(KINDS)}")
    sigmas = (sigma1, sigma2)
    for f in (w, sigma2):
        if f.mesh != sigma1.mesh:
            raise ConfigError("weights live on different meshes")
    if exps.n != sigma1.mesh.n:
        raise ConfigError("exponent dimension does not match the mesh")
    notes = _integrability_notes(kind, exps, eps, triple)
    if triple is not None:
        notes["triple"] = list(_triple(triple))
    if cubes is None or isinstance(cubes, CubeSet):
        cs = cubes or CubeSet(sigma1.mesh)
        vals = _table_values(kind, w, sigmas, exps, eps, cs, triple, threads)
        cube_list = cs.cubes
    else:
        cube_list = list(cubes)
        if not cube_list:
            raise ConfigError("cube set is empty")
        vals = _scalar_values(kind, w, sigmas, exps, eps, cube_list, triple)
    return ConstantReport(kind, exps.as_dict(), cube_list, vals, notes)


# ---------------------------------------------------------------- testing constant


def sawyer_testing(S, sigma1: StepFunction, sigma2: StepFunction, sigma3: StepFunction,
                   exps: ExponentTuple, triple=(1, 2, 3)) -> ConstantReport:
    """Testing constant of a sparse family for the triple ``(i, j, k)``.

    For each ``R`` in the family: the ``L^{p_i'}(sigma_i)`` norm over ``R`` of
    ``sum_{Q in S, Q in R} |Q|^{alpha/n} <sigma_j>_Q <sigma_k>_Q 1_Q``,
    divided by ``sigma_j(R)^{1/p_j} sigma_k(R)^{1/p_k}``.
    """
    i, j, k = _triple(triple)
    if len(S.cubes) == 0:
        raise ConfigError("testing constant needs a nonempty family")
    sig = (sigma1, sigma2, sigma3)
    mesh = S.mesh
    for s in sig:
        if s.mesh != mesh:
            raise ConfigError("weights and family live on different meshes")
    lat = [s.lattice() for s in sig]
    cell = float(mesh.lattice_h ** mesh.n)
    ranges = [S.ranges(c) for c in S.cubes]
    mass = [[float(g[tuple(slice(a, b) for a, b in rg)].sum()) * cell for rg in ranges] for g in lat]
    for s_idx in range(3):
        bad = [c for c, m in zip(S.cubes, mass[s_idx]) if not m > 0]
        if bad:
            raise DegenerateWeightError(f"sigma_{s_idx + 1} has zero mass on {bad[0]}")
    vols = [float(c.side ** mesh.n) for c in S.cubes]
    coef = [vols[q] ** (exps.alpha / mesh.n) * (mass[j - 1][q] / vols[q]) * (mass[k - 1][q] / vols[q])
            for q in range(len(S.cubes))]
    pid = exps.p_dual(i)
    vals = []
    for r, rg in enumerate(ranges):
        block = np.zeros(tuple(b - a for a, b in rg))
        for q, rq in enumerate(ranges):
            if all(a <= c and d <= b for (a, b), (c, d) in zip(rg, rq)):
                block[tuple(slice(c - a, d - a) for (a, _), (c, d) in zip(rg, rq))] += coef[q]
        wi = lat[i - 1][tuple(slice(a, b) for a, b in rg)]
        norm = (float((block ** pid * wi).sum()) * cell) ** (1.0 / pid)
        vals.append(norm / (mass[j - 1][r] ** (1.0 / exps.p_(j)) * mass[k - 1][r] ** (1.0 / exps.p_(k))))
    return ConstantReport("testing", exps.as_dict(), list(S.cubes), np.array(vals),
                          {"triple": [i, j, k]})


# ---------------------------------------------------------------- constant chains


def constant_chains(w: StepFunction, sigma1: StepFunction, sigma2: StepFunction, exps: ExponentTuple,
                  cubes: CubeSet | None = None, rel_tol: float = 1e-9) -> dict:
    """Per-cube checks of the inequalities linking the bump constants.

    Each entry reports the worst relative excess ``lhs / rhs - 1`` and whether
    it stays within ``rel_tol``; the sup-level forms follow from the per-cube ones.
    """
    cs = cubes or CubeSet(sigma1.mesh)
    sigmas = (sigma1, sigma2)
    p = exps.p
    calA_ = _calA_values(w, sigmas, cs, exps)
    a_nu = _a_exp_values(nu_weight(sigmas, exps), cs)
    rh = _rh_values(sigmas, cs, exps)
    h = _table_values("H", w, sigmas, exps, None, cs, None, 1)
    a_h = _table_values("A_H", w, sigmas, exps, None, cs, None, 1)
    a_aexp = calA_ * a_nu ** (1.0 / p)
    sup_rh = float(rh.max())
    sup_A = float(calA_.max())
    sup_anu = float(a_nu.max())
    checks = {
        "H_le_RH_Aexp": (h, rh * a_nu),
        "AAexp_le_A_Aexp": (a_aexp, sup_A * a_nu ** (1.0 / p)),
        "AAexp_le_AH": (a_aexp, a_h),
        "AH_le_RH_AAexp": (a_h, sup_rh ** (1.0 / p) * a_aexp),
        "Aexp_ge_1": (np.ones_like(a_nu), a_nu),
        "RH_ge_1": (np.ones_like(rh), rh),
    }
    out = {}
    for name, (lhs, rhs) in checks.items():
        excess = float(np.max(lhs / rhs - 1.0))
        out[name] = {"max_excess": excess, "ok": excess <= rel_tol}
    out["sups"] = {"RH": sup_rh, "A": sup_A, "Aexp_nu": sup_anu, "H": float(h.max()),
                   "A_H": float(a_h.max()), "A_Aexp": float(a_aexp.max())}
    return out
