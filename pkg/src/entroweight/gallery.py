"""Deterministic weight and density families, and the configuration suites."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .entropy import EpsilonSpec, epsilon_check
from .errors import ConfigError
from .measure import ExponentTuple, Mesh, StepFunction, WEIGHT_FLOOR, dual

WEIGHT_FAMILIES = ("constant", "power", "two-cell", "bump", "dyadic-random")
DENSITY_FAMILIES = ("indicator", "tent", "random", "zero")
HARNESSES = ("thm14", "thm15", "thm16", "carleson", "packing", "equiv")


@dataclass(frozen=True)
class GallerySpec:
    """A weight family and its parameters.

    ``a`` is the power exponent, ``v`` the right-hand value of the two-cell
    weight (split at ``split`` along the first axis), ``height``/``width``
    shape the bump, and ``delta``/``seed``/``depth`` drive the cascade.
    """

    family: str = "constant"
    c: float = 1.0
    a: float = 0.0
    v: float = 1.0
    split: float = 0.0
    height: float = 3.0
    width: float = 0.5
    center: float = 0.0
    delta: float = 0.0
    seed: int = 0
    depth: int = 6

    def __post_init__(self):
        if self.family not in WEIGHT_FAMILIES:
            raise ConfigError(f"unknown weight family {self.family!r}")
        if not self.c > 0:
            raise ConfigError("weight scale c must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError("cascade jitter must lie in [0, 1)")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seeds are unsigned 64-bit integers")
        if self.family == "two-cell" and not self.v > 0:
            raise ConfigError("two-cell value must be positive")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GallerySpec":
        return cls(**d)


@dataclass(frozen=True)
class DensitySpec:
    """A nonnegative test function: indicator box, tent, seeded random steps, or zero."""

    family: str = "indicator"
    lo: float = 0.0
    hi: float = 1.0
    peak: float = 1.0
    center: float = 0.0
    radius: float = 1.0
    seed: int = 0
    resolution: int = 2

    def __post_init__(self):
        if self.family not in DENSITY_FAMILIES:
            raise ConfigError(f"unknown density family {self.family!r}")
        if self.family == "indicator" and not self.lo < self.hi:
            raise ConfigError("indicator needs lo < hi")
        if self.family == "tent" and not self.radius > 0:
            raise ConfigError("tent radius must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seeds are unsigned 64-bit integers")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DensitySpec":
        return cls(**d)


def _edges(mesh: Mesh) -> np.ndarray:
    return -(2.0 ** mesh.L) + np.arange(mesh.size + 1) * float(mesh.h)


def _power_avg_1d(mesh: Mesh, a: float) -> np.ndarray:
    e = _edges(mesh)
    F = np.sign(e) * np.abs(e) ** (a + 1.0) / (a + 1.0)
    return np.diff(F) / float(mesh.h)


def _gauss_avg(mesh: Mesh, fn, order: int = 6) -> np.ndarray:
    """Cell averages of ``fn(x, y)`` by tensor Gauss-Legendre rules (n = 2)."""
    nodes, wts = np.polynomial.legendre.leggauss(order)
    h = float(mesh.h)
    lo = _edges(mesh)[:-1]
    pts = lo[:, None] + (nodes[None, :] + 1.0) * h / 2.0
    out = np.zeros(mesh.shape)
    for a in range(order):
        for b in range(order):
            out += wts[a] * wts[b] * fn(pts[:, a][:, None], pts[:, b][None, :])
    return out / 4.0


def _axis_fraction_below(mesh: Mesh, split: float) -> np.ndarray:
    e = _edges(mesh)
    return np.clip((split - e[:-1]) / float(mesh.h), 0.0, 1.0)


def _cascade(mesh: Mesh, delta: float, seed: int, depth: int) -> np.ndarray:
    depth = min(depth, mesh.L + mesh.J)
    rng = np.random.default_rng(seed)
    v = np.ones((2,) * mesh.n)  # the window splits into 2^n cubes of side 2^L
    for _ in range(depth):
        for ax in range(mesh.n):
            v = np.repeat(v, 2, axis=ax)
        coin = rng.integers(0, 2, size=v.shape)
        v = v * np.where(coin == 1, 1.0 + delta, 1.0 - delta)
    reps = mesh.size // v.shape[0]
    for ax in range(mesh.n):
        v = np.repeat(v, reps, axis=ax)
    return v


def make_weight(spec: GallerySpec, mesh: Mesh) -> StepFunction:
    fam = spec.family
    if fam == "constant":
        vals = np.ones(mesh.shape)
    elif fam == "power":
        if not spec.a > -mesh.n:
            raise ConfigError(f"|x|^a is not locally integrable for a = {spec.a} <= -n")
        if mesh.n == 1:
            vals = _power_avg_1d(mesh, spec.a)
        else:
            a = spec.a
            vals = _gauss_avg(mesh, lambda x, y: np.hypot(x, y) ** a)
    elif fam == "two-cell":
        below = _axis_fraction_below(mesh, spec.split)
        row = below + (1.0 - below) * spec.v
        vals = row if mesh.n == 1 else np.repeat(row[:, None], mesh.size, axis=1)
    elif fam == "bump":
        c, r, hgt = spec.center, spec.width, spec.height
        if mesh.n == 1:
            vals = _gauss_avg_1d(mesh, lambda x: 1.0 + hgt * np.exp(-((x - c) / r) ** 2))
        else:
            vals = _gauss_avg(mesh, lambda x, y: 1.0 + hgt * np.exp(-((x - c) ** 2 + (y - c) ** 2) / r ** 2))
    else:
        vals = _cascade(mesh, spec.delta, spec.seed, spec.depth)
    return StepFunction.weight(mesh, spec.c * vals, WEIGHT_FLOOR)


def _gauss_avg_1d(mesh: Mesh, fn, order: int = 6) -> np.ndarray:
    nodes, wts = np.polynomial.legendre.leggauss(order)
    h = float(mesh.h)
    lo = _edges(mesh)[:-1]
    pts = lo[:, None] + (nodes[None, :] + 1.0) * h / 2.0
    return (fn(pts) * wts[None, :]).sum(axis=1) / 2.0


def _hat_avg_1d(mesh: Mesh, center: float, radius: float) -> np.ndarray:
    """Cell averages of ``max(0, 1 - |x - center| / radius)``."""
    def F(x):
        u = np.clip((x - center) / radius, -1.0, 1.0)
        # antiderivative of (1 - |u|) in u, times radius
        return radius * (u - np.sign(u) * u * u / 2.0)
    e = _edges(mesh)
    return np.diff(F(e)) / float(mesh.h)


def make_density(spec: DensitySpec, mesh: Mesh) -> StepFunction:
    fam = spec.family
    if fam == "zero":
        return StepFunction.zeros(mesh)
    if fam == "indicator":
        from .geometry import RationalBox

        lo, hi = Fraction(spec.lo).limit_denominator(2 ** 20), Fraction(spec.hi).limit_denominator(2 ** 20)
        return StepFunction.indicator(mesh, RationalBox(((lo, hi),) * mesh.n))
    if fam == "tent":
        row = _hat_avg_1d(mesh, spec.center, spec.radius)
        vals = row if mesh.n == 1 else np.multiply.outer(row, row)
        return StepFunction(mesh, spec.peak * vals)
    # seeded random values k/16 on cells of side 2^-resolution
    res = min(spec.resolution, mesh.J)
    rng = np.random.default_rng(spec.seed)
    coarse = 2 ** (mesh.L + res + 1)
    v = rng.integers(0, 17, size=(coarse,) * mesh.n) / 16.0
    reps = mesh.size // coarse
    for ax in range(mesh.n):
        v = np.repeat(v, reps, axis=ax)
    return StepFunction(mesh, spec.peak * v)


# ---------------------------------------------------------------- suites


@dataclass(frozen=True)
class GalleryInstance:
    config: "GalleryConfig"
    mesh: Mesh
    f1: StepFunction
    f2: StepFunction
    sigma1: StepFunction
    sigma2: StepFunction
    w: StepFunction


@dataclass(frozen=True)
class GalleryConfig:
    config_id: str
    alpha: float
    ps: tuple[float, float]
    q: float
    f1: DensitySpec = field(default_factory=DensitySpec)
    f2: DensitySpec = field(default_factory=DensitySpec)
    sigma1: GallerySpec = field(default_factory=GallerySpec)
    sigma2: GallerySpec = field(default_factory=GallerySpec)
    w: GallerySpec = field(default_factory=GallerySpec)
    n: int = 1
    L: int = 1

    def exps(self) -> ExponentTuple:
        return ExponentTuple(self.n, self.alpha, self.ps, self.q)

    def exps_testing(self) -> ExponentTuple:
        """Exponents for the three-weight setting: ``p_3 = min(p_1', p_2')``, ``q = p_3'``."""
        p3 = min(dual(p) for p in self.ps)
        return ExponentTuple(self.n, self.alpha, self.ps, dual(p3))

    def eps_thm14(self) -> EpsilonSpec:
        return EpsilonSpec.log_power(2.0 / self.q)

    def eps_thm15(self) -> tuple[EpsilonSpec, EpsilonSpec, EpsilonSpec]:
        return (EpsilonSpec.log_power(2.0 / self.ps[0]), EpsilonSpec.log_power(2.0 / self.ps[1]),
                EpsilonSpec.log_power(2.0 / dual(self.q)))

    def eps_thm16(self) -> tuple[EpsilonSpec, EpsilonSpec, EpsilonSpec]:
        e = self.exps_testing()
        s = 2.0 * max(e.p_dual(k) for k in (1, 2, 3))
        return (EpsilonSpec.log_power(s),) * 3

    def applicable(self) -> tuple[str, ...]:
        out = ["thm14", "carleson", "packing", "equiv"]
        if self.alpha > 0 and self.q > 1:
            out.insert(1, "thm15")
        if 1.0 / self.ps[0] + 1.0 / self.ps[1] >= 1 - 1e-12:
            out.insert(2 if "thm15" in out else 1, "thm16")
        return tuple(out)

    def epsilon_ok(self, harness: str) -> bool:
        if harness == "thm14":
            return epsilon_check(self.eps_thm14(), self.q)
        if harness == "thm15":
            e1, e2, eta = self.eps_thm15()
            return (epsilon_check(e1, self.ps[0]) and epsilon_check(e2, self.ps[1])
                    and epsilon_check(eta, dual(self.q)))
        if harness == "thm16":
            e = self.exps_testing()
            eps = self.eps_thm16()
            return all(epsilon_check(eps[i - 1], 1.0 / e.p_dual(k))
                       for i, k in ((1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)))
        return True

    def mesh(self, J: int) -> Mesh:
        return Mesh(self.n, self.L, J)

    def build(self, J: int) -> GalleryInstance:
        mesh = self.mesh(J)
        return GalleryInstance(
            self, mesh,
            make_density(self.f1, mesh), make_density(self.f2, mesh),
            make_weight(self.sigma1, mesh), make_weight(self.sigma2, mesh), make_weight(self.w, mesh),
        )

    def as_dict(self) -> dict:
        return {
            "config_id": self.config_id, "alpha": self.alpha, "ps": list(self.ps), "q": self.q,
            "n": self.n, "L": self.L,
            "f1": self.f1.as_dict(), "f2": self.f2.as_dict(),
            "sigma1": self.sigma1.as_dict(), "sigma2": self.sigma2.as_dict(), "w": self.w.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GalleryConfig":
        try:
            return cls(
                str(d["config_id"]), float(Fraction(str(d["alpha"]))),
                tuple(float(Fraction(str(x))) for x in d["ps"]), float(Fraction(str(d["q"]))),
                DensitySpec.from_dict(d.get("f1", {})), DensitySpec.from_dict(d.get("f2", {})),
                GallerySpec.from_dict(d.get("sigma1", {})), GallerySpec.from_dict(d.get("sigma2", {})),
                GallerySpec.from_dict(d.get("w", {})), int(d.get("n", 1)), int(d.get("L", 1)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed gallery configuration: {exc}") from exc


ONE = GallerySpec("constant")
IND = DensitySpec("indicator", 0.0, 1.0)


def _weight_pool() -> list[tuple[GallerySpec, GallerySpec, GallerySpec]]:
    """(sigma1, sigma2, w) triples cycled through by the full suite."""
    return [
        (ONE, ONE, ONE),
        (GallerySpec("power", a=0.5), GallerySpec("power", a=0.5), GallerySpec("power", a=-0.5)),
        (GallerySpec("two-cell", v=4.0), GallerySpec("two-cell", v=0.25), GallerySpec("two-cell", v=2.0)),
        (GallerySpec("bump", height=3.0, width=0.5), ONE, GallerySpec("bump", height=1.0, width=1.0)),
        (GallerySpec("dyadic-random", delta=0.5, seed=11), GallerySpec("dyadic-random", delta=0.3, seed=12),
         GallerySpec("dyadic-random", delta=0.4, seed=13)),
        (GallerySpec("power", a=-0.3), GallerySpec("two-cell", v=3.0, split=0.5),
         GallerySpec("dyadic-random", delta=0.6, seed=14)),
    ]


def _density_pool() -> list[tuple[DensitySpec, DensitySpec]]:
    return [
        (IND, IND),
        (DensitySpec("tent", center=0.0, radius=1.0), DensitySpec("indicator", -0.5, 0.75)),
        (DensitySpec("random", seed=21), DensitySpec("random", seed=22)),
    ]


def _fmt(x: float) -> str:
    return str(Fraction(x).limit_denominator(64)).replace("/", "_")


def gallery_suite(name: str) -> list[GalleryConfig]:
    if name == "smoke":
        two = GallerySpec("two-cell", v=4.0)
        pw = (GallerySpec("power", a=0.5), GallerySpec("power", a=0.5), GallerySpec("power", a=-0.5))
        return [
            GalleryConfig("smoke-ones", 0.0, (2.0, 2.0), 1.0, IND, IND, ONE, ONE, ONE),
            GalleryConfig("smoke-ones-a1_2", 0.5, (2.0, 2.0), 1.5, IND, IND, ONE, ONE, ONE),
            GalleryConfig("smoke-two-cell", 0.5, (2.0, 2.0), 1.5, IND, IND, two, two, two),
            GalleryConfig("smoke-power", 0.0, (2.0, 2.0), 1.0, IND, IND, *pw),
            GalleryConfig("smoke-power-a1", 1.0, (2.0, 3.0), 1.7, DensitySpec("tent"), IND, *pw),
        ]
    if name == "full":
        pairs = [(1.5, 1.5), (1.5, 2.0), (1.5, 3.0), (2.0, 2.0), (2.0, 3.0), (3.0, 3.0)]
        weights = _weight_pool()
        dens = _density_pool()
        out = []
        idx = 0
        for alpha in (0.0, 0.5, 1.0):
            for p1, p2 in pairs:
                p = 1.0 / (1.0 / p1 + 1.0 / p2)
                for q in (p, p + 0.5):
                    s1, s2, w = weights[idx % len(weights)]
                    f1, f2 = dens[(idx // len(weights)) % len(dens)]
                    cid = f"full-{idx:02d}-a{_fmt(alpha)}-p{_fmt(p1)}_{_fmt(p2)}-q{_fmt(q)}"
                    out.append(GalleryConfig(cid, alpha, (p1, p2), q, f1, f2, s1, s2, w))
                    idx += 1
        return out
    raise ConfigError(f"unknown suite {name!r}; known: smoke, full")


def _mix(seed: int, base: int) -> int:
    return int(np.random.SeedSequence([seed, base]).generate_state(2, np.uint64)[0])


def reseed(config: GalleryConfig, seed: int | None) -> GalleryConfig:
    """Derive fresh seeds for every random family from a run seed; None leaves them alone."""
    if seed is None:
        return config
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seeds are unsigned 64-bit integers")
    out = {}
    for name in ("f1", "f2", "sigma1", "sigma2", "w"):
        spec = getattr(config, name)
        if spec.family in ("random", "dyadic-random"):
            out[name] = replace(spec, seed=_mix(seed, spec.seed))
    return replace(config, **out) if out else config
