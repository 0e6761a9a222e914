"""Command-line entry point.

Subcommands: grid, op, sparse, constants, verify, suite, refine.  Exit status
is 0 when every check passes, 1 when a harness misses its bound, 2 on any
configuration, precondition or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from . import reporting
from .entropy import _ALIASES, KINDS, EpsilonSpec, cube_dict, global_constant
from .errors import ConfigError, EntroweightError
from .gallery import HARNESSES, GalleryConfig, gallery_suite, reseed
from .geometry import GridShift, RationalBox, Window, all_shifts, cover_cube, cube_box, enumerate_cubes
from .measure import ExponentTuple, StepFunction
from .operators import (frac_integral_dyadic, frac_integral_quadrature, frac_maximal_dyadic,
                        frac_maximal_oracle, hl_maximal, sparse_apply, weighted_dyadic_maximal)
from .parallel import ENV_THREADS, default_threads
from .sparse import build_sparse, domination_report, verify_sparse
from .verification import DEFAULT_C, DEFAULT_C_EMB, refinement_study, run_harness, run_suite

SCHEMA_VERSION = 1
OPERATORS = ("hl-maximal", "frac-maximal", "frac-maximal-dyadic", "weighted-maximal",
             "frac-integral", "frac-integral-dyadic", "sparse")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_KEYS = {
    "schema_version", "command", "n", "L", "J", "J_list", "exponents", "eps", "suite", "configs",
    "problem", "inputs", "C", "C_emb", "out", "threads", "seed", "grid", "a", "mode", "triple",
    "scale_min", "scale_max", "box", "points",
}


def _num(x) -> float:
    return float(Fraction(str(x)))


@dataclass
class RunConfig:
    """Everything a subcommand needs; see README for the key list."""

    command: str | None = None
    n: int = 1
    L: int = 1
    J: int = 8
    J_list: tuple[int, ...] = (7, 8)
    exponents: dict | None = None
    eps: list | None = None
    suite: str | None = None
    configs: list[GalleryConfig] = field(default_factory=list)
    problem: GalleryConfig | None = None
    inputs: dict = field(default_factory=dict)
    C: float = DEFAULT_C
    C_emb: float = DEFAULT_C_EMB
    out: str = "entroweight-out"
    threads: int | None = None
    seed: int | None = None
    grid: tuple[int, ...] | None = None
    a: float | None = None
    mode: str = "dyadic"
    triple: tuple[int, int, int] | None = None
    scale_min: int = 0
    scale_max: int = 1
    box: dict | None = None
    points: list | None = None

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        ver = d.get("schema_version")
        if ver != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {ver!r}; expected {SCHEMA_VERSION}")
        extra = set(d) - _KEYS
        if extra:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(extra))}")
        try:
            cfg = cls(
                command=d.get("command"),
                n=int(d.get("n", 1)), L=int(d.get("L", 1)), J=int(d.get("J", 8)),
                J_list=tuple(int(j) for j in d.get("J_list", (7, 8))),
                exponents=d.get("exponents"),
                eps=_eps_list(d.get("eps")),
                suite=d.get("suite"),
                configs=[GalleryConfig.from_dict(c) for c in d.get("configs", [])],
                problem=GalleryConfig.from_dict(d["problem"]) if "problem" in d else None,
                inputs={k: str(_resolve(v, base)) for k, v in d.get("inputs", {}).items()},
                C=float(d.get("C", DEFAULT_C)), C_emb=float(d.get("C_emb", DEFAULT_C_EMB)),
                out=str(d.get("out", "entroweight-out")),
                threads=None if d.get("threads") is None else int(d["threads"]),
                seed=None if d.get("seed") is None else int(d["seed"]),
                grid=None if d.get("grid") is None else tuple(int(t) for t in d["grid"]),
                a=None if d.get("a") is None else float(d["a"]),
                mode=str(d.get("mode", "dyadic")),
                triple=None if d.get("triple") is None else tuple(int(t) for t in d["triple"]),
                scale_min=int(d.get("scale_min", 0)), scale_max=int(d.get("scale_max", 1)),
                box=d.get("box"), points=d.get("points"),
            )
        except (TypeError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed configuration: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if self.L < 0 or self.J < 0:
            raise ConfigError("L and J must be nonnegative")
        if not self.J_list or any(b <= a for a, b in zip(self.J_list, self.J_list[1:])):
            raise ConfigError("J_list must be nonempty and increasing")
        if self.mode not in ("dyadic", "continuum"):
            raise ConfigError("mode must be 'dyadic' or 'continuum'")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.grid is not None and (len(self.grid) != self.n or any(t not in (0, 1) for t in self.grid)):
            raise ConfigError("grid must list n entries from {0, 1}")
        if not (self.C > 0 and self.C_emb > 0):
            raise ConfigError("harness constants must be positive")
        for k in self.inputs:
            if k not in ("f1", "f2", "sigma1", "sigma2", "w"):
                raise ConfigError(f"unknown input {k!r}")


def _resolve(p, base: Path | None) -> Path:
    p = Path(p)
    return p if p.is_absolute() or base is None else base / p


def _eps_list(raw):
    if raw is None:
        return None
    if isinstance(raw, dict):
        raw = [raw]
    try:
        return [EpsilonSpec.from_dict(e) for e in raw]
    except TypeError as exc:
        raise ConfigError(f"malformed eps entry: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data, path.parent)


# ---------------------------------------------------------------- inputs


def _problem(cfg: RunConfig) -> GalleryConfig:
    base = cfg.problem or GalleryConfig("cli", 0.0, (2.0, 2.0), 1.0, n=cfg.n, L=cfg.L)
    if cfg.exponents:
        e = cfg.exponents
        try:
            base = replace(base, alpha=_num(e.get("alpha", base.alpha)),
                           ps=tuple(_num(p) for p in e.get("ps", base.ps)), q=_num(e.get("q", base.q)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed exponents: {exc}") from exc
    return reseed(base, cfg.seed)


def _functions(cfg: RunConfig):
    prob = _problem(cfg)
    inst = prob.build(cfg.J)
    fns = {"f1": inst.f1, "f2": inst.f2, "sigma1": inst.sigma1, "sigma2": inst.sigma2, "w": inst.w}
    for k, path in cfg.inputs.items():
        try:
            fns[k] = StepFunction.from_csv(Path(path))
        except OSError as exc:
            raise ConfigError(f"cannot read input {k} from {path}: {exc.strerror}") from exc
    mesh = fns["f1"].mesh
    if any(f.mesh != mesh for f in fns.values()):
        raise ConfigError("input functions live on different meshes")
    return prob, ExponentTuple(mesh.n, prob.alpha, prob.ps, prob.q), fns


def _grid(cfg: RunConfig, n: int) -> GridShift:
    return GridShift.from_tau(cfg.grid) if cfg.grid is not None else GridShift.zero(n)


def _configs(cfg: RunConfig, default_suite: str = "smoke") -> list[GalleryConfig]:
    configs = list(cfg.configs)
    if cfg.suite is not None or not configs:
        configs = gallery_suite(cfg.suite or default_suite) + configs
    return [reseed(c, cfg.seed) for c in configs]


# ---------------------------------------------------------------- subcommands


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg)


def cmd_grid(args, cfg: RunConfig) -> int:
    window = Window(cfg.L)
    out = Path(cfg.out)
    if args.target == "enumerate":
        grids = [_grid(cfg, cfg.n)] if cfg.grid is not None else all_shifts(cfg.n)
        rows = []
        for g in grids:
            for c in enumerate_cubes(window, g, cfg.scale_min, cfg.scale_max):
                rows.append({"grid": g.label(), "k": c.k, "m": list(c.m),
                             "box": [[str(a), str(b)] for a, b in cube_box(c).intervals]})
        payload = {"schema_version": SCHEMA_VERSION, "query": "enumerate", "L": cfg.L, "n": cfg.n,
                   "count": len(rows), "cubes": rows}
        _say(args, f"{len(rows)} cubes")
    else:
        if not cfg.box:
            raise ConfigError("grid cover needs a 'box' entry with 'lo' and 'side'")
        try:
            lo = [Fraction(str(x)) for x in cfg.box["lo"]]
            side = Fraction(str(cfg.box["side"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"malformed box: {exc}") from exc
        box = RationalBox.cube(lo, side)
        c = cover_cube(box, window)
        cb = cube_box(c)
        payload = {"schema_version": SCHEMA_VERSION, "query": "cover", "L": cfg.L,
                   "box": [[str(a), str(b)] for a, b in box.intervals],
                   "cover": {"grid": c.shift.label(), "k": c.k, "m": list(c.m),
                             "box": [[str(a), str(b)] for a, b in cb.intervals],
                             "side_ratio": str(cb.side / side)}}
        _say(args, f"cover: {c}  side ratio {cb.side / side}")
    reporting.write_json(out / f"grid_{args.target}.json", payload)
    return EXIT_PASS


def cmd_op(args, cfg: RunConfig) -> int:
    _, exps, fns = _functions(cfg)
    f1, f2 = fns["f1"], fns["f2"]
    grid = _grid(cfg, exps.n)
    name = args.name
    if name == "hl-maximal":
        field_ = hl_maximal(fns["w"])
    elif name == "frac-maximal":
        field_ = frac_maximal_oracle(f1, f2, exps)
    elif name == "frac-maximal-dyadic":
        field_ = frac_maximal_dyadic(f1, f2, exps, grid)
    elif name == "weighted-maximal":
        field_ = weighted_dyadic_maximal(f1, f2, fns["sigma1"], fns["sigma2"], grid)
    elif name == "frac-integral":
        if cfg.points is not None:
            xs = [_num(x) for x in cfg.points]
            vals = frac_integral_quadrature(f1, f2, exps, points=xs)
            text = "x,value\n" + "".join(f"{x!r},{float(v)!r}\n" for x, v in zip(xs, vals))
            path = reporting.atomic_write(Path(cfg.out) / f"op_{name}_points.csv", text)
            _say(args, f"{name}: {len(xs)} points -> {path}")
            return EXIT_PASS
        field_ = frac_integral_quadrature(f1, f2, exps)
    elif name == "frac-integral-dyadic":
        field_ = frac_integral_dyadic(f1, f2, exps, grid)
    else:
        S = build_sparse(f1, f2, exps, grid, a=cfg.a)
        field_ = sparse_apply(S, f1, f2, exps)
    path = reporting.atomic_write(Path(cfg.out) / f"op_{name}.csv", field_.to_csv())
    _say(args, f"{name}: max {float(field_.values.max()):.6g} -> {path}")
    return EXIT_PASS


def cmd_sparse(args, cfg: RunConfig) -> int:
    _, exps, fns = _functions(cfg)
    f1, f2 = fns["f1"], fns["f2"]
    grid = _grid(cfg, exps.n)
    S = build_sparse(f1, f2, exps, grid, a=cfg.a)
    rep = verify_sparse(S)
    dom = domination_report(f1, f2, exps, grid, a=S.a)
    out = Path(cfg.out)
    S.to_csv(out / "sparse.csv", out / "sparse_cells.csv")
    payload = {
        "schema_version": SCHEMA_VERSION, "grid": grid.label(), "exponents": exps.as_dict(),
        "size": len(S), "a": S.a, "k_min": S.k_min, "retries": S.retries,
        "verify": {"passed": rep.passed, "disjoint": rep.disjoint, "cubes": len(rep.per_cube),
                   "failures": [{**r, "cube": cube_dict(r["cube"])} for r in rep.failures()]},
        "domination": dom.as_dict(),
    }
    reporting.write_json(out / "sparse_report.json", payload)
    ok = rep.passed and dom.dominated and dom.bounded
    _say(args, f"sparse family of {len(S)} cubes; {rep.summary()}; "
               f"ratio range [{dom.ratio_min:.4g}, {dom.active_ratio_max:.4g}]")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_constants(args, cfg: RunConfig) -> int:
    prob, exps, fns = _functions(cfg)
    kind = _ALIASES.get(args.kind, args.kind)
    if kind == "bracket" and "q" not in (cfg.exponents or {}):
        exps = replace(exps, q=prob.exps_testing().q)
    eps = cfg.eps
    if eps is not None and len(eps) == 1:
        eps = eps[0]
    elif eps is None:
        # the gallery's entropy bumps for the matching bound
        eps = {"ceil": prob.eps_thm14(), "floor": prob.eps_thm15(), "bracket": prob.eps_thm16()}.get(kind)
    rep = global_constant(kind, fns["w"], fns["sigma1"], fns["sigma2"], exps, eps=eps,
                          triple=cfg.triple or ((1, 2, 3) if kind == "bracket" else None),
                          threads=cfg.threads)
    path = reporting.atomic_write(Path(cfg.out) / f"constant_{rep.kind}.json",
                                  rep.to_json(per_cube=args.per_cube))
    _say(args, f"{rep.kind}: sup {rep.sup:.10g} at {rep.argmax_cube} -> {path}")
    return EXIT_PASS


def _emit(args, cfg: RunConfig, reports, stem: str) -> None:
    both = not (args.json or args.csv)
    reporting.emit_reports(reports, cfg.out, stem, json_out=args.json or both,
                           csv_out=args.csv or both)
    for r in reports:
        _say(args, f"{'PASS' if r.passed else 'FAIL'} {r.harness:<9} {r.config_id:<32} "
                   f"J={r.J} ratio={r.ratio:.6g}")


def _jobs(cfg: RunConfig, harness: str) -> list[GalleryConfig]:
    configs = [c for c in _configs(cfg) if harness in c.applicable()]
    if not configs:
        raise ConfigError(f"no configuration admits harness {harness}")
    return configs


def cmd_verify(args, cfg: RunConfig) -> int:
    from .parallel import pmap

    configs = _jobs(cfg, args.harness)
    reports = pmap(lambda c: run_harness(args.harness, c, cfg.J, C=cfg.C, C_emb=cfg.C_emb,
                                         threads=1, mode=cfg.mode), configs, cfg.threads)
    both = not (args.json or args.csv)
    out = Path(cfg.out)
    if args.json or both:
        for r in reports:
            reporting.write_json(out / f"verify_{r.harness}_{r.config_id}.json", r.to_dict())
    if args.csv or both:
        reporting.atomic_write(out / f"verify_{args.harness}.csv", reporting.reports_csv(reports))
    for r in reports:
        _say(args, f"{'PASS' if r.passed else 'FAIL'} {r.harness:<9} {r.config_id:<32} "
                   f"J={r.J} ratio={r.ratio:.6g}")
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def cmd_refine(args, cfg: RunConfig) -> int:
    from .parallel import pmap

    configs = _jobs(cfg, args.harness)
    reports = pmap(lambda c: refinement_study(args.harness, c, cfg.J_list, C=cfg.C, C_emb=cfg.C_emb,
                                              threads=1, mode=cfg.mode), configs, cfg.threads)
    _emit(args, cfg, reports, f"refine_{args.harness}")
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


def cmd_suite(args, cfg: RunConfig) -> int:
    configs = [reseed(c, cfg.seed) for c in gallery_suite(args.name)] + [
        reseed(c, cfg.seed) for c in cfg.configs]
    reports = run_suite(configs, cfg.J_list, threads=cfg.threads, C=cfg.C, C_emb=cfg.C_emb,
                        mode=cfg.mode)
    _emit(args, cfg, reports, f"suite_{args.name}")
    failed = sum(not r.passed for r in reports)
    _say(args, f"{len(reports) - failed}/{len(reports)} jobs pass")
    return EXIT_PASS if failed == 0 else EXIT_FAIL


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (schema_version 1)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help=f"worker threads (env {ENV_THREADS})")
    common.add_argument("--seed", type=int, help="u64 run seed for the random gallery families")
    common.add_argument("--json", action="store_true", help="write JSON reports")
    common.add_argument("--csv", action="store_true", help="write CSV reports")
    common.add_argument("--J", type=int, help="mesh resolution exponent")
    common.add_argument("--J-list", help="comma-separated increasing resolutions")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="entroweight", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    g = sub.add_parser("grid", parents=[common], help="enumerate or cover queries on shifted grids")
    g.add_argument("target", choices=("enumerate", "cover"))
    o = sub.add_parser("op", parents=[common], help="evaluate an operator field to CSV")
    o.add_argument("name", choices=OPERATORS)
    sub.add_parser("sparse", parents=[common], help="build, verify and compare a sparse family")
    c = sub.add_parser("constants", parents=[common], help="a global constant to JSON")
    c.add_argument("kind", help=f"one of {', '.join(KINDS)}")
    c.add_argument("--per-cube", action="store_true", help="include per-cube values")
    v = sub.add_parser("verify", parents=[common], help="one harness over the configured suite")
    v.add_argument("harness", choices=HARNESSES)
    s = sub.add_parser("suite", parents=[common], help="every harness over a gallery suite")
    s.add_argument("name", choices=("smoke", "full"))
    r = sub.add_parser("refine", parents=[common], help="refinement study for one harness")
    r.add_argument("harness", choices=HARNESSES)
    return p


_COMMANDS = {"grid": cmd_grid, "op": cmd_op, "sparse": cmd_sparse, "constants": cmd_constants,
             "verify": cmd_verify, "suite": cmd_suite, "refine": cmd_refine}


def _merge(args, cfg: RunConfig) -> RunConfig:
    upd = {}
    if args.out is not None:
        upd["out"] = args.out
    if args.threads is not None:
        upd["threads"] = args.threads
    elif cfg.threads is None:
        upd["threads"] = default_threads()
    if args.seed is not None:
        upd["seed"] = args.seed
    if args.J is not None:
        upd["J"] = args.J
    if args.J_list:
        try:
            upd["J_list"] = tuple(int(x) for x in args.J_list.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --J-list: {exc}") from exc
    cfg = replace(cfg, command=args.command, **upd)
    cfg.validate()
    return cfg


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _merge(args, cfg)
        return _COMMANDS[args.command](args, cfg)
    except (EntroweightError, ValueError, OSError) as exc:
        print(f"entroweight: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: Sequence[str] | None = None) -> int:
    return run_command(argv)


if __name__ == "__main__":
    sys.exit(main())
