import math

import numpy as np
import pytest

from entroweight import ExponentTuple, Mesh, StepFunction
from entroweight.entropy import EpsilonSpec, nu_weight
from entroweight.errors import ConfigError, ExponentError
from entroweight.gallery import DensitySpec, GalleryConfig, gallery_suite
from entroweight.geometry import DyadicCube, GridShift
from entroweight.lattice import CubeTable
from entroweight.sparse import SparseFamily
from entroweight.verification import (TRIPLES, WEAK_TRIPLES, CarlesonSequence, VerificationReport,
                                      carleson_check, equivalence_check, packing_check, refinement_study,
                                      run_harness, run_suite, tower_sequence, verify_maximal_bound,
                                      verify_testing_bound)

from conftest import unit_indicator

G0 = GridShift.zero(1)
SMOKE = {c.config_id: c for c in gallery_suite("smoke")}


def test_maximal_bound_constant_weights_is_13_6():
    # ceiling constant 1 and unit input norms: the ratio is ||M_0(1_[0,1), 1_[0,1))||_1
    rep = run_harness("thm14", SMOKE["smoke-ones"], 7)
    assert rep.passed and rep.factors["constant"] == pytest.approx(1.0)
    assert rep.ratio == pytest.approx(13 / 6, rel=0.02)


def test_maximal_bound_rejects_divergent_eps():
    mesh = Mesh(1, 1, 3)
    one = StepFunction.constant(mesh, 1.0)
    with pytest.raises(ConfigError):
        verify_maximal_bound(one, one, one, one, one, ExponentTuple(1, 0, (2, 2), 1), EpsilonSpec.log_power(0.5))


def test_refinement_study_series_and_zero_input():
    cfg = SMOKE["smoke-ones"]
    rep = refinement_study("thm14", cfg, [5, 6, 7])
    assert [j for j, _ in rep.series] == [5, 6, 7]
    assert rep.details["refinement_stable"] and rep.passed
    zero = GalleryConfig("zero", 0.0, (2.0, 2.0), 1.0, DensitySpec("zero"))
    z = refinement_study("thm14", zero, [4, 5])
    assert [r for _, r in z.series] == [0.0, 0.0]
    with pytest.raises(ConfigError):
        refinement_study("thm14", cfg, [6, 6])
    with pytest.raises(ConfigError):
        run_harness("thm99", cfg, 4)


def test_integral_bound_smoke():
    rep = run_harness("thm15", SMOKE["smoke-ones-a1_2"], 6)
    assert rep.passed and 0 < rep.ratio < 100
    with pytest.raises(ExponentError):
        run_harness("thm15", SMOKE["smoke-ones"], 5)     # q = 1


def test_testing_bound_enumerates_triples():
    rep = run_harness("thm16", SMOKE["smoke-two-cell"], 5)
    rows = rep.details["strong_triples"]
    assert len(rows) == 6 and {tuple(r["triple"]) for r in rows} == set(TRIPLES)
    assert rep.details["weak_triples"] == [list(t) for t in WEAK_TRIPLES]
    assert len(WEAK_TRIPLES) == 4 and all(t[0] != 3 for t in WEAK_TRIPLES)
    for r in rows:
        i, j, k = r["triple"]
        assert r["test_triple"] == [k, i, j]
    assert rep.passed


def test_testing_bound_needs_testing_exponents():
    mesh = Mesh(1, 1, 3)
    one = StepFunction.constant(mesh, 1.0)
    with pytest.raises(ExponentError):
        verify_testing_bound(one, one, one, ExponentTuple(1, 0.0, (3, 3), 2), EpsilonSpec.log_power(8))


def _nu_mass(mesh, s1, s2, exps, table):
    return table.integrals(nu_weight((s1, s2), exps).lattice())


def test_carleson_single_cube_ratio_at_most_one():
    mesh = Mesh(1, 1, 5)
    rng = np.random.default_rng(0)
    s1 = StepFunction.weight(mesh, 0.5 + rng.random(mesh.shape))
    s2 = StepFunction.weight(mesh, 0.5 + rng.random(mesh.shape))
    f1 = StepFunction(mesh, rng.random(mesh.shape))
    f2 = StepFunction(mesh, rng.random(mesh.shape))
    exps = ExponentTuple(1, 0.0, (2, 3), 1.5)
    table = CubeTable(mesh, G0)
    nu = _nu_mass(mesh, s1, s2, exps, table)
    R = DyadicCube(G0, 0, (0,))
    seq = CarlesonSequence(G0, (R,), (float(nu[table.index[R]] ** (exps.q / exps.p)),))
    rep = carleson_check(seq, s1, s2, f1, f2, exps)
    assert rep.factors["A"] == pytest.approx(1.0)
    assert rep.ratio <= 1 + 1e-12 and rep.passed


@pytest.mark.parametrize("seed", range(5))
def test_carleson_tower_trials(seed):
    mesh = Mesh(1, 1, 5)
    rng = np.random.default_rng(100 + seed)
    s1 = StepFunction.weight(mesh, 0.2 + rng.random(mesh.shape) * 2)
    s2 = StepFunction.weight(mesh, 0.2 + rng.random(mesh.shape) * 2)
    f1 = StepFunction(mesh, rng.random(mesh.shape))
    f2 = StepFunction(mesh, rng.random(mesh.shape))
    exps = ExponentTuple(1, 0.0, (2, 2), 1.5)
    table = CubeTable(mesh, G0)
    nu = _nu_mass(mesh, s1, s2, exps, table)
    seq = tower_sequence(table, DyadicCube(G0, -1, (-1,)), 6, nu, exps.q / exps.p, seed)
    rep = carleson_check(seq, s1, s2, f1, f2, exps)
    assert rep.passed and rep.factors["C_emb_observed"] <= 20


def test_carleson_sequence_validation():
    with pytest.raises(ConfigError):
        CarlesonSequence(G0, (DyadicCube(G0, 0, (0,)),), (-1.0,))
    with pytest.raises(ConfigError):
        CarlesonSequence(G0, (DyadicCube(GridShift.third(1), 0, (0,)),), (1.0,))


def test_packing_constant_tower_below_two():
    mesh = Mesh(1, 1, 6)
    cubes = [DyadicCube(G0, d, (0,)) for d in range(0, 7)]     # [0, 2^-d)
    S = SparseFamily.from_cubes(mesh, G0, cubes)
    one = StepFunction.constant(mesh, 1.0)
    rep = packing_check(S, one, EpsilonSpec.log_power(2.0), 1.0)
    # sum_d 2^-d / 1 over the top cube of mass 1
    assert rep.ratio == pytest.approx(sum(2.0 ** -d for d in range(7)), rel=1e-12)
    assert rep.ratio <= 2 and rep.passed
    empty = SparseFamily.from_cubes(mesh, G0, [])
    assert packing_check(empty, one, EpsilonSpec.log_power(2.0), 1.0).ratio == 0.0


def test_equivalence_on_indicator_and_random():
    mesh = Mesh(1, 1, 5)
    f = unit_indicator(mesh)
    rep = equivalence_check(f, f, ExponentTuple(1, 0.5, (2, 2), 1.5))
    assert rep.passed and rep.factors["ratio_min"] >= 1 - 1e-9
    assert rep.details["upper_constant"] == pytest.approx(6 ** 1.5)
    lo, hi = rep.details["integral_ratio"]
    assert 0 < lo <= hi < math.inf
    rng = np.random.default_rng(2)
    g = StepFunction(mesh, rng.random(mesh.shape))
    assert equivalence_check(f, g, ExponentTuple(1, 0.0, (2, 2), 1)).passed


def test_report_dict_is_plain():
    mesh = Mesh(1, 1, 3)
    rep = VerificationReport("x", "c", 3, np.float64(1.0), 2, np.float64(0.5), 100, np.bool_(True),
                             series=[(3, np.float64(0.5))])
    d = rep.to_dict()
    assert type(d["lhs"]) is float and type(d["pass"]) is bool
    assert d["series"] == [[3, 0.5]] and d["schema_version"] == 1


def test_run_suite_order_independent_of_threads():
    cfgs = gallery_suite("smoke")[:3]
    a = run_suite(cfgs, (4, 5), harnesses=["thm14", "carleson"], threads=1)
    b = run_suite(cfgs, (4, 5), harnesses=["thm14", "carleson"], threads=3)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
    assert [(r.config_id, r.harness) for r in a] == [(c.config_id, h) for c in cfgs for h in ("thm14", "carleson")]
