import json
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from entroweight import ExponentTuple, Mesh, StepFunction
from entroweight.entropy import (KINDS, CubeSet, EpsilonSpec, a_inf_exp, calA, epsilon_check, gamma_ijk,
                                 global_constant, nu_weight, constant_chains, rho, rho_eps, rho_values,
                                 sawyer_testing)
from entroweight.errors import ConfigError, DegenerateWeightError, ExponentError, IntegrabilityError
from entroweight.geometry import DyadicCube, GridShift, RationalBox
from entroweight.sparse import SparseFamily

UNIT = RationalBox(((F(0), F(1)),))
HALF = RationalBox(((F(0), F(1, 2)),))


def split_weight(mesh, v):
    """1 on [0, 1/2), v on [1/2, 1), 1 elsewhere."""
    x = mesh.centers()
    return StepFunction.weight(mesh, np.where((x >= 0.5) & (x < 1), v, 1.0))


def test_epsilon_spec():
    e = EpsilonSpec.log_power(2.0)
    assert e(1.0) == 1.0 and e(0.3) == 1.0          # extended to t <= 1 by continuity
    assert e(math.e) == pytest.approx(4.0)
    assert EpsilonSpec.power(1.0)(5.0) == 5.0
    assert EpsilonSpec.from_dict(e.as_dict()) == e
    with pytest.raises(ConfigError):
        EpsilonSpec("cubic", 1.0)
    with pytest.raises(ConfigError):
        EpsilonSpec.power(1.0, c=0.0)


def test_epsilon_check_rules():
    assert epsilon_check(EpsilonSpec.log_power(2.0), 1.0)
    assert not epsilon_check(EpsilonSpec.log_power(0.0), 3.0)
    assert not epsilon_check(EpsilonSpec.log_power(0.5), 2.0)   # s r = 1 diverges
    assert epsilon_check(EpsilonSpec.power(0.01), 1.0)
    assert not epsilon_check(EpsilonSpec.power(0.0), 1.0)


def test_a_inf_exp_two_cell():
    mesh = Mesh(1, 1, 8)
    w = split_weight(mesh, 4.0)
    # <w> = 5/2, exp(<log 1/w>) = 1/2
    assert a_inf_exp(w, UNIT) == pytest.approx(1.25, abs=1e-12)
    assert a_inf_exp(StepFunction.constant(mesh, 7.0), UNIT) == pytest.approx(1.0, abs=1e-12)
    assert a_inf_exp(w * 9.0, UNIT) == pytest.approx(a_inf_exp(w, UNIT), rel=1e-12)


def test_calA_closed_forms():
    mesh = Mesh(1, 1, 6)
    w = split_weight(mesh, 4.0)
    e = ExponentTuple(1, 0.0, (2, 2), 1)
    assert calA(w, w, w, UNIT, e) == pytest.approx(6.25, rel=1e-12)
    one = StepFunction.constant(mesh, 1.0)
    assert calA(one, one, one, HALF, e) == pytest.approx(1.0, rel=1e-12)
    e2 = ExponentTuple(1, 0.5, (2, 3), 2)
    assert calA(one, one, one, UNIT, e2) == pytest.approx(1.0, rel=1e-12)
    # calA(c w) = c^{1/q} calA(w)
    assert calA(w * 5.0, w, w, HALF, e2) == pytest.approx(5 ** 0.5 * calA(w, w, w, HALF, e2), rel=1e-12)


def test_rho_two_cell_close_to_closed_form():
    mesh = Mesh(1, 1, 8)
    w = split_weight(mesh, 3.0)
    r = rho(w, UNIT)
    target = 1 + math.log(2) / 2
    assert r == pytest.approx(target, rel=0.01)
    assert r <= target + 1e-12           # lattice sup sees fewer intervals
    assert rho(w * 4.0, UNIT) == pytest.approx(r, rel=1e-12)
    assert rho_eps(w, UNIT, EpsilonSpec.power(1.0)) == pytest.approx(r * r, rel=1e-12)
    assert rho(StepFunction.constant(mesh, 2.0), UNIT) == pytest.approx(1.0, abs=1e-12)


def test_rho_degenerate():
    mesh = Mesh(1, 1, 4)
    with pytest.raises(DegenerateWeightError):
        rho(StepFunction.zeros(mesh), UNIT)


def test_gamma_constant_weights():
    mesh = Mesh(1, 1, 5)
    one = StepFunction.constant(mesh, 1.0)
    e = ExponentTuple(1, 0.0, (2, 2), 2)      # p_3 = q' = 2
    assert gamma_ijk([one, one, one], UNIT, e) == pytest.approx(1.0, rel=1e-12)
    assert gamma_ijk([one, one, one], HALF, e) == pytest.approx(2.0, rel=1e-12)
    w = split_weight(mesh, 3.0)
    g = gamma_ijk([w, w, one], UNIT, e)
    # numerator scales by c^{2 p_k'/p_ij}, denominator by c^{p_k'/p_ij}
    assert gamma_ijk([w * 3.0, w * 3.0, one], UNIT, e) == pytest.approx(3.0 ** 2 * g, rel=1e-12)
    with pytest.raises(ExponentError):
        gamma_ijk([one, one, one], UNIT, ExponentTuple(1, 0.0, (3, 3), 2))


def test_cube_set_values_match_scalar_functions():
    mesh = Mesh(1, 1, 4)
    w = split_weight(mesh, 3.0)
    cs = CubeSet(mesh)
    vals = rho_values(w, cs)
    for i in range(0, len(cs), 17):
        assert vals[i] == pytest.approx(rho(w, cs.cubes[i]), rel=1e-12)


def test_global_constants_for_constant_weights():
    mesh = Mesh(1, 1, 4)
    one = StepFunction.constant(mesh, 1.0)
    e = ExponentTuple(1, 0.0, (2, 2), 1)
    for kind in ("A", "A_Aexp", "A_H", "H", "RH", "Aexp_nu"):
        assert global_constant(kind, one, one, one, e).sup == pytest.approx(1.0, rel=1e-12)
    rep = global_constant("ceil", one, one, one, e, eps=EpsilonSpec.log_power(2.0))
    assert rep.sup == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(IntegrabilityError):
        global_constant("ceil", one, one, one, e, eps=EpsilonSpec.log_power(0.0))
    with pytest.raises(ConfigError):
        global_constant("nope", one, one, one, e)
    assert set(KINDS) >= {"A", "ceil", "floor", "bracket"}


def test_bracket_reports_both_integrability_exponents():
    mesh = Mesh(1, 1, 3)
    one = StepFunction.constant(mesh, 1.0)
    e = ExponentTuple(1, 0.0, (2, 2), 2)
    eps = (EpsilonSpec.log_power(4.0),) * 3
    rep = global_constant("bracket", one, one, one, e, eps=eps, triple=(2, 3, 1))
    integ = rep.notes["integrability"]
    assert integ["exponent_used"] == 0.5 and "stated_exponent" in integ
    assert rep.notes["triple"] == [2, 3, 1]


def test_constant_report_json(tmp_path):
    mesh = Mesh(1, 1, 3)
    w = split_weight(mesh, 4.0)
    cubes = [DyadicCube(GridShift.zero(1), 0, (0,)), DyadicCube(GridShift.zero(1), 1, (1,))]
    rep = global_constant("A", w, w, w, ExponentTuple(1, 0.0, (2, 2), 1), cubes=cubes)
    d = json.loads(rep.to_json())
    assert d["schema_version"] == 1 and d["kind"] == "A"
    assert d["sup"] == max(v["value"] for v in d["per_cube"])
    # [1/2, 1) carries w = 4 throughout: 4 * 4^{1/2} * 4^{1/2} = 16 > 6.25
    assert d["argmax_cube"] == {"t": ["0"], "k": 1, "m": [1]}
    assert rep.argmax_cube == cubes[1] and rep.sup == pytest.approx(16.0)
    with pytest.raises(ConfigError):
        global_constant("A", w, w, w, ExponentTuple(1, 0.0, (2, 2), 1), cubes=[])


def test_constant_chains_hold_on_random_weights():
    mesh = Mesh(1, 1, 4)
    rng = np.random.default_rng(1)
    ws = [StepFunction.weight(mesh, 0.2 + rng.random(mesh.shape) * 3) for _ in range(3)]
    rep = constant_chains(ws[2], ws[0], ws[1], ExponentTuple(1, 0.5, (2, 3), 2))
    checks = {k: v for k, v in rep.items() if k != "sups"}
    assert len(checks) == 6 and all(c["ok"] for c in checks.values())
    s = rep["sups"]
    assert s["H"] <= s["RH"] * s["Aexp_nu"] * (1 + 1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_rho_and_aexp_at_least_one(seed):
    mesh = Mesh(1, 1, 3)
    w = StepFunction.weight(mesh, np.random.default_rng(seed).random(mesh.shape) * 10)
    cs = CubeSet(mesh)
    assert rho_values(w, cs).min() >= 1 - 1e-12
    ref = global_constant("Aexp_nu", w, w, w, ExponentTuple(1, 0.0, (2, 2), 1), cubes=cs)
    assert ref.values.min() >= 1 - 1e-9


def test_sawyer_single_cube_closed_form():
    mesh = Mesh(1, 1, 4)
    R = DyadicCube(GridShift.zero(1), 1, (0,))      # [0, 1/2)
    S = SparseFamily.from_cubes(mesh, GridShift.zero(1), [R])
    c = (2.0, 3.0, 5.0)
    sig = [StepFunction.constant(mesh, x) for x in c]
    e = ExponentTuple(1, 0.5, (2, 3), 2.5)
    pi = {1: 2.0, 2: 3.0, 3: e.p_(3)}
    for (i, j, k) in ((1, 2, 3), (3, 1, 2)):
        rep = sawyer_testing(S, *sig, e, (i, j, k))
        d = lambda x: x / (x - 1)
        expo = 0.5 + 1 / d(pi[i]) - 1 / pi[j] - 1 / pi[k]
        cf = c[i - 1] ** (1 / d(pi[i])) * c[j - 1] ** (1 / d(pi[j])) * c[k - 1] ** (1 / d(pi[k]))
        assert rep.sup == pytest.approx(0.5 ** expo * cf, rel=1e-12)
    one = StepFunction.constant(mesh, 1.0)
    unit = SparseFamily.from_cubes(mesh, GridShift.zero(1), [DyadicCube(GridShift.zero(1), 0, (0,))])
    assert sawyer_testing(unit, one, one, one, ExponentTuple(1, 0.0, (2, 2), 2)).sup == pytest.approx(1.0)


def test_nu_weight():
    mesh = Mesh(1, 1, 3)
    a = StepFunction.constant(mesh, 4.0)
    b = StepFunction.constant(mesh, 9.0)
    nu = nu_weight((a, b), ExponentTuple(1, 0.0, (2, 2), 1))
    assert np.allclose(nu.values, 6.0)       # (4 * 9)^{1/2}
