import numpy as np
import pytest

from entroweight import Mesh
from entroweight.entropy import CubeSet, global_constant, rho_values
from entroweight.errors import ConfigError
from entroweight.gallery import (HARNESSES, DensitySpec, GalleryConfig, GallerySpec, gallery_suite,
                                 make_density, make_weight, reseed)
from entroweight.measure import ExponentTuple


def test_constant_and_degenerate_cascade():
    mesh = Mesh(1, 1, 5)
    assert np.all(make_weight(GallerySpec("constant"), mesh).values == 1.0)
    assert np.all(make_weight(GallerySpec("constant", c=2.5), mesh).values == 2.5)
    assert np.all(make_weight(GallerySpec("dyadic-random", delta=0.0, seed=4), mesh).values == 1.0)


def test_power_cell_average_closed_form():
    mesh = Mesh(1, 1, 5)
    w = make_weight(GallerySpec("power", a=0.5), mesh)
    h = 2.0 ** -5
    # cell [0, h): (1/h) * (2/3) h^{3/2}
    i0 = mesh.size // 2
    assert w.values[i0] == pytest.approx((2 / 3) * h ** 0.5, rel=1e-12)
    # cell [1, 1 + h)
    i1 = i0 + 32
    assert w.values[i1] == pytest.approx(((1 + h) ** 1.5 - 1) / 1.5 / h, rel=1e-12)
    # symmetric in x
    assert w.values[i0 - 1] == pytest.approx(w.values[i0], rel=1e-12)


def test_power_two_dimensional_and_integrability():
    mesh = Mesh(2, 1, 2)
    w = make_weight(GallerySpec("power", a=-0.5), mesh)
    assert w.values.min() > 0 and np.allclose(w.values, w.values.T)
    with pytest.raises(ConfigError):
        make_weight(GallerySpec("power", a=-1.0), Mesh(1, 1, 3))


def test_two_cell_and_bump():
    mesh = Mesh(1, 1, 3)
    w = make_weight(GallerySpec("two-cell", v=4.0), mesh)
    x = mesh.centers()
    assert np.all(w.values[x < 0] == 1.0) and np.all(w.values[x > 0] == 4.0)
    b = make_weight(GallerySpec("bump", height=2.0, width=0.5), mesh)
    assert 1.0 <= b.values.min() and b.values.max() <= 3.0
    assert b.values[mesh.size // 2] == b.values.max()


def test_cascade_is_positive_and_seeded():
    mesh = Mesh(1, 1, 6)
    a = make_weight(GallerySpec("dyadic-random", delta=0.5, seed=3), mesh)
    b = make_weight(GallerySpec("dyadic-random", delta=0.5, seed=3), mesh)
    c = make_weight(GallerySpec("dyadic-random", delta=0.5, seed=4), mesh)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)
    assert a.values.min() >= 0.5 ** 6
    cs = CubeSet(mesh)
    assert rho_values(a, cs).min() >= 1 - 1e-12
    aexp = global_constant("Aexp_nu", a, a, a, ExponentTuple(1, 0.0, (2, 2), 1), cubes=cs)
    assert aexp.values.min() >= 1 - 1e-9


def test_densities():
    mesh = Mesh(1, 1, 4)
    ind = make_density(DensitySpec("indicator", 0.0, 1.0), mesh)
    x = mesh.centers()
    assert np.all(ind.values[(x > 0) & (x < 1)] == 1.0) and ind.values[x < 0].sum() == 0
    tent = make_density(DensitySpec("tent", center=0.0, radius=1.0), mesh)
    h = 2.0 ** -4
    i0 = mesh.size // 2
    # average of 1 - x over [0, h)
    assert tent.values[i0] == pytest.approx(1 - h / 2, rel=1e-12)
    assert tent.values.sum() * h == pytest.approx(1.0, rel=1e-12)
    r1 = make_density(DensitySpec("random", seed=5), mesh)
    r2 = make_density(DensitySpec("random", seed=5), mesh)
    assert r1.values.tobytes() == r2.values.tobytes()
    assert np.all(np.isin(r1.values, np.arange(17) / 16))
    assert not make_density(DensitySpec("zero"), mesh).values.any()


def test_spec_validation():
    for bad in (dict(family="spiral"), dict(family="dyadic-random", delta=1.0), dict(seed=-1),
                dict(family="two-cell", v=0.0), dict(c=0.0)):
        with pytest.raises(ConfigError):
            GallerySpec(**bad)
    with pytest.raises(ConfigError):
        DensitySpec("indicator", 1.0, 0.0)


def test_suites():
    smoke = gallery_suite("smoke")
    assert len(smoke) == 5
    assert smoke[0].config_id == "smoke-ones"
    full = gallery_suite("full")
    assert len(full) >= 30
    assert len({c.config_id for c in full}) == len(full)
    assert {c.alpha for c in full} == {0.0, 0.5, 1.0}
    fams = {s.family for c in full for s in (c.sigma1, c.sigma2, c.w)}
    assert fams == {"constant", "power", "two-cell", "bump", "dyadic-random"}
    for c in full + smoke:
        for h in c.applicable():
            assert h in HARNESSES and c.epsilon_ok(h), (c.config_id, h)
    with pytest.raises(ConfigError):
        gallery_suite("huge")


def test_config_round_trip_and_reseed():
    c = gallery_suite("full")[-1]
    assert GalleryConfig.from_dict(c.as_dict()) == c
    r = reseed(c, 7)
    assert reseed(c, None) is c
    assert r == reseed(c, 7) and r != reseed(c, 8)
    assert r.alpha == c.alpha and r.ps == c.ps
    with pytest.raises(ConfigError):
        GalleryConfig.from_dict({"alpha": 0})


def test_build_instance():
    inst = gallery_suite("smoke")[2].build(5)
    assert inst.mesh == Mesh(1, 1, 5)
    assert inst.w.values.min() >= 1e-12 and inst.f1.values.min() >= 0
