import csv
import json

import pytest

from entroweight.cli import RunConfig, load_config, main
from entroweight.errors import ConfigError


def write_cfg(path, **kw):
    path.write_text(json.dumps({"schema_version": 1, **kw}))
    return str(path)


def test_verify_thm14_smoke_writes_one_json_per_config(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["verify", "thm14", "--out", str(out), "--J", "6", "-q"])
    assert code == 0
    files = sorted(p.name for p in out.glob("verify_thm14_*.json"))
    assert len(files) == 5
    d = json.loads((out / "verify_thm14_smoke-ones.json").read_text())
    assert d["schema_version"] == 1 and d["pass"] is True
    rows = list(csv.reader((out / "verify_thm14.csv").open()))
    assert rows[0] == ["harness", "config_id", "J", "lhs", "rhs", "ratio", "pass"] and len(rows) == 6


def test_failing_bound_exits_one(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", C=1e-6, configs=[{"config_id": "one", "alpha": 0, "ps": [2, 2], "q": 1}])
    assert main(["verify", "thm14", "--config", cfg, "--out", str(tmp_path / "o"), "--J", "4", "-q"]) == 1


def test_config_errors_exit_two(tmp_path, capsys):
    assert main(["verify", "thm14", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["suite", "smoke", "--config", str(bad)]) == 2
    assert main(["suite", "smoke", "--config", write_cfg(tmp_path / "v.json", schema_version=2)]) == 2
    assert main(["suite", "smoke", "--config", write_cfg(tmp_path / "k.json", colour="red")]) == 2
    assert main(["verify", "thm14", "--threads", "0"]) == 2
    # thm15 needs alpha > 0 and q > 1: nothing in this config admits it
    cfg = write_cfg(tmp_path / "c.json", configs=[{"config_id": "one", "alpha": 0, "ps": [2, 2], "q": 1}])
    assert main(["verify", "thm15", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_subcommand_prints_usage(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main([]) == 2


def test_op_frac_maximal_with_zero_input(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", J=4,
                    problem={"config_id": "z", "alpha": 0, "ps": [2, 2], "q": 1, "f1": {"family": "zero"}})
    assert main(["op", "frac-maximal", "--config", cfg, "--out", str(tmp_path), "-q"]) == 0
    rows = (tmp_path / "op_frac-maximal.csv").read_text().splitlines()
    assert rows[0] == "tag,frac_maximal_oracle"
    values = [float(r.split(",")[1]) for r in rows[4:]]
    assert len(values) == 3 * 2 ** 6 and not any(values)


@pytest.mark.parametrize("name", ["hl-maximal", "frac-maximal-dyadic", "weighted-maximal",
                                  "frac-integral-dyadic", "frac-integral", "sparse"])
def test_every_operator_runs(tmp_path, name):
    cfg = write_cfg(tmp_path / "c.json", J=4, exponents={"alpha": "1/2", "ps": [2, 2], "q": "3/2"})
    assert main(["op", name, "--config", cfg, "--out", str(tmp_path), "-q"]) == 0
    assert (tmp_path / f"op_{name}.csv").exists()


def test_quadrature_points(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", J=6, exponents={"alpha": 1, "ps": [2, 2], "q": "3/2"}, points=[0.5])
    assert main(["op", "frac-integral", "--config", cfg, "--out", str(tmp_path), "-q"]) == 0
    x, v = (tmp_path / "op_frac-integral_points.csv").read_text().splitlines()[1].split(",")
    assert float(x) == 0.5 and abs(float(v) - 3.5255) < 0.1


def test_inputs_from_csv(tmp_path):
    from entroweight import Mesh, StepFunction

    mesh = Mesh(1, 1, 4)
    StepFunction.zeros(mesh).to_csv(tmp_path / "f1.csv")
    cfg = write_cfg(tmp_path / "c.json", J=4, inputs={"f1": "f1.csv"})
    assert main(["op", "frac-maximal", "--config", cfg, "--out", str(tmp_path), "-q"]) == 0
    StepFunction.zeros(Mesh(1, 1, 3)).to_csv(tmp_path / "f2.csv")
    cfg = write_cfg(tmp_path / "d.json", J=4, inputs={"f2": "f2.csv"})
    assert main(["op", "frac-maximal", "--config", cfg, "--out", str(tmp_path), "-q"]) == 2


def test_sparse_and_constants(tmp_path):
    assert main(["sparse", "--J", "5", "--out", str(tmp_path), "-q"]) == 0
    rep = json.loads((tmp_path / "sparse_report.json").read_text())
    assert rep["size"] == 1 and rep["verify"]["passed"] and rep["domination"]["active_ratio_max"] == 4.0
    assert (tmp_path / "sparse.csv").exists() and (tmp_path / "sparse_cells.csv").exists()
    assert main(["constants", "ceil", "--J", "4", "--out", str(tmp_path), "-q"]) == 0
    d = json.loads((tmp_path / "constant_ceil.json").read_text())
    assert abs(d["sup"] - 1.0) < 1e-12
    assert main(["constants", "bogus", "--J", "4", "--out", str(tmp_path), "-q"]) == 2
    cfg = write_cfg(tmp_path / "e.json", eps={"family": "log-power", "s": 0})
    assert main(["constants", "ceil", "--config", cfg, "--J", "4", "--out", str(tmp_path), "-q"]) == 2


def test_grid_queries(tmp_path):
    assert main(["grid", "enumerate", "--out", str(tmp_path), "-q"]) == 0
    d = json.loads((tmp_path / "grid_enumerate.json").read_text())
    assert d["count"] == 4 + 8 + 3 + 7
    cfg = write_cfg(tmp_path / "c.json", box={"lo": ["1/3"], "side": "1/4"})
    assert main(["grid", "cover", "--config", cfg, "--out", str(tmp_path), "-q"]) == 0
    c = json.loads((tmp_path / "grid_cover.json").read_text())["cover"]
    from fractions import Fraction
    assert 1 <= Fraction(c["side_ratio"]) <= 6
    assert main(["grid", "cover", "--out", str(tmp_path), "-q"]) == 2


def test_suite_and_refine_are_deterministic(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", J_list=[4, 5])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["suite", "smoke", "--config", cfg, "--out", str(a), "--threads", "1", "--seed", "9", "-q"]) == 0
    assert main(["suite", "smoke", "--config", cfg, "--out", str(b), "--threads", "3", "--seed", "9", "-q"]) == 0
    for name in ("suite_smoke.json", "suite_smoke.csv", "suite_smoke_series.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = (a / "suite_smoke.csv").read_text().splitlines()
    from entroweight.gallery import gallery_suite
    assert len(rows) - 1 == sum(len(c.applicable()) for c in gallery_suite("smoke"))
    assert main(["refine", "thm14", "--config", cfg, "--out", str(a), "--csv", "-q"]) == 0
    assert (a / "refine_thm14.csv").exists() and not (a / "refine_thm14.json").exists()


def test_threads_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("ENTROWEIGHT_THREADS", "2")
    cfg = load_config(write_cfg(tmp_path / "c.json"))
    assert cfg.threads is None
    from entroweight.cli import _merge, build_parser
    args = build_parser().parse_args(["suite", "smoke"])
    assert _merge(args, cfg).threads == 2


def test_run_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"schema_version": 1, "J_list": [8, 7]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"schema_version": 1, "grid": [2]})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"schema_version": 1, "seed": -1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"schema_version": 1, "inputs": {"g": "x.csv"}})
    cfg = RunConfig.from_dict({"schema_version": 1, "configs": [{"config_id": "x", "alpha": "1/2",
                                                                 "ps": [2, 2], "q": "3/2"}]})
    assert cfg.configs[0].alpha == 0.5
