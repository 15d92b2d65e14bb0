import json

import numpy as np
import pytest
import yaml

from imexrfm.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main, run_convergence, run_solve
from imexrfm.config import ConfigError, RunConfig, from_dict, load_config, full_config


def write_config(path, **kw):
    path.write_text(yaml.safe_dump(kw))
    return str(path)


def diagnostic(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_check_tableau(capsys):
    assert main(["check-tableau"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 10
    assert all(float(line.split()[-1]) <= 1e-14 for line in out)
    assert main(["check-tableau", "--scheme", "imex1"]) == EXIT_OK


def test_solve_allen_cahn_defaults(tmp_path, ref_cache, capsys):
    cfg = write_config(tmp_path / "run.yaml", problem="allen_cahn_1d", dt=0.01, cache_dir=ref_cache)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "out")]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("predicted.csv", "reference.csv", "abs_error.csv", "coefficients.csv", "manifest.json"):
        assert (out / name).exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["seed"] == 0 and m["effective_rank"] > 0
    assert m["config"]["dt"] == 0.01 and m["steps"] == 100
    assert m["factorizations"]["stage_operator"] == 1
    assert {"factorization", "assembly", "stage_solves", "io"} <= set(m["timings_seconds"])
    assert m["relative_l2"][-1] <= 1e-4
    assert (out / "predicted.csv").read_text().splitlines()[0] == "time,x,value"


def test_invalid_step_is_a_validation_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.yaml", problem="allen_cahn_1d", t_end=1.0, dt=0.3)
    assert main(["solve", "--config", cfg]) == EXIT_VALIDATION
    d = diagnostic(capsys)
    assert d["error"] == "validation" and "K*dt != T" in d["message"]


@pytest.mark.parametrize("bad", [{"problem": "nope"}, {"m": [0]}, {"mystery": 1}, {"j_n": 0},
                                 {"scheme": "rk4"}, {"tau_s": 1.5}, {"end_time": "round"}])
def test_config_validation(bad, tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.yaml", **{"problem": "heat_1d", **bad})
    assert main(["solve", "--config", cfg]) == EXIT_VALIDATION
    assert diagnostic(capsys)["error"] == "validation"


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "blow.yaml", problem="allen_cahn_1d", overrides={"reaction": 1e4},
                       m=[2], j_n=20, q=20, dt=0.1, t_end=5.0)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
    assert diagnostic(capsys)["error"] == "instability"


def test_converge_needs_two_steps(tmp_path, capsys):
    assert main(["converge", "--problem", "heat_1d", "--dt-list", "0.01", "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["converge", "--problem", "heat_1d", "--dt-list", "a,b", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_converge_heat(tmp_path, capsys):
    assert main(["converge", "--problem", "heat_1d", "--dt-list", "0.05,0.025,0.0125", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "dt,relative_l2,wall_ms,slope" and len(lines) == 4
    assert float(lines[1].split(",")[3]) >= 2.5
    manifests = json.loads((tmp_path / "convergence_manifest.json").read_text())
    assert [m["dt"] for m in manifests] == [0.05, 0.025, 0.0125]


def test_converge_imex1_on_allen_cahn(ref_cache):
    cfg = RunConfig.for_problem("allen_cahn_1d", scheme="imex1", dt=None, dt_list=[2e-2, 1e-2, 5e-3],
                                cache_dir=ref_cache)
    res = run_convergence(cfg, write=False)
    assert res.report.slope == pytest.approx(1.0, abs=0.2)


def test_fit_ic(capsys):
    assert main(["fit-ic", "--problem", "allen_cahn_1d"]) == EXIT_OK
    assert float(capsys.readouterr().out.split()[-1]) <= 1e-6


def test_flags_override_file(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.yaml", problem="burgers_1d", t_end=0.1, seed=3, dt=0.02)
    assert main(["solve", "--config", cfg, "--seed", "5", "--dt", "0.01", "--out", str(tmp_path / "o")]) == 0
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert m["seed"] == 5 and m["dt"] == 0.01 and m["steps"] == 10


def test_manifest_roundtrip_is_bit_identical(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.yaml", problem="cahn_hilliard_1d", t_end=0.04, dt=0.01, seed=9,
                       snapshot_times=[0.02])
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    m = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert m["problem"]["initial"]["seed"] == 37
    assert main(["solve", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == 0
    for name in ("predicted.csv", "reference.csv", "coefficients.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_self_reference_2d():
    cfg = RunConfig.for_problem("allen_cahn_2d", t_end=0.12, dt=0.06, reference_dt=0.01)
    res = run_solve(cfg, write=False)
    assert res.reference_kind == "self" and res.grid.shape == (64 * 64, 2)
    assert 0 < res.errors[-1] < 1e-3


def test_load_config_errors(tmp_path):
    p = tmp_path / "x.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


def test_from_dict_defaults_and_2d_counts():
    cfg = from_dict({"problem": "allen_cahn_2d", "m": 3}).validate()
    assert cfg.m == [3, 3] and cfg.j_n == 100
    assert from_dict({"problem": "kdv_1d"}).r_m == 8.0


def test_floor_policy():
    cfg = RunConfig.for_problem("heat_1d", dt=0.04)
    with pytest.raises(ConfigError):
        cfg.validate()
    cfg.end_time = "floor"
    assert cfg.validate().steps_for(0.04) == 12


def test_full_config_allen_cahn(ref_cache):
    cfg = full_config("allen_cahn_1d", dt=1e-2, dt_list=[], end_time="exact", cache_dir=ref_cache)
    assert (cfg.counts, cfg.j_n, cfg.q, cfg.r_m, cfg.tau_s) == ([8], 500, 100, 20.0, 1e-16)
    res = run_solve(cfg, write=False)
    assert 1e-6 <= res.errors[-1] <= 1e-4


def test_yaml_exponent_floats(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("problem: heat_1d\ndt: 1e-2\ntau_s: 1e-14\noracle: {modes: 128, dt_ref: 1e-4, integrator: ifrk4}\n")
    cfg = load_config(p).validate()
    assert cfg.dt == 0.01 and cfg.oracle["dt_ref"] == 1e-4
