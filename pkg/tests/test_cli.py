import json
import os

import numpy as np
import pytest

from jsgraph.cli import ConfigError, RunConfig, jdumps, load_config, main


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ------------------------------------------------------------- config

def test_config_defaults(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nscene = flat-scherk\n")
    cfg = load_config(str(p))
    assert cfg.scene == "flat-scherk"
    assert cfg.schedule == [1.0, 2.0, 4.0, 8.0]
    assert cfg.tol == 1e-9
    assert cfg.geo_tol == 1e-5
    assert cfg.nu_thresh == 0.1
    assert cfg.h is None


def test_config_full_roundtrip(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text(
        "# comment\n[run]\nscene = nil3\nh = 0.3\nschedule = 2,4\n"
        "tol = 1e-8\nquad = high\nout = results\n")
    cfg = load_config(str(p))
    assert cfg.scene == "nil3"
    assert cfg.h == 0.3
    assert cfg.schedule == [2.0, 4.0]
    assert cfg.quad == "high"
    assert cfg.out == "results"


def test_config_parse_error_names_line(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nscene flat-scherk\n")
    with pytest.raises(ConfigError, match=r":2:"):
        load_config(str(p))


def test_config_rejects_bad_schedule(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nscene = flat-scherk\nschedule = 4,2\n")
    with pytest.raises(ConfigError, match="increasing"):
        load_config(str(p))


def test_config_rejects_unknown_key_and_scene(tmp_path):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nscene = flat-scherk\nbogus = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_config(str(p))
    p.write_text("[run]\nscene = wat\n")
    with pytest.raises(ConfigError, match="wat"):
        load_config(str(p))


def test_config_env_overrides_outdir(tmp_path, monkeypatch):
    p = tmp_path / "r.ini"
    p.write_text("[run]\nscene = flat-scherk\nout = here\n")
    monkeypatch.setenv("JSGRAPH_OUT", "/elsewhere")
    assert load_config(str(p)).out == "/elsewhere"


def test_runconfig_validation_direct():
    with pytest.raises(ConfigError, match="tol"):
        RunConfig(scene="nil3", tol=-1.0).validate()
    with pytest.raises(ConfigError, match="scene or a"):
        RunConfig().validate()


# ---------------------------------------------------------------- json

def test_jdumps_is_deterministic_and_17g():
    obj = {"a": 1.0 / 3.0, "b": [1, 2.5], "c": {"d": True, "e": None},
           "f": "text"}
    t1 = jdumps(obj)
    assert t1 == jdumps(obj)
    assert "0.33333333333333331" in t1
    parsed = json.loads(t1)
    assert parsed["a"] == pytest.approx(1.0 / 3.0, abs=0)
    assert parsed["c"]["d"] is True


# ---------------------------------------------------------- subcommands

def test_scene_list(capsys):
    code, out, _ = _run(["scene-list"], capsys)
    assert code == 0
    rows = json.loads(out)
    names = [r["name"] for r in rows]
    assert "flat-scherk" in names and "flat-cylinder" in names


def test_check_solvable(capsys):
    code, out, _ = _run(["check", "--scene", "flat-scherk"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["solvable"] is True
    assert rep["decision"] == "solvable"
    assert rep["n_polygons"] == 5
    assert rep["admissible"] is True
    assert rep["chart"]["max_defect"] < 1e-8
    assert len(rep["polygons"][0]["vertices"]) > 3


def test_check_unsolvable_still_exits_zero(capsys):
    code, out, _ = _run(["check", "--scene", "flat-cylinder"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["solvable"] is False
    assert len(rep["violations"]) == 2


def test_check_requires_scene_or_config(capsys):
    code, _, err = _run(["check"], capsys)
    assert code == 2
    assert "scene" in err


def test_geodesic_csv(tmp_path, capsys):
    out_file = str(tmp_path / "g.csv")
    code, _, _ = _run(["geodesic", "--scene", "rotational-r3",
                       "--from", "1", "-0.3", "--to", "1", "0.3",
                       "--out-file", out_file], capsys)
    assert code == 0
    data = np.loadtxt(out_file, delimiter=",", skiprows=1)
    assert data.shape[1] == 3
    assert data[0, :2] == pytest.approx([1.0, -0.3], abs=1e-9)
    assert data[-1, :2] == pytest.approx([1.0, 0.3], abs=1e-6)
    assert data[-1, 2] == pytest.approx(0.5906932, abs=1e-5)


def test_geodesic_needs_direction_or_target(capsys):
    code, _, err = _run(["geodesic", "--scene", "h2xr",
                         "--from", "0", "0"], capsys)
    assert code == 2
    assert "theta" in err


def test_solve_writes_artifacts(tmp_path, capsys):
    out = str(tmp_path / "run")
    code, _, _ = _run(["solve", "--scene", "flat-scherk", "--h", "0.2",
                       "--schedule", "1,2", "--out", out], capsys)
    assert code == 0
    files = sorted(os.listdir(out))
    assert files == ["level_1.csv", "level_2.csv", "mesh.txt", "report.json"]
    rep = json.loads(open(os.path.join(out, "report.json")).read())
    assert rep["solvable"] is True
    assert [l["n"] for l in rep["levels"]] == [1, 2]
    assert all(l["converged"] for l in rep["levels"])
    assert len(rep["flux_checks"]) == 5
    for fc in rep["flux_checks"][:4]:
        assert abs(fc["ratio"]) <= 1.0
    assert rep["divergence"]["lines"] == []
    data = np.loadtxt(os.path.join(out, "level_2.csv"), delimiter=",",
                      skiprows=1)
    assert data.shape == (rep["mesh"]["vertices"], 5)
    # vertex-averaged angle function stays in (0, 1]
    assert np.all(data[:, 3] > 0.0) and np.all(data[:, 3] <= 1.0 + 1e-12)


def test_solve_rejects_unsolvable_without_force(tmp_path, capsys):
    out = str(tmp_path / "run")
    code, _, err = _run(["solve", "--scene", "flat-cylinder", "--h", "0.25",
                         "--schedule", "1", "--out", out], capsys)
    assert code == 1
    assert "rejected" in err
    assert os.path.exists(os.path.join(out, "report.json"))
    code2, _, _ = _run(["solve", "--scene", "flat-cylinder", "--h", "0.25",
                        "--schedule", "1", "--out", out, "--force"], capsys)
    assert code2 == 0
    assert os.path.exists(os.path.join(out, "level_1.csv"))


def test_solve_reports_are_byte_identical(tmp_path, capsys):
    blobs = []
    for sub in ("a", "b"):
        out = str(tmp_path / sub)
        code, _, _ = _run(["solve", "--scene", "flat-scherk", "--h", "0.25",
                           "--schedule", "1", "--out", out], capsys)
        assert code == 0
        blobs.append(open(os.path.join(out, "report.json"), "rb").read())
    assert blobs[0] == blobs[1]


def test_flux_and_export_roundtrip(tmp_path, capsys):
    out = str(tmp_path / "run")
    _run(["solve", "--scene", "flat-scherk", "--h", "0.2",
          "--schedule", "1", "--out", out], capsys)
    curve = tmp_path / "curve.csv"
    t = np.linspace(-0.4, 0.4, 33)
    np.savetxt(curve, np.column_stack([np.zeros_like(t), t]), delimiter=",")
    code, text, _ = _run(["flux", "--scene", "flat-scherk",
                          "--mesh", os.path.join(out, "mesh.txt"),
                          "--solution", os.path.join(out, "level_1.csv"),
                          "--curve", str(curve), "--side", "-1"], capsys)
    assert code == 0
    fr = json.loads(text)
    assert abs(fr["ratio"]) <= 1.0
    assert fr["mu_length"] == pytest.approx(0.8, rel=1e-9)

    obj = str(tmp_path / "s.obj")
    code, text, _ = _run(["export", "--scene", "flat-scherk",
                          "--mesh", os.path.join(out, "mesh.txt"),
                          "--solution", os.path.join(out, "level_1.csv"),
                          "--out-file", obj], capsys)
    assert code == 0
    lines = open(obj).read().splitlines()
    nv = sum(1 for l in lines if l.startswith("v "))
    nf = sum(1 for l in lines if l.startswith("f "))
    rep = json.loads(open(os.path.join(out, "report.json")).read())
    assert nv == rep["mesh"]["vertices"]
    assert nf == rep["mesh"]["triangles"]
    side = json.loads(open(obj + ".json").read())
    assert side["embedding"] == "chart-coordinate"
    assert side["isometric"] is False


def test_flux_rejects_mismatched_solution(tmp_path, capsys):
    out = str(tmp_path / "run")
    _run(["solve", "--scene", "flat-scherk", "--h", "0.2",
          "--schedule", "1", "--out", out], capsys)
    other = str(tmp_path / "other")
    _run(["solve", "--scene", "flat-scherk", "--h", "0.1",
          "--schedule", "1", "--out", other], capsys)
    curve = tmp_path / "curve.csv"
    np.savetxt(curve, np.column_stack([np.zeros(9), np.linspace(0, 0.3, 9)]),
               delimiter=",")
    code, _, err = _run(["flux", "--scene", "flat-scherk",
                         "--mesh", os.path.join(out, "mesh.txt"),
                         "--solution", os.path.join(other, "level_1.csv"),
                         "--curve", str(curve)], capsys)
    assert code == 2
    assert "vertices" in err or "rows" in err


def test_custom_domain_config(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(
        "[run]\nh = 0.15\nschedule = 1\n"
        "[chart]\nregion = rectangle -1 1 -1 1\n"
        "[boundary.arc]\nlabel = plus_inf\nsegment = -0.5 -0.5 0.5 -0.5\n"
        "[boundary.arc]\nlabel = minus_inf\nsegment = 0.5 -0.5 0.5 0.5\n"
        "[boundary.arc]\nlabel = plus_inf\nsegment = 0.5 0.5 -0.5 0.5\n"
        "[boundary.arc]\nlabel = minus_inf\nsegment = -0.5 0.5 -0.5 -0.5\n")
    code, out, _ = _run(["check", "--config", str(cfg)], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["solvable"] is True
    assert rep["n_polygons"] == 5


def test_scene_and_config_conflict(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\nscene = nil3\n")
    code, _, err = _run(["check", "--scene", "nil3", "--config", str(cfg)],
                        capsys)
    assert code == 2
    assert "not both" in err
