import json

import pytest

from attrforge.cli import run


def _json(path):
    text = path.read_text()
    data = json.loads(text)
    assert data["schema"].endswith("/1")
    assert text == json.dumps(data, indent=2, sort_keys=True) + "\n"
    return data


def test_systems_lists_catalog(tmp_path, capsys):
    assert run(["systems", "--out", str(tmp_path)]) == 0
    data = _json(tmp_path / "systems.json")
    assert len(data["systems"]) == 10
    assert "henon" in capsys.readouterr().out


def test_cover_contraction_example(tmp_path):
    out = tmp_path / "c"
    rc = run(["cover", "--system", "affine_contraction", "--eta", "0.5", "--c", "1", "--T", "1", "--kmax", "20",
              "--out", str(out)])
    assert rc == 0
    cert = _json(out / "cover.json")["certificate"]
    assert cert["h"] == 1.0 and cert["dim_bound"] == 0.0 and cert["empirical"] is True
    assert _json(out / "absorb.json")["params"] == {"eta": 0.5, "c": 1}
    raw = (out / "cover_counts.csv").read_bytes()
    assert raw.startswith(b"k,eps,count,log_count,allowed\r\n")


def test_missing_upstream_stage_is_named(tmp_path, capsys):
    assert run(["build", "--out", str(tmp_path / "empty")]) == 3
    assert "`absorb`" in capsys.readouterr().err
    assert run(["bounds", "--out", str(tmp_path / "empty")]) == 3
    assert "`certify`" in capsys.readouterr().err
    assert run(["report", "--run", str(tmp_path / "empty")]) == 3


def test_invalid_configuration(tmp_path):
    assert run(["absorb", "--system", "nope", "--out", str(tmp_path)]) == 3
    assert run(["absorb", "--system", "henon", "--zzz", "1", "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.toml"
    bad.write_text("this is [not toml")
    assert run(["absorb", "--config", str(bad), "--out", str(tmp_path)]) == 3
    assert run(["absorb", "--system", "henon", "--threads", "0", "--out", str(tmp_path)]) == 3


def test_violation_exit_code_keeps_report(tmp_path):
    out = tmp_path / "v"
    rc = run(["cover", "--system", "affine_contraction", "--a", "1", "--q", "0.5", "--h", "1", "--kmax", "10",
              "--out", str(out)])
    assert rc == 2
    rep = _json(out / "cover.json")
    assert rep["status"] == "violation" and rep["violation"]["k"] == 1


def test_blow_up_exit_code(tmp_path):
    rc = run(["absorb", "--system", "linear_map", "--matrix", "[[2.0]]", "--horizon", "100", "--out", str(tmp_path)])
    assert rc == 4


def test_config_file_env_seed_and_flag_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        'seed = 5\n[system]\nname = "diag_linear"\n[system.params]\ndiag = [0.8, 0.2]\n'
        '[absorb]\nprobe_count = 16\nprobe_layout = "random"\nhorizon = 50\n'
    )
    out = tmp_path / "r"
    assert run(["absorb", "--config", str(cfg), "--out", str(out)]) == 0
    meta = _json(out / "absorb.json")
    assert meta["seed"] == 5 and meta["params"]["diag"] == [0.8, 0.2] and meta["probes"] == 16
    monkeypatch.setenv("ATTRFORGE_SEED", "11")
    assert run(["absorb", "--config", str(cfg), "--out", str(out), "--probe-count", "9"]) == 0
    meta = _json(out / "absorb.json")
    assert meta["seed"] == 11 and meta["probes"] == 9
    assert run(["absorb", "--config", str(cfg), "--out", str(out), "--seed", "2"]) == 0
    assert _json(out / "absorb.json")["seed"] == 2


def test_full_pipeline_on_diag_linear(tmp_path, capsys):
    out = tmp_path / "d"
    for argv in (["cover", "--system", "diag_linear"], ["build"], ["certify"],
                 ["bounds", "--from", str(out / "certs"), "--optimize-sigma"], ["report", "--run", str(out)]):
        assert run(argv + ["--out", str(out)]) == 0
    certs = {p.stem for p in (out / "certs").glob("*.json")}
    assert {"ladyzhenskaya", "squeezing", "quasi-stability", "c1"} <= certs
    rows = {r["theorem"]: r for r in _json(out / "bounds.json")["rows"]}
    assert rows["ladyzhenskaya-hilbert"]["bound"] <= rows["squeezing"]["bound"]
    assert rows["squeezing"]["bound"] <= rows["squeezing-volume"]["bound"]
    rep = _json(out / "report.json")
    assert rep["system"] == "diag_linear"
    for name in ("plot_box_counts.csv", "plot_cover_counts.csv", "plot_attraction.csv"):
        assert (out / name).read_bytes().count(b"\r\n") >= 2
    assert "ladyzhenskaya-hilbert" in capsys.readouterr().out


def test_bounds_needs_sigma_choice(tmp_path):
    out = tmp_path / "s"
    assert run(["cover", "--system", "diag_linear", "--out", str(out)]) == 0
    assert run(["certify", "--out", str(out)]) == 0
    assert run(["bounds", "--out", str(out)]) == 3
    assert run(["bounds", "--out", str(out), "--sigma", "0.5"]) == 0
    rows = {r["theorem"]: r for r in _json(out / "bounds.json")["rows"]}
    assert rows["squeezing"]["sigma"] == 0.5


def test_dim_and_capacity_commands(tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("".join(f"{i / 1000!r}\r\n" for i in range(1001)))
    assert run(["dim", "--input", str(pts), "--eps", "0.1,0.05,0.025,0.0125", "--out", str(tmp_path / "dd")]) == 0
    assert 0.8 < _json(tmp_path / "dd" / "dim.json")["slope"] <= 1.0
    assert run(["capacity", "--n", "2", "--eps", "1,0.5", "--budget", "3000", "--out", str(tmp_path / "cap")]) == 0
    rows = _json(tmp_path / "cap" / "capacity.json")["rows"]
    assert [r["packing_lb"] for r in rows] == [7, 19]


def test_verify_repro_passes(tmp_path, capsys):
    out = tmp_path / "rr"
    assert run(["cover", "--system", "logistic", "--out", str(out), "--verify-repro", "--threads", "4"]) == 0
    assert "bit-identical" in capsys.readouterr().err


def test_projection_must_be_coordinate_indices(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[system]\nname = "diag_linear"\n[certify]\nprojection = [[1.0, 0.0]]\n')
    out = tmp_path / "r"
    assert run(["cover", "--config", str(cfg), "--out", str(out)]) == 0
    assert run(["certify", "--config", str(cfg), "--out", str(out)]) == 3
