import json
import os

import pytest

from arrayqed.cli import main
from arrayqed.io import read_table, sha256

FAST = ["--set", "lattice.nx=6", "--set", "lattice.ny=6"]


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def test_usage_errors_exit_2(tmp_path, capsys):
    assert main(["nonsense"]) == 2
    code, _ = run(tmp_path, "x", "params", "--set", "lattice.bogus=1")
    assert code == 2
    assert "lattice.bogus" in capsys.readouterr().err
    assert run(tmp_path, "y", "params", "--set", "lattice.nx=two")[0] == 2
    assert run(tmp_path, "z", "reproduce", "fig9")[0] == 2
    assert run(tmp_path, "w", "params", "--config", str(tmp_path / "missing.yaml"))[0] == 2


def test_physics_error_exits_1(tmp_path):
    # d/a = 2 does not fit a 2-site grid
    assert run(tmp_path, "g", "params", "--set", "lattice.nx=2", "--set", "lattice.ny=2")[0] == 1


def test_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("lattice:\n  nx: 6\n  ny: 6\n  spacing: 0.25\nseed: 4\n")
    code, out = run(tmp_path, "p", "params", "--config", str(cfg))
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    assert m["config"]["lattice"]["spacing"] == 0.25 and m["seed"] == 4


def test_params_free_pair(tmp_path):
    code, out = run(tmp_path, "p", "params", "--set", "lattice.nx=1", "--set", "lattice.ny=2",
                    "--set", "lattice.site_ratio=1")
    assert code == 0
    row = read_table(str(out / "params.csv"))[0]
    assert float(row["re_sigma1"]) == 0 and float(row["im_sigma1"]) == 0
    assert float(row["gamma_coop"]) == 1.0


def test_manifest_checksums(tmp_path):
    code, out = run(tmp_path, "s", "sense", *FAST)
    assert code == 0
    m = json.loads((out / "manifest.json").read_text())
    for name, digest in m["outputs"].items():
        assert sha256(str(out / name)) == digest
    assert m["physicality"]["sense"] == {"ok": 1}


def test_reruns_byte_identical(tmp_path):
    _, a = run(tmp_path, "a", "disorder", *FAST, "--set", "disorder.n_real=2",
               "--set", "disorder.sigma_pos=[0.0,0.1]")
    _, b = run(tmp_path, "b", "disorder", *FAST, "--set", "disorder.n_real=2",
               "--set", "disorder.sigma_pos=[0.0,0.1]", "--threads", "2")
    for f in ("disorder_records.csv", "disorder_aggregates.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_heatmap_cell_equals_sense(tmp_path):
    args = [*FAST, "--set", "protocol.Delta_add=0.3", "--set", "protocol.t0=40"]
    _, s = run(tmp_path, "s", "sense", *args)
    _, h = run(tmp_path, "h", "scan", *FAST, "--set", "scan.kind=heatmap",
               "--set", "scan.n_delta=1", "--set", "scan.n_t=1",
               "--set", "scan.Delta_add_min=0.3", "--set", "scan.Delta_add_max=0.3",
               "--set", "scan.t0_min=40", "--set", "scan.t0_max=40")
    a = read_table(str(s / "sense.csv"))[0]
    b = read_table(str(h / "scan.csv"))[0]
    assert float(a["sigma"]) == pytest.approx(float(b["sigma"]), rel=1e-12)
    assert float(a["p"]) == pytest.approx(float(b["p"]), rel=1e-12)


def test_clean_disorder_matches_sense(tmp_path):
    _, s = run(tmp_path, "s", "sense", *FAST)
    _, d = run(tmp_path, "d", "disorder", *FAST, "--set", "disorder.n_real=1",
               "--set", "disorder.sigma_pos=[0.0]")
    a = read_table(str(s / "sense.csv"))[0]
    b = read_table(str(d / "disorder_records.csv"))[0]
    assert float(b["sigma_standard"]) == pytest.approx(float(a["sigma"]), rel=1e-12)


def test_dynamics_table(tmp_path):
    code, out = run(tmp_path, "dyn", "dynamics", *FAST, "--set", "protocol.n_t=11")
    assert code == 0
    rows = read_table(str(out / "dynamics.csv"))
    assert {r["method"] for r in rows} == {"closed_form", "eigen_2x2"}
    cf = [float(r["pop1"]) for r in rows if r["method"] == "closed_form"]
    ei = [float(r["pop1"]) for r in rows if r["method"] == "eigen_2x2"]
    assert cf == pytest.approx(ei, abs=1e-10)


def test_default_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("ARRAYQED_OUT", str(tmp_path / "root"))
    assert main(["params", *FAST]) == 0
    assert os.path.exists(tmp_path / "root" / "params" / "params.csv")
