import json
import math
import os

import pytest

from fqcp import adaptive as ad
from fqcp.cli import main
from fqcp.model import ModelParams, build_circuit


def run(*args):
    return main([str(a) for a in args])


def test_dephased_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("dephased", "--p-grid", "0.15,0.25", "--t", 20, "--shots", 3000,
                   "--seed", 4, "--threads", 2 if name == "a" else 1, "--out", tmp_path / name) == 0
    for f in ("series.csv", "density.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    meta = json.loads((tmp_path / "a" / "run.json").read_text())
    assert meta["config"]["shots"] == 3000 and len(meta["seeds"]) == 2


def test_config_file_and_override(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[run]\np_grid = 0.2 0.3\nt = 5\nshots = 500\n")
    assert run("dephased", "--config", ini, "--shots", 700, "--out", tmp_path / "o") == 0
    meta = json.loads((tmp_path / "o" / "run.json").read_text())
    assert meta["config"]["shots"] == 700 and meta["config"]["p_grid"] == [0.2, 0.3]
    ini.write_text("[run]\nbogus = 1\n")
    assert run("dephased", "--config", ini, "--out", tmp_path / "o") == 2


def test_exit_codes(tmp_path):
    assert run("dm", "--out", tmp_path) == 2
    assert run("dephased", "--p", 1.5, "--out", tmp_path) == 2
    assert run("dm", "--p", 0.2, "--t", 8, "--out", tmp_path) == 3
    assert run("adaptive", "--p", 0.2, "--t", 2, "--backend", "physical_trajectory",
               "--shots", 2, "--out", tmp_path) == 3


def test_dm_report(tmp_path):
    assert run("dm", "--p-grid", "0.1,0.2", "--t", 3, "--out", tmp_path) == 0
    rep = json.loads((tmp_path / "resources.json").read_text())
    assert [r["t"] for r in rep["per_t"]] == [1, 2, 3]
    assert set(rep["gates_executed"].values()) == {rep["per_t"][-1]["two_qubit_gates"]}
    assert (tmp_path / "profiles.csv").exists()


def test_ftcheck(tmp_path, capsys):
    assert run("ftcheck", "--out", tmp_path) == 0
    reports = {r["gadget"]: r for r in json.loads((tmp_path / "ftcheck.json").read_text())}
    assert reports["stab_meas"]["fault_tolerant"]
    assert reports["reset_00_accepted"]["fault_tolerant"]
    assert not reports["crx_inter"]["fault_tolerant"]


def test_adaptive_then_reweight(tmp_path):
    c = build_circuit(ModelParams(3 * math.pi / 4, 0.2, 4))
    ad.RateField.from_function(c, lambda r, t: 0.03 * t).write_csv(tmp_path / "ramp.csv")
    args = ("adaptive", "--p", 0.2, "--t", 4, "--detect-field", tmp_path / "ramp.csv", "--shots", 5000)
    assert run(*args, "--out", tmp_path / "ad") == 0
    assert run(*args, "--out", tmp_path / "ad2") == 0
    assert (tmp_path / "ad" / "records.jsonl").read_bytes() == (tmp_path / "ad2" / "records.jsonl").read_bytes()
    assert run("reweight", "--p", 0.2, "--records", tmp_path / "ad" / "records.jsonl",
               "--out", tmp_path / "rw") == 0
    rows = (tmp_path / "rw" / "reweighted_rates.csv").read_text().splitlines()[1:]
    for row in rows:
        _, _, p, se = map(float, row.split(","))
        assert abs(p - 0.2) < 4 * se + 1e-12
    assert run("adaptive", "--p", 0.05, "--t", 4, "--detect-field", tmp_path / "ramp.csv",
               "--shots", 100, "--out", tmp_path / "bad") == 2
    wrong = build_circuit(ModelParams(1.0, 0.2, 2))
    ad.RateField.uniform(wrong, 0.01).write_csv(tmp_path / "small.csv")
    assert run("adaptive", "--p", 0.2, "--t", 4, "--detect-field", tmp_path / "small.csv",
               "--shots", 100, "--out", tmp_path / "bad") == 2


def test_analyze(tmp_path):
    assert run("dephased", "--p-grid", "0.15,0.2,0.25", "--t", 40, "--shots", 20000,
               "--out", tmp_path / "d") == 0
    assert run("analyze", "--series", tmp_path / "d" / "series.csv", "--dt", 10,
               "--times", "10,20,30", "--out", tmp_path / "a") == 0
    cr = json.loads((tmp_path / "a" / "crossing.json").read_text())
    assert 0.1 < cr["p_c"] < 0.3
    assert run("analyze", "--out", tmp_path / "a") == 2
