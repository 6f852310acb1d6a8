from __future__ import annotations

import json

import pytest

from wicknls.cli import main


def _run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_enumerate_regular_order_three(tmp_path, capsys):
    assert _run(tmp_path, "enumerate", "--order", "3", "--regular") == 0
    assert "96" in capsys.readouterr().out
    body = json.loads((tmp_path / "enumerate_order3_regular.json").read_text())
    assert body["count"] == 96 and len(body["couples"]) == 96 and "config_hash" in body


def test_identical_configs_give_identical_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["theta", "--seed", "4", "--out", str(out)]) == 0
    assert (a / "theta.csv").read_bytes() == (b / "theta.csv").read_bytes()


def test_alpha_out_of_range_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "theta", "--alpha", "2.5") == 1
    assert "(0, 2)" in capsys.readouterr().err


def test_bad_config_field(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"profile": {"k_decay": -2}}))
    assert _run(tmp_path, "theta", "--config", str(cfg)) == 1
    assert "profile.k_decay" in capsys.readouterr().err


def test_budget_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "enumerate", "--order", "5", "--limit", "10") == 2
    assert "budget" in capsys.readouterr().err


def test_count_lattice(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L_sweep": [2, 4]}))
    assert _run(tmp_path, "count-lattice", "--config", str(cfg)) == 0
    lines = (tmp_path / "count_lattice.csv").read_text().splitlines()
    assert lines[0].startswith("L,") and len(lines) == 3


def test_osc_converge(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L_sweep": [4, 8]}))
    assert _run(tmp_path, "osc-converge", "--config", str(cfg)) == 0
    assert (tmp_path / "osc_converge.csv").exists()


def test_spectrum(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L_sweep": [2], "t": 0.5, "radius": 1.0, "profile": {"k_decay": 2.0}}))
    assert _run(tmp_path, "spectrum", "--config", str(cfg)) == 0
    assert len((tmp_path / "spectrum.csv").read_text().splitlines()) == 3


def test_kinetic_solve(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"T": 0.125, "dt": 0.125, "profile": {"amplitude": 0.8, "k_decay": 2.0},
                               "grid": {"m": 5}, "quadrature": {"radial": 4, "polar": 3, "azimuth": 4,
                                                                "plane_radial": 4, "plane_angle": 4}}))
    assert _run(tmp_path, "kinetic-solve", "--config", str(cfg)) == 0
    side = json.loads((tmp_path / "trajectory_W.json").read_text())
    assert side["times"] == [0.0, 0.125] and "config_hash" in side
    assert (tmp_path / "trajectory_W.npz").exists()


def test_mc_validate(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"L_sweep": [2], "order": 0, "nsamples": 200, "radius": 1.0,
                               "profile": {"k_decay": 2.0}}))
    assert _run(tmp_path, "mc-validate", "--config", str(cfg)) == 0
    body = json.loads((tmp_path / "mc_validate.json").read_text())
    assert body["nsamples"] == 200


def test_acceptance_subset(tmp_path, capsys):
    assert _run(tmp_path, "acceptance", "--criteria", "1", "2") == 0
    out = capsys.readouterr().out
    assert "criterion  1" in out and "criterion  2" in out
    body = json.loads((tmp_path / "acceptance.json").read_text())
    assert body["all_passed"]


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
