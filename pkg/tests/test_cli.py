"""Command-line behaviour: exit codes, artifacts, selftest."""

import numpy as np

from nldae import bench
from nldae.cli import main
from nldae.denoise import denoise
from nldae.model_io import load_model
from nldae.rng import RngStream


def test_run_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = signal\nsweep = latent\ngrid = 9\n"
                   "m = 100\nl = 60\nseeds = 1\nmax_iters = 30\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rows = bench.read_csv(str(out))
    assert {r.method for r in rows} == {"nlDAE", "DAE", "nonML"}
    assert "wrote" in capsys.readouterr().out


def test_run_seed_override(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = signal\nsweep = latent\ngrid = 9\n"
                   "m = 100\nl = 60\nseeds = 1\nmax_iters = 30\n")
    out = tmp_path / "r.csv"
    assert main(["run", "--config", str(cfg), "--out", str(out),
                 "--seeds", "7,8"]) == 0
    assert {r.seed for r in bench.read_csv(str(out))} == {7, 8}


def test_missing_config_is_exit_code_1(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 1


def test_bad_config_is_exit_code_1(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = bogus\nsweep = latent\ngrid = 9\n")
    assert main(["run", "--config", str(cfg)]) == 1


def test_paper_scale_flag_overrides_sizes(tmp_path, monkeypatch):
    seen = {}

    def fake_run(cfg, rows=None):
        seen["m"], seen["l"] = cfg.m_train, cfg.l_test
        return []

    monkeypatch.setattr(bench, "run_experiment", fake_run)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = signal\nsweep = latent\ngrid = 9\nm = 100\nl = 60\n")
    assert main(["run", "--config", str(cfg), "--paper-scale",
                 "--out", str(tmp_path / "r.csv")]) == 0
    assert seen == {"m": bench.PAPER_TRAIN_SIZE, "l": bench.PAPER_TEST_SIZE}


def test_toy_command(tmp_path):
    out = tmp_path / "toy.csv"
    assert main(["toy", "--example", "1", "--sigma-grid", "0.5", "--m", "150",
                 "--l", "80", "--seeds", "1", "--max-iters", "30",
                 "--out", str(out)]) == 0
    rows = bench.read_csv(str(out))
    assert {r.method for r in rows} == {"nlDAE", "DAE", "noisy"}
    assert all(r.case == "toy1" for r in rows)


def test_save_and_load_model_round_trip(tmp_path, capsys):
    path = tmp_path / "model.txt"
    assert main(["save-model", "--case", "toy2", "--mode", "nlDAE",
                 "--out", str(path), "--m", "150", "--max-iters", "30"]) == 0
    assert main(["load-model", str(path)]) == 0
    out = capsys.readouterr().out
    assert "mode      : nlDAE" in out and "12-9-12" in out
    model = load_model(str(path))
    probe = RngStream(1).uniform(0.0, 2.0, size=24).reshape(2, 12)
    assert np.isfinite(denoise(model, probe)).all()


def test_load_model_missing_file_is_exit_code_1(tmp_path):
    assert main(["load-model", str(tmp_path / "missing.txt")]) == 1


def test_selftest_passes():
    assert main(["selftest"]) == 0
