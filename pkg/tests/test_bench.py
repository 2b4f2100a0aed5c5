"""Config parsing, CSV contract, runners and determinism of the harness."""

import math

import numpy as np
import pytest

from nldae.bench import (CSV_HEADER, ConfigError, ExperimentConfig, ResultRow,
                         aggregate, config_hash, gaussian_entropy,
                         load_config_file, parse_config_text, read_csv,
                         run_case, run_experiment, run_toy, write_csv)

FAST = dict(m_train=200, l_test=120, seeds=(1, 2), max_iters=50)


# -- config -------------------------------------------------------------------

def test_parse_full_config():
    cfg = parse_config_text("""
        # a comment
        case = signal
        sweep = noise_param
        grid = 0.1, 0.5, 0.9   # inline comment
        m = 500
        l = 250
        seeds = 1,2,3
        p_prime = 6
        depth = 2
        p_cor = 0.7
        out = somewhere.csv
    """.replace("        ", ""))
    assert cfg.case == "signal" and cfg.sweep == "noise_param"
    assert cfg.grid == (0.1, 0.5, 0.9)
    assert cfg.m_train == 500 and cfg.l_test == 250
    assert cfg.seeds == (1, 2, 3) and cfg.latent_dim == 6 and cfg.depth == 2
    assert cfg.params["p_cor"] == 0.7
    assert cfg.out_path == "somewhere.csv"


@pytest.mark.parametrize("text,match", [
    ("case = signal\nsweep = latent\n", "missing required key 'grid'"),
    ("case = signal\nsweep = latent\ngrid = 9\nwat = 1\n", "unknown config keys"),
    ("case = nope\nsweep = latent\ngrid = 9\n", "case must be"),
    ("case = signal\nsweep = latent\ngrid = 9\ncase = ofdm\n", "duplicate"),
    ("case = signal\nsweep = latent\ngrid = \n", "bad value"),
    ("case = toy1\nsweep = latent\ngrid = 9\n", "toy cases only sweep"),
    ("case = signal\nsweep = latent\ngrid = 9\nm = 0\n", "must be >= 1"),
    ("just words\n", "expected 'key = value'"),
    ("case = ofdm\nsweep = latent\ngrid = 9\np_cor = 0.5\n", "do not apply"),
])
def test_parse_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_config_hash_sensitivity():
    a = ExperimentConfig(case="signal", sweep="latent", grid=(9,), **FAST)
    b = ExperimentConfig(case="signal", sweep="latent", grid=(9,), **FAST)
    assert config_hash(a) == config_hash(b)
    c = ExperimentConfig(case="signal", sweep="latent", grid=(9,),
                         params={"p_cor": 0.5}, **FAST)
    assert config_hash(a) != config_hash(c)


def test_load_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("case = ofdm\nsweep = latent\ngrid = 6,9\n")
    cfg = load_config_file(str(p))
    assert cfg.case == "ofdm" and cfg.grid == (6.0, 9.0)


# -- CSV ------------------------------------------------------------------------

def make_rows():
    return [
        ResultRow("signal", "latent", 9.0, "nlDAE", "mse", 0.1, 0.01, 120, 1, "ab" * 6),
        ResultRow("signal", "latent", 9.0, "DAE", "mse", None, None, 0, 1, "ab" * 6,
                  "DegenerateDataError: constant data, with a comma"),
    ]


def test_csv_round_trip(tmp_path):
    path = tmp_path / "r.csv"
    rows = make_rows()
    write_csv(rows, str(path))
    got = read_csv(str(path))
    assert got[0] == rows[0]
    assert got[1].mean is None and got[1].failure.startswith("DegenerateDataError")
    assert "," not in got[1].failure


def test_csv_header_exact(tmp_path):
    path = tmp_path / "r.csv"
    write_csv([], str(path))
    assert path.read_text() == CSV_HEADER + "\n"
    assert CSV_HEADER == ("case,sweep,sweep_value,method,metric,mean,std_err,"
                          "n_trials,seed,config_hash,failure")
    assert read_csv(str(path)) == []


def test_csv_means_parse_finite_for_success_rows(tmp_path):
    cfg = ExperimentConfig(case="signal", sweep="latent", grid=(9,), **FAST)
    path = tmp_path / "r.csv"
    write_csv(run_case(cfg), str(path))
    for row in read_csv(str(path)):
        if not row.failure:
            assert row.mean is not None and math.isfinite(row.mean)


def test_csv_rejects_wrong_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("nope\n")
    with pytest.raises(ValueError, match="header"):
        read_csv(str(p))


def test_result_row_rejects_negative_std_err():
    with pytest.raises(ValueError):
        ResultRow("signal", "latent", 9.0, "nlDAE", "mse", 0.1, -0.01, 1, 1, "x")


# -- entropy ----------------------------------------------------------------------

def test_entropy_values():
    assert gaussian_entropy(1.0) == pytest.approx(1.4189385332046727, abs=1e-10)
    assert gaussian_entropy(1.0 / math.sqrt(2 * math.pi * math.e)) == pytest.approx(0.0, abs=1e-12)
    assert gaussian_entropy(2.0) > gaussian_entropy(1.0)
    with pytest.raises(ValueError):
        gaussian_entropy(0.0)


# -- runners -----------------------------------------------------------------------

def test_toy_zero_sigma_records_degenerate_point():
    cfg = ExperimentConfig(case="toy1", sweep="noise_param", grid=(0.0, 0.5), **FAST)
    rows = run_toy(cfg)
    z = {r.method: r for r in rows if r.sweep_value == 0.0 and r.seed == 1}
    assert "DegenerateDataError" in z["nlDAE"].failure and z["nlDAE"].mean is None
    assert z["DAE"].mean is not None
    assert z["noisy"].mean == 0.0  # no noise at sigma = 0


def test_toy_noisy_baseline_tracks_sigma_squared():
    cfg = ExperimentConfig(case="toy2", sweep="noise_param", grid=(0.5,),
                           m_train=200, l_test=2000, seeds=(1,), max_iters=5)
    rows = run_toy(cfg)
    noisy = [r for r in rows if r.method == "noisy"][0]
    se = 3.0 * 0.25 * math.sqrt(2.0 / (2000 * 12))
    assert abs(noisy.mean - 0.25) < se


def test_case_depth_sweep_bookkeeping():
    cfg = ExperimentConfig(case="signal", sweep="depth", grid=(1, 2), **FAST)
    rows = run_case(cfg)
    assert len(rows) == 2 * 2 * 3  # grid x seeds x methods
    for value in (1.0, 2.0):
        for seed in (1, 2):
            methods = {r.method for r in rows
                       if r.sweep_value == value and r.seed == seed}
            assert methods == {"nlDAE", "DAE", "nonML"}


def test_case_locate_noise_off_nonml_is_exact():
    cfg = ExperimentConfig(case="locate", sweep="latent", grid=(9,),
                           m_train=50, l_test=40, seeds=(1,), max_iters=5,
                           params={"sigma_n": 0.0, "u_max": 0.0, "p_nlos": 0.0,
                                   "b": 1e-9})
    rows = run_case(cfg)
    by_method = {r.method: r for r in rows}
    assert by_method["nonML"].mean < 1e-6
    # zero noise degenerates the denoiser targets; the failure is recorded
    assert "Degenerate" in by_method["nlDAE"].failure


def test_run_experiment_deterministic(tmp_path):
    cfg = ExperimentConfig(case="ofdm", sweep="latent", grid=(9,),
                           m_train=80, l_test=50, seeds=(1,), max_iters=30)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(run_experiment(cfg), str(a))
    write_csv(run_experiment(cfg), str(b))
    assert a.read_bytes() == b.read_bytes()


def test_rows_are_per_seed_and_metric_labelled():
    cfg = ExperimentConfig(case="locate", sweep="noise_param", grid=(0.2,), **FAST)
    rows = run_case(cfg)
    assert {r.seed for r in rows} == {1, 2}
    assert {r.metric for r in rows} == {"loc_error"}
    assert all(r.n_trials > 0 for r in rows if not r.failure)


def test_aggregate_means_across_seeds():
    cfg = ExperimentConfig(case="signal", sweep="latent", grid=(9,), **FAST)
    rows = run_case(cfg)
    agg = aggregate(rows)
    nl = [a for a in agg if a[3] == "nlDAE"][0]
    per_seed = [r.mean for r in rows if r.method == "nlDAE"]
    assert nl[5] == pytest.approx(np.mean(per_seed))
    assert nl[7] == 2  # seeds


def test_sweep_value_resolution():
    from nldae.bench import _resolve_point
    cfg = ExperimentConfig(case="signal", sweep="latent", grid=(3,), **FAST)
    assert _resolve_point(cfg, 3).latent_dim == 3
    cfg = ExperimentConfig(case="signal", sweep="train_size", grid=(50,), **FAST)
    assert _resolve_point(cfg, 50).m_train == 50
    cfg = ExperimentConfig(case="ofdm", sweep="noise_param", grid=(7.0,), **FAST)
    assert _resolve_point(cfg, 7.0).params["snr_db"] == 7.0
    cfg = ExperimentConfig(case="locate", sweep="depth", grid=(2,), **FAST)
    assert _resolve_point(cfg, 2).depth == 2
