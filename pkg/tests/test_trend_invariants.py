"""Desk-scale trend invariants that need trained models (slower than units)."""

import numpy as np
import pytest

from nldae.bench import ExperimentConfig, run_case
from nldae.denoise import (MODE_NLDAE, denoise_complex, mse, train_denoiser)
from nldae.nn import TrainConfig
from nldae.ofdm import OfdmScenario, make_case2_dataset
from nldae.rng import RngStream

SEEDS = (1, 2, 3, 4, 5)


def test_ofdm_ser_improves_with_snr():
    cfg = ExperimentConfig(case="ofdm", sweep="noise_param", grid=(0.0, 10.0),
                           m_train=2000, l_test=1000, seeds=SEEDS)
    rows = run_case(cfg)

    def nl(snr):
        return {r.seed: r.mean for r in rows
                if r.method == "nlDAE" and r.sweep_value == snr}

    low, high = nl(0.0), nl(10.0)
    wins = sum(high[s] < low[s] for s in SEEDS)
    assert wins >= 4, f"SER at 10 dB below SER at 0 dB in only {wins}/5 seeds"


def test_complex_denoising_beats_raw_received_signal():
    sc = OfdmScenario()  # SNR 5 dB defaults
    r = RngStream(77)
    train = make_case2_dataset(2000, sc, r.split(0))
    test = make_case2_dataset(1000, sc, r.split(1))
    tc = TrainConfig()
    m_re = train_denoiser(MODE_NLDAE, train.noisy.real, train.clean.real,
                          train.noise.real, 9, 1, tc, r.split(2))
    m_im = train_denoiser(MODE_NLDAE, train.noisy.imag, train.clean.imag,
                          train.noise.imag, 9, 1, tc, r.split(3))
    x_tilde = denoise_complex(m_re, m_im, test.noisy)
    assert mse(x_tilde, test.clean) < mse(test.noisy, test.clean)


def test_all_reported_metrics_finite_and_non_negative():
    cfg = ExperimentConfig(case="signal", sweep="latent", grid=(6, 9),
                           m_train=150, l_test=100, seeds=(1,), max_iters=40)
    for row in run_case(cfg):
        if not row.failure:
            assert np.isfinite(row.mean) and row.mean >= 0.0
            assert np.isfinite(row.std_err) and row.std_err >= 0.0
