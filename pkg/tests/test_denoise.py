"""Scaler, training-path and denoising behaviour of the two modes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nldae.denoise import (MODE_DAE, MODE_NLDAE, AdditiveModelError,
                           AffineScaler, DegenerateDataError, DenoiserModel,
                           denoise, denoise_complex, fit_scaler, mse,
                           regenerate, train_denoiser)
from nldae.nn import MlpParams, TrainConfig, mean_loss, Dataset, params_flatten
from nldae.rng import RngStream

FAST = TrainConfig(max_iters=60)


def toy_triple(count=400, p=12, sigma=0.5, seed=1):
    r = RngStream(seed)
    x = r.uniform(0.0, 2.0 * np.sqrt(3.0), size=count * p).reshape(count, p)
    n = r.normal(0.0, sigma, size=count * p).reshape(count, p)
    return x + n, x, n


# -- scaler -------------------------------------------------------------------

def test_scaler_midpoint():
    s = fit_scaler(np.array([0.0, 10.0]), 0.0, 1.0)
    assert s.apply(np.array([5.0]))[0] == 0.5


def test_scaler_round_trip():
    s = fit_scaler(np.array([-2.0, 7.0]))
    v = RngStream(2).uniform(-2.0, 7.0, size=1000)
    assert np.abs(s.invert(s.apply(v)) - v).max() < 7e-12


def test_scaler_extends_beyond_range():
    s = fit_scaler(np.array([0.0, 10.0]), 0.0, 1.0)
    assert s.apply(np.array([20.0]))[0] == pytest.approx(2.0)


def test_scaler_rejects_constant_data():
    with pytest.raises(DegenerateDataError):
        fit_scaler(np.full(10, 3.3))


@given(lo=st.floats(-1e6, 1e6), width=st.floats(1e-3, 1e6),
       frac=st.floats(0.0, 1.0))
@settings(max_examples=100, deadline=None)
def test_property_scaler_round_trip(lo, width, frac):
    s = AffineScaler(lo, lo + width)
    v = lo + frac * width
    assert s.invert(s.apply(np.array([v])))[0] == pytest.approx(v, rel=1e-12, abs=1e-9)


# -- training ---------------------------------------------------------------

def test_zero_noise_degenerates_nldae():
    noisy, clean, _ = toy_triple(sigma=0.0)
    with pytest.raises(DegenerateDataError):
        train_denoiser(MODE_NLDAE, noisy, clean, np.zeros_like(clean),
                       9, 1, FAST, RngStream(3))


def test_training_reduces_loss():
    noisy, clean, noise = toy_triple(count=2000, seed=4)
    r = RngStream(5)
    model = train_denoiser(MODE_NLDAE, noisy, clean, noise, 9, 1, FAST, r.split(0))
    data = Dataset(model.scaler_in.apply(noisy), model.scaler_out.apply(noise))
    from nldae.nn import mlp_init
    init = mlp_init(model.mlp.dims, RngStream(5).split(0))
    assert mean_loss(model.mlp, data) < mean_loss(init, data)


def test_modes_share_input_scaler_and_initial_weights():
    noisy, clean, noise = toy_triple(seed=6)
    dae = train_denoiser(MODE_DAE, noisy, clean, noise, 9, 1, FAST, RngStream(7))
    nl = train_denoiser(MODE_NLDAE, noisy, clean, noise, 9, 1, FAST, RngStream(7))
    assert dae.scaler_in == nl.scaler_in
    assert dae.scaler_out != nl.scaler_out
    assert not np.array_equal(params_flatten(dae.mlp), params_flatten(nl.mlp))
    # same stream state implies both modes start from identical weights
    from nldae.nn import mlp_init
    assert np.array_equal(params_flatten(mlp_init((12, 9, 12), RngStream(7))),
                          params_flatten(mlp_init((12, 9, 12), RngStream(7))))


def test_additive_violation_rejected():
    noisy, clean, noise = toy_triple(seed=8)
    with pytest.raises(AdditiveModelError):
        train_denoiser(MODE_DAE, noisy + 1e-6, clean, noise, 9, 1, FAST, RngStream(9))


def test_latent_dim_must_be_a_bottleneck():
    noisy, clean, noise = toy_triple(seed=10)
    with pytest.raises(ValueError):
        train_denoiser(MODE_DAE, noisy, clean, noise, 12, 1, FAST, RngStream(11))


# -- denoising ----------------------------------------------------------------

def trained_pair(seed=12, sigma=0.5, count=600):
    noisy, clean, noise = toy_triple(count=count, sigma=sigma, seed=seed)
    r = RngStream(seed + 100)
    nl = train_denoiser(MODE_NLDAE, noisy, clean, noise, 9, 1, FAST, r.split(0))
    dae = train_denoiser(MODE_DAE, noisy, clean, noise, 9, 1, FAST, r.split(0))
    return nl, dae


def test_nldae_subtraction_identity_bitwise():
    nl, _ = trained_pair()
    y = RngStream(13).uniform(-1.0, 5.0, size=1000 * 12).reshape(1000, 12)
    assert np.array_equal(denoise(nl, y), y - regenerate(nl, y))


def test_nldae_rearranged_identities_to_float_precision():
    nl, _ = trained_pair(seed=14)
    y = RngStream(15).uniform(-1.0, 5.0, size=200 * 12).reshape(200, 12)
    out = denoise(nl, y)
    rn = regenerate(nl, y)
    assert np.abs((y - out) - rn).max() < 1e-12
    assert np.abs((out + rn) - y).max() < 1e-12


def test_untrained_dae_zero_weights_is_constant():
    scaler = AffineScaler(0.0, 1.0)
    mlp = MlpParams((4, 3, 4), [np.zeros((3, 4)), np.zeros((4, 3))],
                    [np.zeros(3), np.zeros(4)])
    m = DenoiserModel(MODE_DAE, mlp, scaler, AffineScaler(-2.0, 6.0))
    ys = RngStream(16).uniform(0.0, 1.0, size=3 * 4).reshape(3, 4)
    out = denoise(m, ys)
    expected = m.scaler_out.invert(np.full(4, 0.5))
    assert np.allclose(out, expected[None, :], rtol=0, atol=0)


def test_trained_nldae_beats_raw_input():
    nl, _ = trained_pair(seed=17)
    noisy_t, clean_t, _ = toy_triple(count=1000, sigma=0.5, seed=18)
    assert mse(denoise(nl, noisy_t), clean_t) < mse(noisy_t, clean_t)


def test_denoise_complex_keeps_channels_separate():
    nl, _ = trained_pair(seed=19)
    nl_im, _ = trained_pair(seed=20)
    y = RngStream(21).uniform(0.0, 3.0, size=5 * 12).reshape(5, 12).astype(complex)
    out = denoise_complex(nl, nl_im, y)  # purely real input
    assert np.array_equal(out.real, denoise(nl, y.real))
    assert np.array_equal(out.imag, denoise(nl_im, np.zeros_like(y.real)))


def test_denoise_complex_rejects_mode_mismatch():
    nl, dae = trained_pair(seed=22)
    with pytest.raises(ValueError):
        denoise_complex(nl, dae, np.zeros(12, complex))


# -- mse ------------------------------------------------------------------------

def test_mse_values():
    a = np.zeros((1, 12))
    assert mse(a, a) == 0.0
    assert mse(np.ones((1, 12)), np.zeros((1, 12))) == 1.0


def test_mse_matches_noise_variance():
    noisy, clean, _ = toy_triple(count=5000, sigma=0.7, seed=23)
    got = mse(noisy, clean)
    se = 3.0 * (0.7 ** 2) * np.sqrt(2.0 / (5000 * 12))  # 3 SE of a chi^2 mean
    assert abs(got - 0.49) < se


def test_mse_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        mse(np.zeros((2, 3)), np.zeros((3, 2)))
