"""Noise-learning denoising autoencoder benchmark suite.

Implements the nlDAE denoiser (learn the noise, subtract it) next to the
classic DAE and non-ML baselines, evaluated on three simulated tasks:
damped-sinusoid signal restoration, OFDM symbol demodulation and ToA-based
2-D localization.
"""

from .denoise import (AffineScaler, DenoiserModel, MODE_DAE, MODE_NLDAE,
                      denoise, denoise_complex, fit_scaler, mse, regenerate,
                      train_denoiser)
from .model_io import load_model, save_model
from .nn import Dataset, MlpParams, TrainConfig, forward, gradient, loss_sq, scg_train
from .rng import RngStream, rng_new, split

__version__ = "0.1.0"

__all__ = [
    "AffineScaler", "Dataset", "DenoiserModel", "MlpParams", "MODE_DAE",
    "MODE_NLDAE", "RngStream", "TrainConfig", "denoise", "denoise_complex",
    "fit_scaler", "forward", "gradient", "load_model", "loss_sq", "mse",
    "regenerate", "rng_new", "save_model", "scg_train", "split",
    "train_denoiser", "__version__",
]
