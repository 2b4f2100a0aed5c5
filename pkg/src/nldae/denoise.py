"""The two denoisers: DAE (regenerate the data) and nlDAE (regenerate the noise).

Both share one architecture and one training path; the only difference is the
target set handed to the trainer.  Because the decoder is sigmoid-bounded,
inputs and targets are affinely mapped into (0, 1) by scalers fitted on the
training set and frozen afterwards.  An nlDAE model denoises by subtracting
its regenerated noise from the input (the DAE returns its output directly).
Complex data is handled by a pair of models on the real/imaginary parts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Dataset, MlpParams, TrainConfig, forward, mlp_init, scg_train
from .rng import RngStream

MODE_DAE = "DAE"
MODE_NLDAE = "nlDAE"
MODES = (MODE_DAE, MODE_NLDAE)

ADDITIVE_TOL = 1e-9


class DegenerateDataError(ValueError):
    """All samples identical where a spread is required (e.g. zero noise)."""


class AdditiveModelError(ValueError):
    """The provided triple violates noisy = clean + noise."""


@dataclass(frozen=True)
class AffineScaler:
    """Affine map [lo, hi] -> [a, b]; applied/inverted without clamping."""

    lo: float
    hi: float
    a: float = 0.05
    b: float = 0.95

    def __post_init__(self):
        if not self.hi > self.lo:
            raise DegenerateDataError(f"scaler needs hi > lo, got [{self.lo}, {self.hi}]")
        if not self.b > self.a:
            raise ValueError(f"scaler needs b > a, got [{self.a}, {self.b}]")

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.a + (np.asarray(v, float) - self.lo) * ((self.b - self.a) / (self.hi - self.lo))

    def invert(self, u: np.ndarray) -> np.ndarray:
        return self.lo + (np.asarray(u, float) - self.a) * ((self.hi - self.lo) / (self.b - self.a))


def fit_scaler(samples: np.ndarray, a: float = 0.05, b: float = 0.95) -> AffineScaler:
    """Scaler mapping the observed [min, max] of `samples` onto [a, b]."""
    samples = np.asarray(samples, float)
    if samples.size == 0:
        raise ValueError("cannot fit a scaler on no data")
    lo, hi = float(samples.min()), float(samples.max())
    if not hi > lo:
        raise DegenerateDataError(f"constant data (all values = {lo}); scaler undefined")
    return AffineScaler(lo, hi, a, b)


@dataclass(frozen=True)
class DenoiserModel:
    """A trained denoiser: mode flag, MLP, and the frozen training scalers."""

    mode: str
    mlp: MlpParams
    scaler_in: AffineScaler
    scaler_out: AffineScaler

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def input_dim(self) -> int:
        return self.mlp.dims[0]

    @property
    def latent_dim(self) -> int:
        return self.mlp.dims[1]

    @property
    def depth(self) -> int:
        return len(self.mlp.dims) - 2


def train_denoiser(mode: str, noisy: np.ndarray, clean: np.ndarray, noise: np.ndarray,
                   latent_dim: int, depth: int, cfg: TrainConfig,
                   r: RngStream) -> DenoiserModel:
    """Train one denoiser on an additive triple (noisy = clean + noise).

    DAE learns noisy -> clean, nlDAE learns noisy -> noise; everything else
    (scaling, architecture, optimiser schedule) is shared, so two models
    trained from the same stream state start from identical weights.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    noisy, clean, noise = (np.asarray(v, float) for v in (noisy, clean, noise))
    if not (noisy.ndim == 2 and noisy.shape == clean.shape == noise.shape):
        raise ValueError(f"expected matching (M, P) arrays, got "
                         f"{noisy.shape}/{clean.shape}/{noise.shape}")
    p = noisy.shape[1]
    if not 1 <= latent_dim < p:
        raise ValueError(f"latent_dim must be in [1, {p}), got {latent_dim}")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    gap = float(np.abs(noisy - clean - noise).max())
    if gap > ADDITIVE_TOL:
        raise AdditiveModelError(f"noisy - clean - noise deviates by {gap:.3e} "
                                 f"(allowed {ADDITIVE_TOL:.0e})")

    targets = clean if mode == MODE_DAE else noise
    scaler_in = fit_scaler(noisy)
    scaler_out = fit_scaler(targets)
    dims = (p,) + (latent_dim,) * depth + (p,)
    mlp0 = mlp_init(dims, r)
    mlp = scg_train(mlp0, Dataset(scaler_in.apply(noisy), scaler_out.apply(targets)), cfg)
    return DenoiserModel(mode, mlp, scaler_in, scaler_out)


def regenerate(m: DenoiserModel, y: np.ndarray) -> np.ndarray:
    """Raw network regeneration mapped back to data units.

    For a DAE this is the denoised estimate itself; for an nlDAE it is the
    regenerated noise.
    """
    return m.scaler_out.invert(forward(m.mlp, m.scaler_in.apply(y)))


def denoise(m: DenoiserModel, y: np.ndarray) -> np.ndarray:
    """Denoised estimate for one vector (P,) or a batch (L, P).

    nlDAE output is computed literally as y - regenerate(m, y), so that
    identity holds bit-for-bit.
    """
    if m.mode == MODE_DAE:
        return regenerate(m, y)
    return np.asarray(y, float) - regenerate(m, y)


def denoise_complex(m_re: DenoiserModel, m_im: DenoiserModel, y: np.ndarray) -> np.ndarray:
    """Denoise complex data channel-wise: real and imaginary parts never mix."""
    if m_re.mode != m_im.mode:
        raise ValueError(f"mode mismatch: {m_re.mode} vs {m_im.mode}")
    if m_re.input_dim != m_im.input_dim:
        raise ValueError(f"width mismatch: {m_re.input_dim} vs {m_im.input_dim}")
    y = np.asarray(y, complex)
    return denoise(m_re, y.real) + 1j * denoise(m_im, y.imag)


def mse(est: np.ndarray, truth: np.ndarray) -> float:
    """Per-element mean squared error over a collection of vectors."""
    est, truth = np.asarray(est), np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {truth.shape}")
    d = np.abs(est - truth)
    return float(np.mean(d * d))
