"""Case study I: damped-sinusoid signals corrupted by constant-magnitude hits.

A clean vector is P samples of a superposition of k damped sinusoids; the
corruption adds a constant C at sample positions drawn i.i.d. Bernoulli.
Every dataset sample redraws the sinusoid parameters, so the clean signal is
a nondegenerate random vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .rng import RngStream

SAMPLE_DT = 0.5e-4  # s
SIGNAL_LEN = 12
DEFAULT_NUM_SINUSOIDS = 3
DAMPING_MAX = 1e3   # 1/s
FREQ_MAX = 1e4      # Hz


@dataclass(frozen=True)
class SinusoidParams:
    """Amplitudes, dampings (1/s) and frequencies (Hz) of the k components."""

    amplitudes: np.ndarray
    dampings: np.ndarray
    freqs: np.ndarray
    dt: float = SAMPLE_DT
    n_samples: int = SIGNAL_LEN

    def __post_init__(self):
        for name in ("amplitudes", "dampings", "freqs"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), float)))
        k = self.amplitudes.size
        if self.dampings.size != k or self.freqs.size != k or k < 1:
            raise ValueError("amplitudes, dampings and freqs must have equal length >= 1")
        if (self.dampings < 0).any():
            raise ValueError("damping factors must be >= 0")
        if self.dt <= 0 or self.n_samples < 1:
            raise ValueError("need dt > 0 and n_samples >= 1")
        if not 1.0 / (2.0 * self.dt) > float(self.freqs.max()):
            raise ValueError(f"Nyquist violation: 1/(2*dt) = {1.0 / (2.0 * self.dt):g} Hz "
                             f"must exceed max frequency {float(self.freqs.max()):g} Hz")

    @property
    def k(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class CorruptionSpec:
    """Bernoulli corruption probability and the constant added when it hits."""

    p_cor: float = 0.9
    magnitude: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p_cor <= 1.0:
            raise ValueError(f"p_cor must be in [0, 1], got {self.p_cor}")


def gen_signal(sp: SinusoidParams) -> np.ndarray:
    """x[n] = sum_l V_l * exp(-gamma_l n dt) * cos(2 pi f_l n dt), n = 0..P-1."""
    n = np.arange(sp.n_samples, dtype=float)
    t = n * sp.dt
    comps = sp.amplitudes[:, None] * np.exp(-sp.dampings[:, None] * t) \
        * np.cos(2.0 * np.pi * sp.freqs[:, None] * t)
    return comps.sum(axis=0)


def sinusoid_sampler(k: int = DEFAULT_NUM_SINUSOIDS, dt: float = SAMPLE_DT,
                     n_samples: int = SIGNAL_LEN) -> Callable[[RngStream], SinusoidParams]:
    """Per-sample parameter policy: V ~ N(0,1), gamma ~ U(0,1e3), f ~ U(0,10kHz)."""
    def draw(r: RngStream) -> SinusoidParams:
        return SinusoidParams(amplitudes=r.normal(0.0, 1.0, size=k),
                              dampings=r.uniform(0.0, DAMPING_MAX, size=k),
                              freqs=r.uniform(0.0, FREQ_MAX, size=k),
                              dt=dt, n_samples=n_samples)
    return draw


def corrupt(x: np.ndarray, spec: CorruptionSpec,
            r: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Return (y, mask) with y = x + C * mask and mask ~ Ber(p_cor) i.i.d."""
    x = np.asarray(x, float)
    mask = r.bernoulli(spec.p_cor, size=x.size)
    return x + spec.magnitude * mask, mask


def make_case1_dataset(count: int, sampler: Callable[[RngStream], SinusoidParams],
                       spec: CorruptionSpec,
                       r: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Aligned (noisy, clean, noise) arrays of shape (count, P).

    Each row redraws the sinusoid parameters and the corruption mask; the
    additive identity noisy = clean + noise holds exactly.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    clean_rows, noise_rows = [], []
    for i in range(count):
        ri = r.split(i)  # one stream per sample; params then mask draw from it
        x = gen_signal(sampler(ri))
        _, mask = corrupt(x, spec, ri)
        clean_rows.append(x)
        noise_rows.append(spec.magnitude * mask)
    clean = np.stack(clean_rows)
    noise = np.stack(noise_rows).astype(float)
    return clean + noise, clean, noise
