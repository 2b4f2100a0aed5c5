"""Case study II: OFDM symbol demodulation over a multipath channel.

Frequency-domain model: the received vector is y = d o h + n, where d holds
unit-power QAM symbols (pilots at fixed positions), h is the channel
frequency response of a sparse multipath profile, and n is circularly
symmetric complex Gaussian noise.  The receiver estimates h from the pilots
with a natural cubic spline and demodulates by nearest constellation point
after equalisation.  Denoising (if any) is applied to y before estimation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rng import RngStream

EQUALIZE_EPS = 1e-12


def square_qam(order: int) -> np.ndarray:
    """Square QAM constellation normalised to unit average power.

    Index order: row-major over (I, Q) levels, so 4-QAM is
    [(1+1j), (1-1j), (-1+1j), (-1-1j)] / sqrt(2).
    """
    side = int(round(np.sqrt(order)))
    if side * side != order or side < 2:
        raise ValueError(f"order must be a perfect square >= 4, got {order}")
    levels = (side - 1) - 2.0 * np.arange(side)  # descending: +(side-1) .. -(side-1)
    pts = (levels[:, None] + 1j * levels[None, :]).ravel()
    return pts / np.sqrt(np.mean(np.abs(pts) ** 2))


@dataclass(frozen=True)
class OfdmScenario:
    n_subcarriers: int = 12
    subcarrier_spacing: float = 15e3
    n_paths: int = 4
    pilot_spacing: int = 3
    pilot_offset: int = 1  # pilots at offset + n*spacing; 0-based subcarriers
    snr_db: float = 5.0
    delay_max: float = 1e-6
    qam_order: int = 4

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.pilot_spacing < 2:
            raise ValueError(f"pilot_spacing must be >= 2, got {self.pilot_spacing}")
        if not 0 <= self.pilot_offset < self.pilot_spacing:
            raise ValueError(f"pilot_offset must be in [0, {self.pilot_spacing})")
        if len(self.pilot_indices) < 2:
            raise ValueError("scenario must place at least 2 pilots")

    @cached_property
    def pilot_indices(self) -> np.ndarray:
        return np.arange(self.pilot_offset, self.n_subcarriers, self.pilot_spacing)

    @cached_property
    def data_indices(self) -> np.ndarray:
        mask = np.ones(self.n_subcarriers, bool)
        mask[self.pilot_indices] = False
        return np.nonzero(mask)[0]

    @cached_property
    def constellation(self) -> np.ndarray:
        return square_qam(self.qam_order)

    @property
    def pilot_symbol(self) -> complex:
        return complex(self.constellation[0])


@dataclass(frozen=True)
class ChannelRealization:
    """Sparse multipath profile and its channel frequency response."""

    alpha: np.ndarray  # complex path gains
    tau: np.ndarray    # path delays, s
    h: np.ndarray      # CFR over the subcarriers


def cfr_from_paths(alpha: np.ndarray, tau: np.ndarray, sc: OfdmScenario) -> np.ndarray:
    """h[n] = sum_l alpha_l * exp(-2j pi n Df tau_l)."""
    n = np.arange(sc.n_subcarriers)
    phase = np.exp(-2j * np.pi * np.outer(n, sc.subcarrier_spacing * np.asarray(tau)))
    return phase @ np.asarray(alpha, complex)


def gen_symbols(sc: OfdmScenario, r: RngStream) -> np.ndarray:
    """Uniform QAM draw per subcarrier, pilots overwritten with the pilot symbol."""
    idx = r.integers(len(sc.constellation), size=sc.n_subcarriers)
    d = sc.constellation[idx]
    d[sc.pilot_indices] = sc.pilot_symbol
    return d


def gen_cfr(sc: OfdmScenario, r: RngStream) -> ChannelRealization:
    """Path gains ~ CN(0,1), delays ~ U(0, delay_max)."""
    alpha = r.complex_normal(1.0, size=sc.n_paths)
    tau = r.uniform(0.0, sc.delay_max, size=sc.n_paths)
    return ChannelRealization(alpha, tau, cfr_from_paths(alpha, tau, sc))


def snr_to_noise_variance(sc: OfdmScenario) -> float:
    """Noise variance for the target SNR against unit transmit-symbol energy.

    Es/N0 convention: the constellation has E[|d[n]|^2] = 1, so the noise
    variance is 10^(-snr_db/10) regardless of the channel's average gain.
    """
    return 1.0 / 10.0 ** (sc.snr_db / 10.0)


def transmit(d: np.ndarray, ch: ChannelRealization, noise_variance: float,
             r: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Return (y, n) with y = d o h + n and n ~ CN(0, noise_variance)."""
    d = np.asarray(d, complex)
    if d.shape != ch.h.shape:
        raise ValueError(f"symbol/CFR shape mismatch {d.shape} vs {ch.h.shape}")
    n = r.complex_normal(noise_variance, size=d.size)
    return d * ch.h + n, n


def natural_cubic_interp(x_knots: np.ndarray, y_knots: np.ndarray,
                         x_eval: np.ndarray) -> np.ndarray:
    """Natural cubic spline through (x_knots, y_knots), evaluated at x_eval.

    Outside the knot range the boundary segment's cubic polynomial is used.
    """
    x_knots = np.asarray(x_knots, float)
    y = np.asarray(y_knots, float)
    m = x_knots.size
    if m < 2:
        raise ValueError("need at least 2 knots")
    if (np.diff(x_knots) <= 0).any():
        raise ValueError("knots must be strictly increasing")
    h = np.diff(x_knots)

    z = np.zeros(m)  # second derivatives; natural boundary keeps the ends 0
    if m > 2:
        a = np.zeros((m - 2, m - 2))
        rhs = (y[2:] - y[1:-1]) / h[1:] - (y[1:-1] - y[:-2]) / h[:-1]
        diag = np.arange(m - 2)
        a[diag, diag] = (h[:-1] + h[1:]) / 3.0
        a[diag[1:], diag[:-1]] = h[1:-1] / 6.0
        a[diag[:-1], diag[1:]] = h[1:-1] / 6.0
        z[1:-1] = np.linalg.solve(a, rhs)

    x_eval = np.asarray(x_eval, float)
    seg = np.clip(np.searchsorted(x_knots, x_eval, side="right") - 1, 0, m - 2)
    hj = h[seg]
    t_up = x_eval - x_knots[seg]
    t_dn = x_knots[seg + 1] - x_eval
    return (z[seg] * t_dn ** 3 + z[seg + 1] * t_up ** 3) / (6.0 * hj) \
        + (y[seg + 1] / hj - z[seg + 1] * hj / 6.0) * t_up \
        + (y[seg] / hj - z[seg] * hj / 6.0) * t_dn


def estimate_channel_cubic(x_tilde: np.ndarray, sc: OfdmScenario) -> np.ndarray:
    """Pilot-based CFR estimate: divide at pilots, spline real/imag parts."""
    x_tilde = np.asarray(x_tilde, complex)
    pilots = sc.pilot_indices
    if len(pilots) < 2:
        raise ValueError("channel estimation needs at least 2 pilots")
    h_p = x_tilde[pilots] / sc.pilot_symbol
    grid = np.arange(sc.n_subcarriers, dtype=float)
    return natural_cubic_interp(pilots.astype(float), h_p.real, grid) \
        + 1j * natural_cubic_interp(pilots.astype(float), h_p.imag, grid)


def nearest_symbol_indices(values: np.ndarray, sc: OfdmScenario) -> np.ndarray:
    """Index of the closest constellation point; ties go to the lowest index."""
    values = np.asarray(values, complex)
    dist = np.abs(values[..., None] - sc.constellation)
    return np.argmin(dist, axis=-1)


def demodulate(x_tilde: np.ndarray, h_hat: np.ndarray, sc: OfdmScenario) -> np.ndarray:
    """Equalise and demap to constellation indices.

    Subcarriers whose channel estimate is numerically zero are demapped from
    the unequalised value instead of dividing by ~0.
    """
    x_tilde = np.asarray(x_tilde, complex)
    h_hat = np.asarray(h_hat, complex)
    safe = np.abs(h_hat) >= EQUALIZE_EPS
    eq = np.where(safe, x_tilde / np.where(safe, h_hat, 1.0), x_tilde)
    return nearest_symbol_indices(eq, sc)


def ser(est_indices: np.ndarray, true_symbols: np.ndarray, sc: OfdmScenario) -> float:
    """Fraction of wrong symbols over non-pilot subcarriers."""
    est = np.atleast_2d(np.asarray(est_indices))
    true_idx = np.atleast_2d(nearest_symbol_indices(true_symbols, sc))
    if est.shape != true_idx.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {true_idx.shape}")
    data = sc.data_indices
    return float(np.mean(est[:, data] != true_idx[:, data]))


@dataclass(frozen=True)
class Case2Batch:
    """Aligned per-symbol-vector data for training and pipeline evaluation."""

    noisy: np.ndarray    # y, complex (L, P)
    clean: np.ndarray    # d o h
    noise: np.ndarray    # n
    symbols: np.ndarray  # transmitted d


def make_case2_dataset(count: int, sc: OfdmScenario, r: RngStream) -> Case2Batch:
    """Fresh symbols, channel and noise per vector; y = clean + noise exactly."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    p = sc.n_subcarriers
    noise_var = snr_to_noise_variance(sc)
    noisy = np.empty((count, p), complex)
    clean = np.empty((count, p), complex)
    noise = np.empty((count, p), complex)
    symbols = np.empty((count, p), complex)
    for i in range(count):
        ri = r.split(i)
        d = gen_symbols(sc, ri)
        ch = gen_cfr(sc, ri)
        y, n = transmit(d, ch, noise_var, ri)
        symbols[i], clean[i], noise[i], noisy[i] = d, d * ch.h, n, y
    return Case2Batch(noisy, clean, noise, symbols)
