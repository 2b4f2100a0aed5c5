"""Deterministic, splittable random streams and the samplers the simulators need.

The generator is a self-contained SplitMix64: the state walks an additive
counter and every output is the avalanche mix of the counter value.  Because
the state sequence is affine, a block of n outputs can be produced with
vectorised numpy exactly equal to n scalar calls, which keeps batched dataset
generation bit-identical to the scalar API.

Streams are single-owner.  `split(label)` derives an independent child stream
from the parent's current state without advancing the parent; the chain of
labels is kept on the child as `lineage` for reproducibility audits.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_SPLIT_SALT = 0xD6E8FEB86659FD93

# 2**-53: converts the top 53 bits of a u64 into a double in [0, 1).
_U53 = 2.0 ** -53

_U64_GAMMA = np.uint64(_GAMMA)
_U64_MIX_A = np.uint64(_MIX_A)
_U64_MIX_B = np.uint64(_MIX_B)


def _mix64(z: int) -> int:
    """SplitMix64 finaliser (64-bit bijection with full avalanche)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def _mix64_block(z: np.ndarray) -> np.ndarray:
    """Vectorised `_mix64` on a uint64 array (wraparound is intentional)."""
    z = (z ^ (z >> np.uint64(30))) * _U64_MIX_A
    z = (z ^ (z >> np.uint64(27))) * _U64_MIX_B
    return z ^ (z >> np.uint64(31))


class RngStream:
    """One deterministic sample stream.

    Same root seed and same split-label path give a bit-identical sequence;
    children split with different labels are statistically independent.
    """

    __slots__ = ("_state", "lineage")

    def __init__(self, seed: int, _lineage: tuple[int, ...] = ()):
        state = _mix64((int(seed) + _GAMMA) & _MASK64)
        if state == 0:
            state = _GAMMA
        self._state = state
        self.lineage = _lineage

    @classmethod
    def _from_state(cls, state: int, lineage: tuple[int, ...]) -> "RngStream":
        r = cls.__new__(cls)
        r._state = state if state != 0 else _GAMMA
        r.lineage = lineage
        return r

    def split(self, label: int) -> "RngStream":
        """Derive an independent child stream; the parent is untouched."""
        child = _mix64(self._state ^ _mix64((int(label) * _GAMMA + _SPLIT_SALT) & _MASK64))
        return RngStream._from_state(child, self.lineage + (int(label),))

    # -- raw output ---------------------------------------------------------

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix64(self._state)

    def _block_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self._state) + steps * _U64_GAMMA
            out = _mix64_block(states)
        self._state = (self._state + n * _GAMMA) & _MASK64
        return out

    def _block_f64(self, n: int) -> np.ndarray:
        return (self._block_u64(n) >> np.uint64(11)).astype(np.float64) * _U53

    # -- samplers -----------------------------------------------------------

    def random(self, size: int | None = None):
        """Uniform double in [0, 1)."""
        if size is None:
            return float(self._block_f64(1)[0])
        return self._block_f64(size)

    def uniform(self, lo: float, hi: float, size: int | None = None):
        if lo > hi:
            raise ValueError(f"uniform requires lo <= hi, got [{lo}, {hi}]")
        u = self.random(size if size is not None else 1)
        out = lo + (hi - lo) * u
        return float(out[0]) if size is None else out

    def normal(self, mean: float, std: float, size: int | None = None):
        """Gaussian via the Box-Muller cosine branch (2 uniforms per value)."""
        if std < 0:
            raise ValueError(f"normal requires std >= 0, got {std}")
        n = size if size is not None else 1
        d = self._block_f64(2 * n)
        u1 = 1.0 - d[0::2]  # in (0, 1], keeps the log finite
        u2 = d[1::2]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        out = mean + std * z
        return float(out[0]) if size is None else out

    def exponential(self, rate: float, size: int | None = None):
        """Exponential via inverse CDF."""
        if rate <= 0:
            raise ValueError(f"exponential requires rate > 0, got {rate}")
        u = self.random(size if size is not None else 1)
        out = -np.log1p(-u) / rate
        return float(out[0]) if size is None else out

    def bernoulli(self, p: float, size: int | None = None):
        """0/1 draws; returns int for scalars, int64 array otherwise."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli requires p in [0, 1], got {p}")
        u = self.random(size if size is not None else 1)
        out = (u < p).astype(np.int64)
        return int(out[0]) if size is None else out

    def complex_normal(self, variance: float, size: int | None = None):
        """Circularly-symmetric complex Gaussian with E[|z|^2] = variance."""
        if variance < 0:
            raise ValueError(f"complex_normal requires variance >= 0, got {variance}")
        n = size if size is not None else 1
        comp = self.normal(0.0, math.sqrt(variance / 2.0), size=2 * n)
        out = comp[0::2] + 1j * comp[1::2]
        return complex(out[0]) if size is None else out

    def integers(self, n: int, size: int | None = None):
        """Unbiased uniform integer in [0, n) via rejection on the top range."""
        if n < 1:
            raise ValueError(f"integers requires n >= 1, got {n}")
        count = size if size is not None else 1
        limit = (1 << 64) - ((1 << 64) % n)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            raw = self._block_u64(count - filled)
            ok = raw < np.uint64(limit) if limit < (1 << 64) else np.ones(len(raw), bool)
            kept = (raw[ok] % np.uint64(n)).astype(np.int64)
            out[filled:filled + len(kept)] = kept
            filled += len(kept)
        return int(out[0]) if size is None else out


def rng_new(seed: int) -> RngStream:
    """Root stream for a run; alias for the constructor."""
    return RngStream(seed)


def split(parent: RngStream, label: int) -> RngStream:
    return parent.split(label)
