"""Case study III: ToA localization with quantized, mixed-distribution ranging noise.

A scene is P reference nodes plus one target, uniform in a square.  Measured
distances are the true distances plus Gaussian + uniform + Bernoulli-NLoS
noise, quantized to resolution B.  The position estimate embeds the joint
Euclidean distance matrix with classical MDS (double-centering and the top-2
eigenpairs of a self-contained cyclic Jacobi eigensolver), then rigidly
aligns the embedded references onto their known positions and reads off the
target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit as _njit

    def _maybe_jit(fn):
        return _njit(cache=True)(fn)
except ImportError:  # pragma: no cover - exercised only without numba
    def _maybe_jit(fn):
        return fn

SQUARE_SIDE = 100.0
NUM_REFERENCES = 12
QUANTIZER_MODES = ("nearest", "floor")


class RankDeficiencyError(RuntimeError):
    """MDS embedding collapsed: the top-2 eigenvalues are not both positive."""


@dataclass(frozen=True)
class LocScene:
    """Known reference positions (P, 2) and the unknown target (2,)."""

    ref_positions: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        refs = np.asarray(self.ref_positions, float)
        tgt = np.asarray(self.target, float)
        if refs.ndim != 2 or refs.shape[1] != 2 or refs.shape[0] < 3:
            raise ValueError(f"need at least 3 reference points in 2-D, got {refs.shape}")
        if tgt.shape != (2,):
            raise ValueError(f"target must be a single 2-D point, got {tgt.shape}")
        object.__setattr__(self, "ref_positions", refs)
        object.__setattr__(self, "target", tgt)

    @property
    def n_refs(self) -> int:
        return self.ref_positions.shape[0]


@dataclass(frozen=True)
class RangeNoiseParams:
    """Ranging-noise mixture and the ToA quantization resolution."""

    sigma_n: float = 10.0   # std of the signal-quality term
    u_max: float = 20.0     # clock-asynchronisation term ~ U(0, u_max)
    p_nlos: float = 0.2
    r_nlos: float = 50.0    # distance bias added on an NLoS event
    resolution: float = 10.0
    quantizer: str = "nearest"

    def __post_init__(self):
        if min(self.sigma_n, self.u_max, self.r_nlos) < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if not 0.0 <= self.p_nlos <= 1.0:
            raise ValueError(f"p_nlos must be in [0, 1], got {self.p_nlos}")
        if self.resolution <= 0:
            raise ValueError(f"resolution must be > 0, got {self.resolution}")
        if self.quantizer not in QUANTIZER_MODES:
            raise ValueError(f"quantizer must be one of {QUANTIZER_MODES}")


def gen_scene(n_refs: int, side: float, r) -> LocScene:
    """n_refs + 1 i.i.d. uniform points in [0, side]^2 (references then target)."""
    if n_refs < 3:
        raise ValueError(f"need n_refs >= 3 for a 2-D embedding, got {n_refs}")
    refs = r.uniform(0.0, side, size=2 * n_refs).reshape(n_refs, 2)
    target = r.uniform(0.0, side, size=2)
    return LocScene(refs, target)


def true_distances(s: LocScene) -> np.ndarray:
    return np.linalg.norm(s.ref_positions - s.target, axis=1)


def sample_range_noise(params: RangeNoiseParams, count: int, r) -> np.ndarray:
    """Per-reference i.i.d. N(0, sigma_n) + U(0, u_max) + r_nlos * Ber(p_nlos)."""
    return (r.normal(0.0, params.sigma_n, size=count)
            + r.uniform(0.0, params.u_max, size=count)
            + params.r_nlos * r.bernoulli(params.p_nlos, size=count))


def quantize(v, resolution: float, mode: str = "nearest"):
    """Snap to multiples of `resolution`; 'nearest' rounds ties upward."""
    if resolution <= 0:
        raise ValueError(f"resolution must be > 0, got {resolution}")
    if mode not in QUANTIZER_MODES:
        raise ValueError(f"mode must be one of {QUANTIZER_MODES}")
    v = np.asarray(v, float)
    if mode == "nearest":
        out = resolution * np.floor(v / resolution + 0.5)
    else:
        out = resolution * np.floor(v / resolution)
    return float(out) if out.ndim == 0 else out


def _jacobi_sweeps(a, v, off_target, max_sweeps):
    """Cyclic Jacobi rotations in place until the off-diagonal norm is tiny."""
    n = a.shape[0]
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if math.sqrt(2.0 * off) <= off_target:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return max_sweeps


_jacobi_sweeps = _maybe_jit(_jacobi_sweeps)


def jacobi_eigh(a: np.ndarray, rel_tol: float = 1e-14,
                max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.  Convergence is
    driven to `rel_tol` times the Frobenius norm, i.e. machine precision for
    the 13x13 matrices this package builds.
    """
    a = np.asarray(a, float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"need a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-8 * (1.0 + np.abs(a).max())):
        raise ValueError("matrix is not symmetric")
    work = 0.5 * (a + a.T)
    vecs = np.eye(a.shape[0])
    fro = float(np.linalg.norm(work))
    _jacobi_sweeps(work, vecs, rel_tol * max(fro, 1e-300), max_sweeps)
    return np.diag(work).copy(), vecs


def procrustes_2d(src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best rigid map (rotation or reflection + translation, no scaling).

    Returns (R, t) minimising sum ||R s_i + t - d_i||^2 over orthogonal R.
    """
    src, dst = np.asarray(src, float), np.asarray(dst, float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError(f"need matching (n, 2) point sets, got {src.shape}/{dst.shape}")
    ca, cb = src.mean(axis=0), dst.mean(axis=0)
    a, b = src - ca, dst - cb

    def best_rotation(pts):
        cos_sum = float(np.sum(pts * b))
        sin_sum = float(np.sum(pts[:, 0] * b[:, 1] - pts[:, 1] * b[:, 0]))
        theta = math.atan2(sin_sum, cos_sum)
        gain = math.hypot(sin_sum, cos_sum)  # achieved trace term
        c, s = math.cos(theta), math.sin(theta)
        return np.array([[c, -s], [s, c]]), gain

    rot, gain_rot = best_rotation(a)
    flip = np.array([[1.0, 0.0], [0.0, -1.0]])
    rot_f, gain_ref = best_rotation(a @ flip)
    if gain_ref > gain_rot:
        rot = rot_f @ flip
    t = cb - rot @ ca
    return rot, t


def mds_locate(ref_positions: np.ndarray, target_dists: np.ndarray) -> np.ndarray:
    """Classical-MDS position estimate from target distances.

    Embeds the joint (P+1)-point squared-distance matrix (exact
    reference-reference distances plus the given target distances), takes the
    top-2 eigenpairs, and rigidly aligns the embedded references onto their
    known coordinates.  Raises RankDeficiencyError when the spectrum cannot
    support a 2-D embedding.
    """
    refs = np.asarray(ref_positions, float)
    dists = np.maximum(np.asarray(target_dists, float), 0.0)
    n_refs = refs.shape[0]
    if refs.ndim != 2 or refs.shape[1] != 2 or n_refs < 3:
        raise ValueError(f"need at least 3 reference points in 2-D, got {refs.shape}")
    if dists.shape != (n_refs,):
        raise ValueError(f"need one distance per reference, got {dists.shape}")

    n = n_refs + 1
    d_sq = np.zeros((n, n))
    diff = refs[:, None, :] - refs[None, :, :]
    d_sq[:n_refs, :n_refs] = np.sum(diff * diff, axis=2)
    d_sq[:n_refs, n_refs] = d_sq[n_refs, :n_refs] = dists * dists

    row_mean = d_sq.mean(axis=0)
    gram = -0.5 * (d_sq - row_mean[None, :] - row_mean[:, None] + row_mean.mean())

    vals, vecs = jacobi_eigh(gram)
    top = np.argsort(vals)[::-1][:2]
    # "positive" means positive at working precision: an eigenvalue below
    # 1e-12 of the leading one is a numerically collapsed dimension.
    if vals[top[0]] <= 0.0 or vals[top[1]] <= 1e-12 * vals[top[0]]:
        raise RankDeficiencyError(f"top-2 eigenvalues {vals[top]} are not both positive")
    coords = vecs[:, top] * np.sqrt(vals[top])

    rot, t = procrustes_2d(coords[:n_refs], refs)
    return rot @ coords[n_refs] + t


def loc_error(est: np.ndarray, truth: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(est, float) - np.asarray(truth, float)))


@dataclass(frozen=True)
class Case3Batch:
    """Aligned quantized training data plus the scenes needed for evaluation."""

    noisy_q: np.ndarray        # Q_B(x + n), (L, P)
    clean: np.ndarray          # unquantized true distances x
    noise_q: np.ndarray        # Q_B(n)
    ref_positions: np.ndarray  # (L, P, 2)
    targets: np.ndarray        # (L, 2)


def make_case3_dataset(count: int, noise: RangeNoiseParams, r,
                       n_refs: int = NUM_REFERENCES,
                       side: float = SQUARE_SIDE) -> Case3Batch:
    """Fresh scene and noise per sample; distances quantized at resolution B."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    noisy_q = np.empty((count, n_refs))
    clean = np.empty((count, n_refs))
    noise_q = np.empty((count, n_refs))
    refs = np.empty((count, n_refs, 2))
    targets = np.empty((count, 2))
    for i in range(count):
        ri = r.split(i)
        scene = gen_scene(n_refs, side, ri)
        x = true_distances(scene)
        nv = sample_range_noise(noise, n_refs, ri)
        noisy_q[i] = quantize(x + nv, noise.resolution, noise.quantizer)
        clean[i] = x
        noise_q[i] = quantize(nv, noise.resolution, noise.quantizer)
        refs[i] = scene.ref_positions
        targets[i] = scene.target
    return Case3Batch(noisy_q, clean, noise_q, refs, targets)


def locate_all(dist_estimates: np.ndarray, ref_positions: np.ndarray,
               targets: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Localization errors for a batch of distance estimates.

    Negative distances are clamped to zero first.  Returns (errors with NaN
    for failed trials, n_failed, n_clamped).
    """
    dist_estimates = np.asarray(dist_estimates, float)
    n_clamped = int((dist_estimates < 0.0).sum())
    errors = np.full(dist_estimates.shape[0], np.nan)
    n_failed = 0
    for i in range(dist_estimates.shape[0]):
        try:
            est = mds_locate(ref_positions[i], dist_estimates[i])
        except RankDeficiencyError:
            n_failed += 1
            continue
        errors[i] = loc_error(est, targets[i])
    return errors, n_failed, n_clamped
