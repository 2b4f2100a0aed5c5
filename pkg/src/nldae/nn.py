"""Dense all-sigmoid feedforward network with exact backprop and an SCG trainer.

The network is deliberately minimal: every layer, including the output, is
sigmoid-activated, the loss is the squared error summed over output
coordinates and averaged over the batch, and training is full-batch scaled
conjugate gradient.  Regression targets therefore have to live strictly
inside (0, 1); callers are expected to pre-scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RngStream

# Pre-activations are clipped to +-SIGMOID_CLIP so the sigmoid output can
# never round to exactly 0.0 or 1.0: sigmoid(36) = 1 - 2.3e-16, two float64
# ulps below one.  Outputs live in [2.3e-16, 1 - 2.3e-16].
SIGMOID_CLIP = 36.0


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite.

    `iteration` is the 1-based SCG iteration at which it happened.
    """

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


def sigmoid(a: np.ndarray) -> np.ndarray:
    """Numerically-safe logistic function; output strictly inside (0, 1).

    After clipping, exp(-a) <= exp(SIGMOID_CLIP) ~ 4.3e15, so the direct
    formula neither overflows nor rounds to the interval endpoints.
    """
    return 1.0 / (1.0 + np.exp(-np.clip(a, -SIGMOID_CLIP, SIGMOID_CLIP)))


@dataclass
class MlpParams:
    """Layer widths plus per-layer weight matrices and bias vectors.

    `weights[l]` has shape (dims[l+1], dims[l]); `biases[l]` has shape
    (dims[l+1],).  For the denoisers dims is [P, P', ..., P', P].
    """

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 2:
            raise ValueError("need at least an input and an output layer")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"all layer widths must be >= 1, got {self.dims}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.dims[l + 1], self.dims[l])
            if w.shape != want or b.shape != (self.dims[l + 1],):
                raise ValueError(f"layer {l}: weight/bias shapes {w.shape}/{b.shape} "
                                 f"inconsistent with dims {self.dims}")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def copy(self) -> "MlpParams":
        return MlpParams(self.dims, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch SCG settings (canonical defaults of the method)."""

    max_iters: int = 500
    grad_tolerance: float = 1e-6
    sigma_scg: float = 1e-4
    lambda_init: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tolerance <= 0 or self.sigma_scg <= 0 or self.lambda_init <= 0:
            raise ValueError("grad_tolerance, sigma_scg and lambda_init must be > 0")


@dataclass(frozen=True)
class Dataset:
    """Paired training inputs (M, P_in) and targets (M, P_out).

    The denoisers use P_in = P_out = P; the widths are kept independent so the
    trainer also serves generic nets (e.g. gradient-check fixtures).
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x, t = np.asarray(self.inputs, float), np.asarray(self.targets, float)
        if x.ndim != 2 or t.ndim != 2 or x.shape[0] != t.shape[0]:
            raise ValueError(f"inputs/targets must pair M samples, got {x.shape}/{t.shape}")
        if x.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not (np.isfinite(x).all() and np.isfinite(t).all()):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def mlp_init(dims, r: RngStream) -> MlpParams:
    """Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)) drawn row-major; zero biases."""
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer widths must be >= 1, got {dims}")
    weights, biases = [], []
    for l in range(len(dims) - 1):
        fan_in, fan_out = dims[l], dims[l + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = r.uniform(-bound, bound, size=fan_out * fan_in).reshape(fan_out, fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpParams(dims, weights, biases)


def forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Run the network on one vector (shape (P,)) or a batch (shape (M, P))."""
    x = np.asarray(x, float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != p.dims[0]:
        raise ValueError(f"input width {h.shape[1]} != network input width {p.dims[0]}")
    for w, b in zip(p.weights, p.biases):
        h = sigmoid(h @ w.T + b)
    return h[0] if single else h


def loss_sq(pred: np.ndarray, target: np.ndarray) -> float:
    """Squared error summed over coordinates."""
    pred, target = np.asarray(pred, float), np.asarray(target, float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    d = pred - target
    return float(np.dot(d.ravel(), d.ravel()))


def params_flatten(p: MlpParams) -> np.ndarray:
    """Canonical order: per layer, weight matrix row-major then bias vector."""
    parts = []
    for w, b in zip(p.weights, p.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def flat_size(dims) -> int:
    return sum(dims[l + 1] * dims[l] + dims[l + 1] for l in range(len(dims) - 1))


def params_unflatten(dims, flat: np.ndarray) -> MlpParams:
    dims = tuple(int(d) for d in dims)
    flat = np.asarray(flat, float)
    if flat.shape != (flat_size(dims),):
        raise ValueError(f"flat vector has length {flat.shape}, dims {dims} need {flat_size(dims)}")
    weights, biases, k = [], [], 0
    for l in range(len(dims) - 1):
        n_w = dims[l + 1] * dims[l]
        weights.append(flat[k:k + n_w].reshape(dims[l + 1], dims[l]).copy())
        k += n_w
        biases.append(flat[k:k + dims[l + 1]].copy())
        k += dims[l + 1]
    return MlpParams(dims, weights, biases)


def _layer_views(dims, flat: np.ndarray):
    """Weight/bias views into a flat parameter vector (no copies)."""
    weights, biases, k = [], [], 0
    for l in range(len(dims) - 1):
        n_w = dims[l + 1] * dims[l]
        weights.append(flat[k:k + n_w].reshape(dims[l + 1], dims[l]))
        k += n_w
        biases.append(flat[k:k + dims[l + 1]])
        k += dims[l + 1]
    return weights, biases


def _flat_loss(dims, flat: np.ndarray, x: np.ndarray, t: np.ndarray) -> float:
    weights, biases = _layer_views(dims, flat)
    h = x
    for w, b in zip(weights, biases):
        h = sigmoid(h @ w.T + b)
    diff = h - t
    return float(np.sum(diff * diff)) / x.shape[0]


def _flat_loss_and_grad(dims, flat: np.ndarray, x: np.ndarray,
                        t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared-error objective and its exact gradient.

    Objective: E = (1/M) sum_i ||forward(x_i) - t_i||^2; gradient is flattened
    in the canonical layer-major order of `params_flatten`.
    """
    m = x.shape[0]
    weights, biases = _layer_views(dims, flat)
    n_layers = len(weights)
    acts = [x]
    h = x
    for w, b in zip(weights, biases):
        h = sigmoid(h @ w.T + b)
        acts.append(h)
    diff = acts[-1] - t
    loss = float(np.sum(diff * diff)) / m

    grad = np.empty_like(flat)
    grad_w, grad_b = _layer_views(dims, grad)
    delta = (2.0 / m) * diff * acts[-1] * (1.0 - acts[-1])
    for l in range(n_layers - 1, -1, -1):
        np.matmul(delta.T, acts[l], out=grad_w[l])
        delta.sum(axis=0, out=grad_b[l])
        if l > 0:
            delta = (delta @ weights[l]) * acts[l] * (1.0 - acts[l])
    return loss, grad


def _loss_and_grad(p: MlpParams, data: Dataset) -> tuple[float, np.ndarray]:
    return _flat_loss_and_grad(p.dims, params_flatten(p), data.inputs, data.targets)


def gradient(p: MlpParams, data: Dataset) -> np.ndarray:
    """Exact gradient of the mean squared-error objective (see `_loss_and_grad`)."""
    return _loss_and_grad(p, data)[1]


def mean_loss(p: MlpParams, data: Dataset) -> float:
    diff = forward(p, data.inputs) - data.targets
    return float(np.sum(diff * diff)) / data.size


def scg_train(p0: MlpParams, data: Dataset, cfg: TrainConfig = TrainConfig()) -> MlpParams:
    """Full-batch scaled conjugate gradient (Moller's method, netlab variant).

    Only improving steps are accepted, so the loss over accepted iterations
    is non-increasing.  Stops after `max_iters` cycles or once the gradient
    norm drops below `grad_tolerance`.
    """
    if not ((data.targets > 0.0) & (data.targets < 1.0)).all():
        raise ValueError("targets must lie strictly inside (0, 1); scale them first")

    dims = p0.dims
    w = params_flatten(p0)
    n_params = w.size

    def eval_grad(vec: np.ndarray) -> tuple[float, np.ndarray]:
        return _flat_loss_and_grad(dims, vec, data.inputs, data.targets)

    f_old, grad_new = eval_grad(w)
    if not np.isfinite(f_old):
        raise TrainingDivergedError(0, f"initial loss is {f_old}")
    grad_old = grad_new
    d = -grad_new
    lam = cfg.lambda_init
    lam_min, lam_max = 1e-15, 1e100
    success = True
    n_success = 0
    mu = kappa = sigma = theta = 0.0

    for iteration in range(1, cfg.max_iters + 1):
        if np.sqrt(grad_new @ grad_new) < cfg.grad_tolerance:
            break
        if success:
            mu = d @ grad_new
            if mu >= 0.0:  # not a descent direction: restart along -grad
                d = -grad_new
                mu = d @ grad_new
            kappa = d @ d
            if kappa < np.finfo(float).eps:
                break
            sigma = cfg.sigma_scg / np.sqrt(kappa)
            _, g_plus = eval_grad(w + sigma * d)
            theta = (d @ (g_plus - grad_new)) / sigma

        # Regularise curvature so the quadratic model is positive definite.
        delta = theta + lam * kappa
        if delta <= 0.0:
            lam = lam - theta / kappa
            delta = lam * kappa
        alpha = -mu / delta

        # Loss and gradient at the trial point come from one pass; the
        # gradient is only kept if the step is accepted.
        f_new, g_trial = eval_grad(w + alpha * d)
        if not np.isfinite(f_new):
            raise TrainingDivergedError(iteration, f"loss became {f_new}")
        comparison = 2.0 * (f_new - f_old) / (alpha * mu)

        if comparison >= 0.0:  # step lowers the loss (alpha*mu < 0)
            success = True
            n_success += 1
            w = w + alpha * d
            f_old = f_new
            grad_old = grad_new
            grad_new = g_trial
            if grad_new @ grad_new == 0.0:
                break
        else:
            success = False

        if comparison < 0.25:
            lam = min(4.0 * lam, lam_max)
        elif comparison > 0.75:
            lam = max(0.5 * lam, lam_min)

        if n_success == n_params:  # periodic restart along steepest descent
            d = -grad_new
            n_success = 0
        elif success:
            gamma = ((grad_old - grad_new) @ grad_new) / mu
            d = gamma * d - grad_new

    return params_unflatten(dims, w)
