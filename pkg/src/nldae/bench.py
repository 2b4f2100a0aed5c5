"""Experiment driver: toy comparisons, the three case studies, CSV results.

A run is described by an `ExperimentConfig` (usually parsed from a flat
`key = value` file): one case, one swept axis, a grid of values and a list of
root seeds.  Every (grid value, seed) pair trains both denoisers on freshly
drawn data, evaluates them next to the case's non-ML baseline on a held-out
test set, and appends one `ResultRow` per method.  Rows carry the seed so
that seed-majority comparisons can be done from the CSV alone; identical
config and seeds reproduce the output byte for byte.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import localization as loc
from . import ofdm
from . import signal_restoration as sig
from .denoise import (MODE_DAE, MODE_NLDAE, AdditiveModelError,
                      DegenerateDataError, denoise, denoise_complex,
                      train_denoiser)
from .nn import TrainConfig, TrainingDivergedError
from .rng import RngStream

log = logging.getLogger("nldae")

CASES = ("toy1", "toy2", "signal", "ofdm", "locate")
SWEEPS = ("latent", "train_size", "noise_param", "depth")
METHOD_NLDAE = "nlDAE"
METHOD_DAE = "DAE"
METHOD_NONML = "nonML"
METHOD_NOISY = "noisy"

CSV_HEADER = "case,sweep,sweep_value,method,metric,mean,std_err,n_trials,seed,config_hash,failure"

PAPER_TRAIN_SIZE = 10000
PAPER_TEST_SIZE = 5000
DESK_TRAIN_SIZE = 2000
DESK_TEST_SIZE = 1000
DEFAULT_SEEDS = (1, 2, 3, 4, 5)

# Per-case parameter defaults; config-file keys override them, and the
# resolved values are part of the hashed canonical config of every run.
CASE_DEFAULTS: dict[str, dict] = {
    "toy1": {},
    "toy2": {},
    "signal": {"k": 3, "p_cor": 0.9, "c": 1.0},
    "ofdm": {"snr_db": 5.0, "n_paths": 4, "pilot_spacing": 3, "pilot_offset": 1},
    "locate": {"sigma_n": 10.0, "u_max": 20.0, "p_nlos": 0.2, "r_nlos": 50.0,
               "b": 10.0, "quantizer": "nearest"},
}

# Split labels hanging off each (seed, grid-point) stream.
_L_TRAIN, _L_TEST = 0, 1
_L_INIT_DAE, _L_INIT_NLDAE = 2, 3
_L_INIT_DAE_IM, _L_INIT_NLDAE_IM = 4, 5


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, missing field, bad value)."""


@dataclass
class ExperimentConfig:
    """One sweep: case, swept axis, grid, sizes, seeds, per-case overrides."""

    case: str
    sweep: str
    grid: tuple[float, ...]
    m_train: int = PAPER_TRAIN_SIZE
    l_test: int = PAPER_TEST_SIZE
    input_dim: int = 12
    latent_dim: int = 9
    depth: int = 1
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    max_iters: int = 500
    params: dict = field(default_factory=dict)
    out_path: str | None = None

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if self.case in ("toy1", "toy2") and self.sweep != "noise_param":
            raise ConfigError("toy cases only sweep noise_param (the noise std)")
        self.grid = tuple(float(v) for v in self.grid)
        if not self.grid:
            raise ConfigError("grid must not be empty")
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.m_train < 1 or self.l_test < 1:
            raise ConfigError("m_train and l_test must be >= 1")
        if not 1 <= self.latent_dim < self.input_dim:
            raise ConfigError(f"latent_dim must be in [1, {self.input_dim})")
        if self.depth < 1 or self.max_iters < 1:
            raise ConfigError("depth and max_iters must be >= 1")
        self.resolved_params()  # reject keys that do not apply to the case

    def resolved_params(self) -> dict:
        """Case parameters with defaults applied under any overrides."""
        unknown = set(self.params) - set(CASE_DEFAULTS[self.case])
        if unknown:
            raise ConfigError(f"keys {sorted(unknown)} do not apply to case "
                              f"{self.case!r}")
        return {**CASE_DEFAULTS[self.case], **self.params}

    def canonical_text(self) -> str:
        """Fully resolved flat key=value form; basis of the config hash."""
        items = {
            "case": self.case, "sweep": self.sweep,
            "grid": ",".join(repr(v) for v in self.grid),
            "m": self.m_train, "l": self.l_test,
            "p": self.input_dim, "p_prime": self.latent_dim,
            "depth": self.depth, "max_iters": self.max_iters,
            "seeds": ",".join(str(s) for s in self.seeds),
        }
        resolved = self.resolved_params()
        items.update({k: resolved[k] for k in sorted(resolved)})
        return "\n".join(f"{k} = {items[k]}" for k in sorted(items)) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.canonical_text().encode()).hexdigest()[:12]


# -- config file ------------------------------------------------------------

_INT_KEYS = {"m": "m_train", "l": "l_test", "p": "input_dim", "p_prime": "latent_dim",
             "depth": "depth", "max_iters": "max_iters"}
_PARAM_FLOAT_KEYS = ("k", "p_cor", "c", "snr_db", "n_paths", "pilot_spacing",
                     "pilot_offset", "sigma_n", "u_max", "p_nlos", "r_nlos", "b")
_PARAM_STR_KEYS = ("quantizer",)


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse the flat `key = value` format (# starts a comment)."""
    raw: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        raw[key] = value

    for required in ("case", "sweep", "grid"):
        if required not in raw:
            raise ConfigError(f"missing required key {required!r}")

    kwargs: dict = {"case": raw.pop("case"), "sweep": raw.pop("sweep")}
    params: dict = {}
    try:
        kwargs["grid"] = tuple(float(v) for v in raw.pop("grid").split(","))
        if "seeds" in raw:
            kwargs["seeds"] = tuple(int(v) for v in raw.pop("seeds").split(","))
        if "out" in raw:
            kwargs["out_path"] = raw.pop("out")
        for key, attr in _INT_KEYS.items():
            if key in raw:
                kwargs[attr] = int(raw.pop(key))
        for key in _PARAM_FLOAT_KEYS:
            if key in raw:
                params[key] = float(raw.pop(key))
        for key in _PARAM_STR_KEYS:
            if key in raw:
                params[key] = raw.pop(key)
    except ValueError as exc:
        raise ConfigError(f"bad value: {exc}") from None
    if raw:
        raise ConfigError(f"unknown config keys: {sorted(raw)}")
    return ExperimentConfig(params=params, **kwargs)


def load_config_file(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# -- result rows and CSV ------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    case: str
    sweep: str
    sweep_value: float
    method: str
    metric: str
    mean: float | None
    std_err: float | None
    n_trials: int
    seed: int
    config_hash: str
    failure: str = ""

    def __post_init__(self):
        if self.std_err is not None and self.std_err < 0:
            raise ValueError("std_err must be >= 0")


def _csv_num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def write_csv(rows: list[ResultRow], path: str) -> None:
    lines = [CSV_HEADER]
    for r in rows:
        failure = r.failure.replace(",", ";").replace("\n", " ")
        lines.append(",".join([
            r.case, r.sweep, repr(float(r.sweep_value)), r.method, r.metric,
            _csv_num(r.mean), _csv_num(r.std_err), str(r.n_trials), str(r.seed),
            r.config_hash, failure,
        ]))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path!r}: {exc}") from exc


def read_csv(path: str) -> list[ResultRow]:
    try:
        with open(path, "r", encoding="ascii") as fh:
            lines = [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise OSError(f"cannot read results from {path!r}: {exc}") from exc
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path!r}: missing or wrong CSV header")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        f = ln.split(",")
        if len(f) != 11:
            raise ValueError(f"{path!r}: expected 11 fields, got {len(f)}: {ln!r}")
        rows.append(ResultRow(
            case=f[0], sweep=f[1], sweep_value=float(f[2]), method=f[3], metric=f[4],
            mean=float(f[5]) if f[5] else None,
            std_err=float(f[6]) if f[6] else None,
            n_trials=int(f[7]), seed=int(f[8]), config_hash=f[9], failure=f[10],
        ))
    return rows


def gaussian_entropy(sigma: float) -> float:
    """Differential entropy of N(0, sigma) in nats: ln(sigma * sqrt(2 pi e))."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return math.log(sigma * math.sqrt(2.0 * math.pi * math.e))


def _mean_se(per_trial: np.ndarray) -> tuple[float, float, int]:
    """Mean, standard error and count over finite per-trial metric values."""
    vals = per_trial[np.isfinite(per_trial)]
    n = vals.size
    if n == 0:
        raise ValueError("no successful trials")
    se = float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(vals.mean()), se, n


# -- per-case machinery -------------------------------------------------------

def _train_cfg(cfg: ExperimentConfig) -> TrainConfig:
    return TrainConfig(max_iters=cfg.max_iters)


def _toy_draw(case: str, count: int, p: int, sigma: float,
              r: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Elementwise i.i.d. toy data: X per the example's law, N ~ N(0, sigma)."""
    if case == "toy1":
        x = r.uniform(0.0, 2.0 * math.sqrt(3.0), size=count * p)
    else:
        x = r.exponential(1.0, size=count * p)
    x = x.reshape(count, p)
    n = r.normal(0.0, sigma, size=count * p).reshape(count, p)
    return x + n, x, n


def _per_sample_sq_err(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    d = np.abs(est - truth)
    return np.mean(d * d, axis=1)


def run_toy(cfg: ExperimentConfig, rows: list[ResultRow] | None = None) -> list[ResultRow]:
    """Fig.-2-style comparison: MSE of both denoisers and the raw input.

    Appends into `rows` as points finish (so a crashed run keeps its partial
    results) and returns the same list.
    """
    if cfg.case not in ("toy1", "toy2"):
        raise ConfigError(f"run_toy needs a toy case, got {cfg.case!r}")
    chash = config_hash(cfg)
    tc = _train_cfg(cfg)
    rows = [] if rows is None else rows
    for gi, sigma in enumerate(cfg.grid):
        if sigma > 0:
            log.info("toy %s sigma=%g: noise entropy H(N) = %.6f nats",
                     cfg.case, sigma, gaussian_entropy(sigma))
        for seed in cfg.seeds:
            point = RngStream(seed).split(gi)
            noisy, clean, noise = _toy_draw(cfg.case, cfg.m_train, cfg.input_dim,
                                            sigma, point.split(_L_TRAIN))
            noisy_t, clean_t, _ = _toy_draw(cfg.case, cfg.l_test, cfg.input_dim,
                                            sigma, point.split(_L_TEST))

            def emit(method: str, per_trial=None, failure: str = ""):
                if failure:
                    rows.append(ResultRow(cfg.case, cfg.sweep, sigma, method, "mse",
                                          None, None, 0, seed, chash, failure))
                else:
                    mean, se, n = _mean_se(per_trial)
                    rows.append(ResultRow(cfg.case, cfg.sweep, sigma, method, "mse",
                                          mean, se, n, seed, chash))

            for method, mode, label in ((METHOD_NLDAE, MODE_NLDAE, _L_INIT_NLDAE),
                                        (METHOD_DAE, MODE_DAE, _L_INIT_DAE)):
                try:
                    model = train_denoiser(mode, noisy, clean, noise,
                                              cfg.latent_dim, cfg.depth, tc,
                                              point.split(label))
                    emit(method, _per_sample_sq_err(denoise(model, noisy_t), clean_t))
                except (DegenerateDataError, TrainingDivergedError) as exc:
                    log.warning("toy %s sigma=%g seed=%d %s failed: %s",
                                cfg.case, sigma, seed, method, exc)
                    emit(method, failure=f"{type(exc).__name__}: {exc}")
            emit(METHOD_NOISY, _per_sample_sq_err(noisy_t, clean_t))
    return rows


def _resolve_point(cfg: ExperimentConfig, value: float) -> ExperimentConfig:
    """Apply one swept value, returning a copy with the knob substituted."""
    if cfg.sweep == "latent":
        return replace(cfg, latent_dim=int(value))
    if cfg.sweep == "train_size":
        return replace(cfg, m_train=int(value))
    if cfg.sweep == "depth":
        return replace(cfg, depth=int(value))
    noise_key = {"signal": "p_cor", "ofdm": "snr_db", "locate": "p_nlos"}[cfg.case]
    return replace(cfg, params={**cfg.params, noise_key: value})


_TRAIN_FAILURES = (DegenerateDataError, AdditiveModelError, TrainingDivergedError)


def _try_method(out: dict, method: str, fn) -> None:
    """Run one method's train/evaluate closure; record a failure string instead
    of per-trial values when training degenerates."""
    try:
        out[method] = fn()
    except _TRAIN_FAILURES as exc:
        log.warning("%s failed: %s", method, exc)
        out[method] = f"{type(exc).__name__}: {exc}"


def _signal_point(cfg: ExperimentConfig, point: RngStream, tc: TrainConfig):
    """Train/evaluate Case I at one grid point; per-trial MSE arrays by method."""
    p = cfg.resolved_params()
    sampler = sig.sinusoid_sampler(k=int(p["k"]), n_samples=cfg.input_dim)
    spec = sig.CorruptionSpec(p_cor=p["p_cor"], magnitude=p["c"])
    noisy, clean, noise = sig.make_case1_dataset(cfg.m_train, sampler, spec,
                                                 point.split(_L_TRAIN))
    noisy_t, clean_t, _ = sig.make_case1_dataset(cfg.l_test, sampler, spec,
                                                 point.split(_L_TEST))
    out = {}
    for method, mode, label in ((METHOD_NLDAE, MODE_NLDAE, _L_INIT_NLDAE),
                                (METHOD_DAE, MODE_DAE, _L_INIT_DAE)):
        def run(mode=mode, label=label):
            model = train_denoiser(mode, noisy, clean, noise, cfg.latent_dim,
                                   cfg.depth, tc, point.split(label))
            return _per_sample_sq_err(denoise(model, noisy_t), clean_t)
        _try_method(out, method, run)
    out[METHOD_NONML] = _per_sample_sq_err(noisy_t, clean_t)
    return out, "mse"


def _ofdm_scenario(cfg: ExperimentConfig) -> ofdm.OfdmScenario:
    p = cfg.resolved_params()
    return ofdm.OfdmScenario(n_subcarriers=cfg.input_dim,
                             n_paths=int(p["n_paths"]),
                             pilot_spacing=int(p["pilot_spacing"]),
                             pilot_offset=int(p["pilot_offset"]),
                             snr_db=p["snr_db"])


def _ofdm_pipeline_ser(x_tilde: np.ndarray, symbols: np.ndarray,
                       sc: ofdm.OfdmScenario) -> np.ndarray:
    """Per-vector SER of the estimate-equalise-demap receiver."""
    true_idx = ofdm.nearest_symbol_indices(symbols, sc)
    per_vec = np.empty(x_tilde.shape[0])
    data = sc.data_indices
    for j in range(x_tilde.shape[0]):
        h_hat = ofdm.estimate_channel_cubic(x_tilde[j], sc)
        est = ofdm.demodulate(x_tilde[j], h_hat, sc)
        per_vec[j] = np.mean(est[data] != true_idx[j, data])
    return per_vec


def _ofdm_point(cfg: ExperimentConfig, point: RngStream, tc: TrainConfig):
    """Case II at one grid point: real/imag model pairs, full receiver chain."""
    sc = _ofdm_scenario(cfg)
    train = ofdm.make_case2_dataset(cfg.m_train, sc, point.split(_L_TRAIN))
    test = ofdm.make_case2_dataset(cfg.l_test, sc, point.split(_L_TEST))
    out = {}
    for method, mode, lab_re, lab_im in (
            (METHOD_NLDAE, MODE_NLDAE, _L_INIT_NLDAE, _L_INIT_NLDAE_IM),
            (METHOD_DAE, MODE_DAE, _L_INIT_DAE, _L_INIT_DAE_IM)):
        def run(mode=mode, lab_re=lab_re, lab_im=lab_im):
            m_re = train_denoiser(mode, train.noisy.real, train.clean.real,
                                  train.noise.real, cfg.latent_dim, cfg.depth, tc,
                                  point.split(lab_re))
            m_im = train_denoiser(mode, train.noisy.imag, train.clean.imag,
                                  train.noise.imag, cfg.latent_dim, cfg.depth, tc,
                                  point.split(lab_im))
            x_tilde = denoise_complex(m_re, m_im, test.noisy)
            return _ofdm_pipeline_ser(x_tilde, test.symbols, sc)
        _try_method(out, method, run)
    out[METHOD_NONML] = _ofdm_pipeline_ser(test.noisy, test.symbols, sc)
    return out, "ser"


def _locate_noise(cfg: ExperimentConfig) -> loc.RangeNoiseParams:
    p = cfg.resolved_params()
    return loc.RangeNoiseParams(sigma_n=p["sigma_n"], u_max=p["u_max"],
                                p_nlos=p["p_nlos"], r_nlos=p["r_nlos"],
                                resolution=p["b"], quantizer=p["quantizer"])


def case3_training_triple(batch: loc.Case3Batch, mode: str):
    """Per-mode additive triple for Case III.

    The quantizer destroys additivity between Q(y), x and Q(n), so each mode
    gets the exact decomposition of Q(y) around its own target: the nlDAE
    learns Q(n), the DAE learns the unquantized x.
    """
    if mode == MODE_NLDAE:
        return batch.noisy_q, batch.noisy_q - batch.noise_q, batch.noise_q
    return batch.noisy_q, batch.clean, batch.noisy_q - batch.clean


def _locate_point(cfg: ExperimentConfig, point: RngStream, tc: TrainConfig):
    """Case III at one grid point: denoise quantized distances, MDS-localise."""
    noise = _locate_noise(cfg)
    train = loc.make_case3_dataset(cfg.m_train, noise, point.split(_L_TRAIN),
                                   n_refs=cfg.input_dim)
    test = loc.make_case3_dataset(cfg.l_test, noise, point.split(_L_TEST),
                                  n_refs=cfg.input_dim)

    def localize(dists: np.ndarray, tag: str) -> np.ndarray:
        errors, n_failed, n_clamped = loc.locate_all(dists, test.ref_positions,
                                                     test.targets)
        if n_failed or n_clamped:
            log.info("locate %s: %d clamped negative distances, %d failed trials",
                     tag, n_clamped, n_failed)
        return errors

    out = {}
    for method, mode, label in ((METHOD_NLDAE, MODE_NLDAE, _L_INIT_NLDAE),
                                (METHOD_DAE, MODE_DAE, _L_INIT_DAE)):
        def run(method=method, mode=mode, label=label):
            noisy, clean, nz = case3_training_triple(train, mode)
            model = train_denoiser(mode, noisy, clean, nz, cfg.latent_dim,
                                   cfg.depth, tc, point.split(label))
            return localize(denoise(model, test.noisy_q), method)
        _try_method(out, method, run)
    out[METHOD_NONML] = localize(test.noisy_q, METHOD_NONML)
    return out, "loc_error"


_CASE_POINTS = {"signal": _signal_point, "ofdm": _ofdm_point, "locate": _locate_point}


def run_case(cfg: ExperimentConfig, rows: list[ResultRow] | None = None) -> list[ResultRow]:
    """Sweep one case study; one row per (grid value, seed, method).

    Appends into `rows` as points finish and returns the same list.
    """
    if cfg.case not in _CASE_POINTS:
        raise ConfigError(f"run_case needs signal|ofdm|locate, got {cfg.case!r}")
    chash = config_hash(cfg)
    rows = [] if rows is None else rows
    for gi, value in enumerate(cfg.grid):
        point_cfg = _resolve_point(cfg, value)
        tc = _train_cfg(point_cfg)
        for seed in cfg.seeds:
            point = RngStream(seed).split(gi)
            try:
                per_trial, metric = _CASE_POINTS[cfg.case](point_cfg, point, tc)
            except (DegenerateDataError, AdditiveModelError,
                    TrainingDivergedError, ValueError) as exc:
                log.warning("%s %s=%g seed=%d failed: %s", cfg.case, cfg.sweep,
                            value, seed, exc)
                metric = {"signal": "mse", "ofdm": "ser", "locate": "loc_error"}[cfg.case]
                for method in (METHOD_NLDAE, METHOD_DAE, METHOD_NONML):
                    rows.append(ResultRow(cfg.case, cfg.sweep, value, method, metric,
                                          None, None, 0, seed, chash,
                                          f"{type(exc).__name__}: {exc}"))
                continue
            for method in (METHOD_NLDAE, METHOD_DAE, METHOD_NONML):
                entry = per_trial[method]
                if isinstance(entry, str):  # recorded training failure
                    rows.append(ResultRow(cfg.case, cfg.sweep, value, method, metric,
                                          None, None, 0, seed, chash, entry))
                    continue
                try:
                    mean, se, n = _mean_se(entry)
                    rows.append(ResultRow(cfg.case, cfg.sweep, value, method, metric,
                                          mean, se, n, seed, chash))
                except ValueError as exc:  # e.g. every localization trial failed
                    rows.append(ResultRow(cfg.case, cfg.sweep, value, method, metric,
                                          None, None, 0, seed, chash,
                                          f"{type(exc).__name__}: {exc}"))
    return rows


def run_experiment(cfg: ExperimentConfig,
                   rows: list[ResultRow] | None = None) -> list[ResultRow]:
    if cfg.case in ("toy1", "toy2"):
        return run_toy(cfg, rows)
    return run_case(cfg, rows)


def aggregate(rows: list[ResultRow]) -> list[tuple]:
    """Across-seed summary per (case, sweep_value, method): mean and SE of means."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        if r.mean is None:
            continue
        groups.setdefault((r.case, r.sweep, r.sweep_value, r.method, r.metric),
                          []).append(r.mean)
    out = []
    for key in sorted(groups):
        vals = np.array(groups[key])
        se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        out.append(key + (float(vals.mean()), se, vals.size))
    return out
