"""Command-line entry point.

    nldae run --config sweep.cfg [--out results.csv] [--seeds 1,2,3] [--paper-scale]
    nldae toy --example 1 --sigma-grid 0.25,0.5,1.0 [--m N] [--l N] [--out csv]
    nldae save-model --case toy1 --mode nlDAE --out model.txt [...]
    nldae load-model model.txt
    nldae selftest

Exit codes: 0 success, 1 configuration error, 2 runtime failure (a partial
CSV is kept for whatever grid points completed).
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench
from . import localization as loc
from . import model_io
from . import ofdm
from . import signal_restoration as sig
from .bench import ConfigError, ExperimentConfig
from .denoise import (MODES, MODE_NLDAE, DenoiserModel, denoise, fit_scaler,
                      regenerate, train_denoiser)
from .nn import TrainConfig
from .rng import RngStream

log = logging.getLogger("nldae")


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {text!r}: {exc}") from None


def _write_and_report(rows, out_path: str) -> None:
    bench.write_csv(rows, out_path)
    print(f"wrote {len(rows)} rows to {out_path}")
    for key in bench.aggregate(rows):
        case, sweep, value, method, metric, mean, se, n = key
        print(f"  {case} {sweep}={value:g} {method:>6} {metric}: "
              f"{mean:.6g} +- {se:.2g} (n={n} seeds)")


def _run_config(cfg: ExperimentConfig, out_path: str) -> int:
    rows: list[bench.ResultRow] = []
    try:
        bench.run_experiment(cfg, rows)
    except Exception as exc:  # partial results are still worth keeping
        log.error("run failed: %s", exc)
        if rows:
            bench.write_csv(rows, out_path)
            print(f"kept partial CSV with {len(rows)} rows at {out_path}")
        return 2
    _write_and_report(rows, out_path)
    return 0


def _cmd_run(args) -> int:
    cfg = bench.load_config_file(args.config)
    if args.seeds:
        cfg.seeds = _parse_seeds(args.seeds)
    if args.paper_scale:
        cfg.m_train = bench.PAPER_TRAIN_SIZE
        cfg.l_test = bench.PAPER_TEST_SIZE
    out_path = args.out or cfg.out_path or "results.csv"
    return _run_config(cfg, out_path)


def _cmd_toy(args) -> int:
    grid = tuple(float(v) for v in args.sigma_grid.split(","))
    cfg = ExperimentConfig(case=f"toy{args.example}", sweep="noise_param", grid=grid,
                           m_train=args.m, l_test=args.l,
                           latent_dim=args.p_prime, depth=args.depth,
                           seeds=_parse_seeds(args.seeds), max_iters=args.max_iters)
    return _run_config(cfg, args.out)


def _train_single_model(args) -> DenoiserModel:
    """Train one denoiser of the requested case for persistence demos."""
    tc = TrainConfig(max_iters=args.max_iters)
    r = RngStream(args.seed)
    mode = args.mode
    if args.case in ("toy1", "toy2"):
        noisy, clean, noise = bench._toy_draw(args.case, args.m, 12, args.sigma,
                                              r.split(0))
    elif args.case == "signal":
        noisy, clean, noise = sig.make_case1_dataset(
            args.m, sig.sinusoid_sampler(), sig.CorruptionSpec(), r.split(0))
    elif args.case == "locate":
        batch = loc.make_case3_dataset(args.m, loc.RangeNoiseParams(), r.split(0))
        noisy, clean, noise = bench.case3_training_triple(batch, mode)
    else:  # ofdm: one part of the real/imaginary pair
        batch = ofdm.make_case2_dataset(args.m, ofdm.OfdmScenario(), r.split(0))
        part = (lambda z: z.real) if args.part == "re" else (lambda z: z.imag)
        noisy, clean, noise = part(batch.noisy), part(batch.clean), part(batch.noise)
    return train_denoiser(mode, noisy, clean, noise, args.p_prime, args.depth,
                             tc, r.split(1))


def _cmd_save_model(args) -> int:
    model = _train_single_model(args)
    model_io.save_model(model, args.out)
    print(f"saved {model.mode} model ({'-'.join(map(str, model.mlp.dims))}) to {args.out}")
    return 0


def _cmd_load_model(args) -> int:
    model = model_io.load_model(args.path)
    print(f"mode      : {model.mode}")
    print(f"dims      : {'-'.join(str(d) for d in model.mlp.dims)}")
    print(f"scaler_in : [{model.scaler_in.lo:g}, {model.scaler_in.hi:g}] -> "
          f"[{model.scaler_in.a:g}, {model.scaler_in.b:g}]")
    print(f"scaler_out: [{model.scaler_out.lo:g}, {model.scaler_out.hi:g}] -> "
          f"[{model.scaler_out.a:g}, {model.scaler_out.b:g}]")
    probe = RngStream(0).uniform(model.scaler_in.lo, model.scaler_in.hi,
                                 size=3 * model.input_dim).reshape(3, -1)
    out = denoise(model, probe)
    print(f"probe     : 3 inputs denoised, outputs finite = {bool(np.isfinite(out).all())}")
    return 0


def _selftest_checks():
    """(name, callable) pairs; each raises AssertionError on failure."""

    def rng_check():
        assert RngStream(1).next_u64() == 6791897765849424158
        assert RngStream(2).next_u64() == 7235116703822611636
        r = RngStream(3)
        u = r.uniform(0.0, 1.0, size=100_000)
        assert abs(u.mean() - 0.5) < 0.005 and (u >= 0).all() and (u < 1).all()
        a, b = RngStream(9), RngStream(9)
        assert [a.next_u64() for _ in range(50)] == [b.next_u64() for _ in range(50)]

    def gradient_check():
        from .nn import Dataset, gradient, mean_loss, mlp_init, params_flatten, params_unflatten
        r = RngStream(5)
        net = mlp_init([4, 3, 4], r)
        data = Dataset(r.uniform(0.1, 0.9, size=20).reshape(5, 4),
                       r.uniform(0.2, 0.8, size=20).reshape(5, 4))
        g = gradient(net, data)
        flat = params_flatten(net)
        h = 1e-5
        for i in range(0, flat.size, 7):
            fp, fm = flat.copy(), flat.copy()
            fp[i] += h
            fm[i] -= h
            fd = (mean_loss(params_unflatten(net.dims, fp), data)
                  - mean_loss(params_unflatten(net.dims, fm), data)) / (2 * h)
            assert abs(g[i] - fd) / max(abs(g[i]), abs(fd), 1e-4) < 1e-5

    def scaler_check():
        s = fit_scaler(np.array([0.0, 10.0]), 0.0, 1.0)
        assert s.apply(np.array([5.0]))[0] == 0.5
        v = RngStream(4).uniform(-3, 17, size=1000)
        assert np.abs(s.invert(s.apply(v)) - v).max() < 1e-12 * 17

    def nldae_identity_check():
        r = RngStream(6)
        noisy, clean, noise = bench._toy_draw("toy1", 200, 12, 0.5, r.split(0))
        model = train_denoiser(MODE_NLDAE, noisy, clean, noise, 9, 1,
                                  TrainConfig(max_iters=20), r.split(1))
        y = r.uniform(0, 4, size=100 * 12).reshape(100, 12)
        assert np.array_equal(denoise(model, y), y - regenerate(model, y))

    def spline_check():
        sc = ofdm.OfdmScenario()
        flat = np.ones(12, complex) * sc.pilot_symbol
        h_hat = ofdm.estimate_channel_cubic(flat, sc)
        assert np.abs(h_hat - 1.0).max() < 1e-12
        knots = sc.pilot_indices.astype(float)
        vals = np.array([0.3, -1.2, 2.2, 0.7])
        out = ofdm.natural_cubic_interp(knots, vals, knots)
        assert np.abs(out - vals).max() < 1e-12

    def mds_check():
        s = loc.gen_scene(12, 100.0, RngStream(2))
        err = loc.loc_error(loc.mds_locate(s.ref_positions, loc.true_distances(s)),
                            s.target)
        assert err < 1e-6
        rng = RngStream(8)
        a = rng.normal(0, 1, size=169).reshape(13, 13)
        a = 0.5 * (a + a.T)
        vals, vecs = loc.jacobi_eigh(a)
        assert np.abs(a @ vecs - vecs * vals).max() < 1e-8

    def quantizer_check():
        assert loc.quantize(23, 10) == 20.0
        assert loc.quantize(25, 10) == 30.0
        assert loc.quantize(-4, 10) == 0.0

    def model_io_check():
        import os
        import tempfile
        r = RngStream(7)
        noisy, clean, noise = bench._toy_draw("toy2", 150, 12, 0.5, r.split(0))
        model = train_denoiser(MODE_NLDAE, noisy, clean, noise, 9, 1,
                                  TrainConfig(max_iters=15), r.split(1))
        probe = r.uniform(0, 3, size=50 * 12).reshape(50, 12)
        with tempfile.TemporaryDirectory() as td:
            path = os.path.join(td, "m.txt")
            model_io.save_model(model, path)
            again = model_io.load_model(path)
        assert np.array_equal(denoise(model, probe), denoise(again, probe))

    return [("rng determinism + moments", rng_check),
            ("backprop vs finite differences", gradient_check),
            ("scaler round trip", scaler_check),
            ("nlDAE subtraction identity", nldae_identity_check),
            ("cubic spline knot fidelity", spline_check),
            ("MDS exactness + Jacobi residual", mds_check),
            ("quantizer fixtures", quantizer_check),
            ("model save/load round trip", model_io_check)]


def _cmd_selftest(_args) -> int:
    failures = 0
    for name, check in _selftest_checks():
        try:
            check()
        except Exception as exc:  # report every suite, do not stop early
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"PASS {name}")
    return 2 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nldae",
                                     description="Noise-learning DAE benchmark suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a sweep described by a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="CSV output path")
    p_run.add_argument("--seeds", default=None, help="comma list overriding the config")
    p_run.add_argument("--paper-scale", action="store_true",
                       help=f"force M={bench.PAPER_TRAIN_SIZE}, L={bench.PAPER_TEST_SIZE}")
    p_run.set_defaults(fn=_cmd_run)

    p_toy = sub.add_parser("toy", help="run a toy example sweep over the noise std")
    p_toy.add_argument("--example", type=int, choices=(1, 2), required=True)
    p_toy.add_argument("--sigma-grid", required=True, help="comma list of noise stds")
    p_toy.add_argument("--m", type=int, default=bench.DESK_TRAIN_SIZE)
    p_toy.add_argument("--l", type=int, default=bench.DESK_TEST_SIZE)
    p_toy.add_argument("--p-prime", type=int, default=9)
    p_toy.add_argument("--depth", type=int, default=1)
    p_toy.add_argument("--seeds", default="1,2,3,4,5")
    p_toy.add_argument("--max-iters", type=int, default=500)
    p_toy.add_argument("--out", default="toy_results.csv")
    p_toy.set_defaults(fn=_cmd_toy)

    p_save = sub.add_parser("save-model", help="train one denoiser and save it")
    p_save.add_argument("--case", choices=("toy1", "toy2", "signal", "ofdm", "locate"),
                        default="toy1")
    p_save.add_argument("--mode", choices=MODES, default=MODE_NLDAE)
    p_save.add_argument("--out", required=True)
    p_save.add_argument("--sigma", type=float, default=0.5, help="toy noise std")
    p_save.add_argument("--part", choices=("re", "im"), default="re",
                        help="which half of the ofdm model pair")
    p_save.add_argument("--m", type=int, default=bench.DESK_TRAIN_SIZE)
    p_save.add_argument("--p-prime", type=int, default=9)
    p_save.add_argument("--depth", type=int, default=1)
    p_save.add_argument("--seed", type=int, default=1)
    p_save.add_argument("--max-iters", type=int, default=500)
    p_save.set_defaults(fn=_cmd_save_model)

    p_load = sub.add_parser("load-model", help="inspect a saved model file")
    p_load.add_argument("path")
    p_load.set_defaults(fn=_cmd_load_model)

    p_self = sub.add_parser("selftest", help="run the fast invariant suite")
    p_self.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 1
    except Exception as exc:
        log.error("runtime failure: %s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
