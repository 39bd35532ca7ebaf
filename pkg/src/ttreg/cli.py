"""Command-line interface for TT regression and autoregression.

Exit codes: 0 success, 1 numerical failure, 2 parse or usage error,
3 invalid ranks, 4 divergence, 5 shape mismatch.

Every run writes a JSON run manifest (``--manifest-out``, by default next to
the primary output or ``ttreg-<command>.manifest.json``). ``ttreg
--manifest FILE`` replays the recorded command line.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .autoregression import (
    ARModel,
    NonStationaryError,
    ar_problem,
    check_stationarity,
    fit_ar,
    forecast,
    rolling_forecast_errors,
)
from .decomp import RankError, frobenius_error, reconstruct, seq_ranks, tt_svd_anchored
from .io import (
    FORMAT_VERSIONS,
    FormatError,
    ModelFile,
    read_dt,
    read_model,
    read_problem,
    read_series,
    write_csv_series,
    write_dataset_dir,
    write_dt,
    write_ds,
    write_model,
    write_ts,
    write_tt,
)
from .regression import DivergenceError, FitConfig, fit, loss
from .selection import BICConfig, select_joint, select_separate
from .simulation import (
    CoefficientSpec,
    NoiseSpec,
    gen_ar_coefficient,
    gen_ar_series,
    gen_coefficient,
    gen_regression_data,
    run_error_scaling,
    run_rank_selection,
    run_tt_vs_tucker,
    stream,
)
from .tensor import ShapeError

log = logging.getLogger("ttreg")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_PARSE = 2
EXIT_RANKS = 3
EXIT_DIVERGENCE = 4
EXIT_SHAPE = 5

#: argument names holding input and output paths, used for manifest digests
INPUT_KEYS = ("input", "model")
OUTPUT_KEYS = ("out", "audit", "coeff_out")


class UsageError(Exception):
    pass


# argument parsing -----------------------------------------------------------------

def int_tuple(text: str) -> tuple[int, ...]:
    """``"2,2,3"`` or ``"2x2x3"`` as a tuple of ints."""
    parts = text.replace("x", ",").split(",")
    try:
        vals = tuple(int(p) for p in parts if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty integer list")
    return vals


def step_size(text: str) -> float | str:
    if text == "auto":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"step size must be a number or 'auto', got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError("step size must be positive")
    return v


def expand_ranks(ranks, count: int) -> tuple[int, ...]:
    """Broadcast a single rank to ``count`` entries."""
    ranks = tuple(ranks)
    if len(ranks) == 1 and count > 1:
        return ranks * count
    if len(ranks) != count:
        raise RankError(f"need {count} ranks, got {len(ranks)}")
    return ranks


def _add_fit_flags(p: argparse.ArgumentParser, defaults: FitConfig | None = None,
                   unset: bool = False) -> None:
    """Flags named after the :class:`FitConfig` fields.

    With ``unset`` every flag defaults to ``None`` so the caller can fill gaps.
    """
    d = defaults or FitConfig()
    if unset:
        d = FitConfig(step_size=None, max_iters=None, tol=None, seed=None)
    p.add_argument("--step-size", "--eta", type=step_size, default=d.step_size,
                   help="gradient step size or 'auto' for 1/L (default %(default)s)")
    p.add_argument("--max-iters", "--iters", type=int, default=d.max_iters,
                   help="iteration budget (default %(default)s)")
    p.add_argument("--tol", type=float, default=d.tol,
                   help="relative loss change that stops the descent (default %(default)s)")
    p.add_argument("--running-ranks", type=int_tuple, default=None,
                   help="ranks used inside the descent, at least the model ranks")
    p.add_argument("--seed", type=int, default=d.seed)


def _fit_config(args, n_ranks: int) -> FitConfig:
    if args.max_iters < 0:
        raise UsageError("--max-iters must be nonnegative")
    running = None
    if args.running_ranks is not None:
        running = expand_ranks(args.running_ranks, n_ranks)
    return FitConfig(step_size=args.step_size, max_iters=args.max_iters,
                     running_ranks=running, tol=args.tol, seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttreg", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ttreg {__version__}")
    parser.add_argument("--manifest", metavar="FILE", help="replay the run recorded in FILE")
    parser.add_argument("--manifest-out", metavar="FILE", help="where to write the run manifest")
    parser.add_argument("--threads", type=int, default=1, help="BLAS threads and worker processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("decompose", help="anchored TT decomposition of a .dt tensor")
    p.add_argument("input")
    p.add_argument("--ranks", type=int_tuple, required=True)
    p.add_argument("--anchor", type=int, default=None, help="weight position, 1..d-1 (default d//2)")
    p.add_argument("--out", help=".tt output path")

    p = sub.add_parser("fit", help="TT regression on a .ds file or dataset directory")
    p.add_argument("input")
    p.add_argument("--ranks", type=int_tuple, required=True)
    _add_fit_flags(p)
    p.add_argument("--out", help="model output path")

    p = sub.add_parser("fit-ar", help="TT autoregression on a .ts or .csv series")
    p.add_argument("input")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--ranks", type=int_tuple, required=True)
    p.add_argument("--center", action="store_true", help="remove the series mean before fitting")
    _add_fit_flags(p)
    p.add_argument("--out", help="model output path")

    p = sub.add_parser("select-ranks", help="BIC rank selection")
    p.add_argument("input", help=".ds file, dataset directory, or .ts/.csv series")
    p.add_argument("--order", type=int, default=1, help="autoregressive order for series input")
    p.add_argument("--rbar", "--r-bar", dest="r_bar", type=int, default=3)
    p.add_argument("--phi", type=float, default=0.02)
    p.add_argument("--strategy", choices=("joint", "separate"), default="separate")
    p.add_argument("--warm-start", action="store_true",
                   help="start every candidate from the projected fit at the top ranks")
    _add_fit_flags(p)
    p.add_argument("--audit", default="ranks-audit.tsv", help="audit TSV path (default %(default)s)")

    p = sub.add_parser("forecast", help="forecast with a fitted autoregression")
    p.add_argument("model")
    p.add_argument("input", help=".ts or .csv series")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--rolling-start", type=int, default=None,
                   help="0-based time of the first rolling one-step forecast")
    _add_fit_flags(p, unset=True)
    p.add_argument("--out", default="forecast.ts", help="forecast .ts path (default %(default)s)")

    p = sub.add_parser("simulate", help="simulation experiments and synthetic data")
    sim = p.add_subparsers(dest="experiment")

    e = sim.add_parser("error-scaling")
    e.add_argument("--setting", choices=("a", "b", "c", "d"), default="a")
    e.add_argument("--grid", type=int_tuple, default=None)
    e.add_argument("--noise", choices=("uniform", "gaussian", "correlated"), default="gaussian")
    _add_fit_flags(e, FitConfig(step_size=0.01, max_iters=3000, tol=1e-10))

    e = sim.add_parser("rank-selection")
    e.add_argument("--sigma", type=float, nargs="+", default=[2.0])
    e.add_argument("--signal", choices=("equal", "unequal"), nargs="+", default=["equal"])
    e.add_argument("--strategy", choices=("joint", "separate"), nargs="+",
                   default=["joint", "separate"])
    e.add_argument("--n-grid", type=int_tuple, default=None)
    e.add_argument("--rbar", "--r-bar", dest="r_bar", type=int, default=3)
    e.add_argument("--phi", type=float, default=0.02)
    _add_fit_flags(e, FitConfig(step_size="auto", max_iters=60, tol=1e-4))

    e = sim.add_parser("tt-vs-tucker")
    e.add_argument("--m-grid", type=int_tuple, default=(2, 3, 4, 5))
    e.add_argument("--rank", type=int_tuple, default=(2, 3))
    e.add_argument("--n", type=int, default=600)
    _add_fit_flags(e, FitConfig(step_size="auto", max_iters=2000, tol=1e-9))

    for name in ("error-scaling", "rank-selection", "tt-vs-tucker"):
        e = sim.choices[name]
        e.add_argument("--replications", type=int, default=10)
        e.add_argument("--out", help="TSV output path (stdout if omitted)")

    e = sim.add_parser("dataset", help="regression samples from a random TT coefficient")
    e.add_argument("--response-shape", type=int_tuple, required=True)
    e.add_argument("--predictor-shape", type=int_tuple, required=True)
    e.add_argument("--ranks", type=int_tuple, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--noise", choices=("uniform", "gaussian", "correlated"), default="gaussian")
    e.add_argument("--error-scale", type=float, default=1.0)
    e.add_argument("--sigma-norm", type=float, default=5.0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help=".ds file, or a directory for .dt files")
    e.add_argument("--coeff-out", help="write the true coefficient as .dt")

    e = sim.add_parser("ar-series", help="series from a random stationary TT autoregression")
    e.add_argument("--shape", type=int_tuple, required=True)
    e.add_argument("--ranks", type=int_tuple, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--weights", type=float, nargs="+", default=None)
    e.add_argument("--max-radius", type=float, default=0.9)
    e.add_argument("--error-scale", type=float, default=1.0)
    e.add_argument("--burn-in", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help=".ts or .csv output path")
    e.add_argument("--coeff-out", help="write the rearranged coefficient as .dt")

    sub.add_parser("info", help="print version, file formats and exit codes")
    return parser


# commands ---------------------------------------------------------------------------

def _say(*parts) -> None:
    print(*parts, file=sys.stdout)


def _fmt_tuple(t) -> str:
    return ",".join(str(int(v)) for v in t)


def cmd_decompose(args) -> int:
    x = read_dt(args.input)
    if x.ndim < 2:
        raise ShapeError("decomposition needs a tensor of order at least 2")
    ranks = expand_ranks(args.ranks, x.ndim - 1)
    anchor = max(1, x.ndim // 2) if args.anchor is None else args.anchor
    tt = tt_svd_anchored(x, ranks, anchor)
    approx = reconstruct(tt)
    if not np.all(np.isfinite(approx)):
        raise FloatingPointError("non-finite values in the decomposition")
    if args.out:
        write_tt(args.out, tt)
    for note in tt.advisories:
        print(f"advisory: {note}", file=sys.stderr)
    _say(f"ranks\t{_fmt_tuple(tt.ranks)}")
    _say(f"anchor\t{tt.anchor}")
    scale = float(np.linalg.norm(x.ravel())) or 1.0
    _say(f"relative_error\t{frobenius_error(approx, x) / scale:.6e}")
    _say("orthogonality\t" + "\t".join(f"{r:.3e}" for r in tt.orthogonality_residuals()))
    _say("weights\t" + "\t".join(f"{w:.10g}" for w in tt.weights))
    return EXIT_OK


def _fit_meta(cfg: FitConfig, history, converged: bool, final: float) -> dict[str, str]:
    return {
        "final_loss": format(final, ".17g"),
        "iterations": str(len(history)),
        "converged": str(int(converged)),
        "step_size": str(cfg.step_size),
        "max_iters": str(cfg.max_iters),
        "tol": format(cfg.tol, ".17g"),
        "seed": str(cfg.seed),
    }


def _report_fit(final: float, history, converged: bool, requested, coeff) -> None:
    _say(f"final_loss\t{final:.10g}")
    _say(f"iterations\t{len(history)}")
    _say(f"converged\t{str(converged).lower()}")
    _say(f"ranks_requested\t{_fmt_tuple(requested)}")
    _say(f"ranks_fitted\t{_fmt_tuple(seq_ranks(coeff))}")


def cmd_fit(args) -> int:
    prob = read_problem(args.input)
    ranks = expand_ranks(args.ranks, len(prob.coeff_shape) - 1)
    cfg = _fit_config(args, len(ranks))
    model = fit(prob, ranks, cfg)
    final = loss(model.coeff, prob)
    if not math.isfinite(final):
        raise FloatingPointError("loss is not finite")
    _report_fit(final, model.history, model.converged, ranks, model.coeff)
    if args.out:
        write_model(args.out, ModelFile("regression", model.coeff, model.ranks, prob.response_ndim,
                                        meta=_fit_meta(cfg, model.history, model.converged, final)))
    return EXIT_OK


def _ar_rank_count(series, order: int) -> int:
    d = series.ndim - 1
    return 2 * d - 1 if order == 1 else 2 * d


def _report_stationarity(model: ARModel) -> None:
    report = check_stationarity(model)
    _say(f"spectral_radius\t{report.spectral_radius:.6f}")
    _say(f"stationary\t{str(report.is_stationary).lower()}")
    if not report.is_stationary:
        print(f"warning: fitted autoregression is not stationary "
              f"(spectral radius {report.spectral_radius:.4f})", file=sys.stderr)


def cmd_fit_ar(args) -> int:
    series = read_series(args.input)
    if args.order < 1:
        raise UsageError("--order must be positive")
    ranks = expand_ranks(args.ranks, _ar_rank_count(series, args.order))
    cfg = _fit_config(args, len(ranks))
    model = fit_ar(series, args.order, ranks, cfg, center=args.center)
    data = series - model.mean if model.mean is not None else series
    final = loss(model.coeff, ar_problem(data, args.order))
    if not math.isfinite(final):
        raise FloatingPointError("loss is not finite")
    _report_fit(final, model.history, model.converged, ranks, model.coeff)
    _report_stationarity(model)
    if args.out:
        write_model(args.out, ModelFile("ar", model.coeff, model.ranks, series.ndim - 1,
                                        order=args.order, mean=model.mean,
                                        meta=_fit_meta(cfg, model.history, model.converged, final)))
    return EXIT_OK


def _is_series_path(path: str) -> bool:
    return path.lower().endswith((".ts", ".csv"))


def cmd_select_ranks(args) -> int:
    if _is_series_path(args.input):
        prob = ar_problem(read_series(args.input), args.order)
    else:
        prob = read_problem(args.input)
    cfg = BICConfig(phi=args.phi, r_bar=args.r_bar, warm_start=args.warm_start,
                    fit=_fit_config(args, len(prob.coeff_shape) - 1))
    select = select_joint if args.strategy == "joint" else select_separate
    result = select(prob, cfg)
    lines = ["ranks\tmse\tn_params\tbic\tstatus"]
    for label, mse, n_params, value, status in result.audit_rows():
        lines.append(f"{label}\t{mse:.10g}\t{n_params}\t{value:.10g}\t{status}")
    Path(args.audit).write_text("\n".join(lines) + "\n")
    _say(f"selected\t{_fmt_tuple(result.ranks)}")
    _say(f"strategy\t{result.strategy}")
    _say(f"candidates\t{len(result.trace)}")
    _say(f"fits\t{result.n_fits}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    mf = read_model(args.model)
    if mf.kind != "ar":
        raise UsageError("forecasting needs an autoregressive model")
    series = read_series(args.input)
    shape = mf.coeff.shape[: mf.split]
    if series.shape[1:] != shape:
        raise ShapeError(f"series shape {series.shape[1:]} does not match model shape {shape}")
    model = ARModel(order=mf.order, coeff=mf.coeff, ranks=mf.ranks, series_shape=shape, mean=mf.mean)
    if args.horizon < 1:
        raise UsageError("--horizon must be positive")
    preds = forecast(model, series, args.horizon)
    write_ts(args.out, preds)
    _say(f"horizon\t{args.horizon}")
    _say("first_forecast_norm\t{:.10g}".format(float(np.linalg.norm(preds[0]))))
    if args.rolling_start is not None:
        base = FitConfig()
        for key, cast in (("step_size", step_size), ("max_iters", int), ("tol", float), ("seed", int)):
            if getattr(args, key) is None:
                setattr(args, key, cast(mf.meta[key]) if key in mf.meta else getattr(base, key))
        cfg = _fit_config(args, len(mf.ranks))
        l1, l2 = rolling_forecast_errors(series, mf.order, mf.ranks, cfg, start=args.rolling_start,
                                         center=mf.mean is not None)
        _say(f"l1\t{l1:.10g}")
        _say(f"l2\t{l2:.10g}")
    return EXIT_OK


def _emit_report(report, out) -> None:
    text = report.to_tsv()
    if out:
        Path(out).write_text(text)
        Path(str(out) + ".json").write_text(report.manifest() + "\n")
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    exp = args.experiment
    if exp is None:
        raise UsageError("simulate needs an experiment name")
    jobs = max(1, args.threads)
    if getattr(args, "running_ranks", None) is not None:
        raise UsageError("--running-ranks is not supported for experiments")
    if exp in ("error-scaling", "rank-selection", "tt-vs-tucker") and args.replications < 1:
        raise UsageError("--replications must be positive")
    if exp == "error-scaling":
        report = run_error_scaling(args.setting, args.replications, args.seed, args.grid,
                                   NoiseSpec(args.noise), _fit_config(args, 0), n_jobs=jobs)
    elif exp == "rank-selection":
        bic_cfg = BICConfig(phi=args.phi, r_bar=args.r_bar, warm_start=True,
                            fit=_fit_config(args, 0))
        report = run_rank_selection(args.replications, args.seed, args.n_grid, tuple(args.sigma),
                                    tuple(args.signal), tuple(args.strategy), bic_cfg, n_jobs=jobs)
    elif exp == "tt-vs-tucker":
        report = run_tt_vs_tucker(args.replications, args.seed, args.m_grid, args.rank, args.n,
                                  fit_cfg=_fit_config(args, 0), n_jobs=jobs)
    elif exp == "dataset":
        return _simulate_dataset(args)
    else:
        return _simulate_ar_series(args)
    _emit_report(report, args.out)
    log.info("%s finished in %.1f s", report.name, report.elapsed)
    return EXIT_OK


def _simulate_dataset(args) -> int:
    n_ranks = len(args.response_shape) + len(args.predictor_shape) - 1
    spec = CoefficientSpec(args.response_shape, args.predictor_shape,
                           expand_ranks(args.ranks, n_ranks), sigma_norm=args.sigma_norm)
    rng = stream(args.seed)
    coeff = gen_coefficient(spec, rng)
    prob = gen_regression_data(coeff, len(args.response_shape), args.n,
                               NoiseSpec(args.noise, error_scale=args.error_scale), rng)
    if args.out.endswith(".ds"):
        write_ds(args.out, prob)
    else:
        write_dataset_dir(args.out, prob)
    if args.coeff_out:
        write_dt(args.coeff_out, coeff)
    _say(f"samples\t{args.n}")
    _say(f"coefficient_shape\t{_fmt_tuple(coeff.shape)}")
    return EXIT_OK


def _simulate_ar_series(args) -> int:
    shape = tuple(args.shape)
    d = len(shape)
    spec = CoefficientSpec(shape, shape[::-1], expand_ranks(args.ranks, 2 * d - 1), anchor=d,
                           weights=tuple(args.weights) if args.weights else None)
    rng = stream(args.seed)
    m, rho = gen_ar_coefficient(spec, rng, max_radius=args.max_radius)
    series = gen_ar_series(m, args.n, NoiseSpec("gaussian", error_scale=args.error_scale),
                           seed=rng, burn_in=args.burn_in)
    if args.out.lower().endswith(".csv"):
        write_csv_series(args.out, series)
    else:
        write_ts(args.out, series)
    if args.coeff_out:
        write_dt(args.coeff_out, m)
    _say(f"observations\t{args.n}")
    _say(f"spectral_radius\t{rho:.6f}")
    return EXIT_OK


def cmd_info(args) -> int:
    _say(f"ttreg\t{__version__}")
    _say(f"python\t{platform.python_version()}")
    _say(f"numpy\t{np.__version__}")
    for ext, header in FORMAT_VERSIONS.items():
        _say(f"format.{ext}\t{header}")
    _say("format.csv\tshape=p1xp2x...")
    for code, meaning in ((0, "ok"), (1, "numerical failure"), (2, "parse error"),
                          (3, "invalid ranks"), (4, "divergence"), (5, "shape mismatch")):
        _say(f"exit.{code}\t{meaning}")
    return EXIT_OK


COMMANDS = {
    "decompose": cmd_decompose,
    "fit": cmd_fit,
    "fit-ar": cmd_fit_ar,
    "select-ranks": cmd_select_ranks,
    "forecast": cmd_forecast,
    "simulate": cmd_simulate,
    "info": cmd_info,
}


# manifests --------------------------------------------------------------------------

def _digest(path) -> str | None:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_file():
        h.update(path.read_bytes())
    elif path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(f.relative_to(path)).encode())
            h.update(f.read_bytes())
    else:
        return None
    return h.hexdigest()


def _paths(args, keys) -> dict[str, str | None]:
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        if v:
            out[str(v)] = _digest(v)
    return out


def _config(args) -> dict:
    cfg = {}
    for k, v in vars(args).items():
        if k in ("manifest", "manifest_out"):
            continue
        cfg[k] = list(v) if isinstance(v, tuple) else v
    return cfg


def _manifest_path(args) -> Path:
    if args.manifest_out:
        return Path(args.manifest_out)
    out = getattr(args, "out", None) or getattr(args, "audit", None)
    if out:
        return Path(str(out).rstrip("/") + ".manifest.json")
    name = args.command + (f"-{args.experiment}" if getattr(args, "experiment", None) else "")
    return Path(f"ttreg-{name}.manifest.json")


def write_run_manifest(args, argv, code: int, started: float, elapsed: float,
                       inputs: dict, error: str | None) -> Path:
    manifest = {
        "tool": "ttreg",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "config": _config(args),
        "seed": getattr(args, "seed", None),
        "threads": args.threads,
        "inputs": inputs,
        "outputs": _paths(args, OUTPUT_KEYS),
        "started_unix": started,
        "elapsed_seconds": elapsed,
        "exit_code": code,
        "error": error,
        "numpy": np.__version__,
    }
    path = _manifest_path(args)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _replay_argv(path: str) -> list[str]:
    try:
        data = json.loads(Path(path).read_text())
        argv = list(data["argv"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"cannot read run manifest {path}: {exc}") from exc
    for p, digest in (data.get("inputs") or {}).items():
        if digest is not None and _digest(p) != digest:
            print(f"warning: input {p} changed since the recorded run", file=sys.stderr)
    return argv


def _strip_replay(argv: list[str]) -> list[str]:
    out, skip = [], False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--manifest":
            skip = True
            continue
        if a.startswith("--manifest="):
            continue
        out.append(a)
    return out


# entry point ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.manifest:
        try:
            argv = _replay_argv(args.manifest)
        except FormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        argv = _strip_replay(argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_PARSE

    inputs = _paths(args, INPUT_KEYS)
    started = time.time()
    t0 = time.perf_counter()
    error = None
    try:
        with threadpool_limits(limits=max(1, args.threads)):
            code = COMMANDS[args.command](args)
    except DivergenceError as exc:
        code, error = EXIT_DIVERGENCE, str(exc)
    except RankError as exc:
        code, error = EXIT_RANKS, str(exc)
    except ShapeError as exc:
        code, error = EXIT_SHAPE, str(exc)
    except (FormatError, UsageError) as exc:
        code, error = EXIT_PARSE, str(exc)
    except (np.linalg.LinAlgError, FloatingPointError, NonStationaryError) as exc:
        code, error = EXIT_NUMERICAL, str(exc)
    if error:
        print(f"error: {error}", file=sys.stderr)
    try:
        write_run_manifest(args, argv, code, started, time.perf_counter() - t0, inputs, error)
    except OSError as exc:
        print(f"warning: could not write run manifest: {exc}", file=sys.stderr)
    return code


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
