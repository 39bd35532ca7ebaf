"""Synthetic data generators and the simulation experiments.

Randomness comes from :func:`numpy.random.default_rng` seeded with a
``[seed, *index]`` entropy list, so each replication of each grid cell has
its own reproducible stream regardless of execution order.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .autoregression import (
    NonStationaryError,
    ar_problem,
    fit_ar,
    rearrange_coeff,
    spectral_radius,
)
from .decomp import check_ranks, random_tt, reconstruct, svd
from .regression import FitConfig, RegressionProblem, fit, fit_tucker
from .selection import BICConfig, select_joint, select_separate

log = logging.getLogger(__name__)

#: the six (p1, p2, p3, q1, q2) splits with p1+p2+p3+q1+q2 = 26
DIM_SUM_SPLITS = (
    (5, 5, 5, 6, 5),
    (4, 5, 6, 6, 5),
    (3, 6, 6, 6, 5),
    (6, 6, 6, 4, 4),
    (7, 5, 5, 5, 4),
    (8, 4, 4, 5, 5),
)


def stream(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, index)])


@dataclass
class CoefficientSpec:
    response_shape: tuple[int, ...]
    predictor_shape: tuple[int, ...]
    ranks: tuple[int, ...]
    sigma_norm: float = 5.0
    anchor: int | None = None
    weights: tuple[float, ...] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.response_shape) + tuple(self.predictor_shape)

    def resolved_anchor(self) -> int:
        return len(self.response_shape) if self.anchor is None else self.anchor


def gen_coefficient(spec: CoefficientSpec, seed) -> np.ndarray:
    """Coefficient tensor with the designed TT ranks.

    Orthonormal factors come from Gaussian SVDs. Unless explicit weights
    are given, the anchor weights are Gaussian, rescaled to Frobenius norm
    ``sigma_norm``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    ranks = check_ranks(spec.shape, spec.ranks)
    tt = random_tt(spec.shape, ranks, rng, anchor=spec.resolved_anchor(), weights=spec.weights)
    if spec.weights is None:
        tt.weights = tt.weights * (spec.sigma_norm / np.linalg.norm(tt.weights))
    return reconstruct(tt)


def gen_tucker_coefficient(shape, rank: int, core_norm: float, seed) -> np.ndarray:
    """Tucker tensor with orthonormal factors and a Gaussian core of given norm."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    factors = [svd(rng.standard_normal((p, rank)))[0] for p in shape]
    core = rng.standard_normal((rank,) * len(shape))
    core *= core_norm / np.linalg.norm(core)
    out = core
    for i, u in enumerate(factors):
        out = np.moveaxis(np.tensordot(u, out, axes=([1], [i])), 0, i)
    return out


def toeplitz_cov_factor(size: int, rho: float) -> np.ndarray:
    """Cholesky factor of the ``rho**|i-j|`` covariance matrix."""
    if not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    idx = np.arange(size)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    return np.linalg.cholesky(cov)


@dataclass
class NoiseSpec:
    """Distribution of predictor and error entries.

    ``kind`` is ``"uniform"`` (on (-0.5, 0.5)), ``"gaussian"`` or
    ``"correlated"`` (Gaussian vectors with covariance ``rho**|i-j|``).
    ``error_scale`` multiplies the errors only; zero gives noiseless data.
    """

    kind: str = "gaussian"
    error_scale: float = 1.0
    rho: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian", "correlated"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")

    def draw(self, rng: np.random.Generator, n: int, size: int) -> np.ndarray:
        """``n`` vectors of length ``size``, one per row."""
        if self.kind == "uniform":
            return rng.uniform(-0.5, 0.5, size=(n, size))
        z = rng.standard_normal((n, size))
        if self.kind == "correlated":
            z = z @ toeplitz_cov_factor(size, self.rho).T
        return z


def gen_regression_data(coeff, response_ndim: int, n: int, noise: NoiseSpec, seed) -> RegressionProblem:
    """Samples ``Y_i = <A, X_i> + E_i`` with predictors and errors from ``noise``."""
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    coeff = np.asarray(coeff, dtype=np.float64)
    q_shape = coeff.shape[:response_ndim]
    p_shape = coeff.shape[response_ndim:]
    q, p = int(np.prod(q_shape)), int(np.prod(p_shape))
    x = noise.draw(rng, n, p)
    e = noise.draw(rng, n, q) * noise.error_scale
    y = x @ coeff.reshape(q, p, order="F").T + e
    return RegressionProblem(
        y.reshape((n,) + q_shape, order="F"), x.reshape((n,) + p_shape, order="F")
    )


def gen_ar_coefficient(spec: CoefficientSpec, seed, max_radius: float = 0.95,
                       max_tries: int = 1000) -> tuple[np.ndarray, float]:
    """Rearranged order-one coefficient ``M(A)`` with spectral radius ``<= max_radius``.

    Draws are rejected until the radius bound holds; returns the tensor and
    its radius.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    d = len(spec.response_shape)
    for _ in range(max_tries):
        m = gen_coefficient(spec, rng)
        rho = spectral_radius([rearrange_coeff(m, d)])
        if rho <= max_radius:
            return m, rho
    raise NonStationaryError(f"no draw with spectral radius <= {max_radius} in {max_tries} tries")


def gen_ar_series(coeff_rearranged, n: int, noise: NoiseSpec | None = None, seed=0,
                  burn_in: int = 200, series_shape=None) -> np.ndarray:
    """``n`` observations of ``Y_t = sum_j <A_j, Y_{t-j}> + E_t`` after a burn-in.

    ``coeff_rearranged`` is ``M(A)`` for order one or the lag-stacked
    ``M(A_{1:p})``; the order is inferred from its number of modes. The
    recursion starts from zeros. Errors follow ``noise`` (Gaussian by
    default) scaled by ``noise.error_scale``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    noise = noise or NoiseSpec()
    m = np.asarray(coeff_rearranged, dtype=np.float64)
    d = m.ndim // 2
    shape = tuple(series_shape) if series_shape is not None else m.shape[:d]
    if m.ndim % 2:
        lags = [rearrange_coeff(m[..., j], d) for j in range(m.shape[-1])]
    else:
        lags = [rearrange_coeff(m, d)]
    rho = spectral_radius(lags)
    if rho >= 1:
        raise NonStationaryError(f"spectral radius {rho:.4f} >= 1")
    size = int(np.prod(shape))
    mats = [a.reshape(size, size, order="F") for a in lags]
    total = burn_in + n
    e = noise.draw(rng, total, size) * noise.error_scale
    y = np.zeros((total, size))
    for t in range(total):
        acc = e[t].copy()
        for j, a in enumerate(mats, start=1):
            if t - j >= 0:
                acc += a @ y[t - j]
        y[t] = acc
    return y[burn_in:].reshape((n,) + shape, order="F")


@dataclass
class ExperimentReport:
    """Per-cell summary rows of one experiment."""

    name: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    replications: int = 1
    seed: int = 0
    config: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def column(self, key: str, **where) -> list:
        return [r[key] for r in self.rows if all(r.get(k) == v for k, v in where.items())]

    def to_tsv(self) -> str:
        cols = self.columns + ["nrep", "seed"]
        lines = ["\t".join(cols)]
        for r in self.rows:
            vals = [r.get(c, "") for c in self.columns] + [self.replications, self.seed]
            lines.append("\t".join(_fmt(v) for v in vals))
        return "\n".join(lines) + "\n"

    def manifest(self) -> str:
        return json.dumps(
            {"experiment": self.name, "replications": self.replications, "seed": self.seed,
             "elapsed_seconds": self.elapsed, "config": self.config},
            indent=2, default=str, sort_keys=True,
        )


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _map(func: Callable, args: list, n_jobs: int) -> list:
    if n_jobs <= 1:
        return [func(a) for a in args]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, args))


def _summary(errors) -> tuple[float, float]:
    arr = np.asarray(errors, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


# error scaling ---------------------------------------------------------------

ERROR_SCALING_GRIDS = {
    "a": [200, 300, 400, 700, 1000, 1500],
    "b": [1, 2, 3, 4, 5, 6],
    "c": [3, 4, 5, 6, 8, 10],
    "d": list(range(len(DIM_SUM_SPLITS))),
}


def error_scaling_design(setting: str, value) -> tuple[tuple, tuple, int, int]:
    """``(response_shape, predictor_shape, rank, N)`` for one grid cell."""
    if setting == "a":
        return (4, 4), (5, 5, 5), 2, int(value)
    if setting == "b":
        return (6, 6), (6, 6, 6), int(value), 1000
    if setting == "c":
        v = int(value)
        return (v, v), (v, v, v), 1, 600
    if setting == "d":
        p1, p2, p3, q1, q2 = DIM_SUM_SPLITS[int(value)]
        return (q1, q2), (p1, p2, p3), 1, 600
    raise ValueError(f"unknown setting {setting!r}")


@dataclass
class _Replication:
    setting: str
    cell: int
    value: object
    rep: int
    seed: int
    noise: NoiseSpec
    fit_cfg: FitConfig


def _error_scaling_rep(job: _Replication) -> float:
    q_shape, p_shape, r, n = error_scaling_design(job.setting, job.value)
    rng = stream(job.seed, job.cell, job.rep)
    spec = CoefficientSpec(q_shape, p_shape, (r,) * (len(q_shape) + len(p_shape) - 1))
    a = gen_coefficient(spec, rng)
    prob = gen_regression_data(a, len(q_shape), n, job.noise, rng)
    model = fit(prob, spec.ranks, job.fit_cfg)
    return float(np.linalg.norm((model.coeff - a).ravel()))


def run_error_scaling(setting: str, replications: int, seed: int = 0, grid=None,
                      noise: NoiseSpec | None = None, fit_cfg: FitConfig | None = None,
                      n_jobs: int = 1) -> ExperimentReport:
    """Mean and sd of ``||A_hat - A||_F`` over a grid of one design knob.

    Settings: ``a`` varies N with dims (4,4|5,5,5) and rank 2; ``b`` varies
    the rank at dims 6 and N=1000; ``c`` varies a common dimension at rank
    1 and N=600; ``d`` cycles through :data:`DIM_SUM_SPLITS` at rank 1 and
    N=600.
    """
    noise = noise or NoiseSpec("gaussian")
    fit_cfg = fit_cfg or FitConfig(step_size=0.01, max_iters=3000, tol=1e-10)
    grid = list(ERROR_SCALING_GRIDS[setting] if grid is None else grid)
    t0 = time.perf_counter()
    jobs = [
        _Replication(setting, cell, value, rep, seed, noise, fit_cfg)
        for cell, value in enumerate(grid)
        for rep in range(replications)
    ]
    errors = _map(_error_scaling_rep, jobs, n_jobs)
    report = ExperimentReport(
        name=f"error-scaling-{setting}",
        columns=["setting", "value", "mean", "sd"],
        replications=replications,
        seed=seed,
        config={"grid": grid, "noise": asdict(noise), "fit": _cfg_dict(fit_cfg)},
    )
    for cell, value in enumerate(grid):
        mean, sd = _summary(errors[cell * replications : (cell + 1) * replications])
        report.rows.append({"setting": setting, "value": value, "mean": mean, "sd": sd})
    report.elapsed = time.perf_counter() - t0
    return report


def _cfg_dict(cfg: FitConfig) -> dict:
    out = asdict(cfg)
    out["init"] = None if cfg.init is None else "provided"
    return out


# rank selection --------------------------------------------------------------

RANK_SELECTION_SIGNALS = {"equal": (1.5, 1.5), "unequal": (2.0, 1.0)}


@dataclass
class _SelectionJob:
    sigma_index: int
    signal_index: int
    n: int
    n_max: int
    rep: int
    seed: int
    weights: tuple[float, ...]
    strategies: tuple[str, ...]
    bic_cfg: BICConfig
    shape: tuple[int, ...]
    ranks: tuple[int, ...]
    max_radius: float


def _rank_selection_rep(job: _SelectionJob) -> dict[str, bool]:
    # coefficient and path depend on the replication only, so every N sees
    # a prefix of the same series
    key = (job.seed, job.sigma_index, job.signal_index, job.rep)
    d = len(job.shape)
    spec = CoefficientSpec(job.shape, job.shape[::-1], job.ranks, anchor=d, weights=job.weights)
    m, _ = gen_ar_coefficient(spec, stream(*key, 0), max_radius=job.max_radius)
    series = gen_ar_series(m, job.n_max + 1, seed=stream(*key, 1))[: job.n + 1]
    prob = ar_problem(series, 1)
    out = {}
    for strategy in job.strategies:
        select = select_joint if strategy == "joint" else select_separate
        out[strategy] = select(prob, job.bic_cfg).ranks == tuple(job.ranks)
    return out


#: PGD settings used inside every BIC evaluation of the experiment
SELECTION_FIT = FitConfig(step_size="auto", max_iters=60, tol=1e-4)


def run_rank_selection(replications: int, seed: int = 0, n_grid=None, sigmas=(1.0, 2.0),
                       signals=("equal", "unequal"), strategies=("joint", "separate"),
                       bic_cfg: BICConfig | None = None, shape=(5, 5, 5),
                       ranks=(2, 2, 2, 2, 2), max_radius: float = 0.95,
                       n_jobs: int = 1) -> ExperimentReport:
    """Proportion of exactly recovered TT ranks of an order-one TT autoregression.

    Joint search runs for equal signals only, as its grid is large.
    """
    n_grid = list(n_grid if n_grid is not None else [50 + 100 * j for j in range(6)])
    bic_cfg = bic_cfg or BICConfig(phi=0.02, r_bar=3, warm_start=True, fit=SELECTION_FIT)
    t0 = time.perf_counter()
    cells = []
    jobs = []
    for si, sigma in enumerate(sigmas):
        for gi, signal in enumerate(signals):
            strat = tuple(s for s in strategies if s == "separate" or signal == "equal")
            if not strat:
                continue
            weights = tuple(w * sigma for w in RANK_SELECTION_SIGNALS[signal])
            for n in n_grid:
                cells.append((sigma, signal, n, strat))
                jobs += [
                    _SelectionJob(si, gi, n, max(n_grid), rep, seed, weights, strat, bic_cfg,
                                  tuple(shape), tuple(ranks), max_radius)
                    for rep in range(replications)
                ]
    results = _map(_rank_selection_rep, jobs, n_jobs)
    report = ExperimentReport(
        name="rank-selection",
        columns=["strategy", "signal", "sigma", "n", "proportion"],
        replications=replications,
        seed=seed,
        config={"n_grid": n_grid, "phi": bic_cfg.phi, "r_bar": bic_cfg.r_bar,
                "warm_start": bic_cfg.warm_start, "fit": _cfg_dict(bic_cfg.fit),
                "shape": list(shape), "ranks": list(ranks), "max_radius": max_radius},
    )
    for ci, (sigma, signal, n, strat) in enumerate(cells):
        chunk = results[ci * replications : (ci + 1) * replications]
        for s in strat:
            prop = float(np.mean([r[s] for r in chunk]))
            report.rows.append(
                {"strategy": s, "signal": signal, "sigma": sigma, "n": n, "proportion": prop}
            )
    report.elapsed = time.perf_counter() - t0
    return report


# TT versus Tucker -------------------------------------------------------------

@dataclass
class _CompareJob:
    arm: str
    rank: int
    m: int
    rep: int
    seed: int
    n: int
    dim: int
    fit_cfg: FitConfig


def _compare_rep(job: _CompareJob) -> float:
    rng = stream(job.seed, 0 if job.arm == "tt" else 1, job.rank, job.m, job.rep)
    shape = (job.dim,) * (job.m + 1)
    if job.arm == "tt":
        ranks = (job.rank,) * job.m
        a = gen_coefficient(CoefficientSpec((job.dim,), (job.dim,) * job.m, ranks), rng)
    else:
        a = gen_tucker_coefficient(shape, job.rank, 5.0, rng)
    prob = gen_regression_data(a, 1, job.n, NoiseSpec("gaussian"), rng)
    if job.arm == "tt":
        est = fit(prob, ranks, job.fit_cfg).coeff
    else:
        est = fit_tucker(prob, (job.rank,) * len(shape), job.fit_cfg)
    return float(np.linalg.norm((est - a).ravel()))


def run_tt_vs_tucker(replications: int, seed: int = 0, m_grid=(2, 3, 4, 5), ranks=(2, 3),
                     n: int = 600, dim: int = 5, fit_cfg: FitConfig | None = None,
                     n_jobs: int = 1) -> ExperimentReport:
    """Estimation error of TT and Tucker regression as the predictor order grows."""
    fit_cfg = fit_cfg or FitConfig(step_size="auto", max_iters=2000, tol=1e-9)
    t0 = time.perf_counter()
    cells = [(arm, r, m) for arm in ("tt", "tucker") for r in ranks for m in m_grid]
    jobs = [_CompareJob(arm, r, m, rep, seed, n, dim, fit_cfg)
            for arm, r, m in cells for rep in range(replications)]
    errors = _map(_compare_rep, jobs, n_jobs)
    report = ExperimentReport(
        name="tt-vs-tucker",
        columns=["arm", "rank", "m", "mean", "sd"],
        replications=replications,
        seed=seed,
        config={"m_grid": list(m_grid), "ranks": list(ranks), "n": n, "dim": dim,
                "fit": _cfg_dict(fit_cfg)},
    )
    for ci, (arm, r, m) in enumerate(cells):
        mean, sd = _summary(errors[ci * replications : (ci + 1) * replications])
        report.rows.append({"arm": arm, "rank": r, "m": m, "mean": mean, "sd": sd})
    report.elapsed = time.perf_counter() - t0
    return report


# autoregression error ---------------------------------------------------------

def ar_estimation_error(shape, ranks, n: int, seed, max_radius: float = 0.9,
                        fit_cfg: FitConfig | None = None, noise: NoiseSpec | None = None):
    """Fit an order-one TT autoregression to a simulated series.

    Returns ``(error, coefficient, series)`` where the error is
    ``||M(A_hat) - M(A)||_F``.
    """
    rng = seed if isinstance(seed, np.random.Generator) else stream(seed)
    shape = tuple(shape)
    d = len(shape)
    spec = CoefficientSpec(shape, shape[::-1], tuple(ranks), anchor=d)
    m, _ = gen_ar_coefficient(spec, rng, max_radius=max_radius)
    series = gen_ar_series(m, n + 1, noise=noise, seed=rng)
    cfg = fit_cfg or FitConfig(step_size="auto", max_iters=2000, tol=1e-10)
    model = fit_ar(series, 1, ranks, cfg)
    return float(np.linalg.norm((model.coeff - m).ravel())), m, series
