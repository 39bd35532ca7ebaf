"""Tensor-train autoregression of order ``p``.

A series is an array of shape ``(T, p_1, ..., p_d)`` with time along the
leading axis. Time indices are 0-based. For order one the fitted tensor is
the rearranged coefficient ``M(A)`` of shape
``(p_1, ..., p_d, p_d, ..., p_1)`` acting on the mode-reversed previous
observation. For order ``p >= 2`` the lags are stacked along a new leading
mode, and after reversal the rearranged coefficient has shape
``(p_1, ..., p_d, p_d, ..., p_1, p)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .regression import FitConfig, RegressionProblem, fit
from .tensor import ShapeError, as_tensor, generalized_inner, reverse_modes, vec

#: spectral radii in [MARGIN, 1) trigger a warning
STATIONARITY_MARGIN = 0.98


class NonStationaryError(ValueError):
    """Raised when an autoregressive coefficient has spectral radius >= 1."""


def as_series(series, min_length: int = 1) -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim < 2:
        raise ShapeError("a series needs a time axis and at least one mode")
    if arr.shape[0] < min_length:
        raise ShapeError(f"series of length {arr.shape[0]} shorter than {min_length}")
    return arr


def rearrange_coeff(a, response_ndim: int | None = None) -> np.ndarray:
    """Reverse the trailing (predictor) modes of a coefficient tensor.

    With ``response_ndim`` omitted the tensor must have ``2d`` modes whose
    trailing sizes repeat the leading ones, in order or reversed. Applying
    the map twice returns the input.
    """
    a = as_tensor(a)
    if response_ndim is None:
        if a.ndim % 2:
            raise ShapeError(f"expected an even number of modes, got {a.ndim}")
        response_ndim = a.ndim // 2
        lead, trail = a.shape[:response_ndim], a.shape[response_ndim:]
        if trail != lead and trail != lead[::-1]:
            raise ShapeError(f"trailing modes of {a.shape} do not repeat the leading ones")
    if not 0 < response_ndim < a.ndim:
        raise ShapeError(f"response_ndim {response_ndim} invalid for order {a.ndim}")
    axes = tuple(range(response_ndim)) + tuple(range(a.ndim - 1, response_ndim - 1, -1))
    return np.ascontiguousarray(np.transpose(a, axes))


def stack_lags(series, t: int, p: int) -> np.ndarray:
    """``(Y_{t-1}, ..., Y_{t-p})`` stacked along a new leading mode."""
    series = as_series(series)
    if p < 1 or not p <= t <= series.shape[0]:
        raise ShapeError(f"time {t} has fewer than {p} preceding observations")
    return np.ascontiguousarray(series[t - p : t][::-1])


def ar_problem(series, order: int, stacked: bool | None = None) -> RegressionProblem:
    """Regression problem with responses ``Y_t`` and reversed lagged predictors.

    ``stacked`` selects the lag-stacked layout; it defaults to
    ``order > 1`` and may be forced for order one, which appends a
    singleton lag mode.
    """
    series = as_series(series, min_length=order + 1)
    stacked = order > 1 if stacked is None else stacked
    if order > 1 and not stacked:
        raise ValueError("order > 1 requires the stacked layout")
    times = range(order, series.shape[0])
    if stacked:
        preds = [reverse_modes(stack_lags(series, t, order)) for t in times]
    else:
        preds = [reverse_modes(series[t - 1]) for t in times]
    return RegressionProblem(series[order:], np.stack(preds))


@dataclass
class ARModel:
    order: int
    coeff: np.ndarray
    ranks: tuple[int, ...]
    series_shape: tuple[int, ...]
    mean: np.ndarray | None = None
    history: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def stacked(self) -> bool:
        return self.coeff.ndim == 2 * len(self.series_shape) + 1

    def lag_coefficients(self) -> list[np.ndarray]:
        """Per-lag coefficients ``A_j`` in the original ``(p.., p..)`` layout."""
        d = len(self.series_shape)
        if self.stacked:
            return [rearrange_coeff(self.coeff[..., j], d) for j in range(self.coeff.shape[-1])]
        return [rearrange_coeff(self.coeff, d)]


def _coeff_from_lags(lags: list[np.ndarray], stacked: bool) -> np.ndarray:
    d = lags[0].ndim // 2
    if not stacked:
        return rearrange_coeff(lags[0], d)
    return np.stack([rearrange_coeff(a, d) for a in lags], axis=-1)


def fit_ar(series, order: int, ranks, cfg: FitConfig | None = None,
           stacked: bool | None = None, center: bool = False) -> ARModel:
    """Fit a TT autoregression by reduction to TT regression.

    ``ranks`` has ``2d - 1`` entries for the order-one layout and ``2d``
    for the lag-stacked one. With ``center`` the series mean is removed
    before fitting and re-added by :func:`forecast`.
    """
    series = as_series(series, min_length=order + 1)
    mean = series.mean(axis=0) if center else None
    data = series - mean if center else series
    prob = ar_problem(data, order, stacked)
    model = fit(prob, ranks, cfg)
    return ARModel(
        order=order,
        coeff=model.coeff,
        ranks=model.ranks,
        series_shape=series.shape[1:],
        mean=mean,
        history=model.history,
        converged=model.converged,
    )


@dataclass
class StationarityReport:
    spectral_radius: float
    is_stationary: bool


def companion_matrix(lags: list[np.ndarray]) -> np.ndarray:
    """Companion matrix of ``[A_1]_d, ..., [A_p]_d``."""
    mats = [a.reshape(int(np.prod(a.shape[: a.ndim // 2])), -1, order="F") for a in lags]
    size = mats[0].shape[0]
    p = len(mats)
    comp = np.zeros((size * p, size * p))
    comp[:size] = np.hstack(mats)
    if p > 1:
        comp[size:, :-size] = np.eye(size * (p - 1))
    return comp


def spectral_radius(lags: list[np.ndarray]) -> float:
    eig = np.linalg.eigvals(companion_matrix(lags))
    return float(np.max(np.abs(eig))) if eig.size else 0.0


def check_stationarity(model: ARModel) -> StationarityReport:
    rho = spectral_radius(model.lag_coefficients())
    if STATIONARITY_MARGIN <= rho < 1:
        warnings.warn(f"spectral radius {rho:.4f} is close to one", RuntimeWarning, stacklevel=2)
    return StationarityReport(spectral_radius=rho, is_stationary=rho < 1)


def forecast(model: ARModel, history, horizon: int = 1) -> np.ndarray:
    """Recursive forecasts for the ``horizon`` steps after ``history``.

    Returns an array of shape ``(horizon, p_1, ..., p_d)``.
    """
    history = as_series(history, min_length=model.order)
    if history.shape[1:] != tuple(model.series_shape):
        raise ShapeError(f"history shape {history.shape[1:]} != model shape {model.series_shape}")
    lags = model.lag_coefficients()
    past = list(history[-model.order :])
    if model.mean is not None:
        past = [y - model.mean for y in past]
    out = []
    for _ in range(horizon):
        nxt = sum(generalized_inner(a, past[-1 - j]) for j, a in enumerate(lags))
        nxt = np.asarray(nxt, dtype=np.float64).reshape(model.series_shape)
        past.append(nxt)
        out.append(nxt if model.mean is None else nxt + model.mean)
    return np.stack(out)


def rolling_errors(series, order: int, ranks, cfg: FitConfig | None = None,
                   start: int | None = None, warm_start: bool = True,
                   center: bool = False) -> np.ndarray:
    """Vectorized one-step-ahead errors, one row per cut ``t >= start``.

    At each cut ``t`` the model is refitted on ``series[:t]`` and used to
    forecast ``series[t]``. Ranks stay fixed across cuts; with
    ``warm_start`` each refit starts from the previous coefficient.
    """
    series = as_series(series)
    cfg = cfg or FitConfig()
    start = order + 1 if start is None else start
    if not order + 1 <= start < series.shape[0]:
        raise ShapeError(f"rolling start {start} must lie in [{order + 1}, {series.shape[0]})")
    init = cfg.init
    rows = []
    for t in range(start, series.shape[0]):
        step_cfg = FitConfig(**{**cfg.__dict__, "init": init})
        model = fit_ar(series[:t], order, ranks, step_cfg, center=center)
        rows.append(vec(series[t] - forecast(model, series[:t], 1)[0]))
        if warm_start:
            init = model.coeff
    return np.stack(rows)


def rolling_forecast_errors(series, order: int, ranks, cfg: FitConfig | None = None,
                            start: int | None = None, warm_start: bool = True,
                            center: bool = False) -> tuple[float, float]:
    """Mean l1 and l2 norms of the errors from :func:`rolling_errors`."""
    errs = rolling_errors(series, order, ranks, cfg, start, warm_start, center)
    return float(np.abs(errs).sum(axis=1).mean()), float(np.linalg.norm(errs, axis=1).mean())
