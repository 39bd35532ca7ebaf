"""Tensor-train regression fitted by approximate projected gradient descent."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .decomp import check_ranks, hosvd_project, tt_project, tt_projector, tt_svd_anchored
from .tensor import ShapeError, as_tensor, vec

log = logging.getLogger(__name__)

#: loss growth over the initial loss that counts as divergence
DIVERGENCE_FACTOR = 1e3
#: relative loss level below which the sufficient-statistic loss is not resolved
LOSS_FLOOR = 1e-14
#: relative coefficient change that ends an exact fit
COEFF_TOL = 1e-13


class DivergenceError(RuntimeError):
    """Raised when gradient descent blows up; retry with a smaller step size."""


@dataclass
class RegressionProblem:
    """``N`` paired samples stacked along a leading axis.

    ``responses`` has shape ``(N, q_1, ..., q_n)`` and ``predictors``
    ``(N, p_1, ..., p_m)``.
    """

    responses: np.ndarray
    predictors: np.ndarray

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=np.float64)
        self.predictors = np.asarray(self.predictors, dtype=np.float64)
        if self.responses.ndim < 2 or self.predictors.ndim < 2:
            raise ShapeError("responses and predictors need a sample axis and at least one mode")
        if self.responses.shape[0] != self.predictors.shape[0]:
            raise ShapeError(
                f"{self.responses.shape[0]} responses but {self.predictors.shape[0]} predictors"
            )
        if self.responses.shape[0] < 1:
            raise ShapeError("need at least one sample")

    @classmethod
    def from_lists(cls, responses, predictors) -> "RegressionProblem":
        return cls(np.stack([as_tensor(y) for y in responses]),
                   np.stack([as_tensor(x) for x in predictors]))

    @property
    def n_samples(self) -> int:
        return self.responses.shape[0]

    @property
    def response_shape(self) -> tuple[int, ...]:
        return self.responses.shape[1:]

    @property
    def predictor_shape(self) -> tuple[int, ...]:
        return self.predictors.shape[1:]

    @property
    def coeff_shape(self) -> tuple[int, ...]:
        return self.response_shape + self.predictor_shape

    @property
    def response_ndim(self) -> int:
        return len(self.response_shape)

    @cached_property
    def y_matrix(self) -> np.ndarray:
        """``N x Q`` matrix whose rows are ``vec(Y_i)``."""
        return self.responses.reshape(self.n_samples, -1, order="F")

    @cached_property
    def x_matrix(self) -> np.ndarray:
        return self.predictors.reshape(self.n_samples, -1, order="F")

    @cached_property
    def xtx(self) -> np.ndarray:
        return self.x_matrix.T @ self.x_matrix

    @cached_property
    def ytx(self) -> np.ndarray:
        return self.y_matrix.T @ self.x_matrix

    @cached_property
    def yty(self) -> float:
        return float(np.sum(self.y_matrix**2))

    def coeff_matrix(self, a) -> np.ndarray:
        """``[A]_n``, the ``Q x P`` unfolding acting on ``vec(X_i)``."""
        a = np.asarray(a, dtype=np.float64)
        if a.shape != self.coeff_shape:
            raise ShapeError(f"coefficient shape {a.shape} != expected {self.coeff_shape}")
        return a.reshape(self.y_matrix.shape[1], -1, order="F")

    def predict(self, a) -> np.ndarray:
        """Fitted responses ``<A, X_i>`` stacked as ``(N, q_1, ..., q_n)``."""
        fitted = self.x_matrix @ self.coeff_matrix(a).T
        return fitted.reshape(self.responses.shape, order="F")

    def lipschitz_step(self) -> float:
        """``1 / L`` with ``L`` the largest eigenvalue of the loss Hessian."""
        top = float(np.linalg.eigvalsh(self.xtx)[-1]) * 2.0 / self.n_samples
        if top <= 0:
            return 1.0
        return 1.0 / top


def loss(a, prob: RegressionProblem) -> float:
    """Mean squared residual ``N^{-1} sum_i ||Y_i - <A, X_i>||_F^2``."""
    resid = prob.y_matrix - prob.x_matrix @ prob.coeff_matrix(a).T
    return float(np.sum(resid * resid) / prob.n_samples)


def gradient(a, prob: RegressionProblem) -> np.ndarray:
    """``2 N^{-1} sum_i (<A, X_i> - Y_i) o X_i`` in one residual pass."""
    resid = prob.x_matrix @ prob.coeff_matrix(a).T - prob.y_matrix
    g = (2.0 / prob.n_samples) * (resid.T @ prob.x_matrix)
    return g.reshape(prob.coeff_shape, order="F")


@dataclass
class FitConfig:
    """Knobs of projected gradient descent.

    ``step_size`` is a positive float or ``"auto"`` for ``1/L`` where ``L``
    is the largest Hessian eigenvalue of the loss. ``running_ranks``
    defaults to the model ranks. ``tol`` stops on relative loss change.
    """

    step_size: float | str = 0.01
    max_iters: int = 1000
    running_ranks: tuple[int, ...] | None = None
    tol: float = 1e-10
    init: np.ndarray | None = None
    seed: int = 0

    def resolve_step(self, prob: RegressionProblem) -> float:
        if self.step_size == "auto":
            return prob.lipschitz_step()
        eta = float(self.step_size)
        if not eta > 0:
            raise ValueError(f"step size must be positive, got {self.step_size}")
        return eta


@dataclass
class RegressionModel:
    coeff: np.ndarray
    ranks: tuple[int, ...]
    anchor: int
    history: list[float] = field(default_factory=list)
    converged: bool = False
    step_size: float = 0.0
    running_ranks: tuple[int, ...] | None = None

    @property
    def iterations(self) -> int:
        return len(self.history)

    def predict(self, x) -> np.ndarray:
        """Response for a single predictor tensor."""
        x = as_tensor(x)
        lead = self.coeff.shape[: self.anchor]
        m = self.coeff.reshape(int(np.prod(lead)), -1, order="F")
        if m.shape[1] != x.size or self.coeff.shape[self.anchor:] != x.shape:
            raise ShapeError(f"predictor shape {x.shape} incompatible with coefficient {self.coeff.shape}")
        return (m @ vec(x)).reshape(lead, order="F")


def projected_gradient_descent(
    prob: RegressionProblem,
    project: Callable[[np.ndarray], np.ndarray],
    cfg: FitConfig,
) -> tuple[np.ndarray, list[float], bool, float]:
    """Run gradient steps each followed by ``project``.

    Returns the final coefficient, the loss after every iteration, a
    convergence flag and the step size used.
    """
    eta = cfg.resolve_step(prob)
    n = prob.n_samples
    xtx, ytx, yty = prob.xtx, prob.ytx, prob.yty
    shape = prob.coeff_shape
    q = prob.y_matrix.shape[1]

    if cfg.init is None:
        am = np.zeros((q, prob.x_matrix.shape[1]))
    else:
        am = prob.coeff_matrix(cfg.init).copy()
    ax = am @ xtx
    prev = (yty - 2.0 * np.vdot(am, ytx) + np.vdot(ax, am)) / n
    start = max(prev, 0.0)
    # below this level the loss is rounding noise; progress is judged on the coefficient
    floor = LOSS_FLOOR * yty / n
    history: list[float] = []
    converged = False

    for _ in range(cfg.max_iters):
        step = am - eta * (2.0 / n) * (ax - ytx)
        old = am
        am = project(step.reshape(shape, order="F")).reshape(q, -1, order="F")
        ax = am @ xtx
        cur = float((yty - 2.0 * np.vdot(am, ytx) + np.vdot(ax, am)) / n)
        history.append(cur)
        if not np.isfinite(cur) or cur > DIVERGENCE_FACTOR * max(start, floor):
            raise DivergenceError(
                f"loss grew from {start:.3g} to {cur:.3g}; use a smaller step size than {eta:.3g}"
            )
        if cur <= floor:
            if np.linalg.norm(am - old) <= COEFF_TOL * np.linalg.norm(am):
                converged = True
                break
        elif abs(prev - cur) <= cfg.tol * abs(prev):
            converged = True
            break
        prev = cur
    return am.reshape(shape, order="F"), history, converged, eta


def fit(prob: RegressionProblem, ranks, cfg: FitConfig | None = None) -> RegressionModel:
    """Least-squares coefficient with TT ranks at most ``ranks``."""
    cfg = cfg or FitConfig()
    shape = prob.coeff_shape
    ranks = check_ranks(shape, ranks)
    running = check_ranks(shape, cfg.running_ranks) if cfg.running_ranks is not None else ranks
    if any(rr < r for rr, r in zip(running, ranks)):
        raise ValueError(f"running ranks {running} must dominate model ranks {ranks}")

    coeff, history, converged, eta = projected_gradient_descent(
        prob, tt_projector(shape, running), cfg
    )
    if running != ranks:
        coeff = tt_project(coeff, ranks)
    log.debug("fit: %d iterations, converged=%s", len(history), converged)
    return RegressionModel(
        coeff=coeff,
        ranks=ranks,
        anchor=prob.response_ndim,
        history=history,
        converged=converged,
        step_size=eta,
        running_ranks=running,
    )


def fit_tucker(prob: RegressionProblem, tucker_ranks, cfg: FitConfig | None = None) -> np.ndarray:
    """Baseline estimator: gradient descent projected by truncated HOSVD."""
    cfg = cfg or FitConfig()
    tucker_ranks = tuple(int(r) for r in tucker_ranks)
    coeff, _, _, _ = projected_gradient_descent(
        prob, lambda a: hosvd_project(a, tucker_ranks), cfg
    )
    return coeff


def extract_factors(model: RegressionModel, x, y):
    """Response factors, predictor factors and weights of the anchored TT.

    With ``A`` decomposed at the response/predictor split, responses are
    summarised by the orthonormal left chain and predictors by the
    orthonormal right chain; in the noiseless case
    ``response_factors == weights * predictor_factors``.
    """
    tt = tt_svd_anchored(model.coeff, model.ranks, model.anchor)
    x = as_tensor(x)
    y = as_tensor(y)
    shape = model.coeff.shape
    if y.shape != shape[: model.anchor] or x.shape != shape[model.anchor:]:
        raise ShapeError(f"shapes {y.shape}, {x.shape} do not match coefficient {shape}")
    response_factors = tt.left_basis().T @ vec(y)
    predictor_factors = tt.right_basis() @ vec(x)
    return response_factors, predictor_factors, tt.weights.copy()
