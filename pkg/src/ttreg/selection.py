"""BIC selection of TT ranks, by exhaustive grid or one mode at a time."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

from .decomp import RankError, check_ranks, is_feasible, max_ranks, tt_project
from .regression import DivergenceError, FitConfig, RegressionProblem, fit, loss

log = logging.getLogger(__name__)

#: mse floor before taking the log, keeps exact fits finite
MSE_FLOOR = 1e-300


def param_count(response_shape, predictor_shape, ranks) -> int:
    """Free parameters ``sum q_i r_i r_{i-1} + sum p_j r_{n+j} r_{n+j-1} + r_n``."""
    dims = tuple(response_shape) + tuple(predictor_shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims) - 1:
        raise RankError(f"need {len(dims) - 1} ranks, got {len(ranks)}")
    full = (1,) + ranks + (1,)
    n = len(tuple(response_shape))
    return sum(q * full[i] * full[i + 1] for i, q in enumerate(dims)) + full[n]


@dataclass
class BICConfig:
    """``phi`` scales the penalty, ``r_bar`` bounds every rank.

    With ``warm_start`` every candidate starts from the projection of the
    fit at the largest ranks instead of from zero.
    """

    phi: float = 0.02
    r_bar: int = 3
    fit: FitConfig = field(default_factory=FitConfig)
    warm_start: bool = False

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError("phi must be positive")
        if self.r_bar < 1:
            raise ValueError("r_bar must be at least 1")


@dataclass
class BICScore:
    ranks: tuple[int, ...]
    mse: float
    n_params: int
    n_samples: int
    phi: float

    @property
    def fit_term(self) -> float:
        return self.n_samples * math.log(max(self.mse, MSE_FLOOR))

    @property
    def penalty(self) -> float:
        return self.phi * self.n_params * math.log(self.n_samples)

    @property
    def value(self) -> float:
        return self.fit_term + self.penalty


def bic_score(prob: RegressionProblem, ranks, cfg: BICConfig, init=None) -> BICScore:
    ranks = check_ranks(prob.coeff_shape, ranks)
    fit_cfg = replace(cfg.fit, init=init, running_ranks=None)
    model = fit(prob, ranks, fit_cfg)
    return BICScore(
        ranks=ranks,
        mse=loss(model.coeff, prob),
        n_params=param_count(prob.response_shape, prob.predictor_shape, ranks),
        n_samples=prob.n_samples,
        phi=cfg.phi,
    )


def bic(prob: RegressionProblem, ranks, cfg: BICConfig | None = None) -> float:
    return bic_score(prob, ranks, cfg or BICConfig()).value


@dataclass
class SelectionResult:
    ranks: tuple[int, ...]
    bic_values: dict[tuple[int, ...], float]
    strategy: str
    scores: list[BICScore] = field(default_factory=list)
    skipped: list[tuple[tuple[int, ...], str]] = field(default_factory=list)
    trace: list[tuple[int, ...]] = field(default_factory=list)

    @property
    def n_fits(self) -> int:
        return len(self.scores)

    def audit_rows(self) -> list[tuple[str, float, int, float, str]]:
        """One ``(ranks, mse, d(R), bic, status)`` row per evaluated candidate.

        Separate search visits the all-``r_bar`` tuple once per mode, so it
        appears once per visit.
        """
        by_ranks = {s.ranks: s for s in self.scores}
        reasons = dict(self.skipped)
        rows = []
        for ranks in self.trace:
            label = "x".join(map(str, ranks))
            s = by_ranks.get(ranks)
            if s is None:
                rows.append((label, math.nan, 0, math.nan, "skipped: " + reasons.get(ranks, "")))
            else:
                rows.append((label, s.mse, s.n_params, s.value, "ok"))
        return rows


class _Scorer:
    def __init__(self, prob: RegressionProblem, cfg: BICConfig):
        self.prob = prob
        self.cfg = cfg
        shape = prob.coeff_shape
        self.bounds = tuple(min(cfg.r_bar, b) for b in max_ranks(shape))
        self.top = None
        if cfg.warm_start:
            top = self._clip_top()
            self.top = fit(prob, top, replace(cfg.fit, init=None, running_ranks=None)).coeff

    def _clip_top(self):
        # largest feasible tuple under the bounds, shrunk left to right
        ranks = list(self.bounds)
        shape = self.prob.coeff_shape
        while not is_feasible(shape, ranks):
            full = [1] + ranks + [1]
            for i in range(len(ranks)):
                ranks[i] = min(ranks[i], full[i] * shape[i], shape[i + 1] * full[i + 2])
                full[i + 1] = ranks[i]
        return tuple(ranks)

    def score(self, ranks, result: SelectionResult) -> BICScore | None:
        ranks = tuple(ranks)
        result.trace.append(ranks)
        shape = self.prob.coeff_shape
        if not is_feasible(shape, ranks):
            result.skipped.append((tuple(ranks), "infeasible ranks"))
            return None
        init = tt_project(self.top, ranks) if self.top is not None else None
        try:
            s = bic_score(self.prob, ranks, self.cfg, init=init)
        except DivergenceError as exc:
            log.warning("ranks %s skipped: %s", ranks, exc)
            result.skipped.append((tuple(ranks), str(exc)))
            return None
        result.scores.append(s)
        result.bic_values[s.ranks] = s.value
        return s


def select_joint(prob: RegressionProblem, cfg: BICConfig | None = None) -> SelectionResult:
    """Minimise BIC over every rank tuple with entries ``<= r_bar``.

    Ties go to the lexicographically smallest tuple.
    """
    cfg = cfg or BICConfig()
    scorer = _Scorer(prob, cfg)
    result = SelectionResult(ranks=(), bic_values={}, strategy="joint")
    best = None
    for ranks in itertools.product(*(range(1, b + 1) for b in scorer.bounds)):
        s = scorer.score(ranks, result)
        if s is not None and (best is None or s.value < best.value):
            best = s
    if best is None:
        raise RankError("no candidate ranks could be fitted")
    result.ranks = best.ranks
    return result


def select_separate(prob: RegressionProblem, cfg: BICConfig | None = None) -> SelectionResult:
    """Choose each rank with all other ranks held at ``r_bar``."""
    cfg = cfg or BICConfig()
    scorer = _Scorer(prob, cfg)
    top = scorer._clip_top()
    result = SelectionResult(ranks=(), bic_values={}, strategy="separate")
    chosen = []
    for j, bound in enumerate(scorer.bounds):
        best = None
        for r in range(1, bound + 1):
            ranks = top[:j] + (r,) + top[j + 1 :]
            s = scorer.score(ranks, result)
            if s is not None and (best is None or s.value < best.value):
                best = s
        chosen.append(best.ranks[j] if best is not None else top[j])
    result.ranks = tuple(chosen)
    return result

