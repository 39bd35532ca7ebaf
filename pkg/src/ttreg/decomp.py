"""Anchored tensor-train decomposition, low-rank TT projection and HOSVD.

Core conventions (0-based Python, first-index-fastest unfoldings):

* ``left_factor`` is ``q_1 x r_1`` and ``right_factor`` is ``q_d x r_{d-1}``.
* interior core ``i`` has shape ``(r_{i-1}, q_i, r_i)``; its "split 2"
  unfolding is ``core.reshape(r_{i-1} * q_i, r_i, order="F")`` and its
  "split 1" unfolding is ``core.reshape(r_{i-1}, q_i * r_i, order="F")``.
* ``anchor`` k (1 <= k <= d-1) is the number of modes to the left of the
  diagonal weight matrix. Factors left of it have orthonormal split-2
  unfoldings, factors right of it have orthonormal split-1 unfoldings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeError, as_tensor, mode_matricize, mode_multiply, seq_matricize

log = logging.getLogger(__name__)

#: relative singular-value threshold for numerical ranks
RANK_TOL = 1e-8
#: weights below this fraction of the largest one are zeroed
WEIGHT_FLOOR = 1e-14


class RankError(ValueError):
    """Raised for TT or Tucker ranks that cannot be realised for a shape."""


def max_ranks(shape) -> tuple[int, ...]:
    """Largest attainable TT ranks ``min(prod(p[:i]), prod(p[i:]))``."""
    shape = tuple(shape)
    return tuple(
        int(min(np.prod(shape[:i]), np.prod(shape[i:]))) for i in range(1, len(shape))
    )


def check_ranks(shape, ranks) -> tuple[int, ...]:
    """Validate TT ranks for ``shape`` and return them as a tuple of ints.

    Besides the attainable bound this enforces the chain condition
    ``r_i <= r_{i-1} q_i`` and ``r_{i-1} <= q_i r_i`` without which no TT
    representation with these ranks exists.
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape) - 1:
        raise RankError(f"need {len(shape) - 1} ranks for shape {shape}, got {len(ranks)}")
    if any(r < 1 for r in ranks):
        raise RankError(f"ranks must be positive, got {ranks}")
    bound = max_ranks(shape)
    if any(r > b for r, b in zip(ranks, bound)):
        raise RankError(f"ranks {ranks} exceed attainable bound {bound} for shape {shape}")
    full = (1,) + ranks + (1,)
    for i, q in enumerate(shape):
        if full[i + 1] > full[i] * q or full[i] > q * full[i + 1]:
            raise RankError(f"ranks {ranks} are not a consistent TT rank chain for {shape}")
    return ranks


def is_feasible(shape, ranks) -> bool:
    try:
        check_ranks(shape, ranks)
    except RankError:
        return False
    return True


def svd(m: np.ndarray):
    """Thin SVD with a fixed sign convention.

    Each left singular vector is flipped so its largest-magnitude entry is
    positive, which makes cores reproducible.
    """
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, s, vt * signs[:, None]


def truncated_svd(m: np.ndarray, r: int):
    u, s, vt = svd(m)
    if r > s.size:
        raise RankError(f"rank {r} exceeds matrix dimensions {m.shape}")
    return u[:, :r], s[:r], vt[:r]


def _pad_note(s: np.ndarray, r: int, position: int) -> str | None:
    """Advisory text when rank ``r`` keeps numerically zero directions."""
    numerical = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if r <= numerical:
        return None
    note = f"r_{position} = {r} exceeds numerical rank {numerical}; padded with zero directions"
    log.info(note)
    return note


@dataclass
class TTDecomposition:
    left_factor: np.ndarray
    cores: list[np.ndarray]
    weights: np.ndarray
    anchor: int
    right_factor: np.ndarray
    #: notes on ranks padded beyond the numerical rank during decomposition
    advisories: list[str] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.cores) + 2

    @property
    def shape(self) -> tuple[int, ...]:
        return (
            (self.left_factor.shape[0],)
            + tuple(c.shape[1] for c in self.cores)
            + (self.right_factor.shape[0],)
        )

    @property
    def ranks(self) -> tuple[int, ...]:
        return (self.left_factor.shape[1],) + tuple(c.shape[2] for c in self.cores)

    def factors(self) -> list[np.ndarray]:
        """All TT factors in mode order, without the weights."""
        return [self.left_factor, *self.cores, self.right_factor]

    def left_basis(self) -> np.ndarray:
        """Orthonormal ``prod(q_1..q_k) x r_k`` matrix left of the anchor."""
        return _left_chain(self.factors()[: self.anchor])

    def right_basis(self) -> np.ndarray:
        """Orthonormal-row ``r_k x prod(q_{k+1}..q_d)`` matrix right of the anchor."""
        return _right_chain(self.factors()[self.anchor :])

    def orthogonality_residuals(self) -> list[float]:
        """Frobenius distance from identity of every constrained factor Gram matrix."""
        res = []
        for i, g in enumerate(self.factors()):
            if i == 0:
                gram = g.T @ g
            elif i == self.order - 1:
                gram = g.T @ g
            elif i < self.anchor:
                m = g.reshape(-1, g.shape[2], order="F")
                gram = m.T @ m
            else:
                m = g.reshape(g.shape[0], -1, order="F")
                gram = m @ m.T
            res.append(float(np.linalg.norm(gram - np.eye(gram.shape[0]))))
        return res


def _left_chain(factors) -> np.ndarray:
    """``(I (x) G_1) ... [G_k]_2`` built without Kronecker products."""
    left = np.asarray(factors[0])
    for core in factors[1:]:
        r0, q, r1 = core.shape
        left = (left @ core.reshape(r0, q * r1, order="F")).reshape(-1, r1, order="F")
    return left


def _right_chain(factors) -> np.ndarray:
    """``[G_{k+1}]_1 ([G_{k+2}]_1 (x) I) ... (G_d^T (x) I)``."""
    right = np.asarray(factors[-1]).T
    for core in reversed(factors[:-1]):
        r0, q, r1 = core.shape
        right = (core.reshape(r0 * q, r1, order="F") @ right).reshape(r0, -1, order="F")
    return right


def reconstruct(tt: TTDecomposition) -> np.ndarray:
    """Dense tensor from an anchored TT decomposition."""
    mat = (tt.left_basis() * tt.weights) @ tt.right_basis()
    return mat.reshape(tt.shape, order="F")


def tt_svd_anchored(x, ranks, anchor: int) -> TTDecomposition:
    """Decompose ``x`` into orthonormal TT factors around a diagonal weight.

    A left-to-right SVD sweep handles modes ``1..anchor-1``, a right-to-left
    sweep handles modes ``d..anchor+2`` and a final SVD of the remaining
    two-mode block yields the factors on either side of the anchor and the
    weights. Exact whenever the sequential ranks of ``x`` do not exceed
    ``ranks``; otherwise a quasi-optimal truncation.
    """
    x = as_tensor(x, min_order=2)
    shape = x.shape
    d = len(shape)
    ranks = check_ranks(shape, ranks)
    if not 1 <= anchor <= d - 1:
        raise RankError(f"anchor {anchor} out of range 1..{d - 1}")
    full = (1,) + ranks + (1,)
    factors: list[np.ndarray | None] = [None] * d
    notes: list[str | None] = []

    # left sweep; c holds the remainder as (r_{i-1} * q_i, rest)
    c = x.reshape(-1, order="F")
    for i in range(anchor - 1):
        m = c.reshape(full[i] * shape[i], -1, order="F")
        u, s, vt = truncated_svd(m, full[i + 1])
        notes.append(_pad_note(s, full[i + 1], i + 1))
        factors[i] = u if i == 0 else u.reshape(full[i], shape[i], full[i + 1], order="F")
        c = (s[:, None] * vt).reshape(-1, order="F")

    # right sweep; c is viewed as (rest, q_i * r_i)
    for i in range(d - 1, anchor, -1):
        m = c.reshape(-1, shape[i] * full[i + 1], order="F")
        u, s, vt = truncated_svd(m, full[i])
        notes.append(_pad_note(s, full[i], i))
        if i == d - 1:
            factors[i] = vt.T
        else:
            factors[i] = vt.reshape(full[i], shape[i], full[i + 1], order="F")
        c = (u * s).reshape(-1, order="F")

    k = anchor - 1
    m = c.reshape(full[k] * shape[k], shape[k + 1] * full[k + 2], order="F")
    u, s, vt = truncated_svd(m, full[k + 1])
    notes.append(_pad_note(s, full[k + 1], anchor))
    s = np.where(s < WEIGHT_FLOOR * (s[0] if s.size else 0.0), 0.0, s)
    factors[k] = u if k == 0 else u.reshape(full[k], shape[k], full[k + 1], order="F")
    if k + 1 == d - 1:
        factors[k + 1] = vt.T
    else:
        factors[k + 1] = vt.reshape(full[k + 1], shape[k + 1], full[k + 2], order="F")

    return TTDecomposition(
        left_factor=factors[0],
        cores=list(factors[1:-1]),
        weights=s,
        anchor=anchor,
        right_factor=factors[-1],
        advisories=[n for n in notes if n],
    )


def seq_ranks(x, tol: float = RANK_TOL) -> tuple[int, ...]:
    """Numerical rank of every sequential unfolding ``[X]_1 .. [X]_{d-1}``."""
    x = as_tensor(x)
    out = []
    for s in range(1, x.ndim):
        sv = np.linalg.svd(seq_matricize(x, s), compute_uv=False)
        if sv.size == 0 or sv[0] == 0:
            out.append(0)
        else:
            out.append(int(np.sum(sv > tol * sv[0])))
    return tuple(out)


def _top_left_basis(m: np.ndarray, r: int) -> np.ndarray:
    """Orthonormal basis of the dominant rank-``r`` column space of ``m``.

    Uses the eigendecomposition of the smaller Gram matrix, which is much
    cheaper than an SVD for the short-and-wide unfoldings met in the sweep.
    """
    rows, cols = m.shape
    if r >= rows:
        return np.eye(rows)
    if rows <= cols:
        return np.linalg.eigh(m @ m.T)[1][:, : -r - 1 : -1]
    v = np.linalg.eigh(m.T @ m)[1][:, : -r - 1 : -1]
    return np.linalg.qr(m @ v)[0]


def _sweep(x: np.ndarray, shape: tuple[int, ...], ranks: tuple[int, ...]) -> np.ndarray:
    left = None
    c = x.reshape(shape[0], -1, order="F")
    r_prev = 1
    for i, r in enumerate(ranks):
        m = c.reshape(r_prev * shape[i], -1, order="F")
        u = _top_left_basis(m, r)
        c = u.T @ m
        if left is None:
            left = u
        else:
            left = (left @ u.reshape(r_prev, -1, order="F")).reshape(-1, r, order="F")
        r_prev = r
    return (left @ c).reshape(shape, order="F")


def tt_project(x, ranks) -> np.ndarray:
    """Approximate projection onto tensors with TT ranks at most ``ranks``.

    Applies the best rank-``r_j`` approximation to the unfoldings
    ``[X]_1, [X]_2, ..., [X]_{d-1}`` in that order, each on the output of
    the previous step. After step ``j`` the rows of ``[X]_{j+1}`` factor
    through an orthonormal basis, so every truncation is carried out on the
    small coefficient block instead of the full unfolding; the result is
    the same tensor.
    """
    x = as_tensor(x, min_order=2)
    return _sweep(x, x.shape, check_ranks(x.shape, ranks))


def tt_projector(shape, ranks):
    """:func:`tt_project` for a fixed shape, validated once up front."""
    shape = tuple(int(s) for s in shape)
    ranks = check_ranks(shape, ranks)
    return lambda x: _sweep(x, shape, ranks)


@dataclass
class TuckerDecomposition:
    core: np.ndarray
    factors: list[np.ndarray] = field(default_factory=list)

    def full(self) -> np.ndarray:
        out = self.core
        for i, u in enumerate(self.factors):
            out = mode_multiply(out, i, u)
        return out


def hosvd(x, tucker_ranks) -> TuckerDecomposition:
    x = as_tensor(x)
    tucker_ranks = tuple(int(r) for r in tucker_ranks)
    if len(tucker_ranks) != x.ndim:
        raise RankError(f"need {x.ndim} Tucker ranks, got {len(tucker_ranks)}")
    for r, p in zip(tucker_ranks, x.shape):
        if not 1 <= r <= p:
            raise RankError(f"Tucker rank {r} invalid for mode size {p}")
    factors = []
    for i, r in enumerate(tucker_ranks):
        u, _, _ = svd(mode_matricize(x, i))
        factors.append(u[:, :r])
    core = x
    for i, u in enumerate(factors):
        core = mode_multiply(core, i, u.T)
    return TuckerDecomposition(core=core, factors=factors)


def hosvd_project(x, tucker_ranks) -> np.ndarray:
    """Truncated HOSVD reconstruction with the given Tucker ranks."""
    return hosvd(x, tucker_ranks).full()


def random_tt(shape, ranks, rng: np.random.Generator, anchor: int | None = None,
              weights=None) -> TTDecomposition:
    """Anchored TT with orthonormal factors drawn from Gaussian SVDs."""
    shape = tuple(int(s) for s in shape)
    ranks = check_ranks(shape, ranks)
    d = len(shape)
    anchor = d // 2 if anchor is None else anchor
    if not 1 <= anchor <= d - 1:
        raise RankError(f"anchor {anchor} out of range 1..{d - 1}")
    full = (1,) + ranks + (1,)
    factors = []
    for i in range(d):
        r0, q, r1 = full[i], shape[i], full[i + 1]
        if i < anchor:
            u, _, _ = svd(rng.standard_normal((r0 * q, r1)))
            g = u if i == 0 else u.reshape(r0, q, r1, order="F")
        else:
            _, _, vt = svd(rng.standard_normal((r0, q * r1)))
            g = vt.T if i == d - 1 else vt.reshape(r0, q, r1, order="F")
        factors.append(g)
    if weights is None:
        weights = rng.standard_normal(full[anchor])
    weights = np.sort(np.abs(np.asarray(weights, dtype=np.float64)))[::-1]
    if weights.shape != (full[anchor],):
        raise RankError(f"need {full[anchor]} weights at anchor {anchor}")
    return TTDecomposition(
        left_factor=factors[0],
        cores=factors[1:-1],
        weights=weights,
        anchor=anchor,
        right_factor=factors[-1],
    )


def frobenius_error(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.linalg.norm((a - b).ravel()))
