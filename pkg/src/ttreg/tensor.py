"""Dense tensor algebra with a first-index-fastest layout.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Every
flattening in this package uses Fortran order, so element
``(i_1, ..., i_d)`` (1-based) sits at linear offset
``sum_k (i_k - 1) * prod_{l<k} p_l``. Functions take 0-based Python
indices; the 1-based notation appears only in docstrings that quote index
formulas. Under this layout the sequential matricization is a pure
reshape.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are incompatible."""


def as_tensor(x, min_order: int = 1) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim < min_order:
        raise ShapeError(f"expected a tensor of order >= {min_order}, got order {arr.ndim}")
    if any(s < 1 for s in arr.shape):
        raise ShapeError(f"mode sizes must be positive, got {arr.shape}")
    return arr


def vec(x: np.ndarray) -> np.ndarray:
    """Stack all entries first-index-fastest."""
    return np.asarray(x, dtype=np.float64).reshape(-1, order="F")


def unvec(v: np.ndarray, shape) -> np.ndarray:
    return np.asarray(v, dtype=np.float64).reshape(tuple(shape), order="F")


def _check_mode(x: np.ndarray, s: int) -> None:
    if not 0 <= s < x.ndim:
        raise ShapeError(f"mode {s} out of range for order-{x.ndim} tensor")


def mode_multiply(x, k: int, y) -> np.ndarray:
    """Mode-``k`` product ``X x_k Y`` with ``Y`` of size ``q_k x p_k``.

    The result replaces mode ``k`` (0-based) of size ``p_k`` by ``q_k``.
    """
    x = as_tensor(x)
    y = np.asarray(y, dtype=np.float64)
    _check_mode(x, k)
    if y.ndim != 2 or y.shape[1] != x.shape[k]:
        raise ShapeError(
            f"matrix with shape {y.shape} cannot multiply mode {k} of size {x.shape[k]}"
        )
    out = np.tensordot(y, x, axes=([1], [k]))
    return np.moveaxis(out, 0, k)


def generalized_inner(x, z) -> np.ndarray | float:
    """Contract ``z`` against the trailing modes of ``x``.

    Returns a tensor over the leading ``x.ndim - z.ndim`` modes, or a float
    when the orders agree (ordinary inner product).
    """
    x = as_tensor(x)
    z = as_tensor(z)
    m = x.ndim - z.ndim
    if m < 0 or x.shape[m:] != z.shape:
        raise ShapeError(f"trailing modes of {x.shape} do not match {z.shape}")
    lead = x.shape[:m]
    out = x.reshape(int(np.prod(lead)), -1, order="F") @ vec(z)
    if m == 0:
        return float(out[0])
    return unvec(out, lead)


def frobenius_norm(x) -> float:
    x = as_tensor(x)
    return float(np.sqrt(np.sum(x * x)))


def mode_matricize(x, s: int) -> np.ndarray:
    """Mode-``s`` unfolding ``[X]_(s)``: rows are mode ``s``, columns the rest."""
    x = as_tensor(x)
    _check_mode(x, s)
    return np.moveaxis(x, s, 0).reshape(x.shape[s], -1, order="F")


def mode_unmatricize(m, shape, s: int) -> np.ndarray:
    shape = tuple(shape)
    moved = (shape[s],) + shape[:s] + shape[s + 1 :]
    m = np.asarray(m, dtype=np.float64)
    if m.size != int(np.prod(shape)) or m.shape[0] != shape[s]:
        raise ShapeError(f"matrix {m.shape} does not unfold shape {shape} at mode {s}")
    return np.moveaxis(m.reshape(moved, order="F"), 0, s)


def seq_matricize(x, s: int) -> np.ndarray:
    """Sequential unfolding ``[X]_s``: rows enumerate modes ``1..s``.

    ``s`` counts leading modes (1 <= s <= d); ``s = d`` yields a single
    column. No data is moved.
    """
    x = as_tensor(x)
    if not 1 <= s <= x.ndim:
        raise ShapeError(f"split {s} out of range for order-{x.ndim} tensor")
    rows = int(np.prod(x.shape[:s]))
    return x.reshape(rows, -1, order="F")


def seq_unmatricize(m, shape, s: int) -> np.ndarray:
    """Inverse of :func:`seq_matricize` for a tensor of the given shape."""
    shape = tuple(int(p) for p in shape)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if not 1 <= s <= len(shape):
        # a length-N tensor read from a 1 x N row
        if not (s == 0 and m.shape[0] == 1):
            raise ShapeError(f"split {s} out of range for shape {shape}")
    rows = int(np.prod(shape[:s]))
    cols = int(np.prod(shape[s:]))
    if m.shape != (rows, cols):
        raise ShapeError(f"matrix {m.shape} does not factor as {rows} x {cols} for shape {shape}")
    return m.reshape(shape, order="F")


def outer_product(a, b) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    return np.multiply.outer(a, b)


def reverse_modes(x) -> np.ndarray:
    """Reverse the mode order: mode ``j`` becomes mode ``d + 1 - j``."""
    x = as_tensor(x)
    return np.ascontiguousarray(np.transpose(x, tuple(range(x.ndim - 1, -1, -1))))
