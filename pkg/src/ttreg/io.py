"""Plain-text file formats.

``.dt``  dense tensor: ``dtensor v1``, order, shape line, then one value per
         line in first-index-fastest order.
``.tt``  anchored TT decomposition: ``ttdecomp v1``, order, anchor, ranks
         line, then embedded ``.dt`` blocks ``G_1, G_2, ..., G_k, weights,
         G_{k+1}, ..., G_d``. The weights block is the diagonal of the
         anchor matrix as an order-one tensor.
``.ds``  regression dataset: ``dataset v1``, N, response shape line,
         predictor shape line, N response blocks, then N predictor blocks.
``.ts``  tensor series: ``tseries v1``, order, shape line, N, then N value
         blocks in time order.
``.csv`` tensor series: header ``shape=p1xp2x...``, one flattened time point
         per row.
model    ``ttmodel v1``, ``key value`` metadata lines closed by ``end``, the
         coefficient as an embedded ``.tt`` block and, for centred series,
         the mean as a ``.dt`` block.

A dataset may also be a directory of ``.dt`` files with a ``manifest.tsv``
whose rows name a response file and a predictor file.

Values are written with 17 significant digits, which round-trips every
float64 exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decomp import TTDecomposition, reconstruct, tt_svd_anchored
from .regression import RegressionProblem

FORMAT_VERSIONS = {
    "dt": "dtensor v1",
    "tt": "ttdecomp v1",
    "ds": "dataset v1",
    "ts": "tseries v1",
    "model": "ttmodel v1",
}
MANIFEST_NAME = "manifest.tsv"


class FormatError(ValueError):
    """Raised when a file does not follow its declared format."""


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _values(arr: np.ndarray) -> list[str]:
    return [_fmt(v) for v in np.asarray(arr, dtype=np.float64).ravel(order="F")]


class _Reader:
    """Cursor over the non-blank lines of a text file."""

    def __init__(self, text: str, source: str = "<text>"):
        self.lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        self.pos = 0
        self.source = source

    def fail(self, msg: str):
        raise FormatError(f"{self.source}: line {self.pos}: {msg}")

    def take(self) -> str:
        if self.pos >= len(self.lines):
            self.fail("unexpected end of file")
        self.pos += 1
        return self.lines[self.pos - 1]

    def expect(self, literal: str) -> None:
        line = self.take()
        if line != literal:
            self.fail(f"expected {literal!r}, got {line!r}")

    def int(self, minimum: int = 0) -> int:
        line = self.take()
        try:
            v = int(line)
        except ValueError:
            self.fail(f"expected an integer, got {line!r}")
        if v < minimum:
            self.fail(f"expected an integer >= {minimum}, got {v}")
        return v

    def ints(self, count: int | None = None, minimum: int = 1) -> tuple[int, ...]:
        line = self.take()
        try:
            vals = tuple(int(t) for t in line.split())
        except ValueError:
            self.fail(f"expected integers, got {line!r}")
        if count is not None and len(vals) != count:
            self.fail(f"expected {count} integers, got {len(vals)}")
        if any(v < minimum for v in vals):
            self.fail(f"entries must be >= {minimum}, got {vals}")
        return vals

    def block(self, shape) -> np.ndarray:
        n = math.prod(shape)
        if self.pos + n > len(self.lines):
            self.fail(f"expected {n} values, file has {len(self.lines) - self.pos}")
        chunk = self.lines[self.pos : self.pos + n]
        try:
            vals = np.array([float(v) for v in chunk], dtype=np.float64)
        except ValueError as exc:
            self.fail(f"bad value: {exc}")
        self.pos += n
        return vals.reshape(tuple(shape), order="F")

    def done(self) -> None:
        if self.pos != len(self.lines):
            self.fail(f"{len(self.lines) - self.pos} unexpected trailing lines")


def _read_text(path) -> _Reader:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return _Reader(text, str(path))


# dense tensors ----------------------------------------------------------------

def format_dt(x) -> str:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 1:
        x = x.reshape(1)
    head = [FORMAT_VERSIONS["dt"], str(x.ndim), " ".join(map(str, x.shape))]
    return "\n".join(head + _values(x)) + "\n"


def _parse_dt(r: _Reader) -> np.ndarray:
    r.expect(FORMAT_VERSIONS["dt"])
    d = r.int(minimum=1)
    shape = r.ints(d)
    return r.block(shape)


def parse_dt(text: str, source: str = "<text>") -> np.ndarray:
    r = _Reader(text, source)
    x = _parse_dt(r)
    r.done()
    return x


def read_dt(path) -> np.ndarray:
    r = _read_text(path)
    x = _parse_dt(r)
    r.done()
    return x


def write_dt(path, x) -> None:
    Path(path).write_text(format_dt(x))


# TT decompositions ----------------------------------------------------------

def format_tt(tt: TTDecomposition) -> str:
    head = [FORMAT_VERSIONS["tt"], str(tt.order), str(tt.anchor), " ".join(map(str, tt.ranks))]
    factors = tt.factors()
    blocks = [format_dt(f) for f in factors[: tt.anchor]]
    blocks.append(format_dt(tt.weights))
    blocks += [format_dt(f) for f in factors[tt.anchor :]]
    return "\n".join(head) + "\n" + "".join(blocks)


def _parse_tt(r: _Reader) -> TTDecomposition:
    r.expect(FORMAT_VERSIONS["tt"])
    d = r.int(minimum=2)
    anchor = r.int(minimum=1)
    if anchor > d - 1:
        r.fail(f"anchor {anchor} out of range 1..{d - 1}")
    ranks = r.ints(d - 1)
    full = (1,) + ranks + (1,)
    factors = []
    weights = None
    for i in range(d + 1):
        block = _parse_dt(r)
        if i == anchor:
            if block.shape != (ranks[anchor - 1],):
                r.fail(f"weights block has shape {block.shape}, expected ({ranks[anchor - 1]},)")
            weights = block
            continue
        j = i if i < anchor else i - 1
        if j == 0 or j == d - 1:
            ok = block.ndim == 2 and block.shape[1] == (full[1] if j == 0 else full[d - 1])
        else:
            ok = block.ndim == 3 and block.shape[0] == full[j] and block.shape[2] == full[j + 1]
        if not ok:
            r.fail(f"factor {j + 1} has shape {block.shape}, inconsistent with ranks {ranks}")
        factors.append(block)
    return TTDecomposition(
        left_factor=factors[0],
        cores=factors[1:-1],
        weights=weights,
        anchor=anchor,
        right_factor=factors[-1],
    )


def read_tt(path) -> TTDecomposition:
    r = _read_text(path)
    tt = _parse_tt(r)
    r.done()
    return tt


def write_tt(path, tt: TTDecomposition) -> None:
    Path(path).write_text(format_tt(tt))


# datasets -----------------------------------------------------------------------

def format_ds(prob: RegressionProblem) -> str:
    head = [
        FORMAT_VERSIONS["ds"],
        str(prob.n_samples),
        " ".join(map(str, prob.response_shape)),
        " ".join(map(str, prob.predictor_shape)),
    ]
    body = []
    for y in prob.responses:
        body += _values(y)
    for x in prob.predictors:
        body += _values(x)
    return "\n".join(head + body) + "\n"


def read_ds(path) -> RegressionProblem:
    r = _read_text(path)
    r.expect(FORMAT_VERSIONS["ds"])
    n = r.int(minimum=1)
    q_shape = r.ints()
    p_shape = r.ints()
    ys = [r.block(q_shape) for _ in range(n)]
    xs = [r.block(p_shape) for _ in range(n)]
    r.done()
    return RegressionProblem(np.stack(ys), np.stack(xs))


def write_ds(path, prob: RegressionProblem) -> None:
    Path(path).write_text(format_ds(prob))


def read_dataset_dir(path) -> RegressionProblem:
    """Directory of ``.dt`` files paired by ``manifest.tsv``.

    Each manifest row holds a response path and a predictor path relative
    to the directory; a header row ``response<TAB>predictor`` is optional.
    """
    root = Path(path)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise FormatError(f"{root}: missing {MANIFEST_NAME}")
    pairs = []
    with manifest.open(newline="") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            row = [c.strip() for c in row if c.strip()]
            if not row or row == ["response", "predictor"]:
                continue
            if len(row) != 2:
                raise FormatError(f"{manifest}: expected two columns, got {row}")
            pairs.append(row)
    if not pairs:
        raise FormatError(f"{manifest}: no samples listed")
    ys = [read_dt(root / a) for a, _ in pairs]
    xs = [read_dt(root / b) for _, b in pairs]
    if len({y.shape for y in ys}) != 1 or len({x.shape for x in xs}) != 1:
        raise FormatError(f"{root}: samples do not share one response and one predictor shape")
    return RegressionProblem(np.stack(ys), np.stack(xs))


def write_dataset_dir(path, prob: RegressionProblem) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    rows = ["response\tpredictor"]
    for i in range(prob.n_samples):
        write_dt(root / f"y{i:05d}.dt", prob.responses[i])
        write_dt(root / f"x{i:05d}.dt", prob.predictors[i])
        rows.append(f"y{i:05d}.dt\tx{i:05d}.dt")
    (root / MANIFEST_NAME).write_text("\n".join(rows) + "\n")


def read_problem(path) -> RegressionProblem:
    """A ``.ds`` file or a dataset directory."""
    path = Path(path)
    return read_dataset_dir(path) if path.is_dir() else read_ds(path)


# series -------------------------------------------------------------------------

def format_ts(series) -> str:
    series = np.asarray(series, dtype=np.float64)
    shape = series.shape[1:]
    head = [FORMAT_VERSIONS["ts"], str(len(shape)), " ".join(map(str, shape)), str(series.shape[0])]
    body = []
    for y in series:
        body += _values(y)
    return "\n".join(head + body) + "\n"


def read_ts(path) -> np.ndarray:
    r = _read_text(path)
    r.expect(FORMAT_VERSIONS["ts"])
    d = r.int(minimum=1)
    shape = r.ints(d)
    n = r.int(minimum=1)
    out = np.stack([r.block(shape) for _ in range(n)])
    r.done()
    return out


def write_ts(path, series) -> None:
    Path(path).write_text(format_ts(series))


def read_csv_series(path) -> np.ndarray:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if any(c.strip() for c in row)]
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not rows or len(rows[0]) != 1 or not rows[0][0].strip().startswith("shape="):
        raise FormatError(f"{path}: first row must be 'shape=p1xp2x...'")
    try:
        shape = tuple(int(t) for t in rows[0][0].strip()[len("shape="):].split("x"))
    except ValueError as exc:
        raise FormatError(f"{path}: bad shape header {rows[0][0]!r}") from exc
    if not shape or any(s < 1 for s in shape):
        raise FormatError(f"{path}: bad shape {shape}")
    size = math.prod(shape)
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != size:
            raise FormatError(f"{path}: row {i} has {len(row)} values, expected {size}")
        try:
            out.append(np.array([float(c) for c in row]).reshape(shape, order="F"))
        except ValueError as exc:
            raise FormatError(f"{path}: row {i}: {exc}") from exc
    if not out:
        raise FormatError(f"{path}: no observations")
    return np.stack(out)


def write_csv_series(path, series) -> None:
    series = np.asarray(series, dtype=np.float64)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape=" + "x".join(map(str, series.shape[1:]))])
        for y in series:
            w.writerow(_values(y))


def read_series(path) -> np.ndarray:
    """A ``.csv`` file or a ``.ts`` file, told apart by extension."""
    return read_csv_series(path) if str(path).lower().endswith(".csv") else read_ts(path)


# models -------------------------------------------------------------------------

@dataclass
class ModelFile:
    """A fitted coefficient with the metadata needed to reuse it.

    ``kind`` is ``"regression"`` or ``"ar"``. ``split`` is the number of
    leading (response) modes and is also the anchor of the stored TT.
    """

    kind: str
    coeff: np.ndarray
    ranks: tuple[int, ...]
    split: int
    order: int = 0
    mean: np.ndarray | None = None
    meta: dict[str, str] = field(default_factory=dict)


_RESERVED = {"kind", "ranks", "split", "order", "shape", "centered"}


def format_model(model: ModelFile) -> str:
    lines = [
        FORMAT_VERSIONS["model"],
        f"kind {model.kind}",
        f"shape {' '.join(map(str, model.coeff.shape))}",
        f"ranks {' '.join(map(str, model.ranks))}",
        f"split {model.split}",
        f"order {model.order}",
        f"centered {int(model.mean is not None)}",
    ]
    for k, v in sorted(model.meta.items()):
        if k in _RESERVED or not k or any(c.isspace() for c in k):
            raise ValueError(f"invalid metadata key {k!r}")
        lines.append(f"{k} {v}")
    lines.append("end")
    tt = tt_svd_anchored(model.coeff, model.ranks, model.split)
    text = "\n".join(lines) + "\n" + format_tt(tt)
    if model.mean is not None:
        text += format_dt(model.mean)
    return text


def read_model(path) -> ModelFile:
    r = _read_text(path)
    r.expect(FORMAT_VERSIONS["model"])
    meta: dict[str, str] = {}
    while True:
        line = r.take()
        if line == "end":
            break
        key, _, value = line.partition(" ")
        meta[key] = value.strip()
    try:
        kind = meta.pop("kind")
        shape = tuple(int(t) for t in meta.pop("shape").split())
        ranks = tuple(int(t) for t in meta.pop("ranks").split())
        split = int(meta.pop("split"))
        order = int(meta.pop("order"))
        centered = meta.pop("centered") == "1"
    except (KeyError, ValueError) as exc:
        r.fail(f"missing or malformed model metadata: {exc}")
    if kind not in ("regression", "ar"):
        r.fail(f"unknown model kind {kind!r}")
    tt = _parse_tt(r)
    if tt.shape != shape or tt.ranks != ranks or tt.anchor != split:
        r.fail("embedded decomposition disagrees with the model header")
    mean = _parse_dt(r) if centered else None
    r.done()
    return ModelFile(kind, reconstruct(tt), ranks, split, order, mean, meta)


def write_model(path, model: ModelFile) -> None:
    Path(path).write_text(format_model(model))
