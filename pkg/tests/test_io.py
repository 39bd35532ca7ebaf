import numpy as np
import pytest

from ttreg.decomp import random_tt, reconstruct
from ttreg.io import (
    FormatError,
    ModelFile,
    format_dt,
    parse_dt,
    read_csv_series,
    read_dataset_dir,
    read_ds,
    read_dt,
    read_model,
    read_problem,
    read_series,
    read_ts,
    read_tt,
    write_csv_series,
    write_dataset_dir,
    write_ds,
    write_dt,
    write_model,
    write_ts,
    write_tt,
)
from ttreg.regression import RegressionProblem


def test_dt_round_trip_is_exact(tmp_path, rng):
    x = rng.standard_normal((2, 3, 4)) * 1e-7
    write_dt(tmp_path / "x.dt", x)
    np.testing.assert_array_equal(read_dt(tmp_path / "x.dt"), x)


def test_dt_layout_first_index_fastest():
    x = np.arange(6.0).reshape(2, 3, order="F")
    lines = format_dt(x).split()
    assert lines[:5] == ["dtensor", "v1", "2", "2", "3"]
    assert [float(v) for v in lines[5:]] == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


@pytest.mark.parametrize("text", [
    "dtensor v1\n1\n3\n1\n2\n",          # too few values
    "dtensor v1\n1\n2\n1\n2\n3\n",       # trailing value
    "dtensor v2\n1\n1\n1\n",             # unknown version
    "dtensor v1\n2\n2\n1\n2\n",          # shape line too short
    "dtensor v1\n1\n2\n1\nabc\n",        # not a number
    "dtensor v1\n1\n0\n",                # empty dimension
])
def test_dt_rejects_malformed(text):
    with pytest.raises(FormatError):
        parse_dt(text)


def test_tt_round_trip(tmp_path, rng):
    tt = random_tt((3, 4, 2, 3), (2, 3, 2), rng, anchor=2, weights=(3.0, 2.0, 1.0))
    write_tt(tmp_path / "a.tt", tt)
    back = read_tt(tmp_path / "a.tt")
    assert back.anchor == 2 and back.ranks == (2, 3, 2)
    np.testing.assert_array_equal(back.weights, tt.weights)
    np.testing.assert_array_equal(reconstruct(back), reconstruct(tt))


def test_tt_rejects_inconsistent_ranks(tmp_path, rng):
    tt = random_tt((3, 3, 3), (2, 2), rng)
    path = tmp_path / "a.tt"
    write_tt(path, tt)
    text = path.read_text().replace("2 2", "2 3", 1)
    path.write_text(text)
    with pytest.raises(FormatError):
        read_tt(path)


def test_dataset_file_and_directory(tmp_path, rng):
    prob = RegressionProblem(rng.standard_normal((5, 2, 2)), rng.standard_normal((5, 3)))
    write_ds(tmp_path / "p.ds", prob)
    write_dataset_dir(tmp_path / "dir", prob)
    for back in (read_ds(tmp_path / "p.ds"), read_problem(tmp_path / "dir")):
        np.testing.assert_array_equal(back.responses, prob.responses)
        np.testing.assert_array_equal(back.predictors, prob.predictors)


def test_dataset_dir_rejects_mixed_shapes(tmp_path):
    write_dt(tmp_path / "y0.dt", np.zeros(2))
    write_dt(tmp_path / "y1.dt", np.zeros(3))
    write_dt(tmp_path / "x0.dt", np.zeros(2))
    (tmp_path / "manifest.tsv").write_text("y0.dt\tx0.dt\ny1.dt\tx0.dt\n")
    with pytest.raises(FormatError):
        read_dataset_dir(tmp_path)


def test_dataset_dir_requires_manifest(tmp_path):
    with pytest.raises(FormatError):
        read_dataset_dir(tmp_path)


def test_series_formats(tmp_path, rng):
    s = rng.standard_normal((7, 2, 3))
    write_ts(tmp_path / "s.ts", s)
    write_csv_series(tmp_path / "s.csv", s)
    np.testing.assert_array_equal(read_ts(tmp_path / "s.ts"), s)
    np.testing.assert_array_equal(read_series(tmp_path / "s.csv"), s)
    assert (tmp_path / "s.csv").read_text().startswith("shape=2x3")


def test_csv_rejects_short_row(tmp_path):
    (tmp_path / "s.csv").write_text("shape=2x2\n1,2,3,4\n1,2,3\n")
    with pytest.raises(FormatError, match="row 3"):
        read_csv_series(tmp_path / "s.csv")


def test_ts_count_mismatch(tmp_path, rng):
    write_ts(tmp_path / "s.ts", rng.standard_normal((3, 2)))
    text = (tmp_path / "s.ts").read_text().splitlines()
    text[3] = "4"
    (tmp_path / "s.ts").write_text("\n".join(text) + "\n")
    with pytest.raises(FormatError):
        read_ts(tmp_path / "s.ts")


class TestModelFile:
    def test_round_trip(self, tmp_path, rng):
        coeff = reconstruct(random_tt((2, 3, 3, 2), (2, 3, 2), rng, anchor=2))
        m = ModelFile("ar", coeff, (2, 3, 2), 2, order=1, mean=rng.standard_normal((2, 3)),
                      meta={"iterations": "17", "step_size": "0.01"})
        write_model(tmp_path / "m.ttm", m)
        back = read_model(tmp_path / "m.ttm")
        assert (back.kind, back.ranks, back.split, back.order) == ("ar", (2, 3, 2), 2, 1)
        assert back.meta == m.meta
        np.testing.assert_array_equal(back.mean, m.mean)
        assert np.linalg.norm(back.coeff - coeff) <= 1e-12 * np.linalg.norm(coeff)

    def test_reserved_meta_key(self, tmp_path):
        m = ModelFile("regression", np.zeros((2, 2)), (1,), 1, meta={"ranks": "1"})
        with pytest.raises(ValueError):
            write_model(tmp_path / "m.ttm", m)

    def test_unknown_kind(self, tmp_path):
        write_model(tmp_path / "m.ttm", ModelFile("regression", np.eye(2), (2,), 1))
        path = tmp_path / "m.ttm"
        path.write_text(path.read_text().replace("kind regression", "kind cp"))
        with pytest.raises(FormatError):
            read_model(path)
