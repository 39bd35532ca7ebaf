import json

import numpy as np
import pytest

from ttreg.cli import (
    EXIT_DIVERGENCE,
    EXIT_OK,
    EXIT_PARSE,
    EXIT_RANKS,
    EXIT_SHAPE,
    expand_ranks,
    int_tuple,
    main,
)
from ttreg.io import ModelFile, read_model, read_ts, write_dt, write_model, write_ts


@pytest.fixture
def work(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    fields = dict(line.split("\t", 1) for line in out.splitlines() if "\t" in line)
    return code, fields, err


@pytest.fixture
def dataset(work, capsys):
    code, _, _ = run(capsys, "simulate", "dataset", "--response-shape", "3", "--predictor-shape", "3x3",
                     "--ranks", "2", "--n", "150", "--error-scale", "0.1", "--seed", "4",
                     "--out", "data.ds")
    assert code == EXIT_OK
    return work / "data.ds"


@pytest.fixture
def series(work, capsys):
    code, _, _ = run(capsys, "simulate", "ar-series", "--shape", "2x2", "--ranks", "2", "--n", "200",
                     "--seed", "3", "--out", "s.ts")
    assert code == EXIT_OK
    return work / "s.ts"


def test_argument_helpers():
    assert int_tuple("2,3") == int_tuple("2x3") == (2, 3)
    assert expand_ranks((2,), 3) == (2, 2, 2)
    with pytest.raises(Exception):
        expand_ranks((2, 2), 3)


def test_info(work, capsys):
    code, fields, _ = run(capsys, "info")
    assert code == EXIT_OK
    assert fields["format.dt"] == "dtensor v1"
    assert fields["exit.4"] == "divergence"


class TestDecompose:
    def test_exact(self, work, capsys, tt_tensor):
        write_dt("x.dt", tt_tensor((3, 4, 3), (2, 2)))
        code, fields, _ = run(capsys, "decompose", "x.dt", "--ranks", "2,2", "--out", "x.tt")
        assert code == EXIT_OK
        assert float(fields["relative_error"]) < 1e-12
        assert fields["anchor"] == "1"
        assert (work / "x.tt").exists()

    def test_padding_advisory(self, work, capsys):
        write_dt("x.dt", np.ones((3, 3, 3)))
        code, _, err = run(capsys, "decompose", "x.dt", "--ranks", "2,1")
        assert code == EXIT_OK and "advisory: r_1 = 2" in err

    def test_bad_ranks(self, work, capsys, rng):
        write_dt("x.dt", rng.standard_normal((2, 3, 2)))
        code, _, err = run(capsys, "decompose", "x.dt", "--ranks", "3,1")
        assert code == EXIT_RANKS and "error" in err

    def test_malformed_input(self, work, capsys):
        (work / "x.dt").write_text("dtensor v1\n1\n3\n1.0\n")
        assert run(capsys, "decompose", "x.dt", "--ranks", "1")[0] == EXIT_PARSE

    def test_unknown_flag(self, work, capsys):
        assert run(capsys, "decompose", "--bogus")[0] == EXIT_PARSE


class TestFit:
    def test_fit_and_model(self, dataset, capsys):
        code, fields, _ = run(capsys, "fit", str(dataset), "--ranks", "2", "--step-size", "auto",
                              "--out", "m.ttm")
        assert code == EXIT_OK
        assert fields["ranks_fitted"] == "2,2"
        model = read_model("m.ttm")
        assert model.kind == "regression" and model.ranks == (2, 2)
        assert float(model.meta["final_loss"]) == pytest.approx(float(fields["final_loss"]), rel=1e-9)

    def test_zero_iterations(self, dataset, capsys):
        code, fields, _ = run(capsys, "fit", str(dataset), "--ranks", "2", "--iters", "0")
        assert code == EXIT_OK and fields["iterations"] == "0"

    def test_divergence(self, dataset, capsys):
        code, _, err = run(capsys, "fit", str(dataset), "--ranks", "2", "--eta", "50")
        assert code == EXIT_DIVERGENCE and "smaller step size" in err

    def test_deterministic(self, dataset, capsys):
        run(capsys, "fit", str(dataset), "--ranks", "2", "--out", "a.ttm")
        run(capsys, "fit", str(dataset), "--ranks", "2", "--out", "b.ttm")
        np.testing.assert_array_equal(read_model("a.ttm").coeff, read_model("b.ttm").coeff)

    def test_manifest_replay(self, dataset, work, capsys):
        run(capsys, "fit", str(dataset), "--ranks", "2", "--out", "a.ttm")
        manifest = json.loads((work / "a.ttm.manifest.json").read_text())
        assert manifest["exit_code"] == 0 and manifest["inputs"][str(dataset)]
        first = (work / "a.ttm").read_bytes()
        (work / "a.ttm").unlink()
        assert run(capsys, "--manifest", "a.ttm.manifest.json")[0] == EXIT_OK
        assert (work / "a.ttm").read_bytes() == first


class TestAutoregression:
    def test_fit_ar_and_forecast(self, series, capsys):
        code, fields, _ = run(capsys, "fit-ar", str(series), "--ranks", "2", "--step-size", "auto",
                              "--out", "ar.ttm")
        assert code == EXIT_OK and fields["stationary"] == "true"
        code, fields, _ = run(capsys, "forecast", "ar.ttm", str(series), "--horizon", "3",
                              "--rolling-start", "190", "--out", "f.ts")
        assert code == EXIT_OK
        assert read_ts("f.ts").shape == (3, 2, 2)
        assert 0 < float(fields["l2"]) <= float(fields["l1"])

    def test_zero_model_forecast(self, work, series, capsys):
        write_model("zero.ttm", ModelFile("ar", np.zeros((2, 2, 2, 2)), (1, 1, 1), 2, order=1))
        code, fields, _ = run(capsys, "forecast", "zero.ttm", str(series), "--horizon", "2")
        assert code == EXIT_OK and float(fields["first_forecast_norm"]) == 0.0
        np.testing.assert_array_equal(read_ts("forecast.ts"), 0.0)

    def test_shape_mismatch(self, work, series, capsys):
        write_model("m.ttm", ModelFile("ar", np.zeros((3, 3)), (1,), 1, order=1))
        assert run(capsys, "forecast", "m.ttm", str(series))[0] == EXIT_SHAPE

    def test_regression_model_rejected(self, work, series, capsys):
        write_model("m.ttm", ModelFile("regression", np.zeros((2, 2, 2, 2)), (1, 1, 1), 2))
        assert run(capsys, "forecast", "m.ttm", str(series))[0] == EXIT_PARSE

    def test_csv_series(self, work, capsys, rng):
        (work / "s.csv").write_text("shape=2\n" + "\n".join(f"{a},{b}" for a, b in rng.standard_normal((40, 2))))
        code, fields, _ = run(capsys, "fit-ar", "s.csv", "--ranks", "1", "--center")
        assert code == EXIT_OK and fields["ranks_requested"] == "1"


class TestSelectRanks:
    @pytest.mark.parametrize("strategy,rows", [("separate", 4), ("joint", 4)])
    def test_audit(self, dataset, work, capsys, strategy, rows):
        code, fields, _ = run(capsys, "select-ranks", str(dataset), "--rbar", "2", "--strategy", strategy,
                              "--step-size", "auto", "--audit", "audit.tsv")
        assert code == EXIT_OK
        lines = (work / "audit.tsv").read_text().splitlines()
        assert lines[0] == "ranks\tmse\tn_params\tbic\tstatus"
        assert len(lines) - 1 == rows
        if strategy == "separate":
            assert fields["fits"] == str(2 * 2)  # (m + n - 1) r_bar, top tuple refitted per mode
        assert fields["selected"].count(",") == 1

    def test_series_input(self, series, work, capsys):
        code, fields, _ = run(capsys, "select-ranks", str(series), "--rbar", "2", "--step-size", "auto")
        assert code == EXIT_OK
        assert len((work / "ranks-audit.tsv").read_text().splitlines()) == 1 + 3 * 2


def test_simulate_report(work, capsys):
    code, _, _ = run(capsys, "simulate", "tt-vs-tucker", "--m-grid", "2", "--rank", "2", "--n", "150",
                     "--replications", "1", "--iters", "50", "--out", "cmp.tsv")
    assert code == EXIT_OK
    assert (work / "cmp.tsv").read_text().startswith("arm\trank\tm\tmean\tsd")
    assert json.loads((work / "cmp.tsv.json").read_text())["experiment"] == "tt-vs-tucker"


def test_simulate_rejects_running_ranks(work, capsys):
    code = run(capsys, "simulate", "error-scaling", "--running-ranks", "3", "--replications", "1")[0]
    assert code == EXIT_PARSE
