import numpy as np
import pytest

from ttreg.autoregression import spectral_radius, rearrange_coeff
from ttreg.decomp import seq_ranks, tt_svd_anchored
from ttreg.regression import FitConfig
from ttreg.simulation import (
    DIM_SUM_SPLITS,
    CoefficientSpec,
    NoiseSpec,
    ar_estimation_error,
    error_scaling_design,
    gen_ar_coefficient,
    gen_coefficient,
    gen_regression_data,
    gen_tucker_coefficient,
    run_error_scaling,
    run_rank_selection,
    run_tt_vs_tucker,
    stream,
    toeplitz_cov_factor,
)


class TestCoefficients:
    def test_ranks(self):
        spec = CoefficientSpec((4, 4), (5, 5, 5), (2, 3, 3, 2))
        assert seq_ranks(gen_coefficient(spec, 1)) == (2, 3, 3, 2)

    def test_sigma_norm(self):
        spec = CoefficientSpec((3, 3), (4, 4), (2, 2, 2), sigma_norm=5.0)
        a = gen_coefficient(spec, 2)
        assert np.linalg.norm(a) == pytest.approx(5.0, rel=1e-12)
        w = tt_svd_anchored(a, spec.ranks, 2).weights
        assert np.linalg.norm(w) == pytest.approx(5.0, rel=1e-10)

    def test_explicit_weights(self):
        spec = CoefficientSpec((3, 3), (3, 3), (2, 2, 2), weights=(3.0, 1.0))
        w = tt_svd_anchored(gen_coefficient(spec, 3), spec.ranks, 2).weights
        np.testing.assert_allclose(w, [3.0, 1.0], rtol=1e-10)

    def test_deterministic(self):
        spec = CoefficientSpec((3,), (4, 4), (2, 2))
        np.testing.assert_array_equal(gen_coefficient(spec, 9), gen_coefficient(spec, 9))
        assert not np.array_equal(gen_coefficient(spec, 9), gen_coefficient(spec, 10))

    def test_tucker(self):
        a = gen_tucker_coefficient((4, 4, 4), 2, 5.0, 1)
        assert np.linalg.norm(a) == pytest.approx(5.0, rel=1e-12)
        assert np.linalg.matrix_rank(a.reshape(4, 16)) == 2

    def test_ar_coefficient_radius(self):
        spec = CoefficientSpec((3, 3), (3, 3), (2, 2, 2), anchor=2)
        m, rho = gen_ar_coefficient(spec, 4, max_radius=0.8)
        assert rho <= 0.8
        assert spectral_radius([rearrange_coeff(m, 2)]) == pytest.approx(rho)


class TestNoise:
    def test_uniform_range(self):
        z = NoiseSpec("uniform").draw(stream(0), 5000, 3)
        assert z.min() >= -0.5 and z.max() < 0.5
        assert abs(z.mean()) < 0.02

    def test_gaussian_moments(self):
        z = NoiseSpec("gaussian").draw(stream(1), 20000, 4)
        assert np.abs(z.mean(axis=0)).max() < 0.05
        np.testing.assert_allclose(np.cov(z.T), np.eye(4), atol=0.05)

    def test_correlated_covariance(self):
        z = NoiseSpec("correlated", rho=0.5).draw(stream(2), 20000, 4)
        idx = np.arange(4)
        target = 0.5 ** np.abs(idx[:, None] - idx[None, :])
        np.testing.assert_allclose(np.cov(z.T), target, atol=0.05)

    def test_toeplitz_factor(self):
        f = toeplitz_cov_factor(6, 0.3)
        idx = np.arange(6)
        assert np.abs(f @ f.T - 0.3 ** np.abs(idx[:, None] - idx[None, :])).max() <= 1e-10

    def test_invalid(self):
        with pytest.raises(ValueError):
            NoiseSpec("cauchy")
        with pytest.raises(ValueError):
            NoiseSpec("correlated", rho=1.0)

    def test_zero_scale_is_noiseless(self):
        spec = CoefficientSpec((2,), (3, 3), (2, 2))
        a = gen_coefficient(spec, 1)
        prob = gen_regression_data(a, 1, 20, NoiseSpec("gaussian", error_scale=0.0), 2)
        for y, x in zip(prob.responses, prob.predictors):
            np.testing.assert_allclose(y, np.tensordot(a, x, axes=2), atol=1e-12)


class TestDesigns:
    def test_dim_sum_splits(self):
        assert len(DIM_SUM_SPLITS) == 6
        assert all(sum(s) == 26 for s in DIM_SUM_SPLITS)

    def test_designs(self):
        assert error_scaling_design("a", 300) == ((4, 4), (5, 5, 5), 2, 300)
        assert error_scaling_design("b", 3) == ((6, 6), (6, 6, 6), 3, 1000)
        assert error_scaling_design("c", 5) == ((5, 5), (5, 5, 5), 1, 600)
        q, p, r, n = error_scaling_design("d", 0)
        assert sum(q) + sum(p) == 26 and r == 1
        with pytest.raises(ValueError):
            error_scaling_design("e", 1)


class TestExperiments:
    FAST = FitConfig(step_size="auto", max_iters=200, tol=1e-8)

    def test_error_scaling_reproducible(self):
        kw = dict(grid=[200, 400], seed=3, fit_cfg=self.FAST)
        r1 = run_error_scaling("a", 1, **kw)
        r2 = run_error_scaling("a", 1, **kw)
        assert r1.rows == r2.rows
        assert r1.column("value") == [200, 400]
        assert r1.to_tsv().splitlines()[0] == "setting\tvalue\tmean\tsd\tnrep\tseed"

    def test_rank_selection_smoke(self):
        rep = run_rank_selection(1, n_grid=[150], sigmas=(2.0,), signals=("equal",),
                                 strategies=("separate",), shape=(3, 3), ranks=(2, 2, 2))
        assert rep.column("strategy") == ["separate"]
        assert rep.column("proportion")[0] in (0.0, 1.0)

    def test_tt_vs_tucker_smoke(self):
        rep = run_tt_vs_tucker(1, m_grid=(2,), ranks=(2,), n=200, dim=3, fit_cfg=self.FAST)
        assert sorted(rep.column("arm")) == ["tt", "tucker"]
        assert all(np.isfinite(v) for v in rep.column("mean"))

    def test_ar_error_shrinks(self):
        errs = [ar_estimation_error((3, 3), (2, 2, 2), n, seed=1)[0] for n in (200, 1600)]
        assert errs[1] < errs[0]
