import numpy as np
import pytest

from fdamean.bands import (
    CovarianceEstimate,
    band_from_dataset,
    estimate_covariance,
    gaussian_sup_quantile,
    residual_curves,
    simultaneous_band,
)
from fdamean.errors import NumericalFailure
from fdamean.estimation import CurveDataset, EstimateCurve, EstimatorConfig, evaluation_grid
from fdamean.grid import uniform_grid
from fdamean.simulation import SimulationModel, mean_mu0, sample_curves


def _brownian_data(n, p, sigma, seed, mean="zero"):
    model = SimulationModel.named(mean, process="brownian", sigma=sigma)
    grid = uniform_grid(p)
    return CurveDataset(grid, sample_curves(model, n, grid, np.random.default_rng(seed)))


class TestResiduals:
    def test_exact_fit(self):
        grid = uniform_grid(5)
        mu = np.linspace(-1, 1, 5)
        ds = CurveDataset(grid, np.vstack([mu, mu, mu]))
        np.testing.assert_array_equal(residual_curves(ds, mu), 0.0)

    def test_single_curve(self):
        y = np.random.default_rng(0).normal(size=(1, 6))
        ds = CurveDataset(uniform_grid(6), y)
        np.testing.assert_array_equal(residual_curves(ds, y[0]), 0.0)

    def test_brute_force(self):
        rng = np.random.default_rng(1)
        y = rng.normal(size=(4, 7))
        y[1, 3] = np.nan
        fit = rng.normal(size=7)
        r = residual_curves(CurveDataset(uniform_grid(7), y), fit)
        for i in range(4):
            for j in range(7):
                if i == 1 and j == 3:
                    assert np.isnan(r[i, j])
                else:
                    assert r[i, j] == y[i, j] - fit[j]

    def test_shape_check(self):
        with pytest.raises(ValueError):
            residual_curves(CurveDataset(uniform_grid(3), np.zeros((2, 3))), np.zeros(4))


class TestCovariance:
    def test_brownian_kernel(self):
        ds = _brownian_data(2000, 200, 0.0, 3)
        resid = residual_curves(ds, ds.mean_curve)
        cov = estimate_covariance(resid, ds.grid, np.array([[0.3], [0.7]]))
        assert cov.gamma[0, 1] == pytest.approx(0.3, rel=0.10)
        assert cov.gamma[0, 0] == pytest.approx(0.3, rel=0.10)
        assert cov.gamma[1, 1] == pytest.approx(0.7, rel=0.10)

    def test_noise_is_removed_from_diagonal(self):
        ds = _brownian_data(2000, 100, 1.0, 4)
        cov = estimate_covariance(residual_curves(ds, ds.mean_curve), ds.grid, np.array([[0.5]]))
        # raw diagonal would be near 0.5 + 1.0
        assert cov.gamma[0, 0] == pytest.approx(0.5, rel=0.10)

    def test_pure_noise_off_diagonal(self):
        model = SimulationModel.named("zero", process="none", sigma=1.0)
        grid = uniform_grid(20)
        y = sample_curves(model, 2000, grid, np.random.default_rng(5))
        cov = estimate_covariance(residual_curves(CurveDataset(grid, y), y.mean(axis=0)), grid, np.array([[0.25], [0.75]]))
        assert abs(cov.gamma[0, 1]) < 3 / np.sqrt(2000)

    def test_symmetric_and_psd(self):
        ds = _brownian_data(50, 30, 0.5, 6)
        cov = estimate_covariance(residual_curves(ds, ds.mean_curve), ds.grid, evaluation_grid(1, 61))
        np.testing.assert_array_equal(cov.gamma, cov.gamma.T)
        assert np.linalg.eigvalsh(cov.gamma).min() > -1e-10
        assert cov.variance.shape == (61,)

    def test_missing_values(self):
        ds = _brownian_data(300, 40, 0.3, 7)
        y = ds.y.copy()
        y[np.random.default_rng(8).random(y.shape) < 0.05] = np.nan
        ds_na = CurveDataset(ds.grid, y)
        cov = estimate_covariance(residual_curves(ds_na, ds_na.mean_curve), ds.grid, evaluation_grid(1, 11))
        assert np.all(np.isfinite(cov.gamma))

    def test_smoothing_option(self):
        ds = _brownian_data(500, 50, 0.5, 9)
        cov = estimate_covariance(residual_curves(ds, ds.mean_curve), ds.grid, evaluation_grid(1, 21), smoothing_h=0.1)
        assert cov.gamma[10, 10] == pytest.approx(0.5, rel=0.2)

    def test_two_d_design(self):
        rng = np.random.default_rng(10)
        grid = uniform_grid([6, 5])
        level = rng.normal(size=(80, 1))
        y = level + 0.1 * rng.normal(size=(80, 30))
        cov = estimate_covariance(y - y.mean(axis=0), grid, evaluation_grid(2, 4))
        assert cov.gamma.shape == (16, 16)
        # a random level shared by the whole field: every covariance is its variance
        assert cov.gamma[0, 15] == pytest.approx(np.var(level, ddof=1), rel=0.05)

    def test_needs_two_curves(self):
        with pytest.raises(ValueError):
            estimate_covariance(np.zeros((1, 4)), uniform_grid(4))


class TestSupQuantile:
    def test_one_point_normal(self):
        q = gaussian_sup_quantile(np.array([[1.0]]), 0.95, draws=100_000, rng=1)
        assert q == pytest.approx(1.96, abs=0.05)

    def test_zero_covariance(self):
        assert gaussian_sup_quantile(np.zeros((5, 5)), 0.95, rng=0) == 0.0

    def test_more_draws_stable(self):
        gamma = np.minimum.outer(np.linspace(0.01, 1, 50), np.linspace(0.01, 1, 50))
        a = gaussian_sup_quantile(gamma, 0.95, draws=5000, rng=2)
        b = gaussian_sup_quantile(gamma, 0.95, draws=10_000, rng=3)
        assert abs(a - b) < 0.1

    def test_standardized_at_least_pointwise(self):
        gamma = np.minimum.outer(np.linspace(0.01, 1, 30), np.linspace(0.01, 1, 30))
        q = gaussian_sup_quantile(gamma, 0.95, draws=20_000, rng=4, standardize=True)
        assert q > 1.96

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            gaussian_sup_quantile(np.eye(2), 1.0)
        with pytest.raises(ValueError):
            gaussian_sup_quantile(np.eye(2), 0.9, draws=10)

    def test_indefinite_covariance_fails(self):
        with pytest.raises(NumericalFailure):
            gaussian_sup_quantile(np.array([[1.0, 2.0], [2.0, 1.0]]), 0.9, rng=0)


def _toy_band(level, mode="unstudentized", n=100):
    pts = evaluation_grid(1, 11)
    est = EstimateCurve(pts, np.zeros(11))
    t = np.linspace(0.05, 1, 11)
    cov = CovarianceEstimate(pts, np.minimum.outer(t, t), n)
    return simultaneous_band(est, cov, n, level, 4000, np.random.default_rng(0), mode)


class TestSimultaneousBand:
    def test_level_zero_degenerate(self):
        band = _toy_band(0.0)
        np.testing.assert_array_equal(band.halfwidth, 0.0)
        assert band.quantile == 0.0

    def test_constant_width(self):
        band = _toy_band(0.95)
        np.testing.assert_allclose(band.halfwidth, band.quantile / 10)
        np.testing.assert_allclose(band.upper - band.lower, 2 * band.halfwidth)

    def test_studentized_width_follows_sd(self):
        band = _toy_band(0.95, "studentized")
        t = np.linspace(0.05, 1, 11)
        np.testing.assert_allclose(band.halfwidth, band.quantile * np.sqrt(t) / 10)

    def test_inside_and_first_violation(self):
        band = _toy_band(0.95)
        vals = np.zeros(11)
        assert band.covers(vals) and band.first_violation(vals) is None
        vals[7] = 10.0
        vals[9] = -10.0
        assert not band.covers(vals)
        np.testing.assert_allclose(band.first_violation(vals), [0.7])

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            _toy_band(0.95, "bootstrap")

    def test_grid_mismatch(self):
        pts = evaluation_grid(1, 5)
        cov = CovarianceEstimate(pts, np.eye(5), 10)
        with pytest.raises(ValueError):
            simultaneous_band(EstimateCurve(evaluation_grid(1, 6), np.zeros(6)), cov, 10)


class TestBandFromDataset:
    def test_width_scales_with_root_n(self):
        cfg = EstimatorConfig(m=2, h=0.06)
        pts = evaluation_grid(1, 101)
        widths = {}
        for n in (2000, 8000):
            ds = _brownian_data(n, 200, 0.5, n, mean="mu0")
            band = band_from_dataset(ds, cfg, pts, 0.95, 4000, np.random.default_rng(1))
            widths[n] = band.halfwidth[0]
        assert widths[8000] / widths[2000] == pytest.approx(0.5, rel=0.10)

    def test_checks_reported_and_warning(self):
        ds = _brownian_data(400, 100, 0.5, 12, mean="mu0")
        pts = evaluation_grid(1, 51)
        band = band_from_dataset(ds, EstimatorConfig(m=2, h=0.1), pts, 0.95, 1000, np.random.default_rng(0))
        assert band.checks["in_H"]
        with pytest.warns(RuntimeWarning):
            band_from_dataset(ds, EstimatorConfig(m=2, h=0.24), pts, 0.95, 1000, np.random.default_rng(0))

    def test_covers_truth_typically(self):
        ds = _brownian_data(2000, 200, 0.5, 13, mean="mu0")
        pts = evaluation_grid(1, 201)
        band = band_from_dataset(ds, EstimatorConfig(m=2, h=0.06), pts, 0.95, 2000, np.random.default_rng(2))
        assert band.covers(mean_mu0(pts[:, 0]))
