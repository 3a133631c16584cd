"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line (printed in the pytest terminal
summary, and directly when run with ``-s`` or as a script).  Monte-Carlo
criteria use fixed seeds chosen before looking at their outcome.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from fdamean.bands import band_from_dataset
from fdamean.bandwidth import bandwidth_grid
from fdamean.estimation import CurveDataset, EstimatorConfig, decompose_error, estimate_from_mean, evaluation_grid
from fdamean.grid import (
    AxisDensity,
    Grid,
    box_count_bound,
    count_in_box,
    design_bound_violations,
    quantile_grid,
    uniform_grid,
)
from fdamean.kernels import epanechnikov_product
from fdamean.rates import RateInputs, classify_regime, optimal_bandwidth, undersmoothing_check
from fdamean.simulation import (
    SimulationModel,
    draw_averaged_batch,
    mean_mu0,
    rate_experiment,
    run_replications,
    sample_curves,
)
from fdamean.weights import monomial_basis, weight_matrix


def record(number, passed, detail):
    ACCEPTANCE_RESULTS[number] = (bool(passed), detail)
    print(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def _linear_density(a):
    """``a + (2 - 2a) t``, a normalized linear density on [0, 1]."""
    return AxisDensity.linear(a, 2.0 - 2.0 * a)


def _design(kind, d, p):
    if kind == "uniform":
        return uniform_grid([p] * d), 1.0
    dens = _linear_density(0.5)
    return quantile_grid([dens] * d, [p] * d), dens.f_min


# ---------------------------------------------------------------------------
# shared setup of criteria 8 and 9
# ---------------------------------------------------------------------------

CLT_N, CLT_P, CLT_SIGMA = 2000, 200, 0.5
CLT_CONFIG = EstimatorConfig(kind="locpol", m=2, kernel="epanechnikov", h=0.06)
CLT_MODEL = SimulationModel.named("mu0", process="brownian", sigma=CLT_SIGMA)


def _exact_clt_variance(w):
    """``n Var(mu_hat(x))`` for weights ``w``: process part plus finite-p noise part."""
    t = uniform_grid(CLT_P).axes[0]
    gamma = np.minimum.outer(t, t)
    return float(w @ gamma @ w + CLT_SIGMA**2 * np.sum(w * w))


# ---------------------------------------------------------------------------


class TestAcceptance:
    def test_c01_weight_conditions(self):
        start = time.perf_counter()
        rng = np.random.default_rng(101)
        worst_sum = worst_moment = 0.0
        outside = 0
        cases = 0
        for d, p in ((1, 200), (2, 30)):
            for m in (0, 1, 2):
                for kind in ("uniform", "quantile"):
                    grid, f_min = _design(kind, d, p)
                    # below 3 / (f_min p) a quantile design can leave the window around x = 0 nearly empty
                    h_lo = 3.0 / (f_min * grid.p_min)
                    pts = grid.points()
                    powers = monomial_basis(m, d).as_array()[1:]
                    for _ in range(50):
                        x = rng.uniform(0.0, 1.0, size=d)
                        h = rng.uniform(h_lo, 0.25)
                        w = weight_matrix(grid, x[None, :], h, m=m).toarray()[0]
                        diff = pts - x
                        worst_sum = max(worst_sum, abs(w.sum() - 1.0))
                        if powers.size:
                            mono = np.prod(diff[:, None, :] ** powers[None, :, :], axis=-1)
                            worst_moment = max(worst_moment, float(np.max(np.abs(mono.T @ w))))
                        far = np.max(np.abs(diff), axis=1) > h
                        outside += int(np.count_nonzero(w[far] != 0.0))
                        cases += 1
        runtime = time.perf_counter() - start
        ok = worst_sum < 1e-10 and worst_moment < 1e-8 and outside == 0 and runtime < 30
        record(
            1,
            ok,
            f"{cases} cases: max|sum w - 1| = {worst_sum:.1e}, max moment residual = {worst_moment:.1e}, "
            f"nonzero weights outside window = {outside}, {runtime:.1f} s",
        )

    def test_c02_oracle_equivalence(self):
        start = time.perf_counter()
        rng = np.random.default_rng(202)
        kernel = epanechnikov_product
        worst = 0.0
        for _ in range(100):
            d = int(rng.integers(1, 3))
            m = int(rng.integers(0, 3))
            p = int(rng.integers(40, 120)) if d == 1 else int(rng.integers(12, 25))
            grid = uniform_grid([p] * d)
            h = rng.uniform(3.0 / p, 0.25)
            x = rng.uniform(0.0, 1.0, size=d)
            ybar = rng.normal(size=grid.p1)
            est = estimate_from_mean(grid, ybar, EstimatorConfig(m=m, h=h), x[None, :]).values[0]

            # direct weighted least squares in raw monomials (x_j - x)^r
            diff = grid.points() - x
            kv = kernel(d)(diff / h)
            keep = kv > 0
            powers = monomial_basis(m, d).as_array()
            design = np.prod(diff[keep][:, None, :] ** powers[None, :, :], axis=-1)
            root = np.sqrt(kv[keep])
            beta, *_ = np.linalg.lstsq(design * root[:, None], ybar[keep] * root, rcond=None)
            worst = max(worst, abs(est - beta[0]))
        runtime = time.perf_counter() - start
        record(2, worst < 1e-8 and runtime < 30, f"100 configs: max |weights - direct WLS| = {worst:.1e}, {runtime:.1f} s")

    def test_c03_polynomial_reproduction(self):
        rng = np.random.default_rng(303)
        worst = 0.0
        eval_points = evaluation_grid(1, 1001)
        for m in (0, 1, 2):
            for kind in ("uniform", "quantile"):
                grid, f_min = _design(kind, 1, 150)
                coef = rng.normal(size=m + 1)
                poly = np.polynomial.Polynomial(coef)
                h = 3.0 / (f_min * grid.p_min) + 0.02
                est = estimate_from_mean(grid, poly(grid.axes[0]), EstimatorConfig(m=m, h=h), eval_points)
                worst = max(worst, float(np.max(np.abs(est.values - poly(eval_points[:, 0])))))
        record(3, worst < 1e-8, f"degree <= m polynomials, m = 0..2, 1001 points: sup error {worst:.1e}")

    def test_c04_error_decomposition(self):
        rng = np.random.default_rng(404)
        worst = 0.0
        eval_points = evaluation_grid(1, 501)
        for i in range(50):
            p = int(rng.integers(30, 300))
            n = int(rng.integers(50, 2000))
            m = int(rng.integers(0, 3))
            grid = uniform_grid(p)
            h = rng.uniform(3.0 / p, 0.25)
            mean = ("mu0", "sin2pi")[i % 2]
            model = SimulationModel.named(mean, process="brownian", sigma=rng.uniform(0.2, 2.0))
            eps, z = draw_averaged_batch(model, n, grid, 1, int(rng.integers(1 << 30)))
            w = weight_matrix(grid, eval_points, h, m=m)
            ybar = model.mean(grid.axes[0]) + eps[:, 0] + z[:, 0]
            direct = w @ ybar - model.mean(eval_points[:, 0])
            parts = decompose_error(w, grid, eval_points, model.mean, eps[:, 0], z[:, 0])
            worst = max(worst, float(np.max(np.abs(parts.bias + parts.noise + parts.process - direct))))
        record(4, worst < 1e-10, f"50 configs: max |I1 + I2 + I3 - (mu_hat - mu)| = {worst:.1e}")

    @pytest.mark.slow
    def test_c05_dense_regime_stabilization(self):
        start = time.perf_counter()
        model = SimulationModel.named("mu0", process="brownian", sigma=1.0)
        rows = rate_experiment(
            model,
            [(600, 65), (600, 275), (600, 550)],
            replications=200,
            seed=505,
            estimator=EstimatorConfig(m=2),
            h_rule=lambda g: bandwidth_grid(g.p_min),
            eval_points=evaluation_grid(1, 1001),
        )
        err = {row.p[0]: row.best_error for row in rows}
        interp = {row.p[0]: row.interpolation_error for row in rows}
        change = abs(err[550] - err[275]) / err[275]
        runtime = time.perf_counter() - start
        ok = change < 0.10 and interp[550] > interp[65] and runtime < 600
        record(
            5,
            ok,
            f"locpol mean sup error p=65/275/550: {err[65]:.4f}/{err[275]:.4f}/{err[550]:.4f} "
            f"(change 275->550 {100 * change:.1f}%); interpolation p=65 {interp[65]:.4f} vs p=550 {interp[550]:.4f}; "
            f"{runtime:.0f} s",
        )

    def test_c06_interpolation_noise_term(self):
        model = SimulationModel.named("zero", process="none", sigma=1.0)
        n = 600
        ratios = {}
        for i, p1 in enumerate((100, 1000, 10000)):
            eps, _ = draw_averaged_batch(model, n, uniform_grid(p1), 500, [606, i])
            ratios[p1] = float(np.mean(np.max(np.abs(eps), axis=0)) / np.sqrt(np.log(p1) / n))
        ok = all(0.7 <= r <= 1.5 for r in ratios.values())
        record(6, ok, "mean max|epsbar| / sqrt(log p1 / n): " + ", ".join(f"p1={k}: {v:.3f}" for k, v in ratios.items()))

    @pytest.mark.slow
    def test_c07_intermediate_rate_slope(self):
        start = time.perf_counter()
        model = SimulationModel.named("sin2pi", process="none", sigma=1.0, alpha=2.0)
        configs = [(250, 20), (500, 25), (1000, 30), (2000, 35), (4000, 40)]
        eval_points = evaluation_grid(1, 1001)
        seeds = np.random.SeedSequence(707).spawn(len(configs))
        log_np, log_err = [], []
        for (n, p), seed in zip(configs, seeds):
            inputs = RateInputs(n, p, d=1, alpha=2.0)
            assert classify_regime(inputs) == "intermediate"
            h = optimal_bandwidth(inputs)
            # local linear: polynomial degree alpha - 1 for alpha = 2
            rep = run_replications(model, n, uniform_grid(p), EstimatorConfig(m=1, h=h), eval_points, 300, seed)
            log_np.append(np.log(n * p))
            log_err.append(np.log(np.mean(rep.total)))
        slope = float(np.polyfit(log_np, log_err, 1)[0])
        runtime = time.perf_counter() - start
        ok = abs(slope + 0.40) <= 0.10 and runtime < 900
        record(7, ok, f"slope of log mean sup error vs log(np) = {slope:.3f} (target -0.40 +- 0.10), {runtime:.0f} s")

    def test_c08_clt_variance(self):
        grid = uniform_grid(CLT_P)
        checks = undersmoothing_check(RateInputs(CLT_N, CLT_P), CLT_CONFIG.h)
        assert checks["in_H"], checks
        w = CLT_CONFIG.weights(grid, np.array([[0.5]])).toarray()[0]
        eps, z = draw_averaged_batch(CLT_MODEL, CLT_N, grid, 1000, 808)
        mu_design = mean_mu0(grid.axes[0])
        stat = np.sqrt(CLT_N) * (w @ (mu_design[:, None] + eps + z) - mean_mu0(0.5))
        var = float(np.var(stat, ddof=1))
        exact = _exact_clt_variance(w)
        ok = abs(var - 0.5) <= 0.05
        record(
            8,
            ok,
            f"empirical variance {var:.4f} (target 0.5 +- 10%); exact finite-p variance of this estimator {exact:.4f}",
        )

    @pytest.mark.slow
    def test_c09_band_coverage(self):
        start = time.perf_counter()
        grid = uniform_grid(CLT_P)
        eval_points = evaluation_grid(1, 201)
        truth = mean_mu0(eval_points[:, 0])
        covered = 0
        reps = 500
        seeds = np.random.SeedSequence(909).spawn(reps)
        for seed in seeds:
            data_rng, band_rng = (np.random.default_rng(s) for s in seed.spawn(2))
            y = sample_curves(CLT_MODEL, CLT_N, grid, data_rng)
            band = band_from_dataset(CurveDataset(grid, y), CLT_CONFIG, eval_points, 0.95, 2000, band_rng)
            covered += band.covers(truth)
        coverage = covered / reps
        runtime = time.perf_counter() - start
        ok = 0.92 <= coverage <= 0.98 and runtime < 900
        record(9, ok, f"coverage {coverage:.3f} over {reps} replications (target [0.92, 0.98]), {runtime:.0f} s")

    def test_c10_design_grid_bounds(self):
        rng = np.random.default_rng(1010)
        worst_loc = worst_gap = 0.0
        for _ in range(20):
            dens = _linear_density(rng.uniform(0.2, 1.8))
            p = int(rng.integers(5, 300))
            axis = quantile_grid([dens], p, tol=1e-12).axes[0]
            v = design_bound_violations(axis, dens)
            worst_loc = max(worst_loc, v["location"])
            worst_gap = max(worst_gap, v["spacing"])
        exceed = 0
        for i in range(1000):
            d = int(rng.integers(1, 3))
            dens = [_linear_density(rng.uniform(0.2, 1.8)) for _ in range(d)]
            p = [int(v) for v in rng.integers(5, 60, size=d)]
            grid = quantile_grid(dens, p) if i % 2 else Grid(uniform_grid(p).axes)
            f_max = [f.f_max for f in dens] if i % 2 else 1.0
            h = rng.uniform(1e-3, 0.5)
            center = rng.uniform(0.0, 1.0, size=d)
            exceed += count_in_box(grid, center, h) > box_count_bound(f_max, p, h)
        ok = worst_loc <= 1e-8 and worst_gap <= 1e-8 and exceed == 0
        record(
            10,
            ok,
            f"20 densities: location violation {worst_loc:.1e}, spacing violation {worst_gap:.1e}; "
            f"box counts above bound: {exceed}/1000",
        )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
