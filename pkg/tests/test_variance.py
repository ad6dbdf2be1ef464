import numpy as np
import pytest

from panelmbb import (
    Ar1Design,
    BlockPlan,
    Contrast,
    DimensionMismatch,
    NegativeVariance,
    PanelData,
    SingularDesign,
    contrast_variance,
    omega_plug_in_hac,
    omega_star_closed_form,
    omega_star_resampled,
    psd_clamp,
    resample_panel,
    sigma_hat,
    simulate_ar1,
    simulate_linear,
    upsilon,
    variance_estimates,
    within_group_estimate,
)

from oracles import (
    enumerate_score_variance,
    enumerate_score_variance_full_means,
)


def make_panel(y, X):
    return PanelData.from_arrays(y, X)


def zero_noise_panel(seed=8, n=4, m=6, k=1, beta=2.0):
    rng = np.random.RandomState(seed)
    X = rng.randn(n, m, k)
    y = 1.5 + X @ (np.ones(k) * beta)
    return make_panel(y, X)


class TestSigmaHat:
    def test_hand_value(self):
        panel = make_panel([[0.0, 2.0, 4.0]], [[0.0, 1.0, 2.0]])
        assert np.allclose(sigma_hat(panel), [[2.0 / 3.0]])

    def test_within_constant_regressor_gives_zero(self):
        panel = make_panel([[1.0, 2.0, 3.0]], [[4.0, 4.0, 4.0]])
        assert np.allclose(sigma_hat(panel), 0.0)

    def test_duplicating_units_leaves_average_unchanged(self):
        rng = np.random.RandomState(1)
        y = rng.randn(2, 5)
        X = rng.randn(2, 5, 2)
        single = sigma_hat(make_panel(y, X))
        doubled = sigma_hat(make_panel(np.vstack([y, y]), np.vstack([X, X])))
        assert np.allclose(single, doubled, atol=1e-12)

    def test_matches_fit_sigma(self):
        rng = np.random.RandomState(2)
        panel = make_panel(rng.randn(3, 6), rng.randn(3, 6, 2))
        fit = within_group_estimate(panel)
        assert np.array_equal(sigma_hat(panel), np.asarray(fit.sigma_hat))


class TestOmegaStarResampled:
    def test_zero_noise_panel_gives_zero(self):
        panel = zero_noise_panel()
        plan = BlockPlan(p=3, q=2, starts=np.array([0, 2, 4]))
        fit_star = within_group_estimate(resample_panel(panel, plan))
        omega = omega_star_resampled(panel, plan, fit_star)
        assert np.allclose(omega, 0.0, atol=1e-12)

    def test_single_full_block_formula(self):
        # p=1, q=m: one block score per unit, outer products averaged over n
        rng = np.random.RandomState(3)
        panel = make_panel(rng.randn(2, 4), rng.randn(2, 4, 1))
        plan = BlockPlan(p=1, q=4, starts=np.array([0]))
        fit_star = within_group_estimate(resample_panel(panel, plan))
        omega = omega_star_resampled(panel, plan, fit_star)
        fit = within_group_estimate(panel)
        assert np.allclose(fit_star.beta_hat, fit.beta_hat)
        expected = np.zeros((1, 1))
        for i in range(2):
            score = 0.0
            for t in range(4):
                e = (panel.y[i, t] - fit.unit_means_y[i]) - (
                    panel.X[i, t, 0] - fit.unit_means_x[i, 0]
                ) * fit.beta_hat[0]
                score += (panel.X[i, t, 0] - fit.unit_means_x[i, 0]) * e
            expected[0, 0] += score * score / 4.0
        expected /= 2.0
        assert np.allclose(omega, expected, atol=1e-12)

    def test_hand_enumeration_smallest_case(self):
        # n=1, m=2, q=1: hand-enumerable block positions. Plans repeating one
        # period are singular (no completed replicate), which leaves the two
        # mixed plans.
        y = np.array([[1.0, 3.0]])
        X = np.array([[2.0, 5.0]])
        panel = make_panel(y, X)
        for s0, s1 in [(0, 1), (1, 0)]:
            plan = BlockPlan(p=2, q=1, starts=np.array([s0, s1]))
            star = resample_panel(panel, plan)
            fit_star = within_group_estimate(star)
            omega = omega_star_resampled(panel, plan, fit_star)
            ybar, xbar = star.y[0].mean(), star.X[0, :, 0].mean()
            beta = fit_star.beta_hat[0]
            expected = 0.0
            for s in (s0, s1):
                e = (y[0, s] - ybar) - (X[0, s] - xbar) * beta
                v = (X[0, s] - xbar) * e
                expected += v * v
            expected /= 2.0  # n * p = 1 * 2
            assert omega[0, 0] == pytest.approx(expected, abs=1e-12)


class TestOmegaStarClosedForm:
    def test_zero_noise_gives_zero(self):
        panel = zero_noise_panel()
        fit = within_group_estimate(panel)
        assert np.allclose(omega_star_closed_form(panel, fit, 2), 0.0, atol=1e-12)

    def test_q1_collapses_to_per_period_score_variance(self):
        rng = np.random.RandomState(5)
        panel = make_panel(rng.randn(3, 6), rng.randn(3, 6, 1))
        fit = within_group_estimate(panel)
        omega = omega_star_closed_form(panel, fit, 1)
        expected = 0.0
        for i in range(3):
            scores = [
                (panel.X[i, t, 0] - fit.unit_means_x[i, 0]) * fit.residuals[i, t]
                for t in range(6)
            ]
            mean = sum(scores) / 6.0
            expected += sum((s - mean) ** 2 for s in scores) / 6.0
        expected /= 3.0
        assert omega[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_matches_per_unit_full_mean_enumeration(self):
        # same estimand computed through the exhaustive plan enumeration
        rng = np.random.RandomState(6)
        for n, m, q in [(1, 4, 2), (2, 6, 3), (2, 4, 2), (1, 6, 2)]:
            panel = make_panel(rng.randn(n, m), rng.randn(n, m, 1))
            fit = within_group_estimate(panel)
            omega = omega_star_closed_form(panel, fit, q)
            oracle = enumerate_score_variance_full_means(
                panel.y, panel.X, q, fit.beta_hat
            )
            assert np.allclose(omega, oracle, atol=1e-12)

    def test_centering_gap_against_exact_enumeration(self):
        # n=1, m=4, q=2: exact conditional variance over all 9 plans; the
        # closed form differs only through the full-sample-mean centering
        rng = np.random.RandomState(7)
        panel = make_panel(rng.randn(1, 4), rng.randn(1, 4, 1))
        fit = within_group_estimate(panel)
        omega = omega_star_closed_form(panel, fit, 2)
        exact = enumerate_score_variance(panel.y, panel.X, 2, fit.beta_hat)
        gap = abs(omega[0, 0] - exact[0, 0])
        assert gap <= 2.0 * (2.0 / 4.0) * max(abs(exact[0, 0]), abs(omega[0, 0]))

    def test_seed_free(self):
        panel = simulate_ar1(Ar1Design(beta=0.2, n=5, m=8, seed=3))
        fit = within_group_estimate(panel)
        a = omega_star_closed_form(panel, fit, 4)
        b = omega_star_closed_form(panel, fit, 4)
        assert np.array_equal(a, b)


class TestOmegaPlugInHac:
    def test_bandwidth_zero_formula(self):
        rng = np.random.RandomState(9)
        panel = make_panel(rng.randn(4, 5), rng.randn(4, 5, 1))
        fit = within_group_estimate(panel)
        omega = omega_plug_in_hac(panel, fit, 0)
        expected = 0.0
        for i in range(4):
            for t in range(5):
                xd = panel.X[i, t, 0] - fit.unit_means_x[i, 0]
                expected += (xd * fit.residuals[i, t]) ** 2
        expected /= 20.0
        assert omega[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_zero_residuals_give_zero(self):
        panel = zero_noise_panel()
        fit = within_group_estimate(panel)
        assert np.allclose(omega_plug_in_hac(panel, fit, 3), 0.0, atol=1e-12)

    def test_iid_lags_contribute_little(self):
        # under strict exogeneity the lag terms have mean zero, so the HAC
        # value stays close to its lag-0 part
        panel = simulate_linear(200, 200, 1, [0.5], spec="iid", seed=12)
        fit = within_group_estimate(panel)
        hac = omega_plug_in_hac(panel, fit, 10)[0, 0]
        lag0 = omega_plug_in_hac(panel, fit, 0)[0, 0]
        assert abs(hac - lag0) / lag0 < 0.15


class TestUpsilon:
    def test_identity_sigma_returns_omega(self):
        omega = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert np.allclose(upsilon(np.eye(2), omega), omega, atol=1e-12)

    def test_scalar_sandwich(self):
        assert upsilon(np.array([[2.0]]), np.array([[3.0]]))[0, 0] == pytest.approx(0.75)

    def test_singular_sigma_rejected(self):
        with pytest.raises(SingularDesign):
            upsilon(np.zeros((1, 1)), np.eye(1))

    def test_ar1_sandwich_near_unity(self):
        panel = simulate_ar1(Ar1Design(beta=0.0, n=200, m=200, seed=44))
        fit = within_group_estimate(panel)
        ups = upsilon(fit.sigma_hat, omega_plug_in_hac(panel, fit, 10))
        assert abs(ups[0, 0] - 1.0) < 0.1


class TestContrastVariance:
    def test_coordinate_contrast_picks_diagonal(self):
        ups = np.array([[2.0, 0.5], [0.5, 3.0]])
        assert contrast_variance(ups, Contrast(np.array([1.0, 0.0]))) == pytest.approx(2.0)

    def test_identity_sum(self):
        assert contrast_variance(np.eye(2), Contrast(np.array([1.0, 1.0]))) == pytest.approx(2.0)

    def test_tiny_negative_clamped(self):
        ups = np.array([[-5e-11]])
        assert contrast_variance(ups, Contrast(np.array([1.0]))) == 0.0

    def test_negative_beyond_tolerance_raises(self):
        ups = np.array([[-1e-6]])
        with pytest.raises(NegativeVariance):
            contrast_variance(ups, Contrast(np.array([1.0])))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            contrast_variance(np.eye(2), Contrast(np.array([1.0])))


class TestScaleEquivariance:
    def test_omega_scales_with_y_squared(self):
        rng = np.random.RandomState(13)
        y = rng.randn(4, 8)
        X = rng.randn(4, 8, 1)
        s = 3.7
        base = make_panel(y, X)
        scaled = make_panel(s * y, X)
        fb, fs = within_group_estimate(base), within_group_estimate(scaled)
        assert np.allclose(sigma_hat(base), sigma_hat(scaled), atol=1e-12)
        for q in (1, 2, 4):
            a = omega_star_closed_form(base, fb, q)
            b = omega_star_closed_form(scaled, fs, q)
            assert np.allclose(s * s * a, b, rtol=1e-10)
        a = omega_plug_in_hac(base, fb, 3)
        b = omega_plug_in_hac(scaled, fs, 3)
        assert np.allclose(s * s * a, b, rtol=1e-10)


class TestPsdClamp:
    def test_passthrough_for_psd(self):
        mat = np.array([[2.0, 1.0], [1.0, 2.0]])
        assert np.allclose(psd_clamp(mat), mat)

    def test_rounding_negative_clamped(self):
        mat = np.diag([1.0, -5e-11])
        out = psd_clamp(mat)
        assert np.linalg.eigvalsh(out)[0] >= 0.0

    def test_genuine_negative_raises(self):
        with pytest.raises(NegativeVariance):
            psd_clamp(np.diag([1.0, -1e-6]))


class TestVarianceEstimates:
    def test_builder_closed_form(self):
        panel = simulate_ar1(Ar1Design(beta=0.1, n=6, m=8, seed=5))
        fit = within_group_estimate(panel)
        ve = variance_estimates(panel, fit, "closed_form_star", q=4)
        assert ve.method == "closed_form_star"
        assert np.allclose(ve.upsilon, ve.upsilon.T)
        assert np.linalg.eigvalsh(ve.omega)[0] >= 0.0

    def test_builder_requires_arguments(self):
        panel = simulate_ar1(Ar1Design(beta=0.1, n=6, m=8, seed=5))
        fit = within_group_estimate(panel)
        with pytest.raises(Exception):
            variance_estimates(panel, fit, "plug_in_hac")
        with pytest.raises(Exception):
            variance_estimates(panel, fit, "no_such_method", q=2)
