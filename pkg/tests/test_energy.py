import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from chargeplan.energy import (
    DEFAULT_COEFFICIENTS,
    NormalDist,
    NormalGammaPosterior,
    ObservationWindow,
    RegressionCoefficients,
    ng_from_normal,
    predictive_cdf,
    predictive_quantile,
    predictive_scale,
    prior_from_coefficients,
    student_t_cdf,
    student_t_quantile,
    update_posterior,
    window_push,
)

M, RHO = 3.93, 1.225


class TestPriors:
    @pytest.mark.parametrize("regime,mean,var", [
        ("takeoff", 579.75, 692.16),
        ("cruise", 501.80, 423.20),
        ("landing", 479.00, 299.45),
    ])
    def test_regression_priors_match_published_moments(self, regime, mean, var):
        got = prior_from_coefficients(DEFAULT_COEFFICIENTS[regime], M, RHO)
        assert got.mean == pytest.approx(mean, abs=0.01)
        assert got.variance == pytest.approx(var, abs=0.01)

    def test_deterministic_coefficients_give_zero_variance(self):
        coef = RegressionCoefficients(80.0, 0.0, 10.0, 0.0)
        assert prior_from_coefficients(coef, M, RHO).variance == 0.0

    def test_monte_carlo_closure_of_linear_combination(self):
        # sampling the coefficients independently and recombining must
        # reproduce the analytic normal within 1%
        coef = DEFAULT_COEFFICIENTS["cruise"]
        rng = np.random.Generator(np.random.Philox(123))
        b1 = rng.normal(coef.b1_mean, coef.b1_sd, 1_000_000)
        b0 = rng.normal(coef.b0_mean, coef.b0_sd, 1_000_000)
        samples = b1 * math.sqrt(M**3 / RHO) + b0
        analytic = prior_from_coefficients(coef, M, RHO)
        assert samples.mean() == pytest.approx(analytic.mean, rel=0.01)
        assert samples.var() == pytest.approx(analytic.variance, rel=0.01)


class TestNormalGamma:
    def test_defaults_from_normal_prior(self, priors):
        ng = ng_from_normal(priors["cruise"])
        assert (ng.mu, ng.kappa, ng.alpha_bi) == (priors["cruise"].mean, 1.0, 2.0)
        assert ng.beta_bi == priors["cruise"].variance

    def test_takeoff_prior(self, priors):
        ng = ng_from_normal(priors["takeoff"])
        assert ng.mu == pytest.approx(579.75, abs=0.01)
        assert ng.beta_bi == pytest.approx(692.16, abs=0.01)

    def test_overrides_pass_through(self, priors):
        ng = ng_from_normal(priors["cruise"], kappa=5.0, alpha_bi=3.0)
        assert ng.kappa == 5.0
        assert ng.alpha_bi == 3.0

    def test_zero_variance_prior_rejected(self):
        with pytest.raises(ValueError):
            ng_from_normal(NormalDist(500.0, 0.0))

    def test_empty_update_returns_prior(self):
        prior = NormalGammaPosterior(501.8, 1.0, 2.0, 423.2)
        assert update_posterior(prior, []) is prior

    def test_single_sample_update_matches_hand_computation(self):
        prior = NormalGammaPosterior(501.8, 1.0, 2.0, 423.2)
        post = update_posterior(prior, [550.0])
        assert post.mu == pytest.approx(525.9, abs=1e-12)
        assert post.kappa == 2.0
        assert post.alpha_bi == 2.5
        assert post.beta_bi == pytest.approx(1004.01, abs=1e-9)

    def test_batch_update_matches_naive_reference(self):
        # independent straightforward implementation of the same update
        def naive(prior, xs):
            n = len(xs)
            xbar = sum(xs) / n
            ss = sum((x - xbar) ** 2 for x in xs)
            return (
                (prior.kappa * prior.mu + n * xbar) / (prior.kappa + n),
                prior.kappa + n,
                prior.alpha_bi + n / 2,
                prior.beta_bi + 0.5 * ss
                + prior.kappa * n * (xbar - prior.mu) ** 2 / (2 * (prior.kappa + n)),
            )

        prior = NormalGammaPosterior(480.0, 2.0, 3.0, 300.0)
        xs = [455.0, 530.5, 512.25, 498.0, 471.125]
        post = update_posterior(prior, xs)
        ref = naive(prior, xs)
        assert (post.mu, post.kappa, post.alpha_bi) == pytest.approx(ref[:3], rel=1e-12)
        assert post.beta_bi == pytest.approx(ref[3], rel=1e-12)

    def test_samples_at_prior_mean_leave_location_unchanged(self):
        prior = NormalGammaPosterior(501.8, 1.0, 2.0, 423.2)
        post = update_posterior(prior, [501.8] * 7)
        assert post.mu == 501.8

    def test_location_converges_despite_misplaced_prior(self):
        rng = np.random.Generator(np.random.Philox(7))
        prior = NormalGammaPosterior(500.0, 1.0, 2.0, 400.0)
        xs = rng.normal(600.0, 5.0, 10_000)
        post = update_posterior(prior, xs)
        assert post.mu == pytest.approx(600.0, abs=0.5)

    def test_posterior_consistency_with_many_samples(self):
        rng = np.random.Generator(np.random.Philox(7))
        true_mu, true_sd = 600.0, 5.0
        prior = NormalGammaPosterior(true_mu, 1.0, 2.0, 400.0)
        xs = rng.normal(true_mu, true_sd, 10_000)
        post = update_posterior(prior, xs)
        predictive_var = post.beta_bi * (post.kappa + 1) / (post.alpha_bi * post.kappa)
        assert post.mu == pytest.approx(true_mu, rel=0.02)
        assert predictive_var == pytest.approx(true_sd**2, rel=0.02)


class TestPredictive:
    POST = NormalGammaPosterior(500.0, 100.0, 52.0, 5000.0)

    def test_median_is_location(self):
        assert predictive_quantile(self.POST, 0.5) == self.POST.mu

    def test_tails_symmetric_about_location(self):
        hi = predictive_quantile(self.POST, 0.999)
        lo = predictive_quantile(self.POST, 0.001)
        assert hi - self.POST.mu == pytest.approx(self.POST.mu - lo, rel=1e-9)

    def test_quantile_strictly_monotone(self):
        thetas = np.linspace(0.01, 0.99, 33)
        values = [predictive_quantile(self.POST, t) for t in thetas]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_theta_bounds_rejected(self):
        with pytest.raises(ValueError):
            predictive_quantile(self.POST, 0.0)
        with pytest.raises(ValueError):
            predictive_quantile(self.POST, 1.0)

    def test_cdf_at_location_is_half(self):
        assert predictive_cdf(self.POST, self.POST.mu) == pytest.approx(0.5, abs=1e-12)

    def test_cdf_quantile_round_trip(self):
        for theta in np.linspace(0.01, 0.99, 49):
            assert predictive_cdf(self.POST, predictive_quantile(self.POST, theta)) \
                == pytest.approx(theta, abs=1e-9)

    def test_against_library_student_t(self):
        # independent implementation route: scipy's t uses its own algorithms
        scale = predictive_scale(self.POST)
        for theta in (0.05, 0.25, 0.75, 0.975, 0.999):
            ref = stats.t.ppf(theta, df=self.POST.dof, loc=self.POST.mu, scale=scale)
            assert predictive_quantile(self.POST, theta) == pytest.approx(ref, rel=1e-9)

    def test_matches_monte_carlo_oracle_in_probability(self):
        # draw from the generative model: precision ~ Gamma, mean ~ Normal,
        # reading ~ Normal
        rng = np.random.Generator(np.random.Philox(99))
        n = 1_000_000
        lam = rng.gamma(self.POST.alpha_bi, 1.0 / self.POST.beta_bi, n)
        mu = rng.normal(self.POST.mu, np.sqrt(1.0 / (self.POST.kappa * lam)))
        x = rng.normal(mu, np.sqrt(1.0 / lam))
        for theta in (0.5, 0.75, 0.975):
            mc_quantile = np.quantile(x, theta)
            assert predictive_cdf(self.POST, mc_quantile) == pytest.approx(theta, abs=1e-3)

    def test_large_dof_approaches_normal(self):
        post = NormalGammaPosterior(500.0, 5000.0, 2500.0, 2500.0 * 25.0)
        scale = predictive_scale(post)
        for x in (480.0, 495.0, 510.0, 525.0):
            ref = stats.norm.cdf(x, loc=post.mu, scale=scale)
            assert predictive_cdf(post, x) == pytest.approx(ref, abs=1e-3)

    @given(theta=st.floats(0.001, 0.999), dof=st.floats(1.0, 200.0))
    @settings(max_examples=60)
    def test_t_round_trip_property(self, theta, dof):
        assert student_t_cdf(student_t_quantile(theta, dof), dof) == pytest.approx(
            theta, abs=1e-9)


class TestObservationWindow:
    def test_eviction_strictly_beyond_window(self):
        w = ObservationWindow(window_length=900.0)
        w = window_push(w, "cruise", 0.0, 500.0)
        w = window_push(w, "cruise", 901.0, 510.0)
        assert w.samples("cruise") == (510.0,)

    def test_boundary_age_is_inclusive(self):
        w = ObservationWindow(window_length=900.0)
        w = window_push(w, "cruise", 0.0, 500.0)
        w = window_push(w, "cruise", 900.0, 510.0)
        assert w.samples("cruise") == (500.0, 510.0)

    def test_regular_stream_fits_exactly(self):
        w = ObservationWindow(window_length=900.0, reading_period=20.0)
        for i in range(45):
            w = window_push(w, "cruise", 20.0 * i, 500.0 + i)
        assert len(w) == 45  # span 880 s, all retained

    def test_out_of_order_timestamp_rejected(self):
        w = window_push(ObservationWindow(), "cruise", 100.0, 500.0)
        with pytest.raises(ValueError):
            window_push(w, "cruise", 99.0, 500.0)

    def test_regime_tagging(self):
        w = ObservationWindow()
        w = window_push(w, "takeoff", 0.0, 580.0)
        w = window_push(w, "cruise", 20.0, 500.0)
        assert w.samples("takeoff") == (580.0,)
        assert w.samples("cruise") == (500.0,)
        assert w.samples("landing") == ()

    def test_unknown_regime_rejected(self):
        with pytest.raises(ValueError):
            window_push(ObservationWindow(), "hover", 0.0, 1.0)
