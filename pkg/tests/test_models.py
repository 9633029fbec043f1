import math

import numpy as np
import pytest

from pedtrial.analysis.lmm import lmm_random_intercept
from pedtrial.analysis.logistic import logistic_irls
from pedtrial.analysis.stepwise import lrt_stepwise
from pedtrial.errors import (
    InvalidParameterError,
    NonNestedModelError,
    SeparationError,
)

from oracles import lmm_grid_ml, logistic_grid_ml


def intercept_only_fit(y):
    return logistic_irls(np.empty((len(y), 0)), y, add_intercept=True, standardize=False)


class TestLogisticIRLS:
    def test_intercept_only_half(self):
        y = np.array([0.0, 1.0, 0.0, 1.0, 1.0, 0.0])
        res = intercept_only_fit(y)
        assert res.coefficients["intercept"] == pytest.approx(0.0, abs=1e-10)

    def test_intercept_only_logit_closed_form(self):
        y = np.array([1.0, 1.0, 1.0, 0.0] * 3)  # mean 0.75
        res = intercept_only_fit(y)
        assert res.coefficients["intercept"] == pytest.approx(math.log(3.0), abs=1e-9)

    @pytest.mark.parametrize("seed", [11, 22, 33])
    def test_loglik_matches_grid_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 12
        x = rng.normal(size=n)
        eta = 0.5 + 1.2 * x
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
        if y.min() == y.max():  # keep the fixture non-degenerate
            y[0] = 1.0 - y[0]
        res = logistic_irls(x[:, None], y, standardize=False)
        X_full = np.column_stack([np.ones(n), x])
        _, grid_ll = logistic_grid_ml(X_full, y)
        assert res.loglik == pytest.approx(grid_ll, abs=1e-6)

    def test_standardization_invariance(self):
        rng = np.random.default_rng(5)
        n = 60
        x = rng.normal(loc=3.0, scale=7.0, size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(0.3 * (x - 3.0) / 7.0)))).astype(float)
        raw = logistic_irls(x[:, None], y, standardize=False)
        std = logistic_irls(x[:, None], y, standardize=True)
        assert std.loglik == pytest.approx(raw.loglik, abs=1e-8)
        assert std.aic == pytest.approx(raw.aic, abs=1e-8)
        # coefficients differ by exactly the scale factor
        assert std.coefficients["x1"] == pytest.approx(raw.coefficients["x1"] * x.std(), rel=1e-6)

    def test_loglik_trace_monotone(self):
        rng = np.random.default_rng(17)
        n = 40
        x = rng.normal(size=n)
        y = (rng.random(n) < 0.5).astype(float)
        res = logistic_irls(x[:, None], y, standardize=False)
        trace = res.extra["loglik_trace"]
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))

    def test_perfect_separation_detected(self):
        x = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        y = (x > 0).astype(float)
        with pytest.raises(SeparationError):
            logistic_irls(x[:, None], y, standardize=False)

    def test_constant_column_rejected(self):
        y = np.array([0.0, 1.0, 0.0, 1.0])
        with pytest.raises(InvalidParameterError):
            logistic_irls(np.ones((4, 1)), y, standardize=True)

    def test_non_binary_rejected(self):
        with pytest.raises(InvalidParameterError):
            logistic_irls(np.zeros((4, 1)), np.array([0.0, 1.0, 2.0, 1.0]))


class TestLMM:
    def test_lambda_zero_reduces_to_ols(self):
        rng = np.random.default_rng(2)
        n = 80
        x = rng.normal(size=n)
        y = 1.0 + 0.5 * x + rng.normal(scale=0.3, size=n)
        groups = np.arange(n) % 8  # grouping carries no structure
        res = lmm_random_intercept(x[:, None], y, groups, standardize=False)
        X_full = np.column_stack([np.ones(n), x])
        beta_ols, *_ = np.linalg.lstsq(X_full, y, rcond=None)
        assert res.coefficients["intercept"] == pytest.approx(beta_ols[0], abs=1e-6)
        assert res.coefficients["x1"] == pytest.approx(beta_ols[1], abs=1e-6)

    def test_balanced_two_group_matches_grid_oracle(self):
        rng = np.random.default_rng(31)
        per = 12
        offsets = {0: 1.0, 1: -1.0}
        groups = np.repeat([0, 1], per)
        y = np.array([3.0 + offsets[g] for g in groups]) + rng.normal(scale=0.5, size=2 * per)
        X = np.empty((2 * per, 0))
        res = lmm_random_intercept(X, y, groups, standardize=False)
        oracle = lmm_grid_ml(np.ones((2 * per, 1)), y, groups)
        assert res.coefficients["intercept"] == pytest.approx(oracle["beta"], abs=1e-4)
        assert res.sigma2_e == pytest.approx(oracle["sigma2_e"], abs=1e-4)
        assert res.sigma2_b == pytest.approx(oracle["sigma2_b"], abs=1e-4)
        assert res.loglik == pytest.approx(oracle["loglik"], abs=1e-6)

    def test_conditional_r2_at_least_marginal(self):
        rng = np.random.default_rng(7)
        n = 90
        groups = np.repeat(np.arange(6), 15)
        b = rng.normal(scale=1.0, size=6)
        x = rng.normal(size=n)
        y = 0.4 * x + b[groups] + rng.normal(scale=0.5, size=n)
        res = lmm_random_intercept(x[:, None], y, groups)
        assert res.r2_conditional >= res.r2_marginal
        assert res.sigma2_b > 0.0

    def test_single_group_falls_back_to_ols(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=20)
        y = x + rng.normal(size=20)
        res = lmm_random_intercept(x[:, None], y, np.zeros(20, dtype=int))
        assert res.extra["ols_fallback"] is True
        assert res.sigma2_b == 0.0

    def test_best_loglik_trace_monotone(self):
        rng = np.random.default_rng(11)
        groups = np.repeat(np.arange(4), 10)
        y = rng.normal(size=40) + np.repeat(rng.normal(size=4), 10)
        res = lmm_random_intercept(np.empty((40, 0)), y, groups, standardize=False)
        trace = res.extra["loglik_trace"]
        assert all(b >= a for a, b in zip(trace, trace[1:]))

    def test_variance_components_nonnegative(self):
        rng = np.random.default_rng(13)
        groups = np.repeat(np.arange(5), 8)
        y = rng.normal(size=40)
        res = lmm_random_intercept(np.empty((40, 0)), y, groups, standardize=False)
        assert res.sigma2_b >= 0.0
        assert res.sigma2_e > 0.0


class TestStepwise:
    @staticmethod
    def make_fit(y):
        def fit(X, names):
            return logistic_irls(X, y, feature_names=names or None,
                                 standardize=False)
        return fit

    def test_true_effect_retained_null_effect_rejected(self):
        rng = np.random.default_rng(42)
        n = 600
        real = rng.normal(size=n)
        noise = rng.normal(size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-1.5 * real))).astype(float)
        fit = self.make_fit(y)
        res = lrt_stepwise(fit, [("real", real), ("noise", noise)])
        assert res.steps[0].retained is True
        assert res.steps[1].retained is False
        assert res.selected == ["real"]

    def test_chi2_identity_every_step(self):
        rng = np.random.default_rng(9)
        n = 200
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-a))).astype(float)
        fit = self.make_fit(y)
        res = lrt_stepwise(fit, [("a", a), ("b", b)])
        for step in res.steps:
            assert step.chi2 == pytest.approx(
                2.0 * (step.loglik_candidate - step.loglik_base), abs=1e-10
            )

    def test_duplicate_column_rejected_as_non_nested(self):
        # strong effect so "a" is retained; its duplicate then adds no new
        # column space and df would be 0
        rng = np.random.default_rng(4)
        n = 300
        a = rng.normal(size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-2.0 * a))).astype(float)
        fit = self.make_fit(y)
        with pytest.raises(NonNestedModelError):
            lrt_stepwise(fit, [("a", a), ("a_again", a.copy())])

    def test_mismatched_rows_rejected(self):
        y = np.zeros(10)
        fit = self.make_fit(y)
        with pytest.raises(NonNestedModelError):
            lrt_stepwise(fit, [("a", np.zeros(10)), ("b", np.zeros(11))])

    def test_delta_aic_sign(self):
        # retaining a strong effect should show positive AIC improvement
        rng = np.random.default_rng(21)
        n = 400
        a = rng.normal(size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-2.0 * a))).astype(float)
        fit = self.make_fit(y)
        res = lrt_stepwise(fit, [("a", a)])
        assert res.steps[0].delta_aic > 0.0


class TestStandardizationInvariance:
    def test_lmm_scaling_changes_only_coefficients(self):
        rng = np.random.default_rng(14)
        n = 120
        groups = np.repeat(np.arange(6), 20)
        x = rng.normal(loc=50.0, scale=9.0, size=n)
        y = 0.02 * x + np.repeat(rng.normal(size=6), 20) + rng.normal(scale=0.4, size=n)
        raw = lmm_random_intercept(x[:, None], y, groups, standardize=False)
        std = lmm_random_intercept(x[:, None], y, groups, standardize=True)
        assert std.loglik == pytest.approx(raw.loglik, abs=1e-7)
        assert std.aic == pytest.approx(raw.aic, abs=1e-7)
        assert std.sigma2_b == pytest.approx(raw.sigma2_b, rel=1e-5, abs=1e-9)
        assert std.sigma2_e == pytest.approx(raw.sigma2_e, rel=1e-5)
        assert std.r2_marginal == pytest.approx(raw.r2_marginal, abs=1e-7)
        # slope rescales by the predictor's spread
        assert std.coefficients["x1"] == pytest.approx(
            raw.coefficients["x1"] * x.std(), rel=1e-5
        )

    def test_logistic_lrt_chi2_unchanged_by_scaling(self):
        rng = np.random.default_rng(15)
        n = 300
        a = rng.normal(loc=10.0, scale=3.0, size=n)
        y = (rng.random(n) < 1.0 / (1.0 + np.exp(-(a - 10.0)))).astype(float)

        def fit_std(X, names):
            return logistic_irls(X, y, feature_names=names or None, standardize=True)

        def fit_raw(X, names):
            return logistic_irls(X, y, feature_names=names or None, standardize=False)

        res_std = lrt_stepwise(fit_std, [("a", a)])
        res_raw = lrt_stepwise(fit_raw, [("a", a)])
        assert res_std.steps[0].chi2 == pytest.approx(res_raw.steps[0].chi2, abs=1e-6)
        assert res_std.steps[0].delta_aic == pytest.approx(res_raw.steps[0].delta_aic, abs=1e-6)
