"""Outcome derivation and the statistical toolkit."""

from .lmm import lmm_random_intercept
from .logistic import logistic_irls
from .outcomes import (
    TrialOutcome,
    derive_outcomes,
    derive_trial_outcome,
    false_alarm_rate,
    pws_estimate,
    rates,
)
from .report import analyze, head_bias, render_report, stats_to_dict
from .special import (
    chi2_sf,
    normal_sf,
    regularized_incomplete_beta,
    regularized_lower_gamma,
    regularized_upper_gamma,
    student_t_cdf,
    student_t_two_sided_p,
)
from .stats import StatsResult, chi_square_2x2, holm_bonferroni, one_sample_t, welch_t
from .stepwise import StepwiseResult, lrt_stepwise

__all__ = [
    "StatsResult",
    "StepwiseResult",
    "TrialOutcome",
    "analyze",
    "chi2_sf",
    "chi_square_2x2",
    "derive_outcomes",
    "derive_trial_outcome",
    "false_alarm_rate",
    "head_bias",
    "holm_bonferroni",
    "lmm_random_intercept",
    "logistic_irls",
    "lrt_stepwise",
    "normal_sf",
    "one_sample_t",
    "pws_estimate",
    "rates",
    "regularized_incomplete_beta",
    "regularized_lower_gamma",
    "regularized_upper_gamma",
    "render_report",
    "stats_to_dict",
    "student_t_cdf",
    "student_t_two_sided_p",
    "welch_t",
]
