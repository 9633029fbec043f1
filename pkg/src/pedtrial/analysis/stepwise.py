"""Forward stepwise model selection by likelihood-ratio tests.

Candidate effects are offered in a fixed order; each is retained when the
chi-square likelihood-ratio test against the current model is significant.
Degrees of freedom come from design-matrix rank, so a candidate that adds
no new column space (a duplicated predictor) is rejected as non-nested
before any fitting happens.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NonNestedModelError
from .special import chi2_sf

ALPHA = 0.05


@dataclass
class StepRecord:
    candidate: str
    chi2: float
    df: int
    p_value: float
    delta_aic: float
    retained: bool
    loglik_base: float
    loglik_candidate: float


@dataclass
class StepwiseResult:
    steps: list[StepRecord] = field(default_factory=list)
    selected: list[str] = field(default_factory=list)
    final_fit: object | None = None


def _columns(named_columns):
    cols = []
    for _, c in named_columns:
        c = np.asarray(c, dtype=float)
        cols.append(c[:, None] if c.ndim == 1 else c)
    return cols


def lrt_stepwise(fit_fn, candidates, base=(), alpha: float = ALPHA) -> StepwiseResult:
    """Forward selection over ``candidates`` = [(name, column(s)), ...].

    ``fit_fn(X, names)`` must fit a maximum-likelihood model with an
    intercept and return an object with ``loglik``, ``aic`` and
    ``n_params``; variance components must be counted in ``n_params`` so
    the rank-based df below matches the parameter-count difference.
    Each step reports chi2 = 2 * (ll_large - ll_small), its df and p-value,
    and delta AIC = AIC(smaller) - AIC(larger).
    """
    base = list(base)
    kept_names = [name for name, _ in base]
    kept_cols = _columns(base)
    n = None
    for _, c in list(base) + list(candidates):
        c = np.asarray(c)
        rows = c.shape[0]
        if n is None:
            n = rows
        elif rows != n:
            raise NonNestedModelError("candidate predictors cover different row sets")

    def design(cols):
        if not cols:
            return np.empty((n, 0))  # intercept-only once the fit adds it
        return np.column_stack(cols)

    result = StepwiseResult()
    fit0 = fit_fn(design(kept_cols), list(kept_names))

    for name, col in candidates:
        col = np.asarray(col, dtype=float)
        col2d = col[:, None] if col.ndim == 1 else col
        with_intercept0 = np.column_stack([np.ones(n)] + kept_cols) if kept_cols else np.ones((n, 1))
        with_intercept1 = np.column_stack([with_intercept0, col2d])
        df = int(
            np.linalg.matrix_rank(with_intercept1) - np.linalg.matrix_rank(with_intercept0)
        )
        if df == 0:
            raise NonNestedModelError(
                f"candidate {name!r} adds no new column space (df = 0); "
                "comparison is not a nested likelihood-ratio test"
            )
        new_cols = kept_cols + [col2d]
        new_names = kept_names + [name]
        fit1 = fit_fn(design(new_cols), list(new_names))
        chi2 = 2.0 * (fit1.loglik - fit0.loglik)
        p = chi2_sf(max(chi2, 0.0), float(df))
        retained = p < alpha
        result.steps.append(
            StepRecord(
                candidate=name,
                chi2=chi2,
                df=df,
                p_value=p,
                delta_aic=fit0.aic - fit1.aic,
                retained=retained,
                loglik_base=fit0.loglik,
                loglik_candidate=fit1.loglik,
            )
        )
        if retained:
            kept_cols = new_cols
            kept_names = new_names
            fit0 = fit1
    result.selected = kept_names
    result.final_fit = fit0
    return result
