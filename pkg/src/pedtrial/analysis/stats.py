"""Classical tests used by the outcome analysis: t-tests, step-down
multiple-comparison correction, and the 2x2 Pearson chi-square."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import DegenerateSampleError, InsufficientDataError
from .special import chi2_sf, student_t_two_sided_p


@dataclass
class StatsResult:
    """Shared result record for every fit/test in the package.

    Fields that do not apply to a given procedure stay None: a t-test has
    no variance components, a chi-square has no coefficients, and only the
    mixed model reports the R-squared pair.
    """

    method: str
    statistic: float | None = None
    df: float | None = None
    p_value: float | None = None
    effect_size: float | None = None
    coefficients: dict[str, float] | None = None
    loglik: float | None = None
    aic: float | None = None
    n_params: int | None = None
    sigma2_b: float | None = None
    sigma2_e: float | None = None
    r2_marginal: float | None = None
    r2_conditional: float | None = None
    n: int | None = None
    extra: dict = field(default_factory=dict)


def _mean_sd(xs) -> tuple[float, float]:
    n = len(xs)
    m = sum(xs) / n
    var = sum((x - m) ** 2 for x in xs) / (n - 1)
    return m, math.sqrt(var)


def one_sample_t(xs, mu0: float = 0.0) -> StatsResult:
    """Two-sided one-sample t-test of mean(xs) against ``mu0``."""
    n = len(xs)
    if n < 2:
        raise InsufficientDataError(f"one-sample t-test needs n >= 2, got {n}")
    mean, sd = _mean_sd(xs)
    if sd == 0.0:
        raise DegenerateSampleError("sample has zero variance")
    t = (mean - mu0) / (sd / math.sqrt(n))
    df = n - 1
    return StatsResult(
        method="one_sample_t",
        statistic=t,
        df=float(df),
        p_value=student_t_two_sided_p(t, df),
        effect_size=(mean - mu0) / sd,  # Cohen's d
        n=n,
        extra={"mean": mean, "sd": sd, "mu0": mu0},
    )


def welch_t(xs, ys) -> StatsResult:
    """Two-sided Welch's t-test with Satterthwaite degrees of freedom."""
    n1, n2 = len(xs), len(ys)
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(f"Welch's t-test needs n >= 2 per sample, got {n1}/{n2}")
    m1, s1 = _mean_sd(xs)
    m2, s2 = _mean_sd(ys)
    if s1 == 0.0 and s2 == 0.0:
        raise DegenerateSampleError("both samples have zero variance")
    q1 = s1 * s1 / n1
    q2 = s2 * s2 / n2
    t = (m1 - m2) / math.sqrt(q1 + q2)
    df = (q1 + q2) ** 2 / (
        (q1 * q1 / (n1 - 1) if q1 > 0 else 0.0) + (q2 * q2 / (n2 - 1) if q2 > 0 else 0.0)
    )
    s_pooled = math.sqrt(((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / (n1 + n2 - 2))
    return StatsResult(
        method="welch_t",
        statistic=t,
        df=df,
        p_value=student_t_two_sided_p(t, df),
        effect_size=(m1 - m2) / s_pooled if s_pooled > 0 else math.inf,
        n=n1 + n2,
        extra={"mean1": m1, "mean2": m2, "sd1": s1, "sd2": s2},
    )


def holm_bonferroni(pvals) -> list[float]:
    """Step-down Holm adjustment, returned in the input order.

    Sorted ascending, adjusted_(i) = max_{j<=i} min(1, (m-j+1) * p_(j)),
    which is monotone nondecreasing along the sorted sequence.
    """
    for p in pvals:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-values must be in [0, 1], got {p}")
    m = len(pvals)
    order = sorted(range(m), key=lambda i: pvals[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (m - rank) * pvals[idx]))
        adjusted[idx] = running
    return adjusted


def chi_square_2x2(a: int, b: int, c: int, d: int) -> StatsResult:
    """Pearson chi-square on a 2x2 table, df=1, no continuity correction."""
    for v in (a, b, c, d):
        if v < 0:
            raise ValueError(f"counts must be >= 0, got {(a, b, c, d)}")
    row1, row2 = a + b, c + d
    col1, col2 = a + c, b + d
    if min(row1, row2, col1, col2) == 0:
        raise DegenerateSampleError(f"table has a zero margin: {(a, b, c, d)}")
    n = row1 + row2
    stat = n * (a * d - b * c) ** 2 / (row1 * row2 * col1 * col2)
    return StatsResult(
        method="chi_square_2x2",
        statistic=stat,
        df=1.0,
        p_value=chi2_sf(stat, 1.0),
        n=n,
        extra={"table": [[a, b], [c, d]]},
    )
