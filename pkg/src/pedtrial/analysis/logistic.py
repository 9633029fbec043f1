"""Fixed-effects logistic regression via iteratively reweighted least
squares, with step-halving so the log-likelihood never decreases."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParameterError, SeparationError
from .special import normal_sf
from .stats import StatsResult

MAX_ITER = 100
TOL = 1e-10
SEPARATION_BETA = 500.0
# Every observation this deep on its correct side means the likelihood has
# no interior maximum (complete separation) and IRLS is running off to
# infinity.
SEPARATION_MARGIN = 15.0


def _design(X, add_intercept: bool, standardize: bool, feature_names):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    if feature_names is None:
        feature_names = [f"x{j + 1}" for j in range(p)]
    if len(feature_names) != p:
        raise InvalidParameterError("feature_names length does not match design columns")
    scales = {}
    if standardize and p:
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        for j in range(p):
            if sd[j] == 0.0:
                raise InvalidParameterError(
                    f"column {feature_names[j]!r} is constant; cannot standardize"
                )
        X = (X - mu) / sd
        scales = {feature_names[j]: (float(mu[j]), float(sd[j])) for j in range(p)}
    names = list(feature_names)
    if add_intercept:
        X = np.column_stack([np.ones(n), X])
        names = ["intercept"] + names
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise InvalidParameterError("design matrix is rank deficient (collinear columns)")
    return X, names, scales


def _bernoulli_loglik(y, eta):
    # log p = -log(1 + e^-eta) for y=1, -log(1 + e^eta) for y=0
    return float(-np.sum(np.logaddexp(0.0, np.where(y > 0.5, -eta, eta))))


def logistic_irls(
    X,
    y,
    feature_names=None,
    add_intercept: bool = True,
    standardize: bool = True,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
) -> StatsResult:
    """Maximum-likelihood logistic fit.

    Predictors are z-scored before fitting (so coefficients are
    standardized betas) unless ``standardize=False``. Convergence is
    max |delta beta| < tol; diverging coefficients raise SeparationError.
    The per-iteration log-likelihood trace lands in ``extra["loglik_trace"]``
    and is non-decreasing by construction.
    """
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise InvalidParameterError("y must be binary (0/1)")
    Xd, names, scales = _design(X, add_intercept, standardize, feature_names)
    n, p = Xd.shape
    if n <= p:
        raise InvalidParameterError(f"need more observations ({n}) than parameters ({p})")

    beta = np.zeros(p)
    eta = Xd @ beta
    ll = _bernoulli_loglik(y, eta)
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        w = np.maximum(w, 1e-12)
        z = eta + (y - mu) / w
        wx = Xd * w[:, None]
        try:
            new_beta = np.linalg.solve(Xd.T @ wx, Xd.T @ (w * z))
        except np.linalg.LinAlgError as exc:
            raise SeparationError(f"weighted normal equations singular: {exc}")

        # Step-halving keeps the likelihood monotone.
        step = new_beta - beta
        scale = 1.0
        for _half in range(30):
            cand = beta + scale * step
            cand_ll = _bernoulli_loglik(y, Xd @ cand)
            if cand_ll >= ll - 1e-12:
                break
            scale *= 0.5
        delta = float(np.max(np.abs(scale * step)))
        beta = beta + scale * step
        eta = Xd @ beta
        ll = _bernoulli_loglik(y, eta)
        trace.append(ll)
        if float(np.max(np.abs(beta))) > SEPARATION_BETA or (
            float(np.min(eta * (2.0 * y - 1.0))) > SEPARATION_MARGIN
        ):
            raise SeparationError(
                "coefficients diverged; outcome classes appear perfectly separated"
            )
        if delta < tol:
            converged = True
            break

    coefficients = {name: float(b) for name, b in zip(names, beta)}
    mu = 1.0 / (1.0 + np.exp(-eta))
    w = np.maximum(mu * (1.0 - mu), 1e-12)
    cov = np.linalg.inv(Xd.T @ (Xd * w[:, None]))
    se = {name: float(math.sqrt(max(cov[j, j], 0.0))) for j, name in enumerate(names)}
    wald_p = {
        name: 2.0 * normal_sf(abs(coefficients[name]) / se[name]) if se[name] > 0 else 1.0
        for name in names
    }
    return StatsResult(
        method="logistic_irls",
        coefficients=coefficients,
        loglik=ll,
        aic=2.0 * p - 2.0 * ll,
        n_params=p,
        n=n,
        extra={
            "converged": converged,
            "loglik_trace": trace,
            "scales": scales,
            "feature_names": names,
            "se": se,
            "wald_p": wald_p,
        },
    )
