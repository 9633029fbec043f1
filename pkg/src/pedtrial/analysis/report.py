"""Session-set analysis: rate tables, group tests, stepwise models.

Mirrors the outcome analyses the platform is built to support: detection
and collision rates by group/kind/bearing, chi-square group comparisons,
forward-stepwise logistic models for detection and collision, a
random-intercept linear model on log reaction times, and head-rotation
bias tests. Model fits that are degenerate on a given data set (for
example, perfect detection everywhere) are reported as skipped rather than
crashing the report.
"""

from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np

from ..errors import DegenerateSampleError, InsufficientDataError, SeparationError
from .lmm import lmm_random_intercept
from .logistic import logistic_irls
from .outcomes import KIND_NULL, TrialOutcome, false_alarm_rate, rates
from .stats import StatsResult, chi_square_2x2, holm_bonferroni, one_sample_t
from .stepwise import lrt_stepwise

HEAD_METRICS = (
    ("yaw_before", "mean_yaw_before"),
    ("yaw_after", "mean_yaw_after"),
    ("pitch_before", "mean_pitch_before"),
    ("pitch_after", "mean_pitch_after"),
)


def stats_to_dict(res: StatsResult) -> dict:
    d = asdict(res)
    d["extra"] = {
        k: v for k, v in res.extra.items() if k not in ("loglik_trace", "scales")
    }
    return d


def head_bias(outcomes: list[TrialOutcome], by: str = "group") -> dict:
    """Group means of path-relative head rotation, tested against zero.

    Four tests per group (yaw/pitch x before/after detection), corrected
    together with Holm-Bonferroni. Negative yaw means scans toward the
    (standardized) blind side.
    """
    groups: dict[str, list[TrialOutcome]] = {}
    for o in outcomes:
        groups.setdefault(getattr(o, by), []).append(o)
    out: dict[str, dict] = {}
    for gname in sorted(groups):
        rows = groups[gname]
        gres: dict[str, dict] = {}
        pvals = []
        keys = []
        for label, attr in HEAD_METRICS:
            xs = [getattr(o, attr) for o in rows if getattr(o, attr) is not None]
            if len(xs) < 2:
                gres[label] = {"n": len(xs), "skipped": "insufficient data"}
                continue
            try:
                t = one_sample_t(xs, 0.0)
            except DegenerateSampleError:
                # A constant sample carries no evidence against the null
                # when it sits exactly on it (and full evidence otherwise).
                mean = xs[0]
                gres[label] = {
                    "n": len(xs), "mean": mean, "sd": 0.0, "t": None,
                    "df": float(len(xs) - 1),
                    "p": 1.0 if mean == 0.0 else 0.0,
                    "cohens_d": None, "degenerate": True,
                }
                pvals.append(gres[label]["p"])
                keys.append(label)
                continue
            gres[label] = {
                "n": t.n,
                "mean": t.extra["mean"],
                "sd": t.extra["sd"],
                "t": t.statistic,
                "df": t.df,
                "p": t.p_value,
                "cohens_d": t.effect_size,
            }
            pvals.append(t.p_value)
            keys.append(label)
        if pvals:
            for key, p_adj in zip(keys, holm_bonferroni(pvals)):
                gres[key]["p_holm"] = p_adj
        out[gname] = gres
    return out


def _model_rows(outcomes: list[TrialOutcome]):
    """Collision-trial rows with the shared predictor encoding."""
    rows = [o for o in outcomes if o.kind != KIND_NULL]
    group = np.array([1.0 if o.group == "HH" else 0.0 for o in rows])
    kind = np.array([1.0 if o.kind == "overtaken" else 0.0 for o in rows])
    beta = np.array([o.beta_std for o in rows])
    return rows, group, kind, beta


def _safe(fn):
    try:
        return {"ok": True, "value": fn()}
    except (SeparationError, DegenerateSampleError, InsufficientDataError,
            np.linalg.LinAlgError) as exc:
        return {"ok": False, "skipped": f"{type(exc).__name__}: {exc}"}


def _stepwise_dict(result) -> dict:
    return {
        "steps": [
            {
                "candidate": s.candidate,
                "chi2": s.chi2,
                "df": s.df,
                "p": s.p_value,
                "delta_aic": s.delta_aic,
                "retained": s.retained,
            }
            for s in result.steps
        ],
        "selected": result.selected,
        "final": stats_to_dict(result.final_fit),
    }


def detection_model(outcomes: list[TrialOutcome]) -> dict:
    rows, group, kind, beta = _model_rows(outcomes)
    y = np.array([1.0 if o.detected else 0.0 for o in rows])

    def fit(X, names):
        return logistic_irls(X, y, feature_names=names or None)

    candidates = [
        ("group_hh", group),
        ("ped_type_overtaken", kind),
        ("beta_std", beta),
        ("group_x_beta", group * beta),
    ]
    wrapped = _safe(lambda: _stepwise_dict(lrt_stepwise(fit, candidates)))
    wrapped["n"] = len(rows)
    return wrapped


def collision_model(outcomes: list[TrialOutcome]) -> dict:
    rows, group, kind, beta = _model_rows(outcomes)
    y = np.array([1.0 if o.collided else 0.0 for o in rows])

    def fit(X, names):
        return logistic_irls(X, y, feature_names=names or None)

    candidates = [
        ("group_hh", group),
        ("ped_type_overtaken", kind),
        ("beta_std", beta),
        ("group_x_beta", group * beta),
    ]
    wrapped = _safe(lambda: _stepwise_dict(lrt_stepwise(fit, candidates)))
    wrapped["n"] = len(rows)
    return wrapped


def rt_model(outcomes: list[TrialOutcome]) -> dict:
    """Log reaction-time mixed model over correct responses only."""
    rows = [
        o for o in outcomes
        if o.kind != KIND_NULL and o.response_class == "hit_correct" and o.rt and o.rt > 0
    ]
    if len(rows) < 8:
        return {"ok": False, "skipped": "too few correct responses", "n": len(rows)}
    y = np.log([o.rt for o in rows])
    subjects = [o.subject_id for o in rows]
    group = np.array([1.0 if o.group == "HH" else 0.0 for o in rows])
    kind = np.array([1.0 if o.kind == "overtaken" else 0.0 for o in rows])
    beta = np.array([o.beta_std for o in rows])

    def fit(X, names):
        return lmm_random_intercept(X, y, subjects, feature_names=names or None)

    candidates = [
        ("group_hh", group),
        ("ped_type_overtaken", kind),
        ("beta_std", beta),
    ]
    wrapped = _safe(lambda: _stepwise_dict(lrt_stepwise(fit, candidates)))
    wrapped["n"] = len(rows)
    wrapped["excluded"] = sum(
        1
        for o in outcomes
        if o.kind != KIND_NULL
        and o.response_class in ("hit_wrong_side", "false_alarm", "post_collision")
    )
    return wrapped


def miss_collision_tables(outcomes: list[TrialOutcome]) -> dict:
    """2x2 group comparisons of misses and collisions on target trials."""
    target = [o for o in outcomes if o.kind != KIND_NULL]
    hh = [o for o in target if o.group == "HH"]
    nv = [o for o in target if o.group == "NV"]
    out: dict = {
        "hh_trials": len(hh),
        "nv_trials": len(nv),
        "hh_misses": sum(1 for o in hh if not o.detected),
        "nv_misses": sum(1 for o in nv if not o.detected),
        "hh_collisions": sum(1 for o in hh if o.collided),
        "nv_collisions": sum(1 for o in nv if o.collided),
    }
    if hh and nv:
        misses = _safe(
            lambda: stats_to_dict(
                chi_square_2x2(
                    out["hh_misses"], len(hh) - out["hh_misses"],
                    out["nv_misses"], len(nv) - out["nv_misses"],
                )
            )
        )
        collisions = _safe(
            lambda: stats_to_dict(
                chi_square_2x2(
                    out["hh_collisions"], len(hh) - out["hh_collisions"],
                    out["nv_collisions"], len(nv) - out["nv_collisions"],
                )
            )
        )
        out["misses_chi2"] = misses
        out["collisions_chi2"] = collisions
    return out


def per_subject_table(outcomes: list[TrialOutcome]) -> list[dict]:
    """Per-subject aggregation; keeps the fixed-effects shortcut auditable."""
    cells: dict[str, list[TrialOutcome]] = {}
    for o in outcomes:
        cells.setdefault(o.subject_id, []).append(o)
    rows = []
    for sid in sorted(cells):
        rows_s = cells[sid]
        target = [o for o in rows_s if o.kind != KIND_NULL]
        nulls = [o for o in rows_s if o.kind == KIND_NULL]
        rts = [o.rt for o in target if o.rt is not None]
        rows.append(
            {
                "subject_id": sid,
                "group": rows_s[0].group,
                "target_trials": len(target),
                "detected": sum(1 for o in target if o.detected),
                "collided": sum(1 for o in target if o.collided),
                "false_alarms": sum(1 for o in nulls if o.response_class != "miss"),
                "median_rt": float(np.median(rts)) if rts else None,
            }
        )
    return rows


def analyze(outcomes: list[TrialOutcome]) -> dict:
    """Full report over a pooled outcome table."""
    classes: dict[str, int] = {}
    for o in outcomes:
        classes[o.response_class] = classes.get(o.response_class, 0) + 1
    return {
        "n_trials": len(outcomes),
        "response_classes": classes,
        "rates_by_condition": rates(outcomes, by=("group", "kind", "beta_std")),
        "rates_by_side": rates(outcomes, by=("group", "side")),
        "rates_by_group": rates(outcomes, by=("group",)),
        "false_alarms": false_alarm_rate(outcomes),
        "group_tables": miss_collision_tables(outcomes),
        "detection_model": detection_model(outcomes),
        "collision_model": collision_model(outcomes),
        "rt_model": rt_model(outcomes),
        "head_bias": head_bias(outcomes),
        "per_subject": per_subject_table(outcomes),
    }


def render_report(report: dict) -> str:
    """Human-readable summary of an analyze() report."""
    lines = []
    add = lines.append
    add(f"Trials analyzed: {report['n_trials']}")
    add("Response classes: " + ", ".join(
        f"{k}={v}" for k, v in sorted(report["response_classes"].items())
    ))
    fa = report["false_alarms"]
    if fa["null_trials"]:
        add(f"False alarms: {fa['false_alarms']}/{fa['null_trials']} null trials")
    add("")
    add("Rates by group/kind/bearing (standardized):")
    for row in report["rates_by_condition"]:
        add(
            f"  {row['group']:>2} {row['kind']:>11} beta={row['beta_std']:+.0f}: "
            f"detect {row['detection_rate']:6.1%} collide {row['collision_rate']:6.1%} "
            f"(n={row['n']})"
        )
    gt = report["group_tables"]
    if "misses_chi2" in gt:
        add("")
        for label, key in (("Misses", "misses_chi2"), ("Collisions", "collisions_chi2")):
            entry = gt[key]
            if entry["ok"]:
                v = entry["value"]
                add(
                    f"{label}: HH {gt['hh_' + label.lower()]}/{gt['hh_trials']} vs "
                    f"NV {gt['nv_' + label.lower()]}/{gt['nv_trials']}; "
                    f"chi2(1) = {v['statistic']:.2f}, p = {v['p_value']:.4g}"
                )
            else:
                add(f"{label}: {entry['skipped']}")
    for title, key in (
        ("Detection model (logistic, stepwise)", "detection_model"),
        ("Collision model (logistic, stepwise)", "collision_model"),
        ("log-RT model (random-intercept LMM, stepwise)", "rt_model"),
    ):
        add("")
        add(title + ":")
        entry = report[key]
        if not entry.get("ok"):
            add(f"  skipped: {entry.get('skipped')}")
            continue
        for step in entry["value"]["steps"]:
            flag = "retained" if step["retained"] else "removed"
            add(
                f"  + {step['candidate']:<22} chi2({step['df']}) = {step['chi2']:.2f}, "
                f"p = {step['p']:.4g}, dAIC = {step['delta_aic']:.2f} -> {flag}"
            )
        final = entry["value"]["final"]
        add(f"  selected: {entry['value']['selected'] or ['(intercept only)']}")
        if final["coefficients"]:
            for name, b in final["coefficients"].items():
                p = final["extra"].get("wald_p", {}).get(name)
                add(f"    std beta[{name}] = {b:+.3f}" + (f" (p = {p:.3g})" if p is not None else ""))
        if final.get("r2_marginal") is not None:
            add(
                f"    R2 marginal = {final['r2_marginal']:.3f}, "
                f"conditional = {final['r2_conditional']:.3f}"
            )
    add("")
    add("Head-rotation bias vs 0 (Holm-corrected):")
    for gname, metrics in report["head_bias"].items():
        for label, m in metrics.items():
            if "skipped" in m:
                add(f"  {gname} {label}: skipped ({m['skipped']})")
            elif m.get("degenerate"):
                add(
                    f"  {gname} {label:<12} mean = {m['mean']:+.2f} deg "
                    f"(constant sample), p = {m['p']:.3g}"
                )
            else:
                add(
                    f"  {gname} {label:<12} mean = {m['mean']:+.2f} deg, "
                    f"t({m['df']:.0f}) = {m['t']:.2f}, p = {m['p']:.3g}, "
                    f"p_holm = {m['p_holm']:.3g}, d = {m['cohens_d']:.2f}"
                )
    return "\n".join(lines) + "\n"
