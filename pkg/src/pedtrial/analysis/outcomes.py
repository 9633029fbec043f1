"""Per-trial outcome records derived from session logs.

Outcomes apply the reporting conventions used throughout the analysis:
bearing angles and head rotations are side-standardized (mirrored for
right-sided field loss) so that negative always means the blind side, the
reaction time is the time from pedestrian appearance to the button press,
and head-rotation means are split at the press into a search window and an
avoidance window. Trials without a press keep the whole active phase as
their search window.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..engine import (
    EV_COLLISION,
    EV_DETECT,
    EV_END_TRIGGER,
    EV_SPAWN,
    EV_TRIAL_END,
    RESP_HIT_CORRECT,
    RESP_HIT_WRONG_SIDE,
)
from ..errors import InsufficientDataError, ParseError
from ..scenario import FieldLoss, standardize_side
from ..session import SessionLog, TrialLog

RESP_MISS = "miss"

KIND_NULL = "null"

# Trace column indices (after the engine's tick column).
_COL_TICK = 0
_COL_HEADING = 4
_COL_YAW = 5
_COL_PITCH = 6
_COL_SPEED = 8


@dataclass
class TrialOutcome:
    trial_id: int
    group: str  # "NV" or "HH"
    kind: str  # "approaching", "overtaken", "null"
    beta_deg: float | None  # raw designed bearing (None on null trials)
    beta_std: float | None  # side-standardized bearing
    side: str | None  # blind/seeing (HH) or left/right (NV)
    detected: bool
    rt: float | None
    response_class: str
    collided: bool
    mean_yaw_before: float | None
    mean_yaw_after: float | None
    mean_pitch_before: float | None
    mean_pitch_after: float | None
    trial_mean_speed: float | None
    subject_id: str = ""


def _window_means(trace, start_tick, end_tick, mirror: float):
    """Mean path-relative yaw and pitch over [start_tick, end_tick)."""
    yaw_sum = 0.0
    pitch_sum = 0.0
    n = 0
    for row in trace:
        tick = row[_COL_TICK]
        if start_tick <= tick < end_tick:
            yaw_sum += row[_COL_HEADING] + row[_COL_YAW]
            pitch_sum += row[_COL_PITCH]
            n += 1
    if n == 0:
        return None, None
    return mirror * yaw_sum / n, pitch_sum / n


def derive_trial_outcome(
    tl: TrialLog, field_loss: FieldLoss, subject_id: str = ""
) -> TrialOutcome:
    trial = tl.trial
    spawn_ev = None
    end_ev = None
    first_press = None
    collided = False
    for ev in tl.events:
        if ev.kind == EV_SPAWN and spawn_ev is None:
            spawn_ev = ev
        elif ev.kind == EV_DETECT and first_press is None:
            first_press = ev
        elif ev.kind == EV_COLLISION:
            collided = True
        elif ev.kind == EV_TRIAL_END:
            end_ev = ev
    if spawn_ev is None:
        raise ParseError(f"trial {trial.trial_id}: no spawn event in log")
    if end_ev is None:
        raise ParseError(f"trial {trial.trial_id}: no trial_end event in log")

    if trial.course is None:
        kind = KIND_NULL
        beta = None
        beta_std = None
        side = None
    else:
        kind = trial.course.kind.value
        beta = trial.course.beta_deg
        beta_std = standardize_side(beta, field_loss)
        if field_loss is FieldLoss.NONE:
            side = "left" if beta_std < 0 else "right"
        else:
            side = "blind" if beta_std < 0 else "seeing"

    response_class = RESP_MISS if first_press is None else first_press.payload["response_class"]
    detected = response_class in (RESP_HIT_CORRECT, RESP_HIT_WRONG_SIDE)
    rt = first_press.payload.get("rt") if (first_press is not None and detected) else None

    # Right-sided field loss mirrors rotations so negative = blind side.
    mirror = -1.0 if field_loss is FieldLoss.RIGHT_HEMIANOPIA else 1.0
    split_tick = first_press.tick if first_press is not None else end_ev.tick + 1
    yaw_before, pitch_before = _window_means(tl.trace, spawn_ev.tick, split_tick, mirror)
    if first_press is not None:
        yaw_after, pitch_after = _window_means(
            tl.trace, first_press.tick, end_ev.tick + 1, mirror
        )
    else:
        yaw_after, pitch_after = None, None

    speed_sum = 0.0
    speed_n = 0
    for row in tl.trace:
        if spawn_ev.tick <= row[_COL_TICK] <= end_ev.tick:
            speed_sum += row[_COL_SPEED]
            speed_n += 1
    group = "NV" if field_loss is FieldLoss.NONE else "HH"
    return TrialOutcome(
        trial_id=trial.trial_id,
        group=group,
        kind=kind,
        beta_deg=beta,
        beta_std=beta_std,
        side=side,
        detected=detected,
        rt=rt,
        response_class=response_class,
        collided=collided,
        mean_yaw_before=yaw_before,
        mean_yaw_after=yaw_after,
        mean_pitch_before=pitch_before,
        mean_pitch_after=pitch_after,
        trial_mean_speed=speed_sum / speed_n if speed_n else None,
        subject_id=subject_id,
    )


def derive_outcomes(session: SessionLog, subject_id: str = "") -> list[TrialOutcome]:
    """Outcome records for every trial of one session."""
    sid = subject_id or f"{session.profile}-{session.seed:x}"
    return [
        derive_trial_outcome(tl, session.subject.field_loss, sid) for tl in session.trials
    ]


def pws_estimate(sessions) -> float:
    """Mean walking speed over completed measurement trials.

    Speed per trial is the actual distance covered between the two trigger
    crossings divided by the elapsed time between them, averaged across all
    trials of all provided sessions.
    """
    if isinstance(sessions, SessionLog):
        sessions = [sessions]
    speeds = []
    for session in sessions:
        for tl in session.trials:
            spawn_ev = None
            for ev in tl.events:
                if ev.kind == EV_SPAWN:
                    spawn_ev = ev
                elif ev.kind == EV_END_TRIGGER and spawn_ev is not None:
                    distance = ev.payload["progress"] - spawn_ev.payload["spawn_y"]
                    elapsed = ev.t - spawn_ev.t
                    if elapsed > 0:
                        speeds.append(distance / elapsed)
                    break
    if not speeds:
        raise InsufficientDataError("no completed trigger-to-trigger trials in the logs")
    return sum(speeds) / len(speeds)


def rates(outcomes, by=("group", "kind", "beta_std")) -> list[dict]:
    """Detection/collision proportions over target trials, grouped by keys.

    Null trials carry no target, so they contribute no rows here; empty
    cells simply do not appear (rates over n=0 are undefined).
    """
    cells: dict[tuple, list[TrialOutcome]] = {}
    for o in outcomes:
        if o.kind == KIND_NULL:
            continue
        key = tuple(getattr(o, k) for k in by)
        cells.setdefault(key, []).append(o)
    rows = []
    for key in sorted(cells, key=lambda k: tuple(str(x) for x in k)):
        group = cells[key]
        n = len(group)
        detected = sum(1 for o in group if o.detected)
        collided = sum(1 for o in group if o.collided)
        row = dict(zip(by, key))
        row.update(
            n=n,
            detected=detected,
            detection_rate=detected / n,
            collisions=collided,
            collision_rate=collided / n,
        )
        rows.append(row)
    return rows


def false_alarm_rate(outcomes) -> dict:
    """Share of null trials answered with a press."""
    nulls = [o for o in outcomes if o.kind == KIND_NULL]
    alarms = sum(1 for o in nulls if o.response_class != RESP_MISS)
    return {
        "null_trials": len(nulls),
        "false_alarms": alarms,
        "rate": alarms / len(nulls) if nulls else None,
    }
