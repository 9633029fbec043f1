"""Batch session runner: scenario -> engine -> policy, collecting logs.

A session is an ordered list of trials driven by one policy profile. The
runner owns the information barrier between world and policy: each tick the
policy receives the subject pose plus the positions of currently visible
pedestrians only, and returns the next control input, which the runner
records for byte-exact replay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents import PolicyParams, policy_for_profile, PROFILE_FIELD_LOSS, PROFILES
from .engine import Event, EngineConfig, TrialEngine, PHASE_ENDED
from .errors import InvalidParameterError
from .geom import derive_seed
from .scenario import (
    FieldLoss,
    SubjectParams,
    TrialSpec,
    generate_pws_session,
    generate_session,
)

SCHEMA_VERSION = "pedtrial.session.v1"

# Group-level preferred walking speeds used for synthetic subjects.
PROFILE_PWS = {"nv": 0.98, "hh-left": 0.9, "hh-right": 0.9}

InputRecord = tuple[int, float, float, float, float, str | None]


@dataclass
class TrialLog:
    """Everything one trial produced: spec, events, pose trace, inputs."""

    trial: TrialSpec
    events: list[Event]
    trace: list[tuple]
    inputs: list[InputRecord]
    pedestrian_count: int


@dataclass
class SessionLog:
    schema_version: str
    profile: str
    scenario_kind: str  # "main" or "pws"
    subject: SubjectParams
    seed: int
    dt: float
    trials: list[TrialLog] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def field_loss(self) -> FieldLoss:
        return self.subject.field_loss


def subject_for_profile(profile: str, pws: float | None = None) -> SubjectParams:
    if profile not in PROFILES:
        raise InvalidParameterError(f"unknown profile {profile!r}")
    return SubjectParams(
        pws=pws if pws is not None else PROFILE_PWS[profile],
        field_loss=PROFILE_FIELD_LOSS[profile],
    )


def run_trial(
    trial: TrialSpec,
    subject: SubjectParams,
    policy,
    config: EngineConfig | None = None,
    record_trace: bool = True,
    record_inputs: bool = True,
) -> TrialLog:
    """Run one trial to completion under a policy.

    ``policy.step(t, pose, visible)`` is called once per tick with the
    visible-pedestrian view; its input is applied on the following engine
    step, mirroring how a live client's input lands on the next tick.
    """
    config = config or EngineConfig()
    engine = TrialEngine(trial, subject, config, record_trace=record_trace)
    inputs: list[InputRecord] = []

    while engine.phase != PHASE_ENDED:
        inp = policy.step(engine.t, engine.pose, engine.visible_pedestrians())
        engine.step(inp)
        if record_inputs:
            inputs.append(
                (engine.tick, inp.steer_rate, inp.speed_target,
                 inp.head_yaw_target, inp.head_pitch_target, inp.detect)
            )

    return TrialLog(
        trial=trial,
        events=engine.events,
        trace=engine.trace,
        inputs=inputs,
        pedestrian_count=len(engine._px),
    )


def run_session(
    profile: str,
    seed: int,
    scenario_kind: str = "main",
    subject: SubjectParams | None = None,
    config: EngineConfig | None = None,
    policy_params: PolicyParams | None = None,
    record_trace: bool = True,
    record_inputs: bool = True,
    pws_trials: int = 12,
    trials: list[TrialSpec] | None = None,
) -> SessionLog:
    """Run a full synthetic session for a named profile, deterministically.

    ``trials`` overrides the generated schedule (used for scenario files
    with explicit trial blocks).
    """
    config = config or EngineConfig()
    subject = subject or subject_for_profile(profile)
    if trials is not None:
        pass
    elif scenario_kind == "main":
        trials = generate_session(subject, seed)
    elif scenario_kind == "pws":
        trials = generate_pws_session(subject, seed, trials=pws_trials)
    else:
        raise InvalidParameterError(f"unknown scenario kind {scenario_kind!r}")

    log = SessionLog(
        schema_version=SCHEMA_VERSION,
        profile=profile,
        scenario_kind=scenario_kind,
        subject=subject,
        seed=seed,
        dt=config.dt,
    )
    for trial in trials:
        policy = policy_for_profile(
            profile, subject, config.dt,
            seed=derive_seed(seed, 0x90110, trial.trial_id),
            params=policy_params,
        )
        log.trials.append(
            run_trial(
                trial, subject, policy, config,
                record_trace=record_trace, record_inputs=record_inputs,
            )
        )
    return log


def replay_trial(
    trial: TrialSpec,
    subject: SubjectParams,
    inputs: list[InputRecord],
    config: EngineConfig | None = None,
    record_trace: bool = True,
) -> TrialLog:
    """Re-run a trial from a recorded input stream.

    Inputs are keyed by the tick they produced; missing ticks hold the last
    values (with a zeroed detect edge). Determinism of the engine makes the
    replayed event log identical to the original.
    """
    from .engine import SubjectInput

    config = config or EngineConfig()
    engine = TrialEngine(trial, subject, config, record_trace=record_trace)
    by_tick = {rec[0]: rec for rec in inputs}
    last = SubjectInput()
    max_tick = max(by_tick) if by_tick else 0
    while engine.phase != PHASE_ENDED and engine.tick < max_tick + 1:
        rec = by_tick.get(engine.tick + 1)
        if rec is not None:
            last = SubjectInput(
                steer_rate=rec[1], speed_target=rec[2],
                head_yaw_target=rec[3], head_pitch_target=rec[4], detect=rec[5],
            )
        else:
            last = last._replace(detect=None)
        engine.step(last)
        last = last._replace(detect=None)
    if engine.phase != PHASE_ENDED:
        engine._end_trial("input_stream_exhausted")
    return TrialLog(
        trial=trial,
        events=engine.events,
        trace=engine.trace,
        inputs=list(inputs),
        pedestrian_count=len(engine._px),
    )
