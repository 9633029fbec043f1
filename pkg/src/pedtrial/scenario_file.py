"""Human-editable scenario description files.

A flat key/value format with sections and repeatable blocks, chosen over a
general-purpose config language so every parsed value keeps its line number
and validation can point at the offending line:

    schema = pedtrial.scenario.v1

    [subject]
    pws = 0.9
    field_loss = left_hemianopia

    [session]
    seed = 7
    profile = hh-left

    [[trial]]
    kind = approaching
    beta_deg = 20

Values are numbers, booleans, bare strings, or flat arrays like
``[20, 40]``. ``#`` starts a comment. ``[[trial]]`` blocks are optional; a
file without them describes a generated session (seeded schedule).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .agents import PROFILES, PolicyParams
from .engine import EngineConfig
from .errors import ParseError
from .scenario import (
    APPROACHING_BETAS,
    OVERTAKEN_BETAS,
    CollisionCourse,
    CourseKind,
    FieldLoss,
    SubjectParams,
    TrialSpec,
    place_overtaken,
)
from .geom import derive_seed

SCENARIO_SCHEMA = "pedtrial.scenario.v1"

_MAX_DT = 1.0 / 60.0 + 1e-12


@dataclass
class Violation:
    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"


@dataclass
class RawValue:
    value: object
    line: int


@dataclass
class ScenarioFile:
    """Parsed scenario description plus the line map for diagnostics."""

    schema: str
    subject: SubjectParams
    seed: int
    scenario_kind: str
    profile: str
    policy: PolicyParams | None
    engine: EngineConfig
    trials: list[TrialSpec] | None
    sections: dict = field(default_factory=dict)


def _parse_scalar(text: str, line: int):
    text = text.strip()
    if not text:
        raise ParseError("empty value", line)
    if text.startswith("[") :
        if not text.endswith("]"):
            raise ParseError("unterminated array", line)
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(part, line) for part in inner.split(",")]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text, 0)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    return text


def parse_scenario_text(text: str):
    """Parse into {section: {key: RawValue}} plus a list of trial blocks."""
    top: dict[str, dict[str, RawValue]] = {"": {}}
    trial_blocks: list[tuple[int, dict[str, RawValue]]] = []
    current: dict[str, RawValue] = top[""]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[["):
            if not line.endswith("]]"):
                raise ParseError("unterminated block header", lineno)
            name = line[2:-2].strip()
            if name != "trial":
                raise ParseError(f"unknown block type {name!r}", lineno)
            block: dict[str, RawValue] = {}
            trial_blocks.append((lineno, block))
            current = block
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            name = line[1:-1].strip()
            if not name:
                raise ParseError("empty section name", lineno)
            current = top.setdefault(name, {})
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ParseError("empty key", lineno)
        if key in current:
            raise ParseError(f"duplicate key {key!r}", lineno)
        current[key] = RawValue(_parse_scalar(value, lineno), lineno)
    return top, trial_blocks


def _take(section: dict, key: str, default=None):
    rv = section.get(key)
    return (rv.value, rv.line) if rv is not None else (default, None)


_FIELD_LOSS_VALUES = {f.value for f in FieldLoss}
_COURSE_KINDS = {k.value for k in CourseKind} | {"null"}


def validate_scenario_text(text: str):
    """Parse and check every invariant; returns (ScenarioFile|None, violations)."""
    violations: list[Violation] = []

    def bad(line, message):
        violations.append(Violation(line or 0, message))

    try:
        top, trial_blocks = parse_scenario_text(text)
    except ParseError as exc:
        return None, [Violation(exc.line or 0, str(exc).partition(": ")[2] or str(exc))]

    schema, line = _take(top.get("", {}), "schema")
    if schema is None:
        bad(1, "missing required top-level key 'schema'")
    elif schema != SCENARIO_SCHEMA:
        bad(line, f"unsupported schema {schema!r} (this build reads {SCENARIO_SCHEMA!r})")

    subj_sec = top.get("subject", {})
    pws, l_pws = _take(subj_sec, "pws", 0.9)
    shoulder, l_sh = _take(subj_sec, "shoulder_radius", 0.25)
    fov, l_fov = _take(subj_sec, "fov_half_angle", 45.0)
    loss_name, l_loss = _take(subj_sec, "field_loss", "none")
    if not isinstance(pws, (int, float)) or not pws > 0:
        bad(l_pws, f"subject.pws must be a positive number, got {pws!r}")
        pws = 0.9
    if not isinstance(shoulder, (int, float)) or not shoulder > 0:
        bad(l_sh, f"subject.shoulder_radius must be positive, got {shoulder!r}")
        shoulder = 0.25
    if not isinstance(fov, (int, float)) or not 0 < fov <= 90:
        bad(l_fov, f"subject.fov_half_angle must be in (0, 90], got {fov!r}")
        fov = 45.0
    if loss_name not in _FIELD_LOSS_VALUES:
        bad(l_loss, f"subject.field_loss must be one of {sorted(_FIELD_LOSS_VALUES)}, "
                    f"got {loss_name!r}")
        loss_name = "none"

    sess_sec = top.get("session", {})
    seed, l_seed = _take(sess_sec, "seed", 0)
    kind, l_kind = _take(sess_sec, "scenario", "main")
    profile, l_prof = _take(sess_sec, "profile", "nv")
    if not isinstance(seed, int):
        bad(l_seed, f"session.seed must be an integer, got {seed!r}")
        seed = 0
    if kind not in ("main", "pws"):
        bad(l_kind, f"session.scenario must be 'main' or 'pws', got {kind!r}")
        kind = "main"
    if profile not in PROFILES and profile != "live":
        bad(l_prof, f"session.profile must be one of {sorted(PROFILES)} or 'live', "
                    f"got {profile!r}")
        profile = "nv"

    eng_sec = top.get("engine", {})
    eng_kwargs = {}
    dt, l_dt = _take(eng_sec, "dt")
    if dt is not None:
        if not isinstance(dt, (int, float)) or not 0 < dt <= _MAX_DT:
            bad(l_dt, f"engine.dt must be a fixed step in (0, 1/60], got {dt!r}")
        else:
            eng_kwargs["dt"] = float(dt)
    for key in ("max_steer_rate", "head_yaw_slew", "head_pitch_slew", "speed_slew",
                "max_speed", "post_pass_end_delay", "eye_height"):
        val, l_val = _take(eng_sec, key)
        if val is not None:
            if not isinstance(val, (int, float)) or val <= 0:
                bad(l_val, f"engine.{key} must be a positive number, got {val!r}")
            else:
                eng_kwargs[key] = float(val)
    divisor, l_div = _take(eng_sec, "state_divisor")
    if divisor is not None:
        if not isinstance(divisor, int) or divisor < 1:
            bad(l_div, f"engine.state_divisor must be a positive integer, got {divisor!r}")
        else:
            eng_kwargs["state_divisor"] = divisor

    policy = None
    pol_sec = top.get("policy", {})
    if pol_sec:
        base = PROFILES.get(profile, PROFILES["nv"])
        kwargs = {k: getattr(base, k) for k in base.__dataclass_fields__}
        for key, rv in pol_sec.items():
            if key not in kwargs:
                bad(rv.line, f"unknown policy parameter {key!r}")
                continue
            if not isinstance(rv.value, (int, float)):
                bad(rv.line, f"policy.{key} must be a number, got {rv.value!r}")
                continue
            kwargs[key] = float(rv.value)
        if kwargs["scan_period"] <= 0:
            bad(_take(pol_sec, "scan_period")[1], "policy.scan_period must be positive")
        else:
            negatives = [
                k for k in ("scan_amplitude", "detect_min_visible", "detect_size_threshold",
                            "threat_miss_distance", "avoid_ttc_trigger", "avoid_lateral_offset")
                if kwargs[k] < 0
            ]
            for k in negatives:
                bad(_take(pol_sec, k)[1], f"policy.{k} must be >= 0")
            if not negatives:
                policy = PolicyParams(**kwargs)

    trials: list[TrialSpec] | None = None
    if trial_blocks:
        trials = []
        for index, (blk_line, blk) in enumerate(trial_blocks):
            t_kind, l_tkind = _take(blk, "kind")
            if t_kind not in _COURSE_KINDS:
                bad(l_tkind or blk_line,
                    f"trial.kind must be one of {sorted(_COURSE_KINDS)}, got {t_kind!r}")
                continue
            beta, l_beta = _take(blk, "beta_deg", 0.0)
            ttc, l_ttc = _take(blk, "ttc_design", 6.0)
            r_init, l_rinit = _take(blk, "overtaken_init_distance", 2.0)
            allow, _ = _take(blk, "allow_nonstandard_beta", False)
            n_dis, l_ndis = _take(blk, "distractor_count", 10)
            start_d, l_start = _take(blk, "start_trigger_distance", 3.0)
            end_d, l_end = _take(blk, "end_trigger_distance", 10.0)

            ok = True
            if not isinstance(ttc, (int, float)) or ttc <= 0:
                bad(l_ttc or blk_line, f"trial.ttc_design must be positive, got {ttc!r}")
                ok = False
            if not isinstance(n_dis, int) or n_dis < 0:
                bad(l_ndis or blk_line, f"trial.distractor_count must be >= 0, got {n_dis!r}")
                ok = False
            if not (
                isinstance(start_d, (int, float)) and isinstance(end_d, (int, float))
                and 0 < start_d < end_d
            ):
                bad(l_start or blk_line,
                    f"need 0 < start_trigger_distance < end_trigger_distance, "
                    f"got {start_d!r} / {end_d!r}")
                ok = False

            course = None
            if t_kind != "null":
                if not isinstance(beta, (int, float)):
                    bad(l_beta or blk_line, f"trial.beta_deg must be a number, got {beta!r}")
                    ok = False
                elif not allow:
                    allowed = APPROACHING_BETAS if t_kind == "approaching" else OVERTAKEN_BETAS
                    if abs(beta) not in allowed:
                        bad(l_beta or blk_line,
                            f"{t_kind} bearing |{beta}| violates the study restriction "
                            f"(allowed: ±{allowed}; set allow_nonstandard_beta to override)")
                        ok = False
                if t_kind == "overtaken":
                    if not isinstance(r_init, (int, float)) or r_init <= 0:
                        bad(l_rinit or blk_line,
                            f"trial.overtaken_init_distance must be positive, got {r_init!r}")
                        ok = False
                    elif ok:
                        try:
                            place_overtaken(pws, float(ttc), float(beta), float(r_init))
                        except Exception as exc:
                            bad(l_rinit or blk_line, f"overtaken geometry invalid: {exc}")
                            ok = False
                if ok and abs(beta) >= 90.0 and t_kind == "approaching":
                    bad(l_beta or blk_line,
                        f"approaching bearing |{beta}| >= 90 has no valid geometry")
                    ok = False
                if ok:
                    course = CollisionCourse(
                        kind=CourseKind(t_kind), beta_deg=float(beta), ttc_design=float(ttc),
                        overtaken_init_distance=float(r_init),
                        allow_nonstandard_beta=bool(allow),
                    )
            if ok:
                trials.append(
                    TrialSpec(
                        trial_id=index + 1,
                        course=course,
                        rng_seed=derive_seed(seed, index + 1),
                        distractor_count=n_dis,
                        start_trigger_distance=float(start_d),
                        end_trigger_distance=float(end_d),
                    )
                )

    if violations:
        return None, violations

    scenario = ScenarioFile(
        schema=schema,
        subject=SubjectParams(
            pws=float(pws), shoulder_radius=float(shoulder), fov_half_angle=float(fov),
            field_loss=FieldLoss(loss_name),
        ),
        seed=seed,
        scenario_kind=kind,
        profile=profile,
        policy=policy,
        engine=EngineConfig(**eng_kwargs),
        trials=trials,
        sections={k: {kk: vv.value for kk, vv in v.items()} for k, v in top.items()},
    )
    return scenario, []


def load_scenario(path: str) -> ScenarioFile:
    """Load and validate a scenario file; raises ParseError on violations."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    scenario, violations = validate_scenario_text(text)
    if violations:
        raise ParseError(
            "; ".join(str(v) for v in violations), violations[0].line or None
        )
    return scenario
