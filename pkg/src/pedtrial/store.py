"""Durable session formats: manifest, event log, pose trace, inputs.

One session maps to one directory:

* ``manifest``      JSON: schema version, subject, seed, trial list + digest
* ``events.jsonl``  line-delimited events, append-only, header line first
* ``trace.csv``     one row per tick, header comment + column header
* ``inputs.csv``    applied control inputs per tick (for replay)
* ``outcomes.csv``  derived per-trial outcomes (written by the analyzer)

Text is UTF-8 throughout. Floats are serialized with ``repr``, which is
round-trip exact for binary64, so read(write(x)) == x field-for-field.
Event files are append-only: a crashed session stays readable up to the
last complete line, and lenient readers can recover everything before a
corrupt byte offset.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict

from .engine import EV_SPAWN, Event
from .errors import IntegrityError, SchemaVersionError, StoreError
from .scenario import (
    CollisionCourse,
    CourseKind,
    FieldLoss,
    SubjectParams,
    TrialSpec,
)
from .session import SessionLog, TrialLog, SCHEMA_VERSION

MANIFEST_NAME = "manifest"
EVENTS_NAME = "events.jsonl"
TRACE_NAME = "trace.csv"
INPUTS_NAME = "inputs.csv"
OUTCOMES_NAME = "outcomes.csv"

TRACE_BASE_COLUMNS = [
    "trial_id", "tick", "t", "x", "y", "heading",
    "head_yaw", "head_pitch", "head_roll", "speed",
]
INPUT_COLUMNS = [
    "trial_id", "tick", "steer_rate", "speed_target",
    "head_yaw_target", "head_pitch_target", "detect",
]


def _fmt(value) -> str:
    """Round-trip-exact cell formatting."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def trials_digest(trials: list[TrialSpec]) -> str:
    """SHA-256 over the canonical JSON encoding of the trial list."""
    blob = json.dumps([_trial_to_dict(t) for t in trials], sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _course_to_dict(course: CollisionCourse | None):
    if course is None:
        return None
    return {
        "kind": course.kind.value,
        "beta_deg": course.beta_deg,
        "ttc_design": course.ttc_design,
        "overtaken_init_distance": course.overtaken_init_distance,
        "allow_nonstandard_beta": course.allow_nonstandard_beta,
    }


def _course_from_dict(d) -> CollisionCourse | None:
    if d is None:
        return None
    return CollisionCourse(
        kind=CourseKind(d["kind"]),
        beta_deg=d["beta_deg"],
        ttc_design=d["ttc_design"],
        overtaken_init_distance=d["overtaken_init_distance"],
        allow_nonstandard_beta=d.get("allow_nonstandard_beta", False),
    )


def _trial_to_dict(t: TrialSpec) -> dict:
    return {
        "trial_id": t.trial_id,
        "course": _course_to_dict(t.course),
        "rng_seed": t.rng_seed,
        "distractor_count": t.distractor_count,
        "start_trigger_distance": t.start_trigger_distance,
        "end_trigger_distance": t.end_trigger_distance,
    }


def _trial_from_dict(d: dict) -> TrialSpec:
    return TrialSpec(
        trial_id=d["trial_id"],
        course=_course_from_dict(d["course"]),
        rng_seed=d["rng_seed"],
        distractor_count=d["distractor_count"],
        start_trigger_distance=d["start_trigger_distance"],
        end_trigger_distance=d["end_trigger_distance"],
    )


_MANIFEST_KEYS = {
    "schema_version", "profile", "scenario_kind", "subject", "seed", "dt",
    "policy", "trials", "trials_digest", "timestamps",
}


def manifest_dict(log: SessionLog, policy: str | None = None) -> dict:
    subject = asdict(log.subject)
    subject["field_loss"] = log.subject.field_loss.value
    trials = [_trial_to_dict(t.trial) for t in log.trials]
    out = {
        "schema_version": log.schema_version,
        "profile": log.profile,
        "scenario_kind": log.scenario_kind,
        "subject": subject,
        "seed": log.seed,
        "dt": log.dt,
        "policy": policy if policy is not None else log.profile,
        "trials": trials,
        "trials_digest": trials_digest([t.trial for t in log.trials]),
        "timestamps": log.extra.get("timestamps", {"created": None, "completed": None}),
    }
    # Unknown fields read from older/newer files ride along unchanged.
    for key, value in log.extra.items():
        if key not in out:
            out[key] = value
    return out


def write_session(log: SessionLog, directory: str) -> None:
    """Write a complete session directory (manifest, events, trace, inputs)."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest_dict(log), fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(directory, EVENTS_NAME), "w", encoding="utf-8") as fh:
        header = {"schema_version": log.schema_version, "seed": log.seed, "kind": "header"}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for tl in log.trials:
            for ev in tl.events:
                rec = {
                    "trial_id": tl.trial.trial_id,
                    "t": ev.t,
                    "tick": ev.tick,
                    "seq": ev.seq,
                    "kind": ev.kind,
                    "payload": ev.payload,
                }
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    max_peds = max((tl.pedestrian_count for tl in log.trials), default=0)
    columns = list(TRACE_BASE_COLUMNS)
    for i in range(max_peds):
        columns.append(f"ped{i}_x")
        columns.append(f"ped{i}_y")
    with open(os.path.join(directory, TRACE_NAME), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema_version={log.schema_version} seed={log.seed}\n")
        fh.write(",".join(columns) + "\n")
        width = len(columns)
        for tl in log.trials:
            tid = tl.trial.trial_id
            for row in tl.trace:
                cells = [str(tid)]
                cells.extend(_fmt(v) for v in row)
                cells.extend([""] * (width - len(cells)))
                fh.write(",".join(cells) + "\n")

    with open(os.path.join(directory, INPUTS_NAME), "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema_version={log.schema_version} seed={log.seed}\n")
        fh.write(",".join(INPUT_COLUMNS) + "\n")
        for tl in log.trials:
            tid = tl.trial.trial_id
            for rec in tl.inputs:
                cells = [str(tid)] + [_fmt(v) for v in rec]
                fh.write(",".join(cells) + "\n")


def _check_version(version: str, where: str) -> None:
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{where}: schema version {version!r} is not supported "
            f"(this build reads {SCHEMA_VERSION!r})"
        )


def read_events(path: str, strict: bool = True):
    """Read an events.jsonl file.

    Returns ``(header, records)``. In strict mode a malformed line raises
    IntegrityError carrying the byte offset of the first bad byte; in
    lenient mode parsing stops there and the records read so far are
    returned (the error is attached as the third tuple element).
    """
    header = None
    records: list[dict] = []
    error: IntegrityError | None = None
    offset = 0
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh):
            stripped = raw.strip()
            if stripped:
                try:
                    rec = json.loads(stripped.decode("utf-8"))
                    if not isinstance(rec, dict):
                        raise ValueError("record is not an object")
                except (ValueError, UnicodeDecodeError) as exc:
                    error = IntegrityError(
                        f"{path}: corrupt record on line {lineno + 1}: {exc}",
                        byte_offset=offset,
                    )
                    break
                if lineno == 0:
                    if rec.get("kind") != "header":
                        raise IntegrityError(f"{path}: missing header line", byte_offset=0)
                    header = rec
                else:
                    records.append(rec)
            offset += len(raw)
    if header is None and error is None:
        raise IntegrityError(f"{path}: empty event file", byte_offset=0)
    if strict and error is not None:
        raise error
    if not strict:
        return header, records, error
    return header, records


def _read_commented_csv(path: str):
    """Read a CSV with a leading ``# key=value`` comment line."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise IntegrityError(f"{path}: missing schema comment line", byte_offset=0)
        meta = {}
        for part in first[1:].split():
            if "=" in part:
                k, _, v = part.partition("=")
                meta[k] = v
        header_line = fh.readline().rstrip("\n")
        if not header_line:
            raise IntegrityError(f"{path}: missing column header", byte_offset=len(first))
        columns = header_line.split(",")
        rows = []
        for line in fh:
            line = line.rstrip("\n")
            if line:
                rows.append(line.split(","))
    return meta, columns, rows


def read_session(directory: str) -> SessionLog:
    """Load a session directory back into a SessionLog."""
    mpath = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(mpath, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise StoreError(f"not a session directory (no manifest): {directory}")
    except ValueError as exc:
        raise IntegrityError(f"{mpath}: invalid JSON: {exc}")

    _check_version(manifest.get("schema_version", "<missing>"), mpath)
    subject_d = dict(manifest["subject"])
    subject = SubjectParams(
        pws=subject_d["pws"],
        shoulder_radius=subject_d["shoulder_radius"],
        fov_half_angle=subject_d["fov_half_angle"],
        field_loss=FieldLoss(subject_d["field_loss"]),
    )
    trials = [_trial_from_dict(d) for d in manifest["trials"]]
    digest = manifest.get("trials_digest")
    if digest is not None and digest != trials_digest(trials):
        raise IntegrityError(f"{mpath}: trial list does not match its digest")

    header, event_records = read_events(os.path.join(directory, EVENTS_NAME))
    _check_version(header.get("schema_version", "<missing>"), EVENTS_NAME)

    events_by_trial: dict[int, list[Event]] = {t.trial_id: [] for t in trials}
    ped_counts: dict[int, int] = {t.trial_id: 0 for t in trials}
    for rec in event_records:
        ev = Event(rec["t"], rec["tick"], rec["seq"], rec["kind"], rec["payload"])
        events_by_trial.setdefault(rec["trial_id"], []).append(ev)
        if ev.kind == EV_SPAWN:
            ped_counts[rec["trial_id"]] = ev.payload.get("count", 0)

    meta, _, trace_rows = _read_commented_csv(os.path.join(directory, TRACE_NAME))
    _check_version(meta.get("schema_version", "<missing>"), TRACE_NAME)
    trace_by_trial: dict[int, list[tuple]] = {t.trial_id: [] for t in trials}
    for cells in trace_rows:
        tid = int(cells[0])
        values = [int(cells[1]), float(cells[2])]
        for cell in cells[3:]:
            if cell == "":
                break
            values.append(float(cell))
        trace_by_trial.setdefault(tid, []).append(tuple(values))

    meta, _, input_rows = _read_commented_csv(os.path.join(directory, INPUTS_NAME))
    _check_version(meta.get("schema_version", "<missing>"), INPUTS_NAME)
    inputs_by_trial: dict[int, list] = {t.trial_id: [] for t in trials}
    for cells in input_rows:
        tid = int(cells[0])
        inputs_by_trial.setdefault(tid, []).append(
            (
                int(cells[1]), float(cells[2]), float(cells[3]),
                float(cells[4]), float(cells[5]), cells[6] or None,
            )
        )

    log = SessionLog(
        schema_version=manifest["schema_version"],
        profile=manifest["profile"],
        scenario_kind=manifest.get("scenario_kind", "main"),
        subject=subject,
        seed=manifest["seed"],
        dt=manifest["dt"],
        extra={k: v for k, v in manifest.items() if k not in _MANIFEST_KEYS},
    )
    if "timestamps" in manifest:
        log.extra["timestamps"] = manifest["timestamps"]
    for t in trials:
        log.trials.append(
            TrialLog(
                trial=t,
                events=events_by_trial.get(t.trial_id, []),
                trace=trace_by_trial.get(t.trial_id, []),
                inputs=inputs_by_trial.get(t.trial_id, []),
                pedestrian_count=ped_counts.get(t.trial_id, 0),
            )
        )
    return log


def write_table(path: str, columns: list[str], rows: list[list], schema_version: str,
                seed: int) -> None:
    """Write a generic commented CSV table (used for outcomes and rates)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema_version={schema_version} seed={seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_table(path: str):
    """Read a commented CSV table; returns (meta, columns, raw string rows)."""
    return _read_commented_csv(path)


def session_dir_name(profile: str, seed: int, index: int) -> str:
    return f"{profile}-{seed:016x}-{index:03d}"
