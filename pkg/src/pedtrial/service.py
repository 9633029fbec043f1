"""Authoritative real-time session service speaking JSON text frames.

One WebSocket connection drives one subject session; the server owns the
engine, applies client inputs on the following tick, and holds the last
input when frames stop arriving. State frames for the subject stream carry
only the pedestrians visible under the subject's field mask, so a client
cannot render what its subject could not see; a separate spectator stream
(``/spectate/<session-id>``) is unmasked for the experimenter.

Two stepping modes exist: ``live`` paces the engine at the configured
fixed timestep in wall time (state frames every ``state_divisor`` ticks
regardless of input cadence); ``lockstep`` advances exactly one tick per
input frame, which makes scripted replays byte-deterministic and is what
the replay tooling and tests use.

Protocol (all frames carry ``v``: protocol version, and ``type``):

  client -> server:
    hello        {config: {profile, seed, scenario, mode, pws?}}
    start_trial  {}
    input        {tick, steer_rate?, speed_target?, head_yaw_target?,
                  head_pitch_target?}    (unknown fields are rejected)
    detect       {side: "left"|"right"}
    abort        {}

  server -> client:
    session_ack  {session_id, seed, trial_count, config echo, dt}
    trial_config {index, total, trial_id, kind, beta_deg, triggers}
    state        {tick, t, phase, subject{...}, pedestrians[{id, x, y}]}
    event        {trial_id, t, tick, seq, kind, payload}
    trial_summary / session_summary
    error        {code, message}
"""

from __future__ import annotations

import asyncio
import json
import math
import os
from dataclasses import dataclass, field

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .engine import EngineConfig, PHASE_ENDED, SubjectInput, TrialEngine
from .scenario import FieldLoss, SubjectParams, generate_pws_session, generate_session
from .session import (
    SCHEMA_VERSION,
    InputRecord,
    SessionLog,
    TrialLog,
    subject_for_profile,
)
from .store import write_session

PROTOCOL_VERSION = 1

INPUT_FIELDS = {"v", "type", "tick", "steer_rate", "speed_target",
                "head_yaw_target", "head_pitch_target"}
NUMERIC_INPUT_FIELDS = ("steer_rate", "speed_target", "head_yaw_target",
                        "head_pitch_target")


@dataclass
class ServiceConfig:
    engine: EngineConfig = field(default_factory=EngineConfig)
    store_dir: str | None = None
    max_sessions: int = 64
    # How long a dropped subject connection may resume its session before
    # the logs are flushed and the session id expires.
    resume_grace: float = 120.0


def _frame(type_: str, **fields) -> str:
    fields["v"] = PROTOCOL_VERSION
    fields["type"] = type_
    return json.dumps(fields, sort_keys=True)


def _error_frame(code: str, message: str) -> str:
    return _frame("error", code=code, message=message)


class SessionState:
    """One live subject session: schedule, engine, input latching, logs."""

    def __init__(self, session_id: str, config: dict, service: "TrialService"):
        self.session_id = session_id
        self.service = service
        self.mode = config.get("mode", "live")
        self.profile = config.get("profile", "nv")
        self.seed = int(config.get("seed", 0))
        self.scenario_kind = config.get("scenario", "main")
        pws = config.get("pws")
        if self.profile == "live":
            loss = FieldLoss(config.get("field_loss", "none"))
            self.subject = SubjectParams(
                pws=float(pws) if pws is not None else 1.0, field_loss=loss
            )
        else:
            self.subject = subject_for_profile(self.profile, pws)
        if self.scenario_kind == "pws":
            self.trials = generate_pws_session(self.subject, self.seed)
        else:
            self.trials = generate_session(self.subject, self.seed)
        self.trial_index = 0
        self.engine: TrialEngine | None = None
        self.last_input = SubjectInput()
        self.pending_detect: str | None = None
        self.trial_inputs: list[InputRecord] = []
        self.completed: list[TrialLog] = []
        self.spectators: set = set()
        self.closed = False
        self.detached = False
        self.done = False

    @property
    def engine_config(self) -> EngineConfig:
        return self.service.config.engine

    def start_next_trial(self) -> TrialEngine:
        trial = self.trials[self.trial_index]
        self.engine = TrialEngine(trial, self.subject, self.engine_config)
        self.last_input = SubjectInput(speed_target=self.last_input.speed_target)
        self.pending_detect = None
        self.trial_inputs = []
        return self.engine

    def tick_input(self) -> SubjectInput:
        inp = self.last_input
        if self.pending_detect is not None:
            inp = inp._replace(detect=self.pending_detect)
            self.pending_detect = None
        else:
            inp = inp._replace(detect=None)
        return inp

    def record_input(self, inp: SubjectInput) -> None:
        self.trial_inputs.append(
            (self.engine.tick, inp.steer_rate, inp.speed_target,
             inp.head_yaw_target, inp.head_pitch_target, inp.detect)
        )

    def finish_trial(self) -> TrialLog:
        engine = self.engine
        tl = TrialLog(
            trial=engine.trial,
            events=engine.events,
            trace=engine.trace,
            inputs=list(self.trial_inputs),
            pedestrian_count=len(engine._px),
        )
        self.completed.append(tl)
        self.engine = None
        self.trial_index += 1
        return tl

    def to_session_log(self) -> SessionLog:
        log = SessionLog(
            schema_version=SCHEMA_VERSION,
            profile=self.profile,
            scenario_kind=self.scenario_kind,
            subject=self.subject,
            seed=self.seed,
            dt=self.engine_config.dt,
            trials=list(self.completed),
        )
        log.extra["timestamps"] = {"created": None, "completed": None}
        log.extra["rt_includes_network_latency"] = self.mode == "live"
        return log


def _subject_state_frame(session: SessionState) -> str:
    eng = session.engine
    p = eng.pose
    peds = [
        {"id": i, "x": x, "y": y} for i, x, y in eng.visible_pedestrians()
    ]
    return _frame(
        "state",
        tick=eng.tick,
        t=eng.t,
        phase=eng.phase,
        subject={
            "x": p.x, "y": p.y, "heading": p.heading, "speed": p.speed,
            "head_yaw": p.head_yaw, "head_pitch": p.head_pitch,
            "head_roll": p.head_roll,
        },
        pedestrians=peds,
        trial_index=session.trial_index,
        trial_count=len(session.trials),
    )


def _spectator_state_frame(session: SessionState) -> str:
    eng = session.engine
    p = eng.pose
    peds = []
    if eng.spawned:
        visible = set(eng.visible_indices())
        for i in range(len(eng._px)):
            peds.append(
                {
                    "id": i, "x": eng._px[i], "y": eng._py[i],
                    "role": eng._roles[i].value, "visible": i in visible,
                    "colliding": i == eng.colliding_id,
                }
            )
    return _frame(
        "state",
        spectator=True,
        tick=eng.tick,
        t=eng.t,
        phase=eng.phase,
        subject={
            "x": p.x, "y": p.y, "heading": p.heading, "speed": p.speed,
            "head_yaw": p.head_yaw, "head_pitch": p.head_pitch,
            "head_roll": p.head_roll,
        },
        pedestrians=peds,
        trial_index=session.trial_index,
        trial_count=len(session.trials),
    )


def _event_frame(trial_id: int, ev) -> str:
    return _frame(
        "event", trial_id=trial_id, t=ev.t, tick=ev.tick, seq=ev.seq,
        kind=ev.kind, payload=ev.payload,
    )


def _trial_summary_frame(session: SessionState, tl: TrialLog) -> str:
    presses = [e for e in tl.events if e.kind == "detect_press"]
    collisions = [e for e in tl.events if e.kind == "collision"]
    first = presses[0] if presses else None
    return _frame(
        "trial_summary",
        trial_id=tl.trial.trial_id,
        index=session.trial_index - 1,
        total=len(session.trials),
        kind=tl.trial.course.kind.value if tl.trial.course else "null",
        beta_deg=tl.trial.course.beta_deg if tl.trial.course else None,
        detected=bool(first and first.payload["response_class"].startswith("hit")),
        response_class=first.payload["response_class"] if first else "miss",
        rt=first.payload.get("rt") if first else None,
        collided=bool(collisions),
        events=len(tl.events),
    )


def _session_summary_frame(session: SessionState) -> str:
    detects = 0
    collisions = 0
    for tl in session.completed:
        presses = [e for e in tl.events if e.kind == "detect_press"]
        if presses and presses[0].payload["response_class"].startswith("hit"):
            detects += 1
        if any(e.kind == "collision" for e in tl.events):
            collisions += 1
    return _frame(
        "session_summary",
        session_id=session.session_id,
        trials=len(session.completed),
        detected=detects,
        collided=collisions,
        stored=session.service.config.store_dir is not None,
    )


class TrialService:
    """WebSocket endpoint hosting many isolated sessions."""

    def __init__(self, config: ServiceConfig | None = None):
        self.config = config or ServiceConfig()
        self.sessions: dict[str, SessionState] = {}
        self._counter = 0
        self._server = None

    # ------------------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await ws_serve(self._handler, host, port)
        return self._server.sockets[0].getsockname()[1]

    async def close(self):
        for session in list(self.sessions.values()):
            self._flush_session(session)
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    def _flush_session(self, session: SessionState):
        if session.closed:
            return
        session.closed = True
        self.sessions.pop(session.session_id, None)
        if self.config.store_dir and session.completed:
            out = os.path.join(
                self.config.store_dir,
                f"{session.session_id}",
            )
            write_session(session.to_session_log(), out)

    # ------------------------------------------------------------------

    async def _handler(self, ws):
        path = ws.request.path
        try:
            if path.startswith("/spectate/"):
                await self._spectate(ws, path.removeprefix("/spectate/"))
            elif path in ("/", "/session"):
                await self._subject(ws)
            else:
                await ws.send(_error_frame("bad_path", f"unknown path {path!r}"))
        except ConnectionClosed:
            pass

    async def _spectate(self, ws, session_id: str):
        session = self.sessions.get(session_id)
        if session is None:
            await ws.send(_error_frame("no_such_session", session_id))
            return
        session.spectators.add(ws)
        try:
            await ws.send(_frame("spectate_ack", session_id=session_id))
            async for _message in ws:
                await ws.send(_error_frame("read_only", "spectator stream accepts no input"))
        finally:
            session.spectators.discard(ws)

    async def _broadcast_spectators(self, session: SessionState, frame: str):
        for spec in list(session.spectators):
            try:
                await spec.send(frame)
            except ConnectionClosed:
                session.spectators.discard(spec)

    async def _subject(self, ws):
        # --- handshake -------------------------------------------------
        try:
            raw = await ws.recv()
            msg = json.loads(raw)
        except (ValueError, TypeError):
            await ws.send(_error_frame("bad_frame", "hello must be a JSON object"))
            return
        if not isinstance(msg, dict) or msg.get("type") != "hello":
            await ws.send(_error_frame("expected_hello", "first frame must be hello"))
            return
        if msg.get("v") != PROTOCOL_VERSION:
            await ws.send(
                _error_frame("bad_version",
                             f"protocol v{msg.get('v')!r} not supported (want {PROTOCOL_VERSION})")
            )
            return
        config = msg.get("config") or {}
        resume_id = config.get("resume")
        if resume_id is not None:
            session = self.sessions.get(resume_id)
            if session is None or not session.detached:
                await ws.send(
                    _error_frame("not_resumable", f"session {resume_id!r} cannot be resumed")
                )
                return
            session.detached = False
        else:
            if len(self.sessions) >= self.config.max_sessions:
                await ws.send(_error_frame("busy", "session limit reached"))
                return
            try:
                self._counter += 1
                session_id = (
                    f"{config.get('profile', 'nv')}-"
                    f"{int(config.get('seed', 0)):x}-{self._counter:04d}"
                )
                session = SessionState(session_id, config, self)
            except Exception as exc:
                await ws.send(_error_frame("bad_config", str(exc)))
                return
            self.sessions[session_id] = session
        await ws.send(
            _frame(
                "session_ack",
                session_id=session.session_id,
                resumed=resume_id is not None,
                seed=session.seed,
                profile=session.profile,
                scenario=session.scenario_kind,
                mode=session.mode,
                dt=self.config.engine.dt,
                state_divisor=self.config.engine.state_divisor,
                trial_count=len(session.trials),
                trial_index=session.trial_index,
                subject={
                    "pws": session.subject.pws,
                    "shoulder_radius": session.subject.shoulder_radius,
                    "fov_half_angle": session.subject.fov_half_angle,
                    "field_loss": session.subject.field_loss.value,
                },
            )
        )
        if resume_id is not None and session.engine is not None:
            trial = session.engine.trial
            await ws.send(
                _frame(
                    "trial_config",
                    index=session.trial_index,
                    total=len(session.trials),
                    trial_id=trial.trial_id,
                    kind=trial.course.kind.value if trial.course else "null",
                    start_trigger_distance=trial.start_trigger_distance,
                    end_trigger_distance=trial.end_trigger_distance,
                )
            )
            await ws.send(_subject_state_frame(session))
        try:
            if session.mode == "lockstep":
                await self._run_lockstep(ws, session)
            else:
                await self._run_live(ws, session)
        finally:
            if session.done:
                self._flush_session(session)
            else:
                session.detached = True
                asyncio.get_running_loop().create_task(self._expire_detached(session))

    async def _expire_detached(self, session: SessionState):
        await asyncio.sleep(self.config.resume_grace)
        if session.detached and not session.closed:
            self._flush_session(session)

    # ------------------------------------------------------------------

    def _parse_input(self, session: SessionState, msg: dict) -> str | None:
        unknown = set(msg) - INPUT_FIELDS
        if unknown:
            return f"unknown input fields rejected: {sorted(unknown)}"
        values = {}
        for name in NUMERIC_INPUT_FIELDS:
            if name in msg:
                v = msg[name]
                if not isinstance(v, (int, float)) or not math.isfinite(v):
                    return f"non-finite or non-numeric {name}"
                values[name] = float(v)
        session.last_input = session.last_input._replace(**values)
        return None

    async def _step_once(self, ws, session: SessionState):
        """Advance one tick, forwarding events and cadenced state frames.

        Live mode states go out every ``state_divisor`` ticks; lockstep
        acknowledges every tick so a scripted client can flow-control.
        """
        engine = session.engine
        inp = session.tick_input()
        events = engine.step(inp)
        session.record_input(inp)
        for ev in events:
            frame = _event_frame(engine.trial.trial_id, ev)
            await ws.send(frame)
            await self._broadcast_spectators(session, frame)
        if (
            session.mode == "lockstep"
            or engine.tick % self.config.engine.state_divisor == 0
            or events
        ):
            await ws.send(_subject_state_frame(session))
            await self._broadcast_spectators(session, _spectator_state_frame(session))
        if engine.phase == PHASE_ENDED:
            tl = session.finish_trial()
            await ws.send(_trial_summary_frame(session, tl))
            if session.trial_index >= len(session.trials):
                session.done = True
                await ws.send(_session_summary_frame(session))

    async def _handle_control(self, ws, session: SessionState, msg: dict) -> bool:
        """Shared non-input messages; returns False when the session ends."""
        mtype = msg.get("type")
        if mtype == "detect":
            side = msg.get("side")
            if side not in ("left", "right"):
                await ws.send(_error_frame("bad_side", f"detect side {side!r}"))
                return True
            if session.engine is None:
                await ws.send(_error_frame("no_trial", "detect outside a trial ignored"))
                return True
            session.pending_detect = side
            return True
        if mtype == "start_trial":
            if session.engine is not None:
                await ws.send(_error_frame("trial_running", "trial already in progress"))
                return True
            if session.trial_index >= len(session.trials):
                await ws.send(_error_frame("session_done", "all trials completed"))
                session.done = True
                return False
            engine = session.start_next_trial()
            trial = engine.trial
            await ws.send(
                _frame(
                    "trial_config",
                    index=session.trial_index,
                    total=len(session.trials),
                    trial_id=trial.trial_id,
                    kind=trial.course.kind.value if trial.course else "null",
                    start_trigger_distance=trial.start_trigger_distance,
                    end_trigger_distance=trial.end_trigger_distance,
                )
            )
            return True
        if mtype == "abort":
            session.done = True
            return False
        if mtype == "hello":
            await ws.send(_error_frame("already_started", "duplicate hello"))
            return True
        await ws.send(_error_frame("bad_type", f"unknown message type {mtype!r}"))
        return True

    async def _run_lockstep(self, ws, session: SessionState):
        async for raw in ws:
            try:
                msg = json.loads(raw)
                if not isinstance(msg, dict):
                    raise ValueError("frame is not an object")
            except ValueError as exc:
                await ws.send(_error_frame("bad_frame", str(exc)))
                session.done = True
                return
            if msg.get("type") == "input":
                err = self._parse_input(session, msg)
                if err:
                    await ws.send(_error_frame("bad_input", err))
                    continue
                # Inputs outside a trial are dropped silently: a pipelined
                # client's in-flight input legitimately crosses the trial
                # summary, and answering it would desynchronize its reader.
                if session.engine is not None and session.engine.phase != PHASE_ENDED:
                    await self._step_once(ws, session)
            else:
                if not await self._handle_control(ws, session, msg):
                    return

    async def _run_live(self, ws, session: SessionState):
        loop = asyncio.get_running_loop()
        dt = self.config.engine.dt
        stop = asyncio.Event()

        async def reader():
            try:
                async for raw in ws:
                    try:
                        msg = json.loads(raw)
                        if not isinstance(msg, dict):
                            raise ValueError("frame is not an object")
                    except ValueError as exc:
                        await ws.send(_error_frame("bad_frame", str(exc)))
                        session.done = True
                        break
                    if msg.get("type") == "input":
                        err = self._parse_input(session, msg)
                        if err:
                            await ws.send(_error_frame("bad_input", err))
                    else:
                        if not await self._handle_control(ws, session, msg):
                            break
            except ConnectionClosed:
                pass
            finally:
                stop.set()

        reader_task = asyncio.create_task(reader())
        next_tick = loop.time() + dt
        try:
            while not stop.is_set():
                delay = next_tick - loop.time()
                if delay > 0:
                    try:
                        await asyncio.wait_for(stop.wait(), timeout=delay)
                        break
                    except asyncio.TimeoutError:
                        pass
                next_tick += dt
                if session.engine is not None and session.engine.phase != PHASE_ENDED:
                    await self._step_once(ws, session)
                if loop.time() - next_tick > 1.0:
                    next_tick = loop.time()  # fell far behind; resynchronize
        except ConnectionClosed:
            pass
        finally:
            reader_task.cancel()
            try:
                await reader_task
            except (asyncio.CancelledError, ConnectionClosed):
                pass


async def serve_forever(
    host: str, port: int, config: ServiceConfig | None = None
) -> None:
    service = TrialService(config)
    bound = await service.start(host, port)
    print(f"pedtrial service listening on ws://{host}:{bound}", flush=True)
    try:
        await asyncio.Future()
    finally:
        await service.close()
