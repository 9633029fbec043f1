"""Fixed-timestep world simulation for one trial.

The world frame equals the path frame: origin at trial start, +Y along the
nominal walking path, +X to the subject's right. Time is ``t = tick * dt``
exactly (recomputed from the tick counter every step, so no accumulation
drift). All dynamics are first-order with rate limits; pedestrians are pure
constant-velocity movers.

Trial lifecycle: the subject starts at the origin in ``pre_trigger`` phase;
crossing the start-trigger distance spawns every pedestrian (colliding and
distractors are placed relative to the spawn-tick pose, which anchors the
designed time-to-collision) and starts the reaction-time clock. The trial
ends at the end-trigger crossing, or a fixed delay after the subject passes
the collision point, whichever comes first.

A collision is a strict overlap of the subject's and a pedestrian's
shoulder discs. The collision event for an overlap episode is emitted at
the deepest approach: the engine watches the center distance inside the
episode and fires on the first tick the distance starts growing again (or
at trial end if it never does), so the event time lands within two ticks of
the true minimum-distance time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import EngineStateError, RejectedInputError
from .geom import normalize_deg
from .scenario import (
    DISTRACTOR_HORIZON_TAIL,
    FieldLoss,
    PedestrianRole,
    SubjectParams,
    TrialSpec,
    place_course,
    place_distractors,
)

# Event kinds, in the order they can occur within a trial.
EV_TRIAL_START = "trial_start"
EV_SPAWN = "pedestrians_spawned"
EV_DETECT = "detect_press"
EV_COLLISION = "collision"
EV_END_TRIGGER = "end_trigger"
EV_TRIAL_END = "trial_end"

PHASE_PRE_TRIGGER = "pre_trigger"
PHASE_ACTIVE = "active"
PHASE_ENDED = "ended"

# Response classes assigned to a detect press.
RESP_HIT_CORRECT = "hit_correct"
RESP_HIT_WRONG_SIDE = "hit_wrong_side"
RESP_FALSE_ALARM = "false_alarm"
RESP_POST_COLLISION = "post_collision"

SIDE_LEFT = "left"
SIDE_RIGHT = "right"

# Inclusive angular boundaries (FoV edge, hemifield meridian) get a tiny
# guard so the position->angle round trip cannot flip the decision by one
# ulp for a target sitting exactly on the boundary.
ANGLE_EPS = 1e-9


@dataclass(frozen=True)
class EngineConfig:
    """Engine rate limits and lifecycle constants; all configurable."""

    dt: float = 1.0 / 72.0
    max_steer_rate: float = 120.0  # deg/s applied to body heading
    head_yaw_slew: float = 300.0  # deg/s toward the yaw target
    head_pitch_slew: float = 300.0  # deg/s toward the pitch target
    speed_slew: float = 1.5  # m/s^2 toward the speed target
    max_speed: float = 2.5  # m/s
    post_pass_end_delay: float = 2.0  # s after collision-point passage
    state_divisor: int = 2  # service: one state frame every n ticks
    eye_height: float = 1.6  # constant z, metadata only (2D dynamics)


class SubjectInput(NamedTuple):
    """One tick of subject control; the surface shared by policies and UI.

    ``steer_rate`` and ``speed_target`` are clamped to the engine limits;
    head targets are chased at the slew rates. ``detect`` carries an
    edge-triggered side press ("left"/"right") or None.
    """

    steer_rate: float = 0.0
    speed_target: float = 0.0
    head_yaw_target: float = 0.0
    head_pitch_target: float = 0.0
    detect: str | None = None


class Event(NamedTuple):
    """Timestamped trial event. ``seq`` breaks ties within one tick."""

    t: float
    tick: int
    seq: int
    kind: str
    payload: dict


@dataclass
class SubjectPose:
    """Subject kinematic state; angles in degrees, normalized (-180, 180]."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0  # body heading from +Y, positive right
    speed: float = 0.0
    head_yaw: float = 0.0  # relative to body heading
    head_pitch: float = 0.0
    head_roll: float = 0.0


@dataclass
class PedestrianState:
    x: float
    y: float
    vx: float
    vy: float
    role: PedestrianRole
    spawned: bool


@dataclass
class WorldState:
    """Snapshot of the engine state (for frames, tests, and inspection)."""

    t: float
    tick: int
    phase: str
    subject: SubjectPose
    pedestrians: list[PedestrianState] = field(default_factory=list)


def check_collision(subject_pos, ped_pos, r_s: float, r_p: float) -> bool:
    """Strict shoulder-disc overlap; tangency does not count."""
    return math.hypot(subject_pos[0] - ped_pos[0], subject_pos[1] - ped_pos[1]) < r_s + r_p


def visible(subject: SubjectPose, ped_pos, params: SubjectParams) -> bool:
    """Field-of-view plus hemifield test against the gaze direction.

    Gaze is the head direction (body heading + head yaw); eye movement is
    not modeled separately. A pedestrian at signed gaze-relative bearing a
    is seen when |a| <= fov_half_angle and a falls in the seeing hemifield
    (left hemianopes keep a >= 0, right hemianopes a <= 0; the residual
    field is bounded by the vertical meridian).
    """
    alpha = _gaze_bearing(
        subject.x, subject.y, subject.heading + subject.head_yaw, ped_pos[0], ped_pos[1]
    )
    return _alpha_visible(alpha, params)


def _gaze_bearing(sx: float, sy: float, gaze_deg: float, px: float, py: float) -> float:
    ux = px - sx
    uy = py - sy
    r = math.radians(gaze_deg)
    gx = math.sin(r)
    gy = math.cos(r)
    return normalize_deg(-math.degrees(math.atan2(gx * uy - gy * ux, gx * ux + gy * uy)))


def _alpha_visible(alpha: float, params: SubjectParams) -> bool:
    if abs(alpha) > params.fov_half_angle + ANGLE_EPS:
        return False
    loss = params.field_loss.value
    if loss == "left_hemianopia":
        return alpha >= -ANGLE_EPS
    if loss == "right_hemianopia":
        return alpha <= ANGLE_EPS
    return True


def _toward(current: float, target: float, max_delta: float) -> float:
    d = target - current
    if d > max_delta:
        return current + max_delta
    if d < -max_delta:
        return current - max_delta
    return target


class TrialEngine:
    """One trial's deterministic simulation.

    Construction emits the ``trial_start`` event; each ``step`` advances one
    fixed timestep and returns the events it emitted. Identical
    ``(trial, subject, config, input stream)`` yield identical event logs
    and pose traces.
    """

    def __init__(
        self,
        trial: TrialSpec,
        subject: SubjectParams,
        config: EngineConfig | None = None,
        record_trace: bool = True,
    ):
        self.trial = trial
        self.subject_params = subject
        self.config = config or EngineConfig()
        self.record_trace = record_trace

        self.tick = 0
        self.t = 0.0
        self.phase = PHASE_PRE_TRIGGER
        self.pose = SubjectPose()

        # Pedestrian arrays; filled at spawn. Parallel lists keep the per-
        # tick loop allocation-free.
        self._px: list[float] = []
        self._py: list[float] = []
        self._vx: list[float] = []
        self._vy: list[float] = []
        self._roles: list[PedestrianRole] = []
        self.colliding_id: int | None = None
        self.spawned = False
        self.spawn_tick: int | None = None
        self.spawn_t: float | None = None
        self.collision_point_y: float | None = None

        # Overlap-episode tracking, one slot per pedestrian.
        self._overlap: list[bool] = []
        self._min_d: list[float] = []
        self._collided: list[bool] = []
        self.collision_emitted = False

        # Visibility reduces to one interval of gaze-relative bearings.
        fov = subject.fov_half_angle
        self._alpha_lo = -fov - ANGLE_EPS
        self._alpha_hi = fov + ANGLE_EPS
        if subject.field_loss is not FieldLoss.NONE:
            if subject.field_loss is FieldLoss.LEFT_HEMIANOPIA:
                self._alpha_lo = -ANGLE_EPS
            else:
                self._alpha_hi = ANGLE_EPS

        self._pass_tick: int | None = None
        self.first_press: Event | None = None

        self._seq = 0
        self.events: list[Event] = []
        self.trace: list[tuple] = []

        self._emit(EV_TRIAL_START, {"trial_id": trial.trial_id})
        if self.record_trace:
            self._trace_row()

    # ------------------------------------------------------------------
    # event / trace plumbing

    def _emit(self, kind: str, payload: dict) -> Event:
        ev = Event(self.t, self.tick, self._seq, kind, payload)
        self._seq += 1
        self.events.append(ev)
        return ev

    def _trace_row(self):
        p = self.pose
        row = [self.tick, self.t, p.x, p.y, p.heading, p.head_yaw, p.head_pitch,
               p.head_roll, p.speed]
        if self.spawned:
            px, py = self._px, self._py
            for i in range(len(px)):
                row.append(px[i])
                row.append(py[i])
        self.trace.append(tuple(row))

    # ------------------------------------------------------------------
    # queries

    @property
    def progress(self) -> float:
        """Along-path progress: projection onto the +Y path axis."""
        return self.pose.y

    def visible_indices(self) -> list[int]:
        """Indices of spawned pedestrians visible under the field mask."""
        if not self.spawned:
            return []
        p = self.pose
        r = math.radians(p.heading + p.head_yaw)
        gx = math.sin(r)
        gy = math.cos(r)
        lo, hi = self._alpha_lo, self._alpha_hi
        sx, sy = p.x, p.y
        atan2 = math.atan2
        out = []
        px, py = self._px, self._py
        for i in range(len(px)):
            ux = px[i] - sx
            uy = py[i] - sy
            # right-positive gaze-relative bearing, in degrees
            alpha = -57.29577951308232 * atan2(gx * uy - gy * ux, gx * ux + gy * uy)
            if lo <= alpha <= hi:
                out.append(i)
        return out

    def visible_pedestrians(self) -> list[tuple[int, float, float]]:
        """(index, x, y) of each visible pedestrian; the policy's view."""
        if not self.spawned:
            return []
        p = self.pose
        r = math.radians(p.heading + p.head_yaw)
        gx = math.sin(r)
        gy = math.cos(r)
        lo, hi = self._alpha_lo, self._alpha_hi
        sx, sy = p.x, p.y
        atan2 = math.atan2
        out = []
        px, py = self._px, self._py
        for i in range(len(px)):
            x = px[i]
            y = py[i]
            ux = x - sx
            uy = y - sy
            alpha = -57.29577951308232 * atan2(gx * uy - gy * ux, gx * ux + gy * uy)
            if lo <= alpha <= hi:
                out.append((i, x, y))
        return out

    def pedestrian_positions(self) -> list[tuple[float, float]]:
        return list(zip(self._px, self._py))

    def world_state(self) -> WorldState:
        peds = [
            PedestrianState(
                x=self._px[i], y=self._py[i], vx=self._vx[i], vy=self._vy[i],
                role=self._roles[i], spawned=self.spawned,
            )
            for i in range(len(self._px))
        ]
        return WorldState(
            t=self.t, tick=self.tick, phase=self.phase,
            subject=SubjectPose(**vars(self.pose)), pedestrians=peds,
        )

    # ------------------------------------------------------------------
    # dynamics

    def step(self, inp: SubjectInput) -> list[Event]:
        """Advance one fixed timestep; returns the events emitted."""
        if self.phase == PHASE_ENDED:
            raise EngineStateError("step() called on an ended trial")
        if not (
            math.isfinite(inp.steer_rate)
            and math.isfinite(inp.speed_target)
            and math.isfinite(inp.head_yaw_target)
            and math.isfinite(inp.head_pitch_target)
        ):
            raise RejectedInputError(f"non-finite subject input: {inp}")

        cfg = self.config
        dt = cfg.dt
        events_before = len(self.events)

        self.tick += 1
        self.t = self.tick * dt

        # Subject integration: rate-limited first-order chases, then
        # translation with the updated heading and speed.
        p = self.pose
        steer = min(max(inp.steer_rate, -cfg.max_steer_rate), cfg.max_steer_rate)
        p.heading = normalize_deg(p.heading + steer * dt)
        speed_target = min(max(inp.speed_target, 0.0), cfg.max_speed)
        p.speed = _toward(p.speed, speed_target, cfg.speed_slew * dt)
        p.head_yaw = normalize_deg(
            _toward(p.head_yaw, inp.head_yaw_target, cfg.head_yaw_slew * dt)
        )
        p.head_pitch = normalize_deg(
            _toward(p.head_pitch, inp.head_pitch_target, cfg.head_pitch_slew * dt)
        )
        r = math.radians(p.heading)
        p.x += p.speed * math.sin(r) * dt
        p.y += p.speed * math.cos(r) * dt

        # Pedestrians advance exactly once per tick, only while spawned.
        if self.spawned:
            px, py, vx, vy = self._px, self._py, self._vx, self._vy
            for i in range(len(px)):
                px[i] += vx[i] * dt
                py[i] += vy[i] * dt

        if self.phase == PHASE_PRE_TRIGGER and p.y >= self.trial.start_trigger_distance:
            self._spawn()

        if self.phase == PHASE_ACTIVE:
            self._scan_collisions()
            if inp.detect is not None:
                self._register_press(inp.detect)
            self._check_end()
        elif inp.detect is not None and self.phase == PHASE_PRE_TRIGGER:
            # Nothing has appeared yet; a press here can only be spurious.
            self._classify_press(inp.detect, RESP_FALSE_ALARM)

        if self.record_trace:
            self._trace_row()
        return self.events[events_before:]

    def _spawn(self):
        trial = self.trial
        subject = self.subject_params
        p = self.pose
        self.spawned = True
        self.spawn_tick = self.tick
        self.spawn_t = self.t
        self.phase = PHASE_ACTIVE

        # Placement in the spawn frame, then a rigid transform by the
        # spawn-tick pose. For a compliant walker the spawn heading is the
        # path direction, so the frames coincide.
        h = math.radians(p.heading)
        hx, hy = math.sin(h), math.cos(h)  # +Y of spawn frame
        rx, ry = hy, -hx  # +X of spawn frame (subject's right)

        inits = []
        if trial.course is not None:
            inits.append(place_course(trial.course, subject.pws))
        remaining = max(trial.end_trigger_distance - p.y, 0.1)
        inits.extend(
            place_distractors(
                trial.distractor_count,
                trial.rng_seed,
                ((0.0, 0.0), (0.0, remaining)),
                subject.pws,
                shoulder_radius=subject.shoulder_radius,
                horizon=remaining / subject.pws + DISTRACTOR_HORIZON_TAIL,
            )
        )
        for init in inits:
            lx, ly = init.initial_position
            wx = p.x + lx * rx + ly * hx
            wy = p.y + lx * ry + ly * hy
            lvx, lvy = init.velocity
            self._px.append(wx)
            self._py.append(wy)
            self._vx.append(lvx * rx + lvy * hx)
            self._vy.append(lvx * ry + lvy * hy)
            self._roles.append(init.role)
            self._overlap.append(False)
            self._min_d.append(math.inf)
            self._collided.append(False)
        if trial.course is not None:
            self.colliding_id = 0
            d = subject.pws * trial.course.ttc_design
            self.collision_point_y = p.y + d * hy
        self._emit(
            EV_SPAWN,
            {
                "count": len(self._px),
                "colliding_id": self.colliding_id,
                "spawn_x": p.x,
                "spawn_y": p.y,
                "spawn_heading": p.heading,
            },
        )

    def _scan_collisions(self):
        # Both radii are shoulder radii; the subject and every pedestrian
        # share the configured size.
        threshold = 2.0 * self.subject_params.shoulder_radius
        sx, sy = self.pose.x, self.pose.y
        px, py = self._px, self._py
        for i in range(len(px)):
            if self._collided[i]:
                continue
            d = math.hypot(px[i] - sx, py[i] - sy)
            if self._overlap[i]:
                if d <= self._min_d[i]:
                    self._min_d[i] = d
                else:
                    self._emit_collision(i)
            elif d < threshold:
                self._overlap[i] = True
                self._min_d[i] = d

    def _emit_collision(self, i: int):
        self._collided[i] = True
        self._overlap[i] = False
        self.collision_emitted = True
        self._emit(EV_COLLISION, {"pedestrian_id": i, "min_distance": self._min_d[i]})

    def classify_detection(self, side: str) -> str:
        """Response class a press of ``side`` earns in the current state.

        Null trials make every press a false alarm; presses after the
        collision event count as post-collision; otherwise correctness is
        judged against the path line (x = 0) at press time, x >= 0 being
        the right side by the sign convention.
        """
        if self.colliding_id is None:
            return RESP_FALSE_ALARM
        if self.collision_emitted:
            return RESP_POST_COLLISION
        ped_x = self._px[self.colliding_id]
        correct_side = SIDE_RIGHT if ped_x >= 0.0 else SIDE_LEFT
        return RESP_HIT_CORRECT if side == correct_side else RESP_HIT_WRONG_SIDE

    def _register_press(self, side: str):
        self._classify_press(side, self.classify_detection(side))

    def _classify_press(self, side: str, cls: str):
        payload: dict = {"side": side, "response_class": cls}
        if cls in (RESP_HIT_CORRECT, RESP_HIT_WRONG_SIDE) and self.spawn_t is not None:
            payload["rt"] = self.t - self.spawn_t
        ev = self._emit(EV_DETECT, payload)
        if self.first_press is None:
            self.first_press = ev

    def _check_end(self):
        if self.pose.y >= self.trial.end_trigger_distance:
            self._emit(EV_END_TRIGGER, {"progress": self.pose.y})
            self._end_trial("end_trigger")
            return
        if self.collision_point_y is not None and self.pose.y > self.collision_point_y:
            if self._pass_tick is None:
                self._pass_tick = self.tick
            elif (self.tick - self._pass_tick) * self.config.dt >= self.config.post_pass_end_delay:
                self._end_trial("post_pass_timeout")

    def _end_trial(self, reason: str):
        # Flush any overlap episode still deepening at trial end.
        for i in range(len(self._px)):
            if self._overlap[i] and not self._collided[i]:
                self._emit_collision(i)
        self.phase = PHASE_ENDED
        self._emit(EV_TRIAL_END, {"reason": reason})

