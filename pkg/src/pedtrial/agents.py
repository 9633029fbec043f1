"""Synthetic subject policies that close the loop in batch simulation.

A policy sees only the pedestrians the visibility test admits this tick
(the session runner enforces that), scans the scene with a sinusoidal head
schedule, decides on a detect press from angular size, visibility dwell and
predicted miss distance, and after detecting swerves to pass the threat
with a configured lateral clearance.

Policies are deterministic state machines: per-trial criterion jitter
(dwell requirement, avoidance trigger) is drawn from the trial seed, so
identical seeds replay identically. The parameter defaults are tuned to
reproduce qualitative group differences only (hemianopes collide more,
chiefly with far-periphery blind-side overtaken pedestrians; everyone
responds faster to overtaken than approaching pedestrians), never any
human subject's numbers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple

from .engine import SIDE_LEFT, SIDE_RIGHT, SubjectInput, SubjectPose
from .errors import InvalidParameterError
from .geom import closest_approach, derive_seed
from .scenario import FieldLoss, SubjectParams

TWO_PI = 2.0 * math.pi

# Per-trial multiplicative jitter bands on the detection/avoidance criteria.
DWELL_JITTER = (0.7, 1.4)
TRIGGER_JITTER = (0.85, 1.15)

# Heading-control gains for the avoidance swerve and path recovery.
HEADING_GAIN = 6.0  # 1/s proportional steer toward the target heading
OFFSET_TO_HEADING = 90.0  # deg of lean per meter of lateral offset error
MAX_LEAN = 55.0  # deg, keeps forward progress during the swerve
RECOVER_GAIN = 40.0  # deg of lean per meter when re-centering on the path
RECOVER_MAX = 25.0

# Predicted approaches further out than this are not treated as threats;
# distractor clearance is only guaranteed within the trial horizon.
THREAT_HORIZON = 8.0


@dataclass(frozen=True)
class PolicyParams:
    """Tunable scanning/detection/avoidance parameters of one policy."""

    scan_amplitude: float  # deg
    scan_period: float  # s
    scan_bias: float  # deg; negative = toward the blind side
    detect_min_visible: float  # s of continuous visibility before a press
    detect_size_threshold: float  # deg of angular size (2*atan(r/d))
    threat_miss_distance: float  # m; press only if predicted approach is closer
    avoid_ttc_trigger: float  # s; start the swerve at this time-to-approach
    avoid_lateral_offset: float  # m of clearance from the threat's path line
    pitch_offset: float  # deg; constant head-pitch target

    def __post_init__(self):
        if self.scan_period <= 0.0:
            raise InvalidParameterError(f"scan_period must be positive, got {self.scan_period}")
        for name in (
            "scan_amplitude",
            "detect_min_visible",
            "detect_size_threshold",
            "threat_miss_distance",
            "avoid_ttc_trigger",
            "avoid_lateral_offset",
        ):
            if getattr(self, name) < 0.0:
                raise InvalidParameterError(f"{name} must be >= 0, got {getattr(self, name)}")


# Normal-vision subjects need modest scans: only +-60 deg targets start
# outside the headset field of view.
NV_PROFILE = PolicyParams(
    scan_amplitude=25.0,
    scan_period=2.5,
    scan_bias=0.0,
    detect_min_visible=0.25,
    detect_size_threshold=4.0,
    threat_miss_distance=0.6,
    avoid_ttc_trigger=1.0,
    avoid_lateral_offset=0.75,
    pitch_offset=2.0,
)

# Hemianopes compensate with wide scans biased a few degrees toward the
# blind side; the deepest sweep barely reaches a -60 deg blind-side target,
# which is what makes that condition fail most often.
HH_PROFILE = PolicyParams(
    scan_amplitude=59.0,
    scan_period=3.0,
    scan_bias=-3.0,
    detect_min_visible=0.25,
    detect_size_threshold=4.0,
    threat_miss_distance=0.6,
    avoid_ttc_trigger=1.0,
    avoid_lateral_offset=0.75,
    pitch_offset=2.0,
)

PROFILES: dict[str, PolicyParams] = {
    "nv": NV_PROFILE,
    "hh-left": HH_PROFILE,
    "hh-right": HH_PROFILE,
}

PROFILE_FIELD_LOSS: dict[str, FieldLoss] = {
    "nv": FieldLoss.NONE,
    "hh-left": FieldLoss.LEFT_HEMIANOPIA,
    "hh-right": FieldLoss.RIGHT_HEMIANOPIA,
}


class ThreatEstimate(NamedTuple):
    """What the policy currently believes about one visible pedestrian.

    ``predicted_ttc`` is the time until the shoulder discs first touch
    under constant velocities; when no contact is predicted it falls back
    to the closest-approach time.
    """

    pedestrian_id: int
    predicted_miss_distance: float
    predicted_ttc: float
    angular_size: float
    visible_dwell: float


def time_to_contact(rel_pos, rel_vel, contact_radius: float) -> float:
    """First future time two constant-velocity discs touch.

    Returns 0.0 when already overlapping, the closest-approach time when
    the paths pass without touching, and +inf when the pair is receding
    with no future contact.
    """
    px, py = rel_pos
    vx, vy = rel_vel
    c = px * px + py * py - contact_radius * contact_radius
    if c <= 0.0:
        return 0.0
    a = vx * vx + vy * vy
    if a < 1e-18:
        return math.inf
    b = px * vx + py * vy
    t_star = -b / a
    if t_star <= 0.0:
        return math.inf
    disc = b * b - a * c
    if disc <= 0.0:
        return t_star
    return (-b - math.sqrt(disc)) / a


@dataclass
class _Track:
    last_x: float
    last_y: float
    last_t: float
    vx: float = 0.0
    vy: float = 0.0
    dwell: float = 0.0


class SyntheticSubjectPolicy:
    """Scan / detect / avoid state machine for one trial.

    ``step`` receives the subject pose and the positions of currently
    visible pedestrians only; everything the policy knows about the scene
    is reconstructed from that stream (velocities by finite differences,
    which are exact for the linear pedestrians simulated here).
    """

    def __init__(
        self,
        params: PolicyParams,
        subject: SubjectParams,
        dt: float,
        seed: int = 0,
        jitter: bool = True,
    ):
        self.params = params
        self.subject = subject
        self.dt = dt
        rng = random.Random(derive_seed(seed, 0xA6E27))
        self.phase0 = rng.uniform(0.0, params.scan_period)
        if jitter:
            self.dwell_required = params.detect_min_visible * rng.uniform(*DWELL_JITTER)
            self.trigger_ttc = params.avoid_ttc_trigger * rng.uniform(*TRIGGER_JITTER)
        else:
            self.dwell_required = params.detect_min_visible
            self.trigger_ttc = params.avoid_ttc_trigger

        # Bias is expressed in the standardized convention (negative =
        # blind side); mirror it into world coordinates for right-sided
        # field loss.
        if subject.field_loss is FieldLoss.RIGHT_HEMIANOPIA:
            self.world_bias = -params.scan_bias
            self.tie_break_sign = -1.0  # seeing side = left
        else:
            self.world_bias = params.scan_bias
            self.tie_break_sign = 1.0  # seeing side (or NV preference) = right

        self._contact_radius = 2.0 * subject.shoulder_radius
        self.tracks: dict[int, _Track] = {}
        self.estimates: dict[int, ThreatEstimate] = {}
        self.committed_id: int | None = None
        self.pressed = False
        # Frozen linear model of the committed threat, refreshed while the
        # threat stays visible: absolute position/velocity plus sample time.
        self._threat: tuple[float, float, float, float, float] | None = None
        self._avoiding = False
        self._pass_sign = 0.0

    # ------------------------------------------------------------------

    def scan_target(self, t: float) -> float:
        p = self.params
        return self.world_bias + p.scan_amplitude * math.sin(
            TWO_PI * (t + self.phase0) / p.scan_period
        )

    def _update_tracks(self, t: float, pose: SubjectPose, visible: list) -> None:
        self.estimates = {}
        seen = set()
        r = math.radians(pose.heading)
        subj_vx = pose.speed * math.sin(r)
        subj_vy = pose.speed * math.cos(r)
        radius = self.subject.shoulder_radius
        contact2 = self._contact_radius * self._contact_radius
        tracks = self.tracks
        px, py = pose.x, pose.y
        for ped_id, x, y in visible:
            seen.add(ped_id)
            tr = tracks.get(ped_id)
            if tr is None or t - tr.last_t > 1.5 * self.dt:
                # New sighting (or continuity broken): restart the track.
                tracks[ped_id] = _Track(last_x=x, last_y=y, last_t=t)
                continue
            dt_obs = t - tr.last_t
            tr.vx = (x - tr.last_x) / dt_obs
            tr.vy = (y - tr.last_y) / dt_obs
            tr.dwell += dt_obs
            tr.last_x, tr.last_y, tr.last_t = x, y, t

            rx = x - px
            ry = y - py
            vx = tr.vx - subj_vx
            vy = tr.vy - subj_vy
            pp = rx * rx + ry * ry
            size = 2.0 * math.degrees(math.atan(radius / math.sqrt(pp))) if pp > 0.0 else 180.0
            # shared quadratic terms: closest approach and first disc contact
            a = vx * vx + vy * vy
            b = rx * vx + ry * vy
            if pp <= contact2:
                miss = math.sqrt(pp)
                ttc = 0.0
            elif a < 1e-18:
                miss = math.sqrt(pp)
                ttc = math.inf
            else:
                t_star = -b / a
                if t_star <= 0.0:  # receding: the approach is in the past
                    miss = math.sqrt(pp)
                    ttc = math.inf
                else:
                    miss = math.sqrt(max(pp - b * b / a, 0.0))
                    disc = b * b - a * (pp - contact2)
                    ttc = t_star if disc <= 0.0 else (-b - math.sqrt(disc)) / a
            self.estimates[ped_id] = ThreatEstimate(
                pedestrian_id=ped_id,
                predicted_miss_distance=miss,
                predicted_ttc=ttc,
                angular_size=size,
                visible_dwell=tr.dwell,
            )
        # Drop stale tracks so an invisible pedestrian regrows its dwell
        # from zero on the next sighting.
        if len(seen) != len(tracks):
            for ped_id in list(tracks):
                if ped_id not in seen:
                    del tracks[ped_id]

    def _pick_threat(self) -> ThreatEstimate | None:
        p = self.params
        best = None
        for est in self.estimates.values():
            if (
                est.visible_dwell >= self.dwell_required
                and est.angular_size >= p.detect_size_threshold
                and est.predicted_miss_distance < p.threat_miss_distance
                and est.predicted_ttc <= THREAT_HORIZON
            ):
                if best is None or est.predicted_ttc < best.predicted_ttc:
                    best = est
        return best

    def _steer_toward(self, pose: SubjectPose, heading_target: float) -> float:
        err = heading_target - pose.heading
        while err > 180.0:
            err -= 360.0
        while err <= -180.0:
            err += 360.0
        return HEADING_GAIN * err

    def step(self, t: float, pose: SubjectPose, visible: list) -> SubjectInput:
        """One control tick; ``visible`` holds (id, x, y) of seen pedestrians."""
        detect: str | None = None
        if not self.pressed:
            self._update_tracks(t, pose, visible)
            threat = self._pick_threat()
            if threat is not None:
                self.pressed = True
                self.committed_id = threat.pedestrian_id
                tr = self.tracks[threat.pedestrian_id]
                self._threat = (tr.last_x, tr.last_y, tr.vx, tr.vy, t)
                detect = SIDE_RIGHT if tr.last_x >= 0.0 else SIDE_LEFT
        else:
            # Committed: keep only the threat's track fresh while visible.
            self.estimates = {}
            if self.committed_id is not None:
                self._refresh_committed(t, visible)

        steer = 0.0
        if self._threat is not None:
            steer = self._avoidance_steer(t, pose)

        return SubjectInput(
            steer_rate=steer,
            speed_target=self.subject.pws,
            head_yaw_target=self.scan_target(t),
            head_pitch_target=self.params.pitch_offset,
            detect=detect,
        )

    def _refresh_committed(self, t: float, visible: list) -> None:
        cid = self.committed_id
        for ped_id, x, y in visible:
            if ped_id != cid:
                continue
            tr = self.tracks.get(cid)
            if tr is None or t - tr.last_t > 1.5 * self.dt:
                self.tracks[cid] = _Track(last_x=x, last_y=y, last_t=t)
            else:
                dt_obs = t - tr.last_t
                tr.vx = (x - tr.last_x) / dt_obs
                tr.vy = (y - tr.last_y) / dt_obs
                tr.last_x, tr.last_y, tr.last_t = x, y, t
                self._threat = (x, y, tr.vx, tr.vy, t)
            return

    def _avoidance_steer(self, t: float, pose: SubjectPose) -> float:
        tx, ty, tvx, tvy, t0 = self._threat
        # Extrapolate the frozen linear model to now.
        dtt = t - t0
        px = tx + tvx * dtt
        py = ty + tvy * dtt
        r = math.radians(pose.heading)
        svx = pose.speed * math.sin(r)
        svy = pose.speed * math.cos(r)
        rel_pos = (px - pose.x, py - pose.y)
        rel_vel = (tvx - svx, tvy - svy)
        _, t_cpa = closest_approach(rel_pos, rel_vel)

        if not self._avoiding:
            if time_to_contact(rel_pos, rel_vel, self._contact_radius) <= self.trigger_ttc:
                self._avoiding = True
            else:
                return 0.0

        if t_cpa <= 0.0 and math.hypot(px - pose.x, py - pose.y) > 2.0 * self.params.avoid_lateral_offset:
            # Threat passed and clear: recover toward the path line.
            lean = min(max(-RECOVER_GAIN * pose.x, -RECOVER_MAX), RECOVER_MAX)
            return self._steer_toward(pose, lean)

        # Work against the threat's path line, oriented along our travel.
        speed = math.hypot(tvx, tvy)
        if speed < 1e-9:
            ux, uy = math.sin(r), math.cos(r)
        else:
            ux, uy = tvx / speed, tvy / speed
            if ux * math.sin(r) + uy * math.cos(r) < 0.0:
                ux, uy = -ux, -uy
        # Signed offset of the subject from the line, positive to its right.
        off = (pose.x - px) * uy - (pose.y - py) * ux
        if self._pass_sign == 0.0:
            self._pass_sign = math.copysign(1.0, off) if off != 0.0 else self.tie_break_sign
        err = self._pass_sign * self.params.avoid_lateral_offset - off
        line_heading = math.degrees(math.atan2(ux, uy))
        lean = min(max(OFFSET_TO_HEADING * err, -MAX_LEAN), MAX_LEAN)
        return self._steer_toward(pose, line_heading + lean)


def nv_policy(
    subject: SubjectParams, dt: float, seed: int = 0, params: PolicyParams | None = None
) -> SyntheticSubjectPolicy:
    """Normal-vision synthetic subject with the default scan profile."""
    return SyntheticSubjectPolicy(params or NV_PROFILE, subject, dt, seed)


def hh_policy(
    subject: SubjectParams, dt: float, seed: int = 0, params: PolicyParams | None = None
) -> SyntheticSubjectPolicy:
    """Hemianopic synthetic subject: wide biased scan, same decision rules."""
    if subject.field_loss is FieldLoss.NONE:
        raise InvalidParameterError("hh_policy requires a hemianopic SubjectParams")
    return SyntheticSubjectPolicy(params or HH_PROFILE, subject, dt, seed)


def policy_for_profile(
    profile: str, subject: SubjectParams, dt: float, seed: int = 0,
    params: PolicyParams | None = None,
) -> SyntheticSubjectPolicy:
    if profile not in PROFILES:
        raise InvalidParameterError(f"unknown policy profile {profile!r}")
    base = params or PROFILES[profile]
    if profile == "nv":
        return nv_policy(subject, dt, seed, base)
    return hh_policy(subject, dt, seed, base)


class ScriptedWalker:
    """Constant-speed straight walker; never scans, never presses.

    The test oracle agent: against any colliding course it collides at the
    designed time-to-collision.
    """

    def __init__(self, pws: float):
        if pws <= 0.0:
            raise InvalidParameterError(f"pws must be positive, got {pws}")
        self._input = SubjectInput(speed_target=pws)

    def step(self, t: float, pose: SubjectPose, visible: list) -> SubjectInput:
        return self._input


def scripted_walker(pws: float) -> ScriptedWalker:
    return ScriptedWalker(pws)
