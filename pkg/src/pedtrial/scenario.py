"""Collision-course geometry and randomized trial schedules.

Placement happens in the spawn frame: origin at the subject's position at
pedestrian-spawn time, +Y along the subject's heading at that instant.
A colliding pedestrian is aimed at the collision point, which lies
``pws * ttc`` ahead of the spawn pose, so that a subject who keeps walking
straight at their preferred walking speed (PWS) meets the pedestrian there
after exactly the designed time-to-collision.

Two colliding kinds exist:

* approaching: placed beyond the collision point at the same distance from
  it as the subject, walking at the subject's PWS (face-to-face).
* overtaken: placed between subject and collision point at a configured
  initial distance, necessarily slower than the subject (side-to-side).

Bearing angles are signed degrees from the subject's heading, positive to
the right.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, replace

from .errors import (
    GenerationFailureError,
    InvalidConfigError,
    InvalidGeometryError,
    InvalidParameterError,
)
from .geom import Vec2, derive_seed, dist, closest_approach

# Bearing angles admitted by the study design (degrees, absolute value).
APPROACHING_BETAS = (20.0, 40.0)
OVERTAKEN_BETAS = (20.0, 40.0, 60.0)

DEFAULT_TTC = 6.0
DEFAULT_SHOULDER_RADIUS = 0.25
DEFAULT_FOV_HALF_ANGLE = 45.0
DEFAULT_OVERTAKEN_INIT_DISTANCE = 2.0
DEFAULT_DISTRACTOR_COUNT = 10
DEFAULT_START_TRIGGER = 3.0
DEFAULT_END_TRIGGER = 10.0

# Distractor generation knobs. Distractors are straight constant-velocity
# walkers; clearance is the minimum allowed center separation from a nominal
# subject walking the path at PWS.
DISTRACTOR_CLEARANCE = 0.75
DISTRACTOR_SPEED_RANGE = (0.6, 1.4)
DISTRACTOR_X_BAND = (-6.0, 6.0)
DISTRACTOR_Y_BAND = (0.5, 12.0)
DISTRACTOR_MAX_ATTEMPTS = 200
# Clearance is enforced past the end trigger by this many seconds so a
# policy looking a few seconds ahead (agents.THREAT_HORIZON) can never see
# a distractor on a sub-clearance course while the trial is live.
DISTRACTOR_HORIZON_TAIL = 10.5

SESSION_COLLISION_REPS = 2
SESSION_NULL_TRIALS = 12


class FieldLoss(enum.Enum):
    NONE = "none"
    LEFT_HEMIANOPIA = "left_hemianopia"
    RIGHT_HEMIANOPIA = "right_hemianopia"


class CourseKind(enum.Enum):
    APPROACHING = "approaching"
    OVERTAKEN = "overtaken"


class PedestrianRole(enum.Enum):
    COLLIDING = "colliding"
    DISTRACTOR = "distractor"


@dataclass(frozen=True)
class SubjectParams:
    """Per-subject configuration: walking speed, body size, visual field."""

    pws: float
    shoulder_radius: float = DEFAULT_SHOULDER_RADIUS
    fov_half_angle: float = DEFAULT_FOV_HALF_ANGLE
    field_loss: FieldLoss = FieldLoss.NONE

    def __post_init__(self):
        if not (self.pws > 0.0 and math.isfinite(self.pws)):
            raise InvalidParameterError(f"pws must be positive, got {self.pws}")
        if not (self.shoulder_radius > 0.0 and math.isfinite(self.shoulder_radius)):
            raise InvalidParameterError(
                f"shoulder_radius must be positive, got {self.shoulder_radius}"
            )
        if not (0.0 < self.fov_half_angle <= 90.0):
            raise InvalidParameterError(
                f"fov_half_angle must be in (0, 90], got {self.fov_half_angle}"
            )


@dataclass(frozen=True)
class CollisionCourse:
    """One colliding pedestrian's designed geometry.

    ``allow_nonstandard_beta`` lifts the study's bearing-angle restriction
    (the restriction is a property of the study design, not of the
    geometry); the closed-form placement still requires |beta| < 90.
    """

    kind: CourseKind
    beta_deg: float
    ttc_design: float = DEFAULT_TTC
    overtaken_init_distance: float = DEFAULT_OVERTAKEN_INIT_DISTANCE
    allow_nonstandard_beta: bool = False

    def __post_init__(self):
        if not (self.ttc_design > 0.0 and math.isfinite(self.ttc_design)):
            raise InvalidParameterError(f"ttc_design must be positive, got {self.ttc_design}")
        if self.kind is CourseKind.OVERTAKEN and self.overtaken_init_distance <= 0.0:
            raise InvalidParameterError(
                f"overtaken_init_distance must be positive, got {self.overtaken_init_distance}"
            )
        if not self.allow_nonstandard_beta:
            allowed = (
                APPROACHING_BETAS if self.kind is CourseKind.APPROACHING else OVERTAKEN_BETAS
            )
            if abs(self.beta_deg) not in allowed:
                raise InvalidParameterError(
                    f"{self.kind.value} bearing |{self.beta_deg}| not in ±{allowed}"
                )


@dataclass(frozen=True)
class TrialSpec:
    """One trial of a session; ``course=None`` marks a null trial."""

    trial_id: int
    course: CollisionCourse | None
    rng_seed: int
    distractor_count: int = DEFAULT_DISTRACTOR_COUNT
    start_trigger_distance: float = DEFAULT_START_TRIGGER
    end_trigger_distance: float = DEFAULT_END_TRIGGER

    def __post_init__(self):
        if self.distractor_count < 0:
            raise InvalidParameterError(
                f"distractor_count must be >= 0, got {self.distractor_count}"
            )
        if not (0.0 < self.start_trigger_distance < self.end_trigger_distance):
            raise InvalidParameterError(
                "need 0 < start_trigger_distance < end_trigger_distance, got "
                f"{self.start_trigger_distance} / {self.end_trigger_distance}"
            )


@dataclass(frozen=True)
class PedestrianInit:
    """Initial kinematic state of one pedestrian in the spawn frame."""

    initial_position: Vec2
    velocity: Vec2
    role: PedestrianRole


def collision_point(
    pws: float,
    ttc: float,
    subject_pos_at_spawn: Vec2 = (0.0, 0.0),
    path_dir: Vec2 = (0.0, 1.0),
) -> Vec2:
    """Planned collision point: ``pws * ttc`` ahead of the spawn pose."""
    if not (pws > 0.0 and math.isfinite(pws)):
        raise InvalidParameterError(f"pws must be positive, got {pws}")
    if not (ttc > 0.0 and math.isfinite(ttc)):
        raise InvalidParameterError(f"ttc must be positive, got {ttc}")
    d = pws * ttc
    return (subject_pos_at_spawn[0] + d * path_dir[0], subject_pos_at_spawn[1] + d * path_dir[1])


def _bearing_point(beta_deg: float, r: float) -> Vec2:
    b = math.radians(beta_deg)
    return (r * math.sin(b), r * math.cos(b))


def place_approaching(pws: float, ttc: float, beta_deg: float) -> PedestrianInit:
    """Place a face-to-face collider beyond the collision point.

    Two constraints pin the start: it lies on the bearing ray at angle
    ``beta_deg``, and its distance to the collision point equals the
    subject's (``d = pws * ttc``). Solving both gives the subject-to-
    pedestrian distance ``r = 2 d cos(beta)``. The pedestrian walks at the
    subject's PWS, aimed at the collision point.
    """
    c = collision_point(pws, ttc)
    d = pws * ttc
    cos_b = math.cos(math.radians(beta_deg))
    r = 2.0 * d * cos_b
    if r <= 0.0:
        raise InvalidGeometryError(
            f"approaching placement needs |beta| < 90 deg, got {beta_deg}"
        )
    p0 = _bearing_point(beta_deg, r)
    gap = dist(p0, c)
    vel = (pws * (c[0] - p0[0]) / gap, pws * (c[1] - p0[1]) / gap)
    return PedestrianInit(initial_position=p0, velocity=vel, role=PedestrianRole.COLLIDING)


def place_overtaken(pws: float, ttc: float, beta_deg: float, r_init: float) -> PedestrianInit:
    """Place a same-direction collider between subject and collision point.

    The start sits at ``r_init`` along the bearing ray; the walking speed is
    whatever covers the remaining distance to the collision point in exactly
    ``ttc``, and must come out strictly below the subject's PWS or no
    overtaking happens.
    """
    if r_init <= 0.0:
        raise InvalidParameterError(f"r_init must be positive, got {r_init}")
    c = collision_point(pws, ttc)
    p0 = _bearing_point(beta_deg, r_init)
    gap = dist(p0, c)
    speed = gap / ttc
    if speed >= pws:
        raise InvalidConfigError(
            f"overtaken speed {speed:.4f} m/s >= pws {pws:.4f} m/s "
            f"(beta={beta_deg}, r_init={r_init}); pedestrian would not be overtaken"
        )
    vel = (speed * (c[0] - p0[0]) / gap, speed * (c[1] - p0[1]) / gap)
    return PedestrianInit(initial_position=p0, velocity=vel, role=PedestrianRole.COLLIDING)


def place_course(course: CollisionCourse, pws: float) -> PedestrianInit:
    """Realize a CollisionCourse for a subject walking at ``pws``."""
    if course.kind is CourseKind.APPROACHING:
        return place_approaching(pws, course.ttc_design, course.beta_deg)
    return place_overtaken(
        pws, course.ttc_design, course.beta_deg, course.overtaken_init_distance
    )


def min_separation(init: PedestrianInit, pws: float, horizon: float) -> float:
    """Minimum center separation from a nominal straight PWS walker.

    The nominal subject starts at the spawn-frame origin and walks +Y at
    ``pws``. Both motions are linear, so the closed-form closest approach
    over ``[0, horizon]`` is exact.
    """
    rel_pos = init.initial_position
    rel_vel = (init.velocity[0], init.velocity[1] - pws)
    d_min, _ = closest_approach(rel_pos, rel_vel, horizon)
    return d_min


def place_distractors(
    n: int,
    seed: int,
    subject_path: tuple[Vec2, Vec2],
    pws: float,
    clearance: float = DISTRACTOR_CLEARANCE,
    speed_range: tuple[float, float] = DISTRACTOR_SPEED_RANGE,
    shoulder_radius: float = DEFAULT_SHOULDER_RADIUS,
    horizon: float | None = None,
) -> list[PedestrianInit]:
    """Generate non-colliding straight walkers around the subject's path.

    Each distractor keeps a center separation greater than ``clearance``
    from a nominal subject walking ``subject_path`` at ``pws``, checked in
    closed form over the whole walk plus a 2 s tail (or an explicit
    ``horizon``). Draws are deterministic in ``seed``; a distractor that
    fails the clearance check after a bounded number of attempts raises
    GenerationFailureError.
    """
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    if clearance <= 2.0 * shoulder_radius:
        raise InvalidParameterError(
            f"clearance {clearance} must exceed shoulder diameter {2 * shoulder_radius}"
        )
    start, end = subject_path
    path_len = dist(start, end)
    if horizon is None:
        horizon = path_len / pws + 2.0
    rng = random.Random(seed)
    out: list[PedestrianInit] = []
    for _ in range(n):
        for _attempt in range(DISTRACTOR_MAX_ATTEMPTS):
            x = start[0] + rng.uniform(*DISTRACTOR_X_BAND)
            y = start[1] + rng.uniform(*DISTRACTOR_Y_BAND)
            speed = rng.uniform(*speed_range)
            heading = rng.uniform(0.0, 2.0 * math.pi)
            cand = PedestrianInit(
                initial_position=(x, y),
                velocity=(speed * math.sin(heading), speed * math.cos(heading)),
                role=PedestrianRole.DISTRACTOR,
            )
            if min_separation(cand, pws, horizon) > clearance:
                out.append(cand)
                break
        else:
            raise GenerationFailureError(
                f"could not place distractor {len(out)} within "
                f"{DISTRACTOR_MAX_ATTEMPTS} attempts (clearance {clearance} m)"
            )
    return out


def session_conditions() -> list[CollisionCourse]:
    """The 10 collision conditions of one session, in canonical order."""
    out = [
        CollisionCourse(kind=CourseKind.APPROACHING, beta_deg=s * b)
        for b in APPROACHING_BETAS
        for s in (1.0, -1.0)
    ]
    out.extend(
        CollisionCourse(kind=CourseKind.OVERTAKEN, beta_deg=s * b)
        for b in OVERTAKEN_BETAS
        for s in (1.0, -1.0)
    )
    return out


def generate_session(subject: SubjectParams, seed: int) -> list[TrialSpec]:
    """Randomized 32-trial schedule: 10 conditions x 2 reps + 12 nulls.

    A pure function of ``(subject, seed)``: the same inputs give a
    byte-identical schedule. Each trial carries its own derived rng_seed
    used for distractor placement.
    """
    courses: list[CollisionCourse | None] = []
    for _ in range(SESSION_COLLISION_REPS):
        courses.extend(session_conditions())
    courses.extend([None] * SESSION_NULL_TRIALS)
    order = random.Random(derive_seed(seed, 0x5E55104))
    order.shuffle(courses)
    return [
        TrialSpec(trial_id=i + 1, course=course, rng_seed=derive_seed(seed, i + 1))
        for i, course in enumerate(courses)
    ]


def generate_pws_session(subject: SubjectParams, seed: int, trials: int = 12) -> list[TrialSpec]:
    """Walking-speed measurement schedule: distractor-only trials."""
    if trials < 1:
        raise InvalidParameterError(f"trials must be >= 1, got {trials}")
    return [
        TrialSpec(trial_id=i + 1, course=None, rng_seed=derive_seed(seed, 0xB0A + i))
        for i in range(trials)
    ]


def standardize_side(beta_deg: float, field_loss: FieldLoss) -> float:
    """Mirror bearings for right-hemianopes so negative = blind side.

    Left hemianopes and normal-vision subjects already follow the
    convention (their blind/reference side is the left, which is negative).
    """
    if field_loss is FieldLoss.RIGHT_HEMIANOPIA:
        return -beta_deg
    return beta_deg


def mirrored(course: CollisionCourse) -> CollisionCourse:
    """The X-reflected twin of a course (bearing sign flipped)."""
    return replace(course, beta_deg=-course.beta_deg)
