"""Pedestrian collision detection/avoidance trial platform.

Deterministic 2D simulation of the walking-with-pedestrians task: scenario
geometry and schedules, a fixed-timestep engine with field-of-view masking,
synthetic normal-vision and hemianopic subject policies, durable session
logs, outcome statistics, and a live session service for human subjects.
"""

__version__ = "0.1.0"

from .engine import EngineConfig, SubjectInput, TrialEngine, check_collision, visible
from .scenario import (
    CollisionCourse,
    CourseKind,
    FieldLoss,
    PedestrianInit,
    SubjectParams,
    TrialSpec,
    collision_point,
    generate_session,
    place_approaching,
    place_distractors,
    place_overtaken,
    standardize_side,
)
from .session import SessionLog, TrialLog, run_session, run_trial, subject_for_profile

__all__ = [
    "CollisionCourse",
    "CourseKind",
    "EngineConfig",
    "FieldLoss",
    "PedestrianInit",
    "SessionLog",
    "SubjectInput",
    "SubjectParams",
    "TrialEngine",
    "TrialLog",
    "TrialSpec",
    "check_collision",
    "collision_point",
    "generate_session",
    "place_approaching",
    "place_distractors",
    "place_overtaken",
    "run_session",
    "run_trial",
    "standardize_side",
    "subject_for_profile",
    "visible",
    "__version__",
]
