"""Narrow-space self-exploration stack for rectangular Ackermann robots.

2D simulator (tracks, lidar, kinematics), rectangle-aware scan discretization
with collision detection, shaped exploration rewards, small numpy RL agents,
evaluation tools, and a websocket teleop service.
"""

__version__ = "0.1.0"

from .geometry import (
    Footprint,
    Pose2D,
    TrackWorld,
    bundled_track_names,
    cast_ray,
    footprint_polygon,
    load_bundled_track,
    load_track,
    oracle_collides,
    scan,
    wrap_angle,
)
from .safety import (
    Observation,
    SafetyRegionTable,
    build_baseline_fifr,
    build_baseline_firect,
    build_table,
    detect_collision,
    observe,
)
from .vehicle import Action, AckermannState, min_turning_radius, step_kinematics
from .env import EnvConfig, NarrowSpaceEnv, RewardParams, StepOutcome
from .agents import (
    DDPGAgent,
    DQNAgent,
    ReplayBuffer,
    behavior_clone,
    load_checkpoint,
    load_demos,
    make_agent,
    save_checkpoint,
    train,
)
from .evaluation import (
    EpisodeResult,
    EvalReport,
    collision_benchmark,
    emit_report,
    parse_report,
    rollout,
    run_eval,
)

__all__ = [
    "Action",
    "AckermannState",
    "DDPGAgent",
    "DQNAgent",
    "EnvConfig",
    "EpisodeResult",
    "EvalReport",
    "Footprint",
    "NarrowSpaceEnv",
    "Observation",
    "Pose2D",
    "ReplayBuffer",
    "RewardParams",
    "SafetyRegionTable",
    "StepOutcome",
    "TrackWorld",
    "behavior_clone",
    "build_baseline_fifr",
    "build_baseline_firect",
    "build_table",
    "bundled_track_names",
    "cast_ray",
    "collision_benchmark",
    "detect_collision",
    "emit_report",
    "footprint_polygon",
    "load_bundled_track",
    "load_checkpoint",
    "load_demos",
    "load_track",
    "make_agent",
    "min_turning_radius",
    "observe",
    "oracle_collides",
    "parse_report",
    "rollout",
    "run_eval",
    "save_checkpoint",
    "scan",
    "step_kinematics",
    "train",
    "wrap_angle",
]
