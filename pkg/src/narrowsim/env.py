"""Episodic driving environment with shaped exploration rewards.

One step = one control interval: advance the kinematics, sweep the lidar,
select the safety-table beams, then terminate or score. Termination is
checked in priority order collision > open space > timeout. The running
reward combines four components: forward openness, obstacle clearance,
middle keeping, and a constant time penalty; ablation modes zero out the
latter components' weights, and the waypoint-guided mode replaces the blend
with progress toward hand-placed waypoints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import Footprint, Pose2D, TrackWorld, oracle_collides, scan, wrap_angle
from .safety import Observation, SafetyRegionTable, build_table, detect_collision, observe
from .vehicle import Action, AckermannState, step_kinematics

MODES = ("fomt", "fot", "ft", "wg")
WAYPOINT_CAPTURE_RADIUS = 0.3


@dataclass(frozen=True)
class RewardParams:
    """Weights and shaping constants for the reward engine.

    alpha1..alpha3 discount the obstacle, forward, and middle sums over
    their neighbor windows; alpha4 is the per-step time penalty. mode picks
    the blend: fomt uses all four components, fot drops middle keeping,
    ft additionally drops obstacle clearance, wg scores waypoint progress
    with weight c5 and pays R_g on reaching the final waypoint.
    """

    R_c: float = -50.0
    R_r: float = 50.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    n_f: int = 5
    n_o: int = 12
    n_m: int = 5
    alpha1: float = 0.9
    alpha2: float = 0.9
    alpha3: float = 0.9
    alpha4: float = -1.0
    gap_floor: float = 1e-3
    mode: str = "fomt"
    c5: float = 100.0
    R_g: float = 50.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not (0 < self.alpha1 < 1 and 0 < self.alpha2 < 1 and 0 < self.alpha3 < 1):
            raise ValueError("alpha1..alpha3 must lie in (0, 1)")
        if self.gap_floor <= 0:
            raise ValueError("gap_floor must be positive")

    def effective_weights(self) -> tuple[float, float, float, float]:
        """(c1, c2, c3, c4) after applying the ablation mode."""
        if self.mode == "ft":
            return (self.c1, 0.0, 0.0, self.c4)
        if self.mode == "fot":
            return (self.c1, self.c2, 0.0, self.c4)
        return (self.c1, self.c2, self.c3, self.c4)


def reward_forward(v_obs: np.ndarray, v: float, params: RewardParams) -> float:
    """Heading-openness component.

    Sums the forward beam's neighborhood, discounted by alpha2 per step away
    from the forward beam and scaled by the commanded speed. Table position 0
    is the forward beam by construction; neighbor positions wrap around the
    table. The k=0 term counts the forward beam twice, once per sum arm.
    """
    n = v_obs.size
    total = 0.0
    for k in range(params.n_f + 1):
        total += params.alpha2**k * (v_obs[k % n] + v_obs[-k % n])
    return v * total


def reward_obstacle(v_obs: np.ndarray, table: SafetyRegionTable, params: RewardParams) -> float:
    """Clearance component: log of the smallest beam gaps above safe range.

    Gaps (reading minus safe range) are sorted ascending so the tightest
    clearances dominate; each is clamped below at gap_floor to keep the log
    finite when a reading sits exactly on the collision boundary.
    """
    gaps = np.sort(v_obs - table.ranges)
    total = 0.0
    for k in range(min(params.n_o + 1, gaps.size)):
        total += params.alpha1**k * math.log(max(gaps[k], params.gap_floor))
    return total


def reward_middle(v_obs: np.ndarray, table: SafetyRegionTable, params: RewardParams) -> float:
    """Side-balance component: mirrored left/right beam differences.

    Walks outward from the straight-left and straight-right beams in table
    order (left forward, right backward, wrapping), penalizing absolute
    differences of the paired readings. Zero iff every compared pair matches.
    """
    n = v_obs.size
    left = table.position_of(table.n_scans // 4)
    right = table.position_of(3 * table.n_scans // 4)
    total = 0.0
    for k in range(params.n_m + 1):
        total += params.alpha3**k * abs(v_obs[(right - k) % n] - v_obs[(left + k) % n])
    return -total


def reward_time(params: RewardParams) -> float:
    """Constant per-step time penalty (alpha4, negative by default)."""
    return params.alpha4


def reward_waypoint(prev_distance: float, distance: float, params: RewardParams) -> float:
    """Progress component for the waypoint-guided mode: c5 * distance cut."""
    return params.c5 * (prev_distance - distance)


@dataclass(frozen=True)
class EnvConfig:
    """Static environment configuration; one instance per episode family."""

    world: TrackWorld
    footprint: Footprint = field(default_factory=Footprint)
    n_scans: int = 720
    max_range: float = 6.0
    dt: float = 0.2
    max_steps: int = 1000
    open_space_threshold: float = 8.0
    resolution: float = 0.095
    wheelbase: float = 0.6
    substeps: int = 10
    reward: RewardParams = field(default_factory=RewardParams)
    waypoints: Optional[np.ndarray] = None
    spawn_jitter: bool = False
    jitter_pos: float = 0.05
    jitter_yaw: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_scans % 4 != 0:
            raise ValueError("n_scans must be divisible by 4 (needs exact side beams)")
        if self.max_range <= 0 or self.dt <= 0 or self.max_steps < 1:
            raise ValueError("max_range, dt, max_steps must be positive")
        wps = self.waypoints
        if wps is None and self.world.waypoints is not None:
            wps = self.world.waypoints
        if wps is not None:
            wps = np.asarray(wps, dtype=float)[:, :2]
            wps.flags.writeable = False
        object.__setattr__(self, "waypoints", wps)
        if self.reward.mode == "wg" and (wps is None or len(wps) == 0):
            raise ValueError("waypoint-guided mode needs a non-empty waypoint list")


@dataclass(frozen=True)
class StepOutcome:
    observation: Observation
    reward: float
    done: bool
    done_reason: str  # collision | open_space | timeout | running
    info: dict


class NarrowSpaceEnv:
    """Mutable episode state over an immutable EnvConfig.

    Not thread-safe; run one instance per thread. Bit-identical episodes are
    guaranteed for a fixed seed and action sequence.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.table = build_table(config.footprint, config.n_scans, config.resolution)
        if np.any(self.table.ranges >= config.max_range):
            raise ValueError("max_range must exceed every safety-table range")
        self._rng = np.random.default_rng(config.seed)
        self._state: AckermannState | None = None
        self._steps = 0
        self._done = True
        self._wp_index = 0
        self._wp_distance = 0.0
        self.trace: list[dict] = []

    @property
    def observation_size(self) -> int:
        """Length of the observation vector (beams plus any extras)."""
        extras = 2 if self.config.reward.mode == "wg" else 0
        return len(self.table) + extras

    @property
    def state_size(self) -> int:
        """Length of the RL state vector: observation plus the action pair."""
        return self.observation_size + 2

    @property
    def pose(self) -> Pose2D:
        if self._state is None:
            raise RuntimeError("environment has not been reset")
        return self._state.pose

    @property
    def last_action(self) -> Action:
        if self._state is None:
            raise RuntimeError("environment has not been reset")
        return self._state.last_action

    @property
    def steps(self) -> int:
        return self._steps

    def state_vector(self, obs: Observation) -> np.ndarray:
        """Observation plus the previous action pair, as fed to the nets."""
        return np.concatenate([obs.as_vector(), self._state.last_action.as_tuple()])

    def reset(self, seed: int | None = None) -> Observation:
        """Start a new episode at the spawn pose (optionally jittered).

        Passing a seed reseeds the generator first, making the episode
        reproducible in isolation; otherwise the generator continues its
        stream so consecutive episodes differ under jitter.
        """
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        cfg = self.config
        spawn = cfg.world.spawn
        if cfg.spawn_jitter:
            dx, dy = self._rng.uniform(-cfg.jitter_pos, cfg.jitter_pos, 2)
            dth = self._rng.uniform(-cfg.jitter_yaw, cfg.jitter_yaw)
            spawn = Pose2D(spawn.x + dx, spawn.y + dy, spawn.theta + dth)
        if oracle_collides(cfg.world, spawn, cfg.footprint):
            raise ValueError(f"spawn pose collides in track '{cfg.world.name}'")
        self._state = AckermannState(spawn, Action(0.0, 0.0))
        self._steps = 0
        self._done = False
        self.trace = []
        self._wp_index = 0
        if cfg.reward.mode == "wg":
            self._wp_distance = self._waypoint_distance(spawn)
        return self._observe(spawn)

    def step(self, action: Action) -> StepOutcome:
        """Advance one control interval and score the result."""
        if self._done or self._state is None:
            raise RuntimeError("step called on a finished episode; reset first")
        cfg = self.config
        self._state = step_kinematics(self._state, action, cfg.dt, cfg.wheelbase, cfg.substeps)
        self._steps += 1
        pose = self._state.pose
        raw = scan(cfg.world, pose, cfg.footprint, cfg.n_scans, cfg.max_range)

        collided = detect_collision(self.table, raw)
        side_sum = raw[cfg.n_scans // 4] + raw[3 * cfg.n_scans // 4]
        open_space = side_sum > cfg.open_space_threshold

        p = cfg.reward
        v_obs = raw[self.table.indices]
        components = {
            "f": reward_forward(v_obs, self._state.last_action.v, p),
            "o": reward_obstacle(v_obs, self.table, p),
            "m": reward_middle(v_obs, self.table, p),
            "t": reward_time(p),
        }

        wp_reward, reached_goal = 0.0, False
        if p.mode == "wg":
            wp_reward, reached_goal = self._advance_waypoints(pose)
            components["wg"] = wp_reward

        if collided:
            done, reason, reward = True, "collision", p.R_c
        elif open_space or reached_goal:
            done, reason = True, "open_space"
            reward = p.R_g if p.mode == "wg" else p.R_r
        else:
            done = self._steps >= cfg.max_steps
            reason = "timeout" if done else "running"
            if p.mode == "wg":
                reward = wp_reward
            else:
                c1, c2, c3, c4 = p.effective_weights()
                reward = (c1 * components["f"] + c2 * components["o"]
                          + c3 * components["m"] + c4 * components["t"])

        if done:
            self._done = True
        obs = self._observe(pose)
        self.trace.append({
            "step": self._steps,
            "pose": [pose.x, pose.y, pose.theta],
            "action": [self._state.last_action.v, self._state.last_action.w],
            "reward": reward,
            "components": {k: float(v) for k, v in components.items()},
            "done_reason": reason,
        })
        return StepOutcome(obs, float(reward), done, reason,
                           {"components": components, "side_sum": float(side_sum),
                            "scans": raw})

    def write_trace(self, path) -> None:
        """Dump the current episode trace as line-delimited JSON."""
        with open(path, "w") as fh:
            for rec in self.trace:
                fh.write(json.dumps(rec) + "\n")

    # internal helpers

    def _observe(self, pose: Pose2D) -> Observation:
        cfg = self.config
        raw = scan(cfg.world, pose, cfg.footprint, cfg.n_scans, cfg.max_range)
        extras = ()
        if cfg.reward.mode == "wg":
            wp = cfg.waypoints[min(self._wp_index, len(cfg.waypoints) - 1)]
            dist = math.hypot(wp[0] - pose.x, wp[1] - pose.y)
            bearing = math.atan2(wp[1] - pose.y, wp[0] - pose.x)
            extras = (dist, wrap_angle(bearing - pose.theta))
        return observe(self.table, raw, extras)

    def _waypoint_distance(self, pose: Pose2D) -> float:
        wp = self.config.waypoints[self._wp_index]
        return math.hypot(wp[0] - pose.x, wp[1] - pose.y)

    def _advance_waypoints(self, pose: Pose2D) -> tuple[float, bool]:
        """Score progress toward the active waypoint, then capture it."""
        dist = self._waypoint_distance(pose)
        reward = reward_waypoint(self._wp_distance, dist, self.config.reward)
        self._wp_distance = dist
        reached_goal = False
        while self._wp_distance <= WAYPOINT_CAPTURE_RADIUS:
            if self._wp_index + 1 >= len(self.config.waypoints):
                reached_goal = True
                break
            self._wp_index += 1
            self._wp_distance = self._waypoint_distance(pose)
        return reward, reached_goal
