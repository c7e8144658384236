"""Deterministic, seedable simulators: cartpole and 2-agent collision avoidance.

Each environment instance owns its RNG exclusively; (seed, action sequence)
fully determines a trajectory.  Observation layouts are part of this repo's
contract and are tagged so weight files can declare what they were trained
on (see OBSERVATION_LAYOUTS).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "CartpoleState",
    "CartpoleEnv",
    "CollisionAvoidanceState",
    "CollisionAvoidanceEnv",
    "CollisionScenarioConfig",
    "EpisodeRecord",
    "cartpole_step",
    "cartpole_physics",
    "ca_observe",
    "obstacle_policy",
    "OBSERVATION_LAYOUTS",
]

OBSERVATION_LAYOUTS = {
    "cartpole": "cartpole/x-v-theta-thetadot/v1",
    "collision_avoidance": "collision-avoidance/ego-frame-8d/v1",
}

# ---------------------------------------------------------------------------
# Cartpole
# ---------------------------------------------------------------------------

GRAVITY = 9.8
CART_MASS = 1.0
POLE_MASS = 0.1
TOTAL_MASS = CART_MASS + POLE_MASS
POLE_HALF_LENGTH = 0.5
POLE_MASS_LENGTH = POLE_MASS * POLE_HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12.0 * math.pi / 180.0
X_LIMIT = 2.4
CARTPOLE_MAX_STEPS = 200


@dataclass(frozen=True)
class CartpoleState:
    x: float
    v: float
    theta: float
    theta_dot: float
    step_count: int = 0

    @property
    def done(self) -> bool:
        return (
            abs(self.theta) > THETA_LIMIT
            or abs(self.x) > X_LIMIT
            or self.step_count >= CARTPOLE_MAX_STEPS
        )

    def observation(self) -> np.ndarray:
        return np.array([self.x, self.v, self.theta, self.theta_dot])


def cartpole_physics(
    x: float, v: float, theta: float, theta_dot: float, force: float
) -> tuple[float, float, float, float]:
    """One explicit-Euler step of the frictionless cart-pole dynamics."""
    sin_t = math.sin(theta)
    cos_t = math.cos(theta)
    temp = (force + POLE_MASS_LENGTH * theta_dot**2 * sin_t) / TOTAL_MASS
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos_t**2 / TOTAL_MASS)
    )
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return (
        x + TAU * v,
        v + TAU * x_acc,
        theta + TAU * theta_dot,
        theta_dot + TAU * theta_acc,
    )


def cartpole_step(state: CartpoleState, action: int) -> tuple[CartpoleState, float, bool]:
    """Apply push-left (0) / push-right (1); reward 1 per surviving step."""
    if state.done:
        raise RuntimeError("cartpole_step called on a finished episode")
    if action not in (0, 1):
        raise ValueError(f"cartpole action must be 0 or 1, got {action}")
    force = FORCE_MAG if action == 1 else -FORCE_MAG
    x, v, theta, theta_dot = cartpole_physics(
        state.x, state.v, state.theta, state.theta_dot, force
    )
    nxt = CartpoleState(x, v, theta, theta_dot, state.step_count + 1)
    return nxt, 1.0, nxt.done


class CartpoleEnv:
    """Episode wrapper with gym-style uniform(-0.05, 0.05) initial states."""

    name = "cartpole"
    num_actions = 2
    obs_dim = 4
    action_labels = ("push_left", "push_right")

    def __init__(self) -> None:
        self.state: Optional[CartpoleState] = None

    def reset(self, seed: "int | np.random.SeedSequence") -> CartpoleState:
        rng = np.random.Generator(np.random.PCG64(seed))
        x, v, theta, theta_dot = rng.uniform(-0.05, 0.05, size=4)
        self.state = CartpoleState(x, v, theta, theta_dot)
        return self.state

    def observe(self) -> np.ndarray:
        return self.state.observation()

    def step(self, action: int) -> tuple[float, bool]:
        self.state, reward, done = cartpole_step(self.state, action)
        return reward, done

    def outcome(self) -> str:
        return "timeout" if self.state.step_count >= CARTPOLE_MAX_STEPS else "fell"

    def perturbation_mask(self) -> np.ndarray:
        return np.ones(4)


# ---------------------------------------------------------------------------
# Collision avoidance
# ---------------------------------------------------------------------------

CA_NUM_ACTIONS = 11
CA_HEADING_CHANGES = np.linspace(-math.pi / 6.0, math.pi / 6.0, CA_NUM_ACTIONS)
CA_SPEED = 1.0
CA_DT = 0.1
CA_DECISION_PERIOD = 1.0  # seconds between obstacle policy re-draws
CA_PROJECTION_HORIZON = 1.0  # seconds of constant-velocity ego extrapolation
REWARD_GOAL = 1.0
REWARD_COLLISION = -0.25


@dataclass(frozen=True)
class CollisionAvoidanceState:
    ego_x: float
    ego_y: float
    ego_heading: float
    ego_radius: float
    goal_x: float
    goal_y: float
    obs_x: float
    obs_y: float
    obs_vx: float
    obs_vy: float
    obs_radius: float
    obs_goal_x: float
    obs_goal_y: float
    lam: float
    time: float = 0.0
    step_count: int = 0
    aiming: bool = False  # adversarial obstacle's current window mode

    def collided(self) -> bool:
        d = math.hypot(self.obs_x - self.ego_x, self.obs_y - self.ego_y)
        return d < self.ego_radius + self.obs_radius

    def at_goal(self, tolerance: float) -> bool:
        return math.hypot(self.goal_x - self.ego_x, self.goal_y - self.ego_y) < tolerance


def ca_observe(state: CollisionAvoidanceState) -> np.ndarray:
    """8-d observation in the ego body frame (centred on the ego, rotated by
    its heading; not rotated toward the goal).

    Layout: [goal_dx, goal_dy, r_ego, r_obs, obs_px, obs_py, obs_vx, obs_vy].
    Indices 4-5 (obstacle position) are the perturbable coordinates.
    """
    cos_h = math.cos(state.ego_heading)
    sin_h = math.sin(state.ego_heading)

    def to_body(dx: float, dy: float) -> tuple[float, float]:
        return cos_h * dx + sin_h * dy, -sin_h * dx + cos_h * dy

    goal = to_body(state.goal_x - state.ego_x, state.goal_y - state.ego_y)
    obs_pos = to_body(state.obs_x - state.ego_x, state.obs_y - state.ego_y)
    obs_vel = to_body(state.obs_vx, state.obs_vy)
    return np.array(
        [
            goal[0],
            goal[1],
            state.ego_radius,
            state.obs_radius,
            obs_pos[0],
            obs_pos[1],
            obs_vel[0],
            obs_vel[1],
        ]
    )


def _unit_towards(dx: float, dy: float) -> tuple[float, float]:
    d = math.hypot(dx, dy)
    if d < 1e-12:
        return 0.0, 0.0
    return dx / d, dy / d


def obstacle_policy(
    state: CollisionAvoidanceState,
    lam: float,
    rng: np.random.Generator,
    pref_speed: float = 1.0,
) -> tuple[float, float, bool]:
    """Velocity command for the obstacle at a decision window boundary.

    lam > 0: cooperative avoidance blended with goal seeking (lam = 0.5 does
    half the avoidance).  lam = 0: straight to its goal.  lam < 0: Bernoulli
    draw with parameter |lam|; on success the obstacle aims at the ego's
    position projected one horizon ahead, otherwise it heads to its goal.
    Returns (vx, vy, aiming_flag).
    """
    if not -1.0 <= lam <= 0.5:
        raise ValueError(f"collaboration coefficient must be in [-1, 0.5], got {lam}")
    gx, gy = _unit_towards(state.obs_goal_x - state.obs_x, state.obs_goal_y - state.obs_y)
    if lam < 0.0:
        if rng.uniform() < -lam:
            ex = state.ego_x + CA_PROJECTION_HORIZON * CA_SPEED * math.cos(state.ego_heading)
            ey = state.ego_y + CA_PROJECTION_HORIZON * CA_SPEED * math.sin(state.ego_heading)
            ax, ay = _unit_towards(ex - state.obs_x, ey - state.obs_y)
            return pref_speed * ax, pref_speed * ay, True
        return pref_speed * gx, pref_speed * gy, False
    if lam == 0.0:
        return pref_speed * gx, pref_speed * gy, False
    # Cooperative: steer to pass on the side that increases miss distance.
    rx, ry = state.ego_x - state.obs_x, state.ego_y - state.obs_y
    dist = math.hypot(rx, ry)
    side_x, side_y = 0.0, 0.0
    if dist < 4.0 * (state.ego_radius + state.obs_radius) and dist > 1e-9:
        cross = gx * ry - gy * rx  # which side of the goal ray the ego sits on
        sign = -1.0 if cross > 0.0 else 1.0
        side_x, side_y = -sign * gy, sign * gx
    vx = gx + 2.0 * lam * side_x
    vy = gy + 2.0 * lam * side_y
    ux, uy = _unit_towards(vx, vy)
    return pref_speed * ux, pref_speed * uy, False


@dataclass(frozen=True)
class CollisionScenarioConfig:
    """Sampling ranges for ca_reset; all distances in metres."""

    spawn_distance: tuple[float, float] = (4.0, 6.0)
    lateral_offset: tuple[float, float] = (-0.4, 0.4)
    radius_range: tuple[float, float] = (0.3, 0.5)
    obstacle_pref_speed: float = 1.0
    goal_tolerance: Optional[float] = None  # None -> ego radius
    max_steps: int = 200
    lam: float = 0.0


class CollisionAvoidanceEnv:
    """Ego agent with 11 heading-change actions at 1 m/s vs one moving obstacle."""

    name = "collision_avoidance"
    num_actions = CA_NUM_ACTIONS
    obs_dim = 8
    action_labels = tuple(f"heading_{i}" for i in range(CA_NUM_ACTIONS))

    def __init__(self, scenario: Optional[CollisionScenarioConfig] = None) -> None:
        self.scenario = scenario or CollisionScenarioConfig()
        self.state: Optional[CollisionAvoidanceState] = None
        self._rng: Optional[np.random.Generator] = None
        self._obs_cmd = (0.0, 0.0)
        self._outcome = "timeout"

    def reset(self, seed: "int | np.random.SeedSequence") -> CollisionAvoidanceState:
        # Crossing scenario: the obstacle cuts the ego-goal line near its
        # midpoint, with arrival times matched so the two meet unless one of
        # them yields.  Draw order is part of the fixture contract.
        cfg = self.scenario
        rng = np.random.Generator(np.random.PCG64(seed))
        self._rng = rng
        d = rng.uniform(*cfg.spawn_distance)
        ego_y = rng.uniform(*cfg.lateral_offset)
        goal_y = rng.uniform(*cfg.lateral_offset)
        cross_x = rng.uniform(*cfg.lateral_offset)
        arrival_jitter = rng.uniform(-0.6, 0.6)
        r_ego = rng.uniform(*cfg.radius_range)
        r_obs = rng.uniform(*cfg.radius_range)
        side = 1.0 if rng.uniform(-1.0, 1.0) >= 0.0 else -1.0
        ego = (-d / 2.0, ego_y)
        goal = (d / 2.0, goal_y)
        heading = math.atan2(goal[1] - ego[1], goal[0] - ego[0])
        time_to_cross = (cross_x - ego[0]) / CA_SPEED
        start_dist = max(1.0, time_to_cross * cfg.obstacle_pref_speed + arrival_jitter)
        self.state = CollisionAvoidanceState(
            ego_x=ego[0],
            ego_y=ego[1],
            ego_heading=heading,
            ego_radius=r_ego,
            goal_x=goal[0],
            goal_y=goal[1],
            obs_x=cross_x,
            obs_y=side * start_dist,
            obs_vx=0.0,
            obs_vy=0.0,
            obs_radius=r_obs,
            obs_goal_x=cross_x,
            obs_goal_y=-side * start_dist,
            lam=cfg.lam,
        )
        self._outcome = "timeout"
        # Initial obstacle command so velocity appears in the first observation.
        vx, vy, aiming = obstacle_policy(
            self.state, cfg.lam, rng, cfg.obstacle_pref_speed
        )
        self._obs_cmd = (vx, vy)
        self.state = replace(self.state, obs_vx=vx, obs_vy=vy, aiming=aiming)
        return self.state

    @property
    def goal_tolerance(self) -> float:
        if self.scenario.goal_tolerance is not None:
            return self.scenario.goal_tolerance
        return self.state.ego_radius

    def observe(self) -> np.ndarray:
        return ca_observe(self.state)

    def step(self, action: int) -> tuple[float, bool]:
        state = self.state
        if state is None:
            raise RuntimeError("step before reset")
        if not 0 <= action < CA_NUM_ACTIONS:
            raise ValueError(f"action index {action} out of [0, {CA_NUM_ACTIONS})")
        cfg = self.scenario
        heading = state.ego_heading + float(CA_HEADING_CHANGES[action])
        ego_x = state.ego_x + CA_SPEED * math.cos(heading) * CA_DT
        ego_y = state.ego_y + CA_SPEED * math.sin(heading) * CA_DT

        # lam == 0 holds the initial command: a straight constant-velocity line.
        steps_per_window = max(1, int(round(CA_DECISION_PERIOD / CA_DT)))
        aiming = state.aiming
        if state.lam != 0.0:
            if state.step_count % steps_per_window == 0 and state.step_count > 0:
                vx, vy, aiming = obstacle_policy(
                    state, state.lam, self._rng, cfg.obstacle_pref_speed
                )
            else:
                # Within a window the mode is held but the target is tracked.
                vx, vy = self._retarget(state, aiming, cfg.obstacle_pref_speed)
            self._obs_cmd = (vx, vy)
        vx, vy = self._obs_cmd
        obs_x = state.obs_x + vx * CA_DT
        obs_y = state.obs_y + vy * CA_DT

        nxt = replace(
            state,
            ego_x=ego_x,
            ego_y=ego_y,
            ego_heading=heading,
            obs_x=obs_x,
            obs_y=obs_y,
            obs_vx=vx,
            obs_vy=vy,
            time=state.time + CA_DT,
            step_count=state.step_count + 1,
            aiming=aiming,
        )
        self.state = nxt
        if nxt.collided():
            self._outcome = "collision"
            return REWARD_COLLISION, True
        if nxt.at_goal(self.goal_tolerance):
            self._outcome = "goal"
            return REWARD_GOAL, True
        if nxt.step_count >= cfg.max_steps:
            self._outcome = "timeout"
            return 0.0, True
        return 0.0, False

    def _retarget(
        self, state: CollisionAvoidanceState, aiming: bool, pref_speed: float
    ) -> tuple[float, float]:
        if state.lam < 0.0 and aiming:
            ex = state.ego_x + CA_PROJECTION_HORIZON * CA_SPEED * math.cos(state.ego_heading)
            ey = state.ego_y + CA_PROJECTION_HORIZON * CA_SPEED * math.sin(state.ego_heading)
            ux, uy = _unit_towards(ex - state.obs_x, ey - state.obs_y)
            return pref_speed * ux, pref_speed * uy
        if state.lam > 0.0:
            vx, vy, _ = obstacle_policy(state, state.lam, self._rng, pref_speed)
            return vx, vy
        ux, uy = _unit_towards(state.obs_goal_x - state.obs_x, state.obs_goal_y - state.obs_y)
        return pref_speed * ux, pref_speed * uy

    def outcome(self) -> str:
        return self._outcome

    def perturbation_mask(self) -> np.ndarray:
        mask = np.zeros(8)
        mask[4] = mask[5] = 1.0
        return mask


# ---------------------------------------------------------------------------
# Episode bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class EpisodeRecord:
    """Per-step trace of one episode: the experiment unit."""

    true_observations: list = field(default_factory=list)
    perturbed_observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    certificates: list = field(default_factory=list)
    outcome: str = ""

    def add_step(
        self,
        true_obs: np.ndarray,
        perturbed_obs: np.ndarray,
        action: int,
        reward: float,
        certificate: float,
    ) -> None:
        self.true_observations.append(true_obs)
        self.perturbed_observations.append(perturbed_obs)
        self.actions.append(action)
        self.rewards.append(reward)
        self.certificates.append(certificate)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))

    @property
    def num_steps(self) -> int:
        return len(self.actions)

    @property
    def mean_certificate(self) -> float:
        if not self.certificates:
            return 0.0
        return float(np.mean(self.certificates))
