"""Training-side mirror of the simulator dynamics.

This component deliberately re-implements the environments instead of
importing them; the equations, constants, observation layouts, and reset
sampling are the shared contract with the consumer of the exported weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CARTPOLE_LAYOUT_TAG = "cartpole/x-v-theta-thetadot/v1"
COLLISION_LAYOUT_TAG = "collision-avoidance/ego-frame-8d/v1"


class CartpoleDynamics:
    """Frictionless cart-pole, explicit Euler at 0.02 s, +/-12 deg, +/-2.4 m."""

    gravity = 9.8
    cart_mass = 1.0
    pole_mass = 0.1
    half_length = 0.5
    force_mag = 10.0
    tau = 0.02
    theta_limit = 12.0 * math.pi / 180.0
    x_limit = 2.4
    max_steps = 200

    num_actions = 2
    obs_dim = 4
    action_labels = ("push_left", "push_right")
    layout_tag = CARTPOLE_LAYOUT_TAG

    def __init__(self) -> None:
        self.state = np.zeros(4)
        self.steps = 0

    def reset(self, seed) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(seed))
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self.steps = 0
        return self.state.copy()

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool]:
        """Returns (obs, reward, terminal, truncated)."""
        x, v, theta, theta_dot = self.state
        force = self.force_mag if action == 1 else -self.force_mag
        total_mass = self.cart_mass + self.pole_mass
        pml = self.pole_mass * self.half_length
        sin_t, cos_t = math.sin(theta), math.cos(theta)
        temp = (force + pml * theta_dot**2 * sin_t) / total_mass
        theta_acc = (self.gravity * sin_t - cos_t * temp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos_t**2 / total_mass)
        )
        x_acc = temp - pml * theta_acc * cos_t / total_mass
        self.state = np.array(
            [
                x + self.tau * v,
                v + self.tau * x_acc,
                theta + self.tau * theta_dot,
                theta_dot + self.tau * theta_acc,
            ]
        )
        self.steps += 1
        terminal = abs(self.state[0]) > self.x_limit or abs(self.state[2]) > self.theta_limit
        truncated = not terminal and self.steps >= self.max_steps
        return self.state.copy(), 1.0, terminal, truncated


@dataclass
class CollisionScenario:
    spawn_distance: tuple[float, float] = (4.0, 6.0)
    lateral_offset: tuple[float, float] = (-0.4, 0.4)
    radius_range: tuple[float, float] = (0.3, 0.5)
    obstacle_pref_speed: float = 1.0
    max_steps: int = 200


class CollisionAvoidanceDynamics:
    """Unicycle ego (11 heading actions, 1 m/s, dt 0.1 s) vs one obstacle.

    Observation layout (ego-centred, world axes):
    [goal_dx, goal_dy, r_ego, r_obs, obs_px, obs_py, obs_vx, obs_vy].
    """

    num_actions = 11
    obs_dim = 8
    action_labels = tuple(f"heading_{i}" for i in range(11))
    layout_tag = COLLISION_LAYOUT_TAG
    heading_changes = np.linspace(-math.pi / 6.0, math.pi / 6.0, 11)
    speed = 1.0
    dt = 0.1
    decision_period_steps = 10
    projection_horizon = 1.0

    def __init__(self, scenario: CollisionScenario | None = None, train_lams=(0.0, 0.5)) -> None:
        self.scenario = scenario or CollisionScenario()
        self.train_lams = train_lams
        self.rng = np.random.default_rng(0)

    def reset(self, seed) -> np.ndarray:
        # Mirrors the consumer's crossing scenario, including the draw order.
        cfg = self.scenario
        rng = np.random.Generator(np.random.PCG64(seed))
        self.rng = rng
        d = rng.uniform(*cfg.spawn_distance)
        ego_y = rng.uniform(*cfg.lateral_offset)
        goal_y = rng.uniform(*cfg.lateral_offset)
        cross_x = rng.uniform(*cfg.lateral_offset)
        arrival_jitter = rng.uniform(-0.6, 0.6)
        self.r_ego = rng.uniform(*cfg.radius_range)
        self.r_obs = rng.uniform(*cfg.radius_range)
        side = 1.0 if rng.uniform(-1.0, 1.0) >= 0.0 else -1.0
        self.ego = np.array([-d / 2.0, ego_y])
        self.goal = np.array([d / 2.0, goal_y])
        self.heading = math.atan2(self.goal[1] - self.ego[1], self.goal[0] - self.ego[0])
        time_to_cross = (cross_x - self.ego[0]) / self.speed
        start_dist = max(1.0, time_to_cross * cfg.obstacle_pref_speed + arrival_jitter)
        self.obs = np.array([cross_x, side * start_dist])
        self.obs_goal = np.array([cross_x, -side * start_dist])
        self.lam = float(self.rng.choice(self.train_lams)) if self.train_lams else 0.0
        self.steps = 0
        self.aiming = False
        self.obs_vel = self._obstacle_command()
        return self.observe()

    def _unit(self, vec: np.ndarray) -> np.ndarray:
        n = float(np.hypot(vec[0], vec[1]))
        if n < 1e-12:
            return np.zeros(2)
        return vec / n

    def _obstacle_command(self) -> np.ndarray:
        cfg = self.scenario
        goal_dir = self._unit(self.obs_goal - self.obs)
        if self.lam < 0.0:
            if self.rng.uniform() < -self.lam:
                self.aiming = True
            else:
                self.aiming = False
        if self.lam < 0.0 and self.aiming:
            projected = self.ego + self.projection_horizon * self.speed * np.array(
                [math.cos(self.heading), math.sin(self.heading)]
            )
            return cfg.obstacle_pref_speed * self._unit(projected - self.obs)
        if self.lam > 0.0:
            rel = self.ego - self.obs
            dist = float(np.hypot(rel[0], rel[1]))
            side = np.zeros(2)
            if 1e-9 < dist < 4.0 * (self.r_ego + self.r_obs):
                cross = goal_dir[0] * rel[1] - goal_dir[1] * rel[0]
                sign = -1.0 if cross > 0.0 else 1.0
                side = np.array([-sign * goal_dir[1], sign * goal_dir[0]])
            return cfg.obstacle_pref_speed * self._unit(goal_dir + 2.0 * self.lam * side)
        return cfg.obstacle_pref_speed * goal_dir

    def _track_target(self) -> np.ndarray:
        cfg = self.scenario
        if self.lam < 0.0 and self.aiming:
            projected = self.ego + self.projection_horizon * self.speed * np.array(
                [math.cos(self.heading), math.sin(self.heading)]
            )
            return cfg.obstacle_pref_speed * self._unit(projected - self.obs)
        if self.lam > 0.0:
            return self._obstacle_command()
        return cfg.obstacle_pref_speed * self._unit(self.obs_goal - self.obs)

    def observe(self) -> np.ndarray:
        cos_h, sin_h = math.cos(self.heading), math.sin(self.heading)

        def to_body(dx: float, dy: float) -> tuple[float, float]:
            return cos_h * dx + sin_h * dy, -sin_h * dx + cos_h * dy

        goal = to_body(self.goal[0] - self.ego[0], self.goal[1] - self.ego[1])
        obs_pos = to_body(self.obs[0] - self.ego[0], self.obs[1] - self.ego[1])
        obs_vel = to_body(self.obs_vel[0], self.obs_vel[1])
        return np.array(
            [goal[0], goal[1], self.r_ego, self.r_obs, obs_pos[0], obs_pos[1], obs_vel[0], obs_vel[1]]
        )

    def step(self, action: int) -> tuple[np.ndarray, float, bool, bool]:
        self.heading += float(self.heading_changes[action])
        self.ego = self.ego + self.speed * self.dt * np.array(
            [math.cos(self.heading), math.sin(self.heading)]
        )
        if self.lam != 0.0:
            if self.steps % self.decision_period_steps == 0 and self.steps > 0:
                self.obs_vel = self._obstacle_command()
            else:
                self.obs_vel = self._track_target()
        self.obs = self.obs + self.obs_vel * self.dt
        self.steps += 1
        dist = float(np.hypot(*(self.obs - self.ego)))
        reward, terminal, truncated = 0.0, False, False
        if dist < self.r_ego + self.r_obs:
            reward, terminal = -0.25, True
        elif float(np.hypot(*(self.goal - self.ego))) < self.r_ego:
            reward, terminal = 1.0, True
        elif self.steps >= self.scenario.max_steps:
            truncated = True
        return self.observe(), reward, terminal, truncated

    def goal_distance(self) -> float:
        return float(np.hypot(*(self.goal - self.ego)))
