"""Experiment runner: sweeps robustness radii x perturbations over seeded episodes.

A sweep is a Cartesian product of cells (eps_rob, perturbation magnitude,
behavioural lambda); each cell runs `episodes` episodes for every seed.
Episode RNG streams derive from (seed, episode index) only, so the same
episodes are replayed across cells and the eps_rob = 0 column of a sweep
matches a plain greedy rollout of the same seeds.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import adversary, decide
from .certify import EpsBall, bounds_all_actions
from .envs import (
    OBSERVATION_LAYOUTS,
    CartpoleEnv,
    CollisionAvoidanceEnv,
    CollisionScenarioConfig,
    EpisodeRecord,
)
from .netio import NetworkSpec, load_network

__all__ = [
    "ExperimentConfig",
    "CellStats",
    "SweepResult",
    "run_episode",
    "run_sweep",
    "best_eps_rob",
    "sigma_to_eps",
    "emit_outputs",
    "CSV_HEADER",
]

RULES = ("carrl", "rs", "policy", "nominal")
ENV_NAMES = ("cartpole", "collision_avoidance")
ATTACKS = ("none", "fgst", "noise")

CSV_HEADER = [
    "env",
    "rule",
    "eps_rob",
    "p_rob",
    "kind",
    "eps_adv",
    "sigma",
    "lambda",
    "seed",
    "mean_reward",
    "collision_rate",
    "goal_rate",
    "timeout_rate",
    "mean_certificate",
]


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "cartpole"
    weights: str = ""
    rule: str = "carrl"
    lambda_sens: float = 0.0
    eps_rob: tuple[float, ...] = (0.0,)
    p_rob: float = math.inf
    attack: str = "none"
    eps_adv: tuple[float, ...] = (0.0,)
    sigma: tuple[float, ...] = (0.0,)
    lam: tuple[float, ...] = (0.0,)
    episodes: int = 10
    seeds: tuple[int, ...] = (0,)
    out: str = "results"
    no_plots: bool = False
    # collision-avoidance scenario ranges
    ca_spawn_min: float = 4.0
    ca_spawn_max: float = 6.0
    ca_offset: float = 0.4
    ca_radius_min: float = 0.3
    ca_radius_max: float = 0.5
    ca_pref_speed: float = 1.0
    ca_max_steps: int = 200

    def __post_init__(self) -> None:
        if self.env not in ENV_NAMES:
            raise ValueError(f"unknown env {self.env!r}")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.attack not in ATTACKS:
            raise ValueError(f"unknown attack {self.attack!r}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        for name in ("eps_rob", "eps_adv", "sigma", "lam", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"sweep list {name!r} must be non-empty")
        if self.lambda_sens < 0.0:
            raise ValueError("lambda_sens must be nonnegative")

    def scenario(self, lam: float) -> CollisionScenarioConfig:
        return CollisionScenarioConfig(
            spawn_distance=(self.ca_spawn_min, self.ca_spawn_max),
            lateral_offset=(-self.ca_offset, self.ca_offset),
            radius_range=(self.ca_radius_min, self.ca_radius_max),
            obstacle_pref_speed=self.ca_pref_speed,
            max_steps=self.ca_max_steps,
            lam=lam,
        )


_LIST_FIELDS = {"eps_rob", "eps_adv", "sigma", "lam", "seeds"}
_FLOAT_FIELDS = {
    "lambda_sens",
    "ca_spawn_min",
    "ca_spawn_max",
    "ca_offset",
    "ca_radius_min",
    "ca_radius_max",
    "ca_pref_speed",
}
_INT_FIELDS = {"episodes", "ca_max_steps"}
_BOOL_FIELDS = {"no_plots"}


def _parse_float(token: str) -> float:
    return math.inf if token.strip().lower() in ("inf", "infinity") else float(token)


def parse_value(key: str, raw: str):
    """Parse one config/CLI value into its ExperimentConfig field type."""
    raw = raw.strip()
    if key in _LIST_FIELDS:
        items = [t for t in raw.replace(" ", "").split(",") if t]
        if key == "seeds":
            return tuple(int(t) for t in items)
        return tuple(_parse_float(t) for t in items)
    if key == "p_rob":
        return _parse_float(raw)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _INT_FIELDS:
        return int(raw)
    if key in _BOOL_FIELDS:
        return raw.lower() in ("1", "true", "yes", "on")
    return raw


def load_config(path: str | Path, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Read a flat INI config ([experiment] section) and apply CLI overrides."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    if "experiment" not in parser:
        raise ValueError(f"config {path} must contain an [experiment] section")
    valid = set(ExperimentConfig.__dataclass_fields__)
    kwargs = {}
    for key, raw in parser["experiment"].items():
        key = "lam" if key == "lambda" else key
        if key not in valid:
            raise ValueError(f"unknown config key {key!r}")
        kwargs[key] = parse_value(key, raw)
    cfg = ExperimentConfig(**kwargs)
    if overrides:
        cfg = replace(cfg, **overrides)
    return cfg


# ---------------------------------------------------------------------------
# Episode execution
# ---------------------------------------------------------------------------


def _make_env(config: ExperimentConfig, lam: float):
    if config.env == "cartpole":
        return CartpoleEnv()
    return CollisionAvoidanceEnv(config.scenario(lam))


def _episode_streams(seed: int, episode: int) -> tuple[np.random.SeedSequence, np.random.Generator]:
    env_seed = np.random.SeedSequence((seed, episode))
    noise_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, episode, 1))))
    return env_seed, noise_rng


def run_episode(
    env,
    net: NetworkSpec,
    rule: str,
    eps_rob: np.ndarray,
    p_rob: float,
    perturbation: adversary.PerturbationSpec,
    env_seed,
    noise_rng: Optional[np.random.Generator] = None,
    lambda_sens: float = 0.0,
) -> EpisodeRecord:
    """Roll one episode: perturb, bound, decide, step; record every step."""
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    eps_rob = np.asarray(eps_rob, dtype=np.float64)
    record = EpisodeRecord()
    env.reset(env_seed)
    done = False
    while not done:
        true_obs = env.observe()
        s_adv = adversary.apply(perturbation, net, true_obs, noise_rng)
        if rule == "nominal":
            decision = decide.nominal_action(net, s_adv)
        else:
            bounds = bounds_all_actions(net, EpsBall(s_adv, eps_rob, p_rob))
            if rule == "carrl":
                decision = decide.carrl_action(bounds)
            elif rule == "rs":
                decision = decide.reduced_sensitivity_action(bounds, lambda_sens)
            else:
                decision = decide.policy_logit_action(bounds)
        reward, done = env.step(decision.action_index)
        record.add_step(true_obs, s_adv, decision.action_index, reward, decision.certificate)
    record.outcome = env.outcome()
    return record


@dataclass(frozen=True)
class CellStats:
    """Aggregate for one sweep cell (or one cell-seed when seed is not None)."""

    eps_rob: float
    kind: str
    magnitude: float
    lam: float
    seed: Optional[int]
    mean_reward: float
    collision_rate: float
    goal_rate: float
    timeout_rate: float
    mean_certificate: float
    std_reward: float = 0.0
    std_collision_rate: float = 0.0


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[CellStats] = field(default_factory=list)  # one per cell-seed
    cells: list[CellStats] = field(default_factory=list)  # mean +/- std across seeds


def _perturbation(config: ExperimentConfig, magnitude: float, mask: np.ndarray):
    if config.attack == "fgst":
        return adversary.PerturbationSpec(kind="fgst", eps_adv=magnitude * mask)
    if config.attack == "noise":
        return adversary.PerturbationSpec(kind="uniform_noise", sigma=magnitude * mask)
    return adversary.PerturbationSpec(kind="none")


def _seed_stats(records: list[EpisodeRecord], is_ca: bool) -> tuple[float, float, float, float, float]:
    n = len(records)
    mean_reward = float(np.mean([r.total_reward for r in records]))
    mean_cert = float(np.mean([r.mean_certificate for r in records]))
    if is_ca:
        coll = sum(r.outcome == "collision" for r in records) / n
        goal = sum(r.outcome == "goal" for r in records) / n
        tout = sum(r.outcome == "timeout" for r in records) / n
    else:
        coll = goal = tout = 0.0
    return mean_reward, coll, goal, tout, mean_cert


def run_sweep(
    config: ExperimentConfig,
    net: Optional[NetworkSpec] = None,
    progress: Optional[Callable[[str], None]] = None,
) -> SweepResult:
    """Cartesian sweep with per-cell aggregation (mean per seed, then across seeds)."""
    if net is None:
        net = load_network(config.weights)
    declared = net.meta.get("observation_layout") if isinstance(net.meta, dict) else None
    if declared is not None and declared != OBSERVATION_LAYOUTS[config.env]:
        raise ValueError(
            f"weight file observation_layout {declared!r} does not match the "
            f"{config.env} layout {OBSERVATION_LAYOUTS[config.env]!r}"
        )
    magnitudes = {
        "none": (0.0,),
        "fgst": config.eps_adv,
        "noise": config.sigma,
    }[config.attack]
    lams = config.lam if config.env == "collision_avoidance" else (0.0,)
    is_ca = config.env == "collision_avoidance"
    result = SweepResult(config=config)
    for lam in lams:
        for magnitude in magnitudes:
            for eps_rob in config.eps_rob:
                per_seed = []
                for seed in config.seeds:
                    env = _make_env(config, lam)
                    mask = env.perturbation_mask()
                    if mask.shape[0] != net.input_dim:
                        raise ValueError(
                            f"network input_dim {net.input_dim} does not match "
                            f"{config.env} observation dim {mask.shape[0]}"
                        )
                    pert = _perturbation(config, magnitude, mask)
                    eps_vec = eps_rob * mask
                    records = []
                    for ep in range(config.episodes):
                        env_seed, noise_rng = _episode_streams(seed, ep)
                        records.append(
                            run_episode(
                                env,
                                net,
                                config.rule,
                                eps_vec,
                                config.p_rob,
                                pert,
                                env_seed,
                                noise_rng,
                                config.lambda_sens,
                            )
                        )
                    stats = _seed_stats(records, is_ca)
                    row = CellStats(eps_rob, config.attack, magnitude, lam, seed, *stats)
                    result.rows.append(row)
                    per_seed.append(row)
                result.cells.append(_aggregate_cell(per_seed))
                if progress is not None:
                    cell = result.cells[-1]
                    progress(
                        f"cell eps_rob={eps_rob:g} {config.attack}={magnitude:g} "
                        f"lambda={lam:g}: reward {cell.mean_reward:.3f} "
                        f"+/- {cell.std_reward:.3f}"
                    )
    return result


def _aggregate_cell(per_seed: list[CellStats]) -> CellStats:
    rewards = np.array([r.mean_reward for r in per_seed])
    colls = np.array([r.collision_rate for r in per_seed])
    first = per_seed[0]
    return CellStats(
        eps_rob=first.eps_rob,
        kind=first.kind,
        magnitude=first.magnitude,
        lam=first.lam,
        seed=None,
        mean_reward=float(rewards.mean()),
        collision_rate=float(colls.mean()),
        goal_rate=float(np.mean([r.goal_rate for r in per_seed])),
        timeout_rate=float(np.mean([r.timeout_rate for r in per_seed])),
        mean_certificate=float(np.mean([r.mean_certificate for r in per_seed])),
        std_reward=float(rewards.std()),
        std_collision_rate=float(colls.std()),
    )


def best_eps_rob(sweep: SweepResult) -> list[tuple[float, float, float, float]]:
    """Per (magnitude, lambda): the reward-maximizing eps_rob (ties -> smaller).

    Returns rows (magnitude, lam, best_eps_rob, best_mean_reward).
    """
    table = []
    keys = sorted({(c.magnitude, c.lam) for c in sweep.cells})
    for magnitude, lam in keys:
        group = sorted(
            (c for c in sweep.cells if c.magnitude == magnitude and c.lam == lam),
            key=lambda c: c.eps_rob,
        )
        best = group[0]
        for cell in group[1:]:
            if cell.mean_reward > best.mean_reward:
                best = cell
        table.append((magnitude, lam, best.eps_rob, best.mean_reward))
    return table


def sigma_to_eps(sigma: np.ndarray, k: float) -> np.ndarray:
    """Map a sensor noise scale to a robustness radius: eps = k * sigma."""
    if k < 0.0:
        raise ValueError("confidence multiplier must be nonnegative")
    return k * np.asarray(sigma, dtype=np.float64)


def _csv_num(x: float) -> str:
    return format(x, ".17g")


def emit_outputs(sweep: SweepResult, out_dir: str | Path, no_plots: Optional[bool] = None) -> list[Path]:
    """Write sweep.csv (one row per cell-seed) and the standard figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = sweep.config
    written = []
    csv_path = out / "sweep.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in sweep.rows:
            writer.writerow(
                [
                    cfg.env,
                    cfg.rule,
                    _csv_num(row.eps_rob),
                    "inf" if cfg.p_rob == math.inf else _csv_num(cfg.p_rob),
                    cfg.attack,
                    _csv_num(row.magnitude if cfg.attack == "fgst" else 0.0),
                    _csv_num(row.magnitude if cfg.attack == "noise" else 0.0),
                    _csv_num(row.lam),
                    row.seed,
                    _csv_num(row.mean_reward),
                    _csv_num(row.collision_rate),
                    _csv_num(row.goal_rate),
                    _csv_num(row.timeout_rate),
                    _csv_num(row.mean_certificate),
                ]
            )
    written.append(csv_path)
    skip_plots = cfg.no_plots if no_plots is None else no_plots
    if not skip_plots:
        from . import plots

        written.extend(plots.render_sweep_figures(sweep, out))
    return written
