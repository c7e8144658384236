#!/usr/bin/env python3
"""Offline DQN trainer producing portable weight files.

Usage:
    python train.py --env cartpole|collision_avoidance --out PATH --seed S [--steps N]

The export is refused (no file written) when the greedy evaluation reward of
the best snapshot falls below the per-environment threshold.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from dqn import DQNConfig, MLP, evaluate, train
from dynamics import CartpoleDynamics, CollisionAvoidanceDynamics

EVAL_EPISODES_FINAL = 100

ENV_PRESETS = {
    "cartpole": dict(
        factory=CartpoleDynamics,
        env_class=CartpoleDynamics,
        config=DQNConfig(
            hidden=(4, 4),
            steps=120_000,
            lr=1.5e-3,
            gamma=0.99,
            batch_size=64,
            buffer_size=50_000,
            learn_start=1_000,
            target_update=500,
            eps_start=1.0,
            eps_end=0.05,
            eps_decay_steps=30_000,
            eval_every=2_000,
            eval_episodes=20,
        ),
        export_threshold=195.0,
    ),
    "collision_avoidance": dict(
        factory=lambda: CollisionAvoidanceDynamics(train_lams=(0.0, 0.0, 0.5)),
        env_class=CollisionAvoidanceDynamics,
        config=DQNConfig(
            hidden=(32, 32),
            steps=600_000,
            lr=4e-4,
            gamma=0.97,
            batch_size=64,
            buffer_size=150_000,
            learn_start=2_000,
            target_update=2_000,
            eps_start=0.5,
            eps_end=0.05,
            eps_decay_steps=250_000,
            eval_every=20_000,
            eval_episodes=60,
            progress_scale=0.7,
        ),
        export_threshold=0.4,
    ),
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _vec(v) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def export_weight_file(net: MLP, env, path: Path, meta: dict) -> None:
    """Write the portable JSON weight format with 17-significant-digit floats."""
    parent = path.parent
    if str(parent) and not parent.exists():
        raise FileNotFoundError(f"export directory does not exist: {parent}")
    parts = ["{\n"]
    parts.append(f'  "input_dim": {env.obs_dim},\n')
    parts.append(f'  "action_labels": {json.dumps(list(env.action_labels))},\n')
    parts.append('  "layers": [\n')
    n_layers = len(net.weights)
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        rows = ",\n        ".join(_vec(row) for row in w)
        parts.append("    {\n")
        parts.append('      "weights": [\n        ' + rows + "\n      ],\n")
        parts.append(f'      "bias": {_vec(b)}\n')
        parts.append("    }" + ("," if k < n_layers - 1 else "") + "\n")
    parts.append("  ],\n")
    parts.append(f'  "meta": {json.dumps(meta, sort_keys=True)}\n')
    parts.append("}\n")
    path.write_text("".join(parts), encoding="utf-8")


def export_expected_values(net: MLP, env_name: str, path: Path, extra: dict) -> None:
    """Record reference outputs next to the fixture for consumer-side checks."""
    if env_name == "cartpole":
        obs = np.zeros(4)
    else:
        probe = CollisionAvoidanceDynamics(train_lams=(0.0,))
        obs = probe.reset(12345)
        extra = {**extra, "scenario_seed": 12345}
    q = net.q_single(obs)
    doc = {"obs": list(map(float, obs)), "q": list(map(float, q)), **extra}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--env", choices=sorted(ENV_PRESETS), required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=None)
    parser.add_argument("--threshold", type=float, default=None)
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    preset = ENV_PRESETS[args.env]
    cfg = preset["config"]
    if args.steps is not None:
        from dataclasses import replace

        cfg = replace(cfg, steps=args.steps)
    threshold = preset["export_threshold"] if args.threshold is None else args.threshold
    log = (lambda *_: None) if args.quiet else print

    result = train(preset["factory"], cfg, seed=args.seed, log=log)
    final_env = preset["factory"]()
    final_reward = evaluate(final_env, result.best_net, EVAL_EPISODES_FINAL, seed_base=777)
    log(f"final greedy evaluation over {EVAL_EPISODES_FINAL} episodes: {final_reward:.3f}")

    if final_reward < threshold:
        print(
            f"export refused: evaluation reward {final_reward:.3f} "
            f"below threshold {threshold:.3f}",
            file=sys.stderr,
        )
        return 1

    out = Path(args.out)
    meta = {
        "env": args.env,
        "observation_layout": preset["env_class"].layout_tag,
        "training_seed": args.seed,
        "greedy_eval_reward": final_reward,
    }
    export_weight_file(result.best_net, preset["env_class"], out, meta)
    export_expected_values(
        result.best_net,
        args.env,
        out.with_suffix("").parent / (out.stem + ".expected.json"),
        {"greedy_eval_reward": final_reward},
    )
    print(f"exported {out} (greedy eval reward {final_reward:.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
