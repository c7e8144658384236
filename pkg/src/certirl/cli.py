"""certirl command line: run sweeps, certify single observations, verify bounds.

Exit codes: 0 success, 1 validation error, 2 failed verification.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import decide, harness, oracle
from .certify import EpsBall, bounds_all_actions
from .netio import load_network

_OVERRIDE_KEYS = [
    ("env", "--env"),
    ("weights", "--weights"),
    ("rule", "--rule"),
    ("lambda_sens", "--lambda-sens"),
    ("eps_rob", "--eps-rob"),
    ("p_rob", "--p-rob"),
    ("attack", "--attack"),
    ("eps_adv", "--eps-adv"),
    ("sigma", "--sigma"),
    ("lam", "--lambda"),
    ("episodes", "--episodes"),
    ("seeds", "--seeds"),
    ("out", "--out"),
]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="certirl",
        description="Certified Q-value bounds and robust action selection experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment sweep and write CSV/plots")
    run.add_argument("--config", help="INI config file with an [experiment] section")
    for key, flag in _OVERRIDE_KEYS:
        run.add_argument(flag, dest=key, default=None)
    run.add_argument("--no-plots", action="store_true", default=None)

    cert = sub.add_parser("certify", help="print certified per-action bounds at one observation")
    cert.add_argument("--weights", required=True)
    cert.add_argument("--obs", required=True, help="comma-separated observation vector")
    cert.add_argument("--eps-rob", required=True, help="scalar or per-dimension comma list")
    cert.add_argument("--p-rob", default="inf")

    verify = sub.add_parser("verify-bounds", help="run the brute-force soundness suite")
    verify.add_argument("--trials", type=int, default=50)
    verify.add_argument("--seed", type=int, default=0)
    return parser


def _check_cli_norm(p: float) -> float:
    # the library accepts any p > 1; the command line exposes the three
    # orders the experiments use
    if p not in (1.0, 2.0, math.inf):
        raise ValueError(f"--p-rob must be one of 1, 2, inf (got {p:g})")
    return p


def _cmd_run(args) -> int:
    overrides = {}
    for key, _ in _OVERRIDE_KEYS:
        raw = getattr(args, key)
        if raw is not None:
            overrides[key] = harness.parse_value(key, str(raw))
    if args.no_plots:
        overrides["no_plots"] = True
    if args.config:
        config = harness.load_config(args.config, overrides)
    else:
        config = harness.ExperimentConfig(**overrides)
    _check_cli_norm(config.p_rob)
    if not config.weights:
        raise ValueError("a weights file is required (--weights or config key)")
    sweep = harness.run_sweep(config, progress=lambda msg: print(msg, flush=True))
    written = harness.emit_outputs(sweep, config.out)
    for path in written:
        print(f"wrote {path}")
    for magnitude, lam, eps, reward in harness.best_eps_rob(sweep):
        print(
            f"best eps_rob for {config.attack} magnitude {magnitude:g} "
            f"(lambda={lam:g}): {eps:g} (mean reward {reward:.3f})"
        )
    return 0


def _cmd_certify(args) -> int:
    net = load_network(args.weights)
    obs = np.array([float(t) for t in args.obs.split(",") if t.strip()])
    eps_vals = harness.parse_value("eps_rob", args.eps_rob)
    if len(eps_vals) == 1:
        eps = np.full(net.input_dim, eps_vals[0])
    elif len(eps_vals) == net.input_dim:
        eps = np.array(eps_vals)
    else:
        raise ValueError(
            f"--eps-rob needs 1 or {net.input_dim} values, got {len(eps_vals)}"
        )
    p = _check_cli_norm(harness.parse_value("p_rob", args.p_rob))
    bounds = bounds_all_actions(net, EpsBall(obs, eps, p))
    decision = decide.carrl_action(bounds)
    width = max(len(s) for s in net.action_labels)
    for j, label in enumerate(net.action_labels):
        marker = " <- chosen" if j == decision.action_index else ""
        print(
            f"{label:<{width}}  Q_l={bounds.q_lower[j]: .6f}  "
            f"Q_u={bounds.q_upper[j]: .6f}{marker}"
        )
    print(f"certificate (sub-optimality bound): {decision.certificate:.6f}")
    return 0


def _random_net(rng: np.random.Generator):
    from .netio import NetworkSpec

    dims = [int(rng.integers(1, 5))]
    for _ in range(int(rng.integers(1, 4))):
        dims.append(int(rng.integers(2, 17)))
    dims.append(int(rng.integers(2, 5)))
    layers = []
    for a, b in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, 1.0 / math.sqrt(a), size=(b, a))
        bias = rng.normal(0.0, 0.1, size=b)
        layers.append((w, bias))
    labels = tuple(f"a{i}" for i in range(dims[-1]))
    return NetworkSpec(tuple(layers), dims[0], labels)


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    for trial in range(args.trials):
        net = _random_net(rng)
        center = rng.normal(0.0, 1.0, size=net.input_dim)
        eps_scalar = float(rng.choice([0.01, 0.1, 0.5]))
        p = float(rng.choice([1.0, 2.0, np.inf]))
        ball = EpsBall(center, np.full(net.input_dim, eps_scalar), p)
        bounds = bounds_all_actions(net, ball)
        report = oracle.monte_carlo_extrema(net, ball, 2000, rng)
        ok = bool(
            np.all(bounds.q_lower - 1e-9 <= report.sampled_min)
            and np.all(report.sampled_max <= bounds.q_upper + 1e-9)
        )
        if net.input_dim <= oracle.MAX_GRID_DIMS:
            grid = oracle.grid_extrema(net, ball, resolution=9)
            ok = ok and bool(
                np.all(bounds.q_lower - 1e-9 <= grid.sampled_min)
                and np.all(grid.sampled_max <= bounds.q_upper + 1e-9)
            )
        status = "ok" if ok else "VIOLATION"
        if not ok:
            failures += 1
        print(f"trial {trial:3d}: dim={net.input_dim} p={p:g} eps={eps_scalar:g} {status}")
    if failures:
        print(f"{failures}/{args.trials} trials violated the certified bounds")
        return 2
    print(f"all {args.trials} trials sound")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "certify":
            return _cmd_certify(args)
        return _cmd_verify(args)
    except (ValueError, FileNotFoundError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
