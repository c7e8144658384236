"""Figure rendering for sweep results (written next to the CSV output)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_sweep_figures"]


def _curve_label(kind: str, magnitude: float, lam: float, multi_lam: bool) -> str:
    label = {"fgst": f"eps_adv={magnitude:g}", "noise": f"sigma={magnitude:g}"}.get(
        kind, "no attack"
    )
    if multi_lam:
        label += f", lambda={lam:g}"
    return label


def _groups(sweep):
    keys = sorted({(c.magnitude, c.lam) for c in sweep.cells})
    multi_lam = len({lam for _, lam in keys}) > 1
    for magnitude, lam in keys:
        cells = sorted(
            (c for c in sweep.cells if c.magnitude == magnitude and c.lam == lam),
            key=lambda c: c.eps_rob,
        )
        yield magnitude, lam, multi_lam, cells


def _curve_family(sweep, value, err, ylabel, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for magnitude, lam, multi_lam, cells in _groups(sweep):
        x = np.array([c.eps_rob for c in cells])
        y = np.array([value(c) for c in cells])
        e = np.array([err(c) for c in cells])
        label = _curve_label(sweep.config.attack, magnitude, lam, multi_lam)
        ax.plot(x, y, marker="o", label=label)
        ax.fill_between(x, y - e, y + e, alpha=0.2)
    ax.set_xlabel("eps_rob")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_sweep_figures(sweep, out_dir: Path) -> list[Path]:
    from .harness import best_eps_rob

    written = []
    written.append(
        _curve_family(
            sweep,
            lambda c: c.mean_reward,
            lambda c: c.std_reward,
            "mean reward",
            out_dir / "reward_vs_eps_rob.png",
        )
    )
    if sweep.config.env == "collision_avoidance":
        written.append(
            _curve_family(
                sweep,
                lambda c: c.collision_rate,
                lambda c: c.std_collision_rate,
                "collision rate",
                out_dir / "collisions_vs_eps_rob.png",
            )
        )
    table = best_eps_rob(sweep)
    fig, ax = plt.subplots(figsize=(5, 4))
    xs = [m for m, _, _, _ in table]
    ys = [e for _, _, e, _ in table]
    ax.scatter(xs, ys, marker="x", color="tab:red")
    xlabel = {"fgst": "eps_adv", "noise": "sigma"}.get(sweep.config.attack, "magnitude")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("reward-maximizing eps_rob")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = out_dir / "best_eps_rob.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written
