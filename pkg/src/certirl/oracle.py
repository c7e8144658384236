"""Brute-force oracles for validating the certified bounds on small instances.

Everything here evaluates the network directly (grid, Monte-Carlo, corner
enumeration, plain interval arithmetic) and never looks inside the certified
bound computation, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .certify import EpsBall
from .netio import NetworkSpec, forward, forward_batch

__all__ = [
    "OracleReport",
    "GridTooLargeError",
    "grid_extrema",
    "monte_carlo_extrema",
    "corner_min_linear",
    "naive_interval_bounds",
]

MAX_GRID_DIMS = 4


class GridTooLargeError(ValueError):
    """Too many perturbable dimensions for exhaustive gridding."""


@dataclass(frozen=True)
class OracleReport:
    """Per-action sampled extrema of the network output over a ball."""

    sampled_min: np.ndarray
    sampled_max: np.ndarray
    grid_resolution: int
    num_samples: int
    corner_min: Optional[np.ndarray] = None
    corner_max: Optional[np.ndarray] = None
    naive_intervals: Optional[tuple] = None

    def __post_init__(self) -> None:
        if np.any(self.sampled_min > self.sampled_max):
            raise ValueError("sampled_min exceeds sampled_max")


def _ball_member_rows(ball: EpsBall, pts: np.ndarray) -> np.ndarray:
    """Vectorised membership over rows; zero-radius dims are pinned by construction."""
    free = ball.eps > 0.0
    if not free.any():
        return np.ones(pts.shape[0], dtype=bool)
    r = (pts[:, free] - ball.center[free]) / ball.eps[free]
    if ball.p == math.inf:
        norms = np.abs(r).max(axis=1)
    elif ball.p == 1.0:
        norms = np.abs(r).sum(axis=1)
    elif ball.p == 2.0:
        norms = np.sqrt((r * r).sum(axis=1))
    else:
        norms = (np.abs(r) ** ball.p).sum(axis=1) ** (1.0 / ball.p)
    return norms <= 1.0 + 1e-12


def grid_extrema(net: NetworkSpec, ball: EpsBall, resolution: int = 41) -> OracleReport:
    """Per-action min/max of forward() over a full grid of the ball.

    The grid spans the enclosing box with ``resolution`` points per
    perturbable dimension and is filtered by ball membership, so for p < inf
    the reported minimum is still an upper bound on the true worst case.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    free = np.flatnonzero(ball.eps > 0.0)
    if free.size > MAX_GRID_DIMS:
        raise GridTooLargeError(
            f"{free.size} perturbable dimensions exceed the grid limit of "
            f"{MAX_GRID_DIMS}; use monte_carlo_extrema instead"
        )
    if free.size == 0:
        q = forward(net, ball.center)
        return OracleReport(q.copy(), q.copy(), resolution, 1)
    axes = [
        np.linspace(ball.center[i] - ball.eps[i], ball.center[i] + ball.eps[i], resolution)
        for i in free
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.broadcast_to(ball.center, (mesh[0].size, ball.dim)).copy()
    for col, grid in zip(free, mesh):
        pts[:, col] = grid.ravel()
    keep = _ball_member_rows(ball, pts)
    pts = pts[keep]
    qs = _chunked_forward(net, pts)
    return OracleReport(qs.min(axis=0), qs.max(axis=0), resolution, pts.shape[0])


def monte_carlo_extrema(
    net: NetworkSpec, ball: EpsBall, n_samples: int, rng: np.random.Generator
) -> OracleReport:
    """Per-action extrema over i.i.d. uniform samples in the ball.

    Samples are drawn uniformly in the enclosing box and rejected when
    outside the ball (no rejection needed for p = inf).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    free = np.flatnonzero(ball.eps > 0.0)
    if free.size == 0:
        q = forward(net, ball.center)
        return OracleReport(q.copy(), q.copy(), 0, 1)
    lo = ball.center[free] - ball.eps[free]
    hi = ball.center[free] + ball.eps[free]
    accepted = []
    total = 0
    while total < n_samples:
        draw = rng.uniform(lo, hi, size=(max(n_samples, 1024), free.size))
        pts = np.broadcast_to(ball.center, (draw.shape[0], ball.dim)).copy()
        pts[:, free] = draw
        keep = _ball_member_rows(ball, pts)
        pts = pts[keep]
        if pts.shape[0]:
            accepted.append(pts)
            total += pts.shape[0]
    pts = np.concatenate(accepted)[:n_samples]
    qs = _chunked_forward(net, pts)
    return OracleReport(qs.min(axis=0), qs.max(axis=0), 0, n_samples)


def _chunked_forward(net: NetworkSpec, pts: np.ndarray, chunk: int = 200_000) -> np.ndarray:
    if pts.shape[0] <= chunk:
        return forward_batch(net, pts)
    outs = [forward_batch(net, pts[i : i + chunk]) for i in range(0, pts.shape[0], chunk)]
    return np.concatenate(outs)


def corner_min_linear(c: np.ndarray, gamma: float, lo: np.ndarray, hi: np.ndarray) -> float:
    """Exact minimum of c.s + gamma over the box [lo, hi]."""
    c = np.asarray(c, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    return float(gamma + np.minimum(c * lo, c * hi).sum())


def corner_enumeration_min(c: np.ndarray, gamma: float, lo: np.ndarray, hi: np.ndarray) -> float:
    """Reference 2^n corner sweep for corner_min_linear (n <= 20)."""
    n = len(c)
    if n > 20:
        raise ValueError("too many dimensions for corner enumeration")
    best = math.inf
    for bits in itertools.product((0, 1), repeat=n):
        s = np.where(np.asarray(bits, dtype=bool), hi, lo)
        best = min(best, float(c @ s + gamma))
    return best


def naive_interval_bounds(net: NetworkSpec, ball: EpsBall) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Plain interval arithmetic through the network: sound but loose.

    Returns (lower, upper) pre-activation intervals for every layer, over the
    enclosing box of the ball.  Kept as a debug reference: the certified
    per-neuron intervals must always be contained in these.
    """
    if ball.dim != net.input_dim:
        raise ValueError("ball dimension mismatch")
    out = []
    w1, b1 = net.layers[0]
    mid = w1 @ ball.center + b1
    rad = np.abs(w1 * ball.eps[None, :]).sum(axis=1)
    lo, hi = mid - rad, mid + rad
    out.append((lo, hi))
    for w, b in net.layers[1:]:
        a_lo = np.maximum(lo, 0.0)
        a_hi = np.maximum(hi, 0.0)
        mid = (a_lo + a_hi) / 2.0
        rad = (a_hi - a_lo) / 2.0
        z_mid = w @ mid + b
        z_rad = np.abs(w) @ rad
        lo, hi = z_mid - z_rad, z_mid + z_rad
        out.append((lo, hi))
    return tuple(out)
