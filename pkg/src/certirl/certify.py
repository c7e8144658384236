"""Guaranteed lower/upper bounds on network outputs over a vector-radius ball.

Every ReLU is replaced by a pair of parallel linear envelopes whose slope is
  D = 1            if the pre-activation interval [l, u] is certainly positive,
  D = 0            if it is certainly negative,
  D = u / (u - l)  if it straddles zero ("undecided").
For an undecided neuron, D*z lower-bounds relu(z) and D*(z - l) upper-bounds
it on [l, u].  Composing the envelopes layer by layer yields, for output j,
an affine bound  A_j s + Gamma_j  valid at every state s in the input box;
minimising/maximising that affine function over the ball is a dual-norm
evaluation, which gives the closed forms

  q_lower_j = -||eps * A_j||_q + A_j . center + Gamma_lo_j
  q_upper_j = +||eps * A_j||_q + A_j . center + Gamma_up_j

with 1/p + 1/q = 1.  A is built backwards from the output, A <- (A D) W, and
the intercept correction picks l for each undecided neuron whose accumulated
coefficient is negative (lower bound) or positive (upper bound).  A depends
only on the slopes, so one backward sweep serves both bounds.

Intermediate pre-activation intervals are obtained by the same machinery,
treating each hidden layer in turn as a temporary output over the enclosing
box of the ball (dual exponent 1); the requested p enters only in the final
output step.  The intervals are used as computed, with no interval-arithmetic
intersection: tightening them against the clamped-ReLU box flips relaxation
statuses between nearby radii, which measurably breaks the monotone growth
of the output bounds in eps.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .netio import NetworkSpec

__all__ = [
    "ReluStatus",
    "ReluRelaxation",
    "EpsBall",
    "LayerBounds",
    "BoundsResult",
    "dual_exponent",
    "relu_relaxation",
    "layer_prebounds",
    "lower_bound_output",
    "upper_bound_output",
    "bounds_all_actions",
]

# Absolute slack on the normalised radius in the membership test; absorbs the
# rounding of (s - center) / eps at the ball perimeter.
_MEMBERSHIP_SLACK = 1e-12


def dual_exponent(p: float) -> float:
    """q with 1/p + 1/q = 1 (q=1 for p=inf, q=inf for p=1)."""
    if p == math.inf:
        return 1.0
    if p == 1.0:
        return math.inf
    if p <= 1.0:
        raise ValueError(f"norm order must satisfy p >= 1, got {p}")
    return p / (p - 1.0)


@dataclass(frozen=True)
class EpsBall:
    """States within per-dimension radius eps of center under the rescaled l_p norm."""

    center: np.ndarray
    eps: np.ndarray
    p: float

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64)
        eps = np.asarray(self.eps, dtype=np.float64)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "eps", eps)
        if center.ndim != 1 or eps.shape != center.shape:
            raise ValueError("center and eps must be 1-D vectors of equal length")
        if not np.isfinite(center).all():
            raise ValueError("center must be finite")
        if not (np.isfinite(eps).all() and (eps >= 0.0).all()):
            raise ValueError("eps must be finite and nonnegative")
        if self.p < 1.0:
            raise ValueError(f"norm order must satisfy p >= 1, got {self.p}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    def contains(self, s: np.ndarray) -> bool:
        """Membership: rescaled l_p norm <= 1; zero-radius dims must match exactly."""
        s = np.asarray(s, dtype=np.float64)
        if s.shape != self.center.shape:
            raise ValueError("point dimension mismatch")
        zero = self.eps == 0.0
        if not np.array_equal(s[zero], self.center[zero]):
            return False
        if not zero.all():
            r = (s[~zero] - self.center[~zero]) / self.eps[~zero]
            if _pnorm(r, self.p) > 1.0 + _MEMBERSHIP_SLACK:
                return False
        return True

    def box(self) -> tuple[np.ndarray, np.ndarray]:
        """Enclosing axis-aligned box [center - eps, center + eps]."""
        return self.center - self.eps, self.center + self.eps


def _pnorm(x: np.ndarray, p: float) -> float:
    if p == math.inf:
        return float(np.max(np.abs(x))) if x.size else 0.0
    if p == 1.0:
        return float(np.sum(np.abs(x)))
    if p == 2.0:
        return float(np.linalg.norm(x))
    return float(np.sum(np.abs(x) ** p) ** (1.0 / p))


class ReluStatus(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class ReluRelaxation:
    """Linear envelopes slope*z + intercept around relu(z) on [l, u]."""

    status: ReluStatus
    slope: float
    lower_intercept: float
    upper_intercept: float


def relu_relaxation(l: float, u: float) -> ReluRelaxation:
    """Classify one ReLU from its pre-activation interval and return its envelopes.

    A bound exactly at 0 counts as decided (l >= 0 active, u <= 0 inactive);
    the zero-width case is exact either way.
    """
    if l > u:
        raise ValueError(f"invalid interval: l={l} > u={u}")
    if l >= 0.0:
        return ReluRelaxation(ReluStatus.ACTIVE, 1.0, 0.0, 0.0)
    if u <= 0.0:
        return ReluRelaxation(ReluStatus.INACTIVE, 0.0, 0.0, 0.0)
    slope = u / (u - l)
    return ReluRelaxation(ReluStatus.UNDECIDED, slope, 0.0, -slope * l)


@dataclass(frozen=True)
class LayerBounds:
    """Per hidden layer: pre-activation interval vectors and ReLU statuses."""

    lower: tuple[np.ndarray, ...]
    upper: tuple[np.ndarray, ...]
    status: tuple[tuple[ReluStatus, ...], ...]

    def num_undecided(self) -> int:
        return sum(st.count(ReluStatus.UNDECIDED) for st in self.status)

    def all_decided(self) -> bool:
        return self.num_undecided() == 0


@dataclass(frozen=True)
class BoundsResult:
    """Certified per-action output bounds plus the hidden-layer intervals."""

    q_lower: np.ndarray
    q_upper: np.ndarray
    layer_bounds: LayerBounds
    ball: EpsBall

    def __post_init__(self) -> None:
        if not (np.isfinite(self.q_lower).all() and np.isfinite(self.q_upper).all()):
            raise ValueError("non-finite output bounds")
        if np.any(self.q_lower > self.q_upper + 1e-9):
            raise ValueError("q_lower exceeds q_upper")


def _statuses(l: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised slope/undecided-mask form of relu_relaxation."""
    active = l >= 0.0
    inactive = (u <= 0.0) & ~active
    undecided = ~(active | inactive)
    d = np.zeros_like(l)
    d[active] = 1.0
    if undecided.any():
        d[undecided] = u[undecided] / (u[undecided] - l[undecided])
    return d, undecided


def _backward_bounds(
    net: NetworkSpec,
    target: int,
    slopes: list[np.ndarray],
    lowers: list[np.ndarray],
    undecided: list[np.ndarray],
    center: np.ndarray,
    eps: np.ndarray,
    q: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Certified bounds on every pre-activation of layer ``target`` (1-based).

    Uses slopes/intervals of layers 1..target-1.  The coefficient matrix is
    accumulated output-to-input; the intercept pick for each undecided neuron
    is made from the sign of the accumulated coefficient right after the
    slope is absorbed, before the next weight multiplication.
    """
    w_t, b_t = net.layers[target - 1]
    m = w_t
    const_lo = b_t.copy()
    const_up = b_t.copy()
    for k in range(target - 1, 0, -1):
        w_k, b_k = net.layers[k - 1]
        a_k = m * slopes[k - 1][None, :]
        ud = undecided[k - 1]
        if ud.any():
            l_k = np.where(ud, lowers[k - 1], 0.0)
            const_lo += a_k @ b_k - np.minimum(a_k, 0.0) @ l_k
            const_up += a_k @ b_k - np.maximum(a_k, 0.0) @ l_k
        else:
            shift = a_k @ b_k
            const_lo += shift
            const_up += shift
        m = a_k @ w_k
    mid = m @ center
    scaled = np.abs(m * eps[None, :])
    if q == 1.0:
        radius = scaled.sum(axis=1)
    elif q == math.inf:
        radius = scaled.max(axis=1) if scaled.shape[1] else np.zeros(scaled.shape[0])
    elif q == 2.0:
        radius = np.sqrt((scaled * scaled).sum(axis=1))
    else:
        radius = (scaled**q).sum(axis=1) ** (1.0 / q)
    return const_lo + mid - radius, const_up + mid + radius


def _propagate(net: NetworkSpec, ball: EpsBall) -> tuple[list, list, list, list, list]:
    """Hidden-layer intervals over the ball's enclosing box (dual exponent 1)."""
    if ball.dim != net.input_dim:
        raise ValueError(f"ball dimension {ball.dim} != network input_dim {net.input_dim}")
    slopes: list[np.ndarray] = []
    lowers: list[np.ndarray] = []
    uppers: list[np.ndarray] = []
    undecided: list[np.ndarray] = []
    statuses: list[tuple[ReluStatus, ...]] = []
    for t in range(1, net.num_layers):
        l_t, u_t = _backward_bounds(net, t, slopes, lowers, undecided, ball.center, ball.eps, 1.0)
        d, ud = _statuses(l_t, u_t)
        slopes.append(d)
        lowers.append(l_t)
        uppers.append(u_t)
        undecided.append(ud)
        statuses.append(
            tuple(
                ReluStatus.UNDECIDED if ud[i] else (ReluStatus.ACTIVE if d[i] == 1.0 else ReluStatus.INACTIVE)
                for i in range(l_t.shape[0])
            )
        )
    return slopes, lowers, uppers, undecided, statuses


def layer_prebounds(net: NetworkSpec, ball: EpsBall) -> LayerBounds:
    """Sound pre-activation intervals for every hidden neuron over the ball."""
    _, lowers, uppers, _, statuses = _propagate(net, ball)
    return LayerBounds(tuple(lowers), tuple(uppers), tuple(statuses))


def _output_bounds(net: NetworkSpec, ball: EpsBall) -> tuple[np.ndarray, np.ndarray, LayerBounds]:
    slopes, lowers, uppers, undecided, statuses = _propagate(net, ball)
    q_lo, q_up = _backward_bounds(
        net, net.num_layers, slopes, lowers, undecided, ball.center, ball.eps, ball.q
    )
    return q_lo, q_up, LayerBounds(tuple(lowers), tuple(uppers), tuple(statuses))


def lower_bound_output(net: NetworkSpec, ball: EpsBall, j: int) -> float:
    """Guaranteed Q_l(center, a_j) <= Q(s, a_j) for every s in the ball."""
    if not 0 <= j < net.num_actions:
        raise IndexError(f"action index {j} out of range")
    q_lo, _, _ = _output_bounds(net, ball)
    return float(q_lo[j])


def upper_bound_output(net: NetworkSpec, ball: EpsBall, j: int) -> float:
    """Guaranteed Q_u(center, a_j) >= Q(s, a_j) for every s in the ball."""
    if not 0 <= j < net.num_actions:
        raise IndexError(f"action index {j} out of range")
    _, q_up, _ = _output_bounds(net, ball)
    return float(q_up[j])


def bounds_all_actions(net: NetworkSpec, ball: EpsBall) -> BoundsResult:
    """Certified lower/upper bounds for all actions, sharing one propagation."""
    q_lo, q_up, lb = _output_bounds(net, ball)
    return BoundsResult(q_lower=q_lo, q_upper=q_up, layer_bounds=lb, ball=ball)
