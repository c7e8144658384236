"""Action selection from certified bounds: max-min rule, certificate, variants.

All rules break ties by lowest action index so experiments replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import BoundsResult
from .netio import NetworkSpec, forward, softmax

__all__ = [
    "RobustDecision",
    "carrl_action",
    "suboptimality_certificate",
    "reduced_sensitivity_action",
    "policy_logit_action",
    "sample_policy_action",
    "nominal_action",
]


@dataclass(frozen=True)
class RobustDecision:
    action_index: int
    q_lower: np.ndarray
    q_upper: np.ndarray
    certificate: float
    rule: str

    def __post_init__(self) -> None:
        if self.certificate < 0.0:
            raise ValueError("certificate must be nonnegative")
        if not 0 <= self.action_index < self.q_lower.shape[0]:
            raise ValueError("action index out of range")


def suboptimality_certificate(bounds: BoundsResult, chosen: int) -> float:
    """(max_j q_upper_j) - q_lower_chosen.

    Whenever the true state lies in the ball, this upper-bounds the Q-gap at
    the true state between the best action there and the chosen one.
    """
    if not 0 <= chosen < bounds.q_lower.shape[0]:
        raise IndexError(f"action index {chosen} out of range")
    return float(bounds.q_upper.max() - bounds.q_lower[chosen])


def _decide(bounds: BoundsResult, scores: np.ndarray, rule: str) -> RobustDecision:
    j = int(np.argmax(scores))  # argmax takes the first maximum: lowest index
    return RobustDecision(
        action_index=j,
        q_lower=bounds.q_lower,
        q_upper=bounds.q_upper,
        certificate=suboptimality_certificate(bounds, j),
        rule=rule,
    )


def carrl_action(bounds: BoundsResult) -> RobustDecision:
    """Pick the action with the best guaranteed worst-case value (argmax q_lower)."""
    return _decide(bounds, bounds.q_lower, "carrl")


def reduced_sensitivity_action(bounds: BoundsResult, lambda_sens: float) -> RobustDecision:
    """argmax of q_lower - lambda_sens * (q_upper - q_lower).

    Penalises actions whose certified value range is wide; lambda_sens = 0
    recovers carrl_action.
    """
    if lambda_sens < 0.0:
        raise ValueError(f"lambda_sens must be nonnegative, got {lambda_sens}")
    scores = bounds.q_lower - lambda_sens * (bounds.q_upper - bounds.q_lower)
    return _decide(bounds, scores, "reduced_sensitivity")


def policy_logit_action(bounds: BoundsResult) -> RobustDecision:
    """Same max-min selection with the outputs read as policy logits."""
    return _decide(bounds, bounds.q_lower, "policy_logit")


def sample_policy_action(bounds: BoundsResult, rng: np.random.Generator) -> int:
    """Stochastic variant: draw an action from softmax of the lower-bounded logits."""
    probs = softmax(bounds.q_lower)
    return int(rng.choice(probs.shape[0], p=probs))


def nominal_action(net: NetworkSpec, obs: np.ndarray) -> RobustDecision:
    """Plain greedy argmax of the forward pass (zero-radius ball, certificate 0)."""
    q = forward(net, obs)
    j = int(np.argmax(q))
    return RobustDecision(
        action_index=j,
        q_lower=q,
        q_upper=q.copy(),
        certificate=float(q.max() - q[j]),
        rule="nominal",
    )
