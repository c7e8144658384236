"""certirl: certified Q-value bounds and robust action selection.

Computes guaranteed lower/upper bounds on the outputs of trained ReLU
Q-networks under per-dimension observation uncertainty, selects actions that
maximise the guaranteed worst case, and reports a sub-optimality certificate
alongside every decision.
"""

from .adversary import PerturbationSpec, fgst_perturb, uniform_noise_perturb
from .certify import (
    BoundsResult,
    EpsBall,
    LayerBounds,
    ReluStatus,
    bounds_all_actions,
    layer_prebounds,
    lower_bound_output,
    relu_relaxation,
    upper_bound_output,
)
from .decide import (
    RobustDecision,
    carrl_action,
    nominal_action,
    policy_logit_action,
    reduced_sensitivity_action,
    sample_policy_action,
    suboptimality_certificate,
)
from .netio import NetworkSpec, forward, input_gradient, load_network, save_network

__version__ = "0.1.0"

__all__ = [
    "BoundsResult",
    "EpsBall",
    "LayerBounds",
    "NetworkSpec",
    "PerturbationSpec",
    "ReluStatus",
    "RobustDecision",
    "bounds_all_actions",
    "carrl_action",
    "fgst_perturb",
    "forward",
    "input_gradient",
    "layer_prebounds",
    "load_network",
    "lower_bound_output",
    "nominal_action",
    "policy_logit_action",
    "reduced_sensitivity_action",
    "relu_relaxation",
    "sample_policy_action",
    "save_network",
    "suboptimality_certificate",
    "uniform_noise_perturb",
    "upper_bound_output",
]
