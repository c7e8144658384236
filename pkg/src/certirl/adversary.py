"""Observation perturbations: gradient-sign attack and uniform sensor noise.

Randomness comes from numpy's PCG64 generator; callers pass one exclusively
owned stream per episode so replays are deterministic within a build.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .netio import NetworkSpec, forward, input_gradient

__all__ = ["PerturbationSpec", "fgst_perturb", "uniform_noise_perturb", "apply"]

KINDS = ("none", "fgst", "uniform_noise")


@dataclass(frozen=True)
class PerturbationSpec:
    """Which perturbation to apply to the true observation.

    Exactly the parameters of ``kind`` are read: eps_adv for fgst (an
    l-infinity budget per dimension), sigma for uniform_noise (half-width
    per dimension).
    """

    kind: str = "none"
    eps_adv: Optional[np.ndarray] = None
    p_adv: float = np.inf
    sigma: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.kind == "fgst":
            if self.eps_adv is None:
                raise ValueError("fgst requires eps_adv")
            object.__setattr__(self, "eps_adv", np.asarray(self.eps_adv, dtype=np.float64))
            if np.any(self.eps_adv < 0.0):
                raise ValueError("eps_adv must be nonnegative")
        if self.kind == "uniform_noise":
            if self.sigma is None:
                raise ValueError("uniform_noise requires sigma")
            object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=np.float64))
            if np.any(self.sigma < 0.0):
                raise ValueError("sigma must be nonnegative")


def fgst_perturb(net: NetworkSpec, s0: np.ndarray, eps_adv: np.ndarray) -> np.ndarray:
    """Fast gradient-sign attack toward the nominally worst action.

    Targets the one-hot of argmin_j Q(s0, a_j) and steps against the sign of
    the cross-entropy gradient, one eps_adv step per coordinate:

        s_hat = s0 - eps_adv * sign(grad_s CE(y_worst, softmax(Q(s))))

    sign(0) = 0, so coordinates with zero gradient (and masked coordinates
    with eps_adv = 0) are left untouched; the result stays in the
    l-infinity eps_adv ball around s0.
    """
    s0 = np.asarray(s0, dtype=np.float64)
    eps_adv = np.asarray(eps_adv, dtype=np.float64)
    if eps_adv.shape != s0.shape:
        raise ValueError(f"eps_adv shape {eps_adv.shape} != observation shape {s0.shape}")
    if np.any(eps_adv < 0.0):
        raise ValueError("eps_adv must be nonnegative")
    q = forward(net, s0)
    target = np.zeros_like(q)
    target[int(np.argmin(q))] = 1.0
    grad = input_gradient(net, s0, target)
    return s0 - eps_adv * np.sign(grad)


def uniform_noise_perturb(
    s0: np.ndarray, sigma: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Each coordinate i.i.d. uniform in [s0 - sigma, s0 + sigma]."""
    s0 = np.asarray(s0, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != s0.shape:
        raise ValueError(f"sigma shape {sigma.shape} != observation shape {s0.shape}")
    if np.any(sigma < 0.0):
        raise ValueError("sigma must be nonnegative")
    return s0 + sigma * rng.uniform(-1.0, 1.0, size=s0.shape)


def apply(
    spec: PerturbationSpec,
    net: NetworkSpec,
    s0: np.ndarray,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Dispatch on spec.kind; 'none' returns the observation unchanged."""
    if spec.kind == "none":
        return np.asarray(s0, dtype=np.float64)
    if spec.kind == "fgst":
        return fgst_perturb(net, s0, spec.eps_adv)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
    return uniform_noise_perturb(s0, spec.sigma, rng)
