from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from certirl.netio import NetworkSpec

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"


def make_random_net(
    rng: np.random.Generator,
    input_dim: int | None = None,
    hidden_layers: int | None = None,
    max_width: int = 16,
    num_actions: int | None = None,
) -> NetworkSpec:
    """Seeded random ReLU network with He-scaled weights and small biases."""
    dims = [input_dim if input_dim is not None else int(rng.integers(1, 5))]
    n_hidden = hidden_layers if hidden_layers is not None else int(rng.integers(1, 4))
    for _ in range(n_hidden):
        dims.append(int(rng.integers(2, max_width + 1)))
    dims.append(num_actions if num_actions is not None else int(rng.integers(2, 5)))
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_out, fan_in))
        b = rng.normal(0.0, 0.1, size=fan_out)
        layers.append((w, b))
    labels = tuple(f"a{i}" for i in range(dims[-1]))
    return NetworkSpec(tuple(layers), dims[0], labels)


def make_linear_net(w: np.ndarray, b: np.ndarray) -> NetworkSpec:
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    labels = tuple(f"a{i}" for i in range(w.shape[0]))
    return NetworkSpec(((w, b),), w.shape[1], labels)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cartpole_fixture_path() -> Path:
    path = FIXTURE_DIR / "cartpole_dqn.json"
    assert path.exists(), "committed cartpole fixture is missing"
    return path


@pytest.fixture(scope="session")
def collision_fixture_path() -> Path:
    path = FIXTURE_DIR / "collision_avoidance_dqn.json"
    assert path.exists(), "committed collision-avoidance fixture is missing"
    return path
