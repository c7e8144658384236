"""Network data model, portable weight files, forward evaluation, input gradients.

The network is a plain feedforward stack: ReLU on every hidden layer, linear
output layer.  All arithmetic is float64; weights are immutable after load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "NetworkSpec",
    "NetworkFormatError",
    "NetworkValidationError",
    "load_network",
    "save_network",
    "forward",
    "forward_batch",
    "input_gradient",
    "softmax",
]


class NetworkFormatError(ValueError):
    """Weight file is malformed (missing/ill-typed field)."""


class NetworkValidationError(ValueError):
    """Weight file parsed but violates a structural invariant."""


@dataclass(frozen=True)
class NetworkSpec:
    """An m-layer ReLU network: layers[k] = (W, b) maps layer-k inputs to outputs.

    W has shape (units_out, units_in); entry [i, j] is the weight from input
    unit j to output unit i.  m == 1 means a purely linear network.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    input_dim: int
    action_labels: tuple[str, ...]
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if len(self.layers) < 1:
            raise NetworkValidationError("network needs at least one layer")
        prev = self.input_dim
        for w, b in self.layers:  # immutable after construction
            w.flags.writeable = False
            b.flags.writeable = False
        for k, (w, b) in enumerate(self.layers, start=1):
            if w.ndim != 2 or b.ndim != 1:
                raise NetworkValidationError(f"layer {k}: weights must be 2-D, bias 1-D")
            if w.shape[1] != prev:
                raise NetworkValidationError(
                    f"layer {k}: expected {prev} input columns, got {w.shape[1]}"
                )
            if w.shape[0] != b.shape[0]:
                raise NetworkValidationError(
                    f"layer {k}: bias length {b.shape[0]} != {w.shape[0]} rows"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NetworkValidationError(f"layer {k}: non-finite weight or bias")
            prev = w.shape[0]
        if prev != len(self.action_labels):
            raise NetworkValidationError(
                f"output layer has {prev} units but {len(self.action_labels)} action labels"
            )

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def num_actions(self) -> int:
        return len(self.action_labels)

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers[:-1])


def _as_matrix(rows, where: str) -> np.ndarray:
    try:
        arr = np.asarray(rows, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise NetworkFormatError(f"{where}: not a numeric array") from exc
    arr.setflags(write=False)
    return arr


def load_network(path: str | Path) -> NetworkSpec:
    """Load and validate a network from the JSON weight-file format."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON in {path}: {exc}") from exc
    for key in ("input_dim", "action_labels", "layers"):
        if key not in doc:
            raise NetworkFormatError(f"missing top-level field '{key}'")
    if not isinstance(doc["input_dim"], int):
        raise NetworkFormatError("field 'input_dim' must be an integer")
    labels = doc["action_labels"]
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise NetworkFormatError("field 'action_labels' must be an array of strings")
    if not isinstance(doc["layers"], list) or not doc["layers"]:
        raise NetworkFormatError("field 'layers' must be a non-empty array")
    layers = []
    for k, layer in enumerate(doc["layers"], start=1):
        if not isinstance(layer, dict) or "weights" not in layer or "bias" not in layer:
            raise NetworkFormatError(f"layer {k}: must be an object with 'weights' and 'bias'")
        w = _as_matrix(layer["weights"], f"layer {k} field 'weights'")
        b = _as_matrix(layer["bias"], f"layer {k} field 'bias'")
        layers.append((w, b))
    meta = doc.get("meta", {})
    return NetworkSpec(
        layers=tuple(layers),
        input_dim=doc["input_dim"],
        action_labels=tuple(labels),
        meta=meta if isinstance(meta, dict) else {},
    )


def _fmt(x: float) -> str:
    # 17 significant digits round-trip any float64 exactly.
    return format(float(x), ".17g")


def _vec_json(v: np.ndarray) -> str:
    return "[" + ", ".join(_fmt(x) for x in v) + "]"


def _mat_json(m: np.ndarray, indent: str) -> str:
    rows = (",\n" + indent).join(_vec_json(row) for row in m)
    return "[\n" + indent + rows + "\n" + indent[:-2] + "]"


def save_network(net: NetworkSpec, path: str | Path) -> None:
    """Write a network in the portable weight-file format (17 sig. digits)."""
    parts = ["{\n"]
    parts.append(f'  "input_dim": {net.input_dim},\n')
    parts.append(f'  "action_labels": {json.dumps(list(net.action_labels))},\n')
    parts.append('  "layers": [\n')
    for k, (w, b) in enumerate(net.layers):
        parts.append('    {\n')
        parts.append(f'      "weights": {_mat_json(w, "        ")},\n')
        parts.append(f'      "bias": {_vec_json(b)}\n')
        parts.append("    }" + ("," if k < net.num_layers - 1 else "") + "\n")
    parts.append("  ],\n")
    parts.append(f'  "meta": {json.dumps(net.meta, sort_keys=True)}\n')
    parts.append("}\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


def _check_obs(net: NetworkSpec, obs: np.ndarray) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (net.input_dim,):
        raise ValueError(f"observation has shape {obs.shape}, expected ({net.input_dim},)")
    if not np.isfinite(obs).all():
        raise ValueError("observation contains non-finite entries")
    return obs


def forward(net: NetworkSpec, obs: Sequence[float] | np.ndarray) -> np.ndarray:
    """Exact Q(s, a_j) for each action j; pure and deterministic."""
    x = _check_obs(net, obs)
    last = net.num_layers - 1
    for k, (w, b) in enumerate(net.layers):
        x = w @ x + b
        if k < last:
            np.maximum(x, 0.0, out=x)
    if not np.isfinite(x).all():
        raise FloatingPointError("non-finite intermediate in forward pass")
    return x


def forward_batch(net: NetworkSpec, xs: np.ndarray) -> np.ndarray:
    """forward() over rows of xs, shape (n, input_dim) -> (n, num_actions)."""
    x = np.asarray(xs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"batch has shape {x.shape}, expected (n, {net.input_dim})")
    last = net.num_layers - 1
    for k, (w, b) in enumerate(net.layers):
        x = x @ w.T + b
        if k < last:
            np.maximum(x, 0.0, out=x)
    return x


def softmax(q: np.ndarray) -> np.ndarray:
    z = q - np.max(q)
    e = np.exp(z)
    return e / e.sum()


def input_gradient(
    net: NetworkSpec, obs: Sequence[float] | np.ndarray, target: Sequence[float] | np.ndarray
) -> np.ndarray:
    """Gradient w.r.t. the observation of the softmax cross-entropy loss.

    ``target`` is a one-hot vector over the d actions.  The loss is
    CE(target, softmax(Q(s))); its gradient backpropagates exactly through
    the network, using subgradient 0 where a pre-activation is exactly 0.
    """
    x = _check_obs(net, obs)
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (net.num_actions,):
        raise ValueError(f"target has shape {target.shape}, expected ({net.num_actions},)")
    if not (np.isclose(target.sum(), 1.0) and np.all((target == 0.0) | (target == 1.0))):
        raise ValueError("target must be one-hot")

    preacts = []
    a = x
    last = net.num_layers - 1
    for k, (w, b) in enumerate(net.layers):
        z = w @ a + b
        preacts.append(z)
        a = np.maximum(z, 0.0) if k < last else z
    # d CE(target, softmax(q)) / dq == softmax(q) - target
    g = softmax(preacts[-1]) - target
    for k in range(last, -1, -1):
        w, _ = net.layers[k]
        g = w.T @ g
        if k > 0:
            g = g * (preacts[k - 1] > 0.0)
    return g
