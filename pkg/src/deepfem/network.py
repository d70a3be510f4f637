"""Small fully-connected and residual network architectures.

Networks map a point in R^d (d = 1, 2) to a scalar.  Evaluation comes in a
plain-value mode (fast numpy forward pass) and a jet mode that carries the
spatial gradient and Hessian through every layer on an autodiff tape.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .autodiff import (
    ACTIVATIONS,
    ConfigurationError,
    JetBatch,
    ParamVector,
    Tape,
    Var,
    jet_activation,
    jet_add,
    jet_affine,
    matapply,
    seed_input_jets,
)

__all__ = [
    "NetworkConfig",
    "init_network",
    "param_count",
    "eval_network",
    "eval_network_jet",
    "network_jets",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkConfig:
    arch: str = "resnet"  # "fnn" | "resnet"
    width: int = 50
    depth: int = 6
    activation: str = "relu_cubed"
    input_dim: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ("fnn", "resnet"):
            raise ConfigurationError(f"unknown arch {self.arch!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if self.width < 1 or self.depth < 1:
            raise ConfigurationError("width and depth must be >= 1")
        if self.input_dim not in (1, 2):
            raise ConfigurationError("input_dim must be 1 or 2")


def _layer_shapes(config: NetworkConfig) -> list[tuple[str, tuple[int, ...]]]:
    N, L, d = config.width, config.depth, config.input_dim
    shapes: list[tuple[str, tuple[int, ...]]] = []
    if config.arch == "resnet":
        # input embedding has no bias; skip connections are fixed (identity
        # on even layers, absent on odd) and carry no parameters
        shapes.append(("V", (N, d)))
        for l in range(1, L + 1):
            shapes.append((f"W{l}", (N, N)))
            shapes.append((f"b{l}", (N,)))
    else:
        for l in range(1, L + 1):
            fan_in = d if l == 1 else N
            shapes.append((f"W{l}", (N, fan_in)))
            shapes.append((f"b{l}", (N,)))
    shapes.append(("a", (N,)))
    return shapes


def param_count(config: NetworkConfig) -> int:
    return sum(int(np.prod(s)) for _, s in _layer_shapes(config))


def init_network(config: NetworkConfig) -> ParamVector:
    """Glorot-uniform weights, zero biases; deterministic given ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    layout = []
    chunks = []
    offset = 0
    for name, shape in _layer_shapes(config):
        layout.append((name, offset, shape))
        offset += int(np.prod(shape))
        if name.startswith("b"):
            chunks.append(np.zeros(shape))
        else:
            fan_out, fan_in = (shape[0], shape[1]) if len(shape) == 2 else (1, shape[0])
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-bound, bound, size=shape))
    return ParamVector(np.concatenate([c.ravel() for c in chunks]), layout)


# ---------------------------------------------------------------------------
# plain-value evaluation
# ---------------------------------------------------------------------------


def eval_network(params: ParamVector, config: NetworkConfig, x: np.ndarray) -> np.ndarray:
    """Scalar outputs at points ``x (B, d)`` (a single point is accepted)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != config.input_dim:
        raise ConfigurationError("point dimension does not match input_dim")
    act = ACTIVATIONS[config.activation]
    L = config.depth
    if config.arch == "resnet":
        h_prev2 = None  # h_{l-2}; h_{-1} = 0
        h_prev = x @ params.view("V").T
        for l in range(1, L + 1):
            g = act(h_prev @ params.view(f"W{l}").T + params.view(f"b{l}"), 0)
            h = g + h_prev2 if (l % 2 == 0 and h_prev2 is not None) else g
            h_prev2, h_prev = h_prev, h
        h_last = h_prev
    else:
        h = x
        for l in range(1, L + 1):
            h = act(h @ params.view(f"W{l}").T + params.view(f"b{l}"), 0)
        h_last = h
    return h_last @ params.view("a")


# ---------------------------------------------------------------------------
# jet evaluation
# ---------------------------------------------------------------------------


def network_jets(theta: dict[str, Var], config: NetworkConfig, x: np.ndarray) -> JetBatch:
    """Forward pass in jet arithmetic using already-bound parameter vars.

    Returns jets with a single component axis: value ``(B, 1)``, grad
    ``(B, 1, d)``, hess ``(B, 1, d, d)``.
    """
    tape = theta["a"].tape
    jets = seed_input_jets(tape, np.atleast_2d(x))
    L = config.depth
    kind = config.activation
    if config.arch == "resnet":
        h_prev2 = None
        h_prev = jet_affine(theta["V"], None, jets)
        for l in range(1, L + 1):
            g = jet_activation(kind, jet_affine(theta[f"W{l}"], theta[f"b{l}"], h_prev))
            h = jet_add(g, h_prev2) if (l % 2 == 0 and h_prev2 is not None) else g
            h_prev2, h_prev = h_prev, h
        h_last = h_prev
    else:
        h_last = jets
        for l in range(1, L + 1):
            h_last = jet_activation(
                kind, jet_affine(theta[f"W{l}"], theta[f"b{l}"], h_last)
            )
    N = config.width
    a_row = theta["a"].reshape((1, N))
    return JetBatch(
        matapply(a_row, h_last.value),
        matapply(a_row, h_last.grad),
        matapply(a_row, h_last.hess),
    )


def eval_network_jet(params: ParamVector, config: NetworkConfig, x: np.ndarray):
    """Value, spatial gradient and Hessian at points ``x`` as numpy arrays.

    Shapes: ``(B,)``, ``(B, d)``, ``(B, d, d)``.
    """
    tape = Tape()
    theta = tape.bind(params)
    jets = network_jets(theta, config, x)
    d = config.input_dim
    B = jets.value.shape[0]
    return (
        jets.value.value.reshape(B),
        jets.grad.value.reshape(B, d),
        jets.hess.value.reshape(B, d, d),
    )


# ---------------------------------------------------------------------------
# checkpoint files
# ---------------------------------------------------------------------------


def save_checkpoint(path, config: NetworkConfig, params: ParamVector) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "params": params.data.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path) -> tuple[NetworkConfig, ParamVector]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {doc.get('version')}")
    config = NetworkConfig(**doc["config"])
    data = np.asarray(doc["params"], dtype=float)
    layout = []
    offset = 0
    for name, shape in _layer_shapes(config):
        layout.append((name, offset, shape))
        offset += int(np.prod(shape))
    return config, ParamVector(data, layout)
