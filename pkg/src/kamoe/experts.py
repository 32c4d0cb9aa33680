"""Expert networks: MLP stacks, KAN stacks, and the recurrent layers."""

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .kan import KANLinearLayer, SplineGrid
from .nn import LinearLayer, Module
from .recurrent import GRULayer, LSTMLayer  # noqa: F401  (re-exported expert kinds)
from .tensor import Tensor


class MLPExpert(Module):
    """`depth` hidden ReLU layers of width `hidden`, then a linear head."""

    def __init__(self, in_dim: int, hidden: int, depth: int, out_dim: int,
                 rng: np.random.Generator):
        if depth < 1:
            raise ConfigError(f"mlp depth must be >= 1, got {depth}")
        widths = [in_dim] + [hidden] * depth + [out_dim]
        self.layers = [LinearLayer(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
        self.out_dim = out_dim

    @property
    def output_signature(self):
        return ("flat", self.out_dim)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers[:-1]:
            x = T.relu(layer(x))
        return self.layers[-1](x)

    __call__ = forward


class KANExpert(Module):
    """A stack of `depth` KAN layers with no activation between them.

    Unlike the MLP, a KAN layer maps straight from inputs to outputs through
    learned edge functions, so depth counts KAN layers: depth 1 is a single
    in->out map (an additive model, independent of `hidden`), and the hidden
    width only appears from depth 2 on.
    """

    def __init__(self, in_dim: int, hidden: int, depth: int, out_dim: int,
                 rng: np.random.Generator, grid: SplineGrid | None = None):
        if depth < 1:
            raise ConfigError(f"kan depth must be >= 1, got {depth}")
        grid = grid if grid is not None else SplineGrid()
        widths = [in_dim] + [hidden] * (depth - 1) + [out_dim]
        self.layers = [KANLinearLayer(a, b, rng, grid) for a, b in zip(widths[:-1], widths[1:])]
        self.out_dim = out_dim

    @property
    def output_signature(self):
        return ("flat", self.out_dim)

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    __call__ = forward


def expert_forward(expert, x: Tensor) -> Tensor:
    if isinstance(expert, (GRULayer, LSTMLayer)):
        if x.data.ndim != 3:
            raise ShapeError(f"recurrent expert expects rank-3 input, got {x.shape}")
    elif x.data.ndim != 2:
        raise ShapeError(f"feed-forward expert expects rank-2 input, got {x.shape}")
    return expert.forward(x)


def count_parameters(model: Module) -> int:
    """Total number of scalar trainable values in the model."""
    return model.count_parameters()
