"""The mixture wrapper: learnable input scaling, expert fan-out, gating, combination."""

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .gating import GRKANBlock, GRNBlock
from .kan import SplineGrid
from .nn import LinearLayer, Module
from .tensor import Parameter, Tensor


class MixtureLayer(Module):
    """Combines m experts with per-expert sigmoid weights from a gated residual block.

    The input is first rescaled entrywise by a learnable weight with the shape
    of one sample (a matrix for sequences). Gate weights are a = sigmoid(block(z))
    with z a linear projection of the rescaled input (mean-pooled over time for
    sequences); each a_k lies in (0,1) independently — no softmax coupling.
    """

    def __init__(self, experts, input_shape, rng: np.random.Generator,
                 gating: str = "grkan", grid: SplineGrid | None = None):
        if not experts:
            raise ConfigError("a mixture needs at least one expert")
        signatures = {e.output_signature for e in experts}
        if len(signatures) != 1:
            raise ConfigError(f"experts disagree on output shape: {sorted(signatures)}")
        self.experts = list(experts)
        self.num_experts = len(self.experts)
        self.input_shape = tuple(input_shape)
        self.sequence_inputs = len(self.input_shape) == 2
        self.input_weights = Parameter(np.ones(self.input_shape), "input_weights")
        self.projection = LinearLayer(self.input_shape[-1], self.num_experts, rng)
        if gating == "grkan":
            self.gating = GRKANBlock(self.num_experts, rng, grid)
        elif gating == "grn":
            self.gating = GRNBlock(self.num_experts, rng)
        else:
            raise ConfigError(f"unknown gating kind {gating!r}")

    def transform_inputs(self, x: Tensor) -> Tensor:
        if x.shape[1:] != self.input_shape:
            raise ShapeError(
                f"mixture expects samples shaped {self.input_shape}, got {x.shape}")
        return T.mul(x, self.input_weights)

    def gate_weights(self, scaled: Tensor) -> Tensor:
        z = T.reduce_mean(scaled, axis=1) if self.sequence_inputs else scaled
        return T.sigmoid(self.gating(self.projection(z)))

    def stack_expert_outputs(self, scaled: Tensor) -> Tensor:
        return T.stack([e.forward(scaled) for e in self.experts], axis=1)

    def forward(self, x: Tensor) -> Tensor:
        scaled = self.transform_inputs(x)
        stacked = self.stack_expert_outputs(scaled)
        gates = self.gate_weights(scaled)
        # broadcast (B, m) over whatever trails the expert axis
        gates = T.reshape(gates, gates.shape + (1,) * (stacked.data.ndim - 2))
        return T.reduce_sum(T.mul(stacked, gates), axis=1)

    __call__ = forward

    @property
    def output_signature(self):
        return self.experts[0].output_signature


def transform_inputs(layer: MixtureLayer, x: Tensor) -> Tensor:
    return layer.transform_inputs(x)


def gate_weights(layer: MixtureLayer, scaled: Tensor) -> Tensor:
    return layer.gate_weights(scaled)


def stack_expert_outputs(layer: MixtureLayer, scaled: Tensor) -> Tensor:
    return layer.stack_expert_outputs(scaled)


def mixture_forward(layer: MixtureLayer, x: Tensor) -> Tensor:
    return layer.forward(x)
