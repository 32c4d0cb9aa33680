"""Gated residual blocks: the KAN-based variant and its dense baseline.

Both blocks share one contract — width-preserving, residual, LayerNorm on the
skip sum — so a mixture can swap one for the other without any other change.
"""

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .kan import KANLinearLayer, SplineGrid
from .nn import GLUBlock, LayerNormBlock, LinearLayer, Module
from .tensor import Tensor


class GRKANBlock(Module):
    """Residual gate with two KAN sublayers (ELU-based, then SiLU-based).

    forward(x) = LayerNorm(x + GLU(kan_silu(kan_elu(x)))). Driving the GLU gate
    far negative suppresses the whole nonlinear branch, leaving LayerNorm(x).
    """

    def __init__(self, d_model: int, rng: np.random.Generator, grid: SplineGrid | None = None):
        self.d_model = d_model
        grid = grid if grid is not None else SplineGrid()
        self.kan_eta2 = KANLinearLayer(d_model, d_model, rng, grid, base_activation="elu")
        self.kan_eta1 = KANLinearLayer(d_model, d_model, rng, grid, base_activation="silu")
        self.glu = GLUBlock(d_model, rng)
        self.norm = LayerNormBlock(d_model)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_model:
            raise ShapeError(f"gating block expects last axis {self.d_model}, got {x.shape}")
        eta2 = self.kan_eta2(x)
        eta1 = self.kan_eta1(eta2)
        return self.norm(T.add(x, self.glu(eta1)))

    __call__ = forward


class GRNBlock(Module):
    """Dense baseline: same wiring with Linear+ELU and Linear sublayers."""

    def __init__(self, d_model: int, rng: np.random.Generator):
        self.d_model = d_model
        self.dense_eta2 = LinearLayer(d_model, d_model, rng)
        self.dense_eta1 = LinearLayer(d_model, d_model, rng)
        self.glu = GLUBlock(d_model, rng)
        self.norm = LayerNormBlock(d_model)

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_model:
            raise ShapeError(f"gating block expects last axis {self.d_model}, got {x.shape}")
        eta2 = T.elu(self.dense_eta2(x))
        eta1 = self.dense_eta1(eta2)
        return self.norm(T.add(x, self.glu(eta1)))

    __call__ = forward


def grkan_forward(block: GRKANBlock, x: Tensor) -> Tensor:
    return block.forward(x)


def grn_forward(block: GRNBlock, x: Tensor) -> Tensor:
    return block.forward(x)
