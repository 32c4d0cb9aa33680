"""Kolmogorov-Arnold linear layers: per-edge B-spline functions plus a base path."""

import numpy as np

from . import tensor as T
from ._bspline import basis_and_derivative
from .errors import ConfigError, ShapeError
from .nn import Module, activation, glorot_uniform
from .tensor import Parameter, Tensor, _active_tape


class SplineGrid:
    """Uniform knot grid shared by every input of a KAN layer.

    G intervals of order-k splines over [lo, hi] give G + k basis functions,
    built on an extended knot vector of length G + 2k + 1.
    """

    def __init__(self, grid_size: int = 5, spline_order: int = 3, domain=(-1.0, 1.0)):
        if grid_size < 1:
            raise ConfigError(f"grid_size must be >= 1, got {grid_size}")
        if spline_order < 0:
            raise ConfigError(f"spline_order must be >= 0, got {spline_order}")
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise ConfigError(f"domain must satisfy lo < hi, got ({lo}, {hi})")
        self.grid_size = grid_size
        self.spline_order = spline_order
        self.lo = lo
        self.hi = hi
        step = (hi - lo) / grid_size
        self.knots = lo + step * np.arange(-spline_order, grid_size + spline_order + 1)

    @property
    def num_basis(self) -> int:
        return self.grid_size + self.spline_order

    def config(self):
        return {
            "grid_size": self.grid_size,
            "spline_order": self.spline_order,
            "domain": [self.lo, self.hi],
        }


def bspline_basis(grid: SplineGrid, x: Tensor) -> Tensor:
    """Append a basis axis of size G+k; differentiable w.r.t. x.

    Out-of-domain inputs are clamped to [lo, hi] (their basis gradient is zero),
    so standardized inputs with tails never crash a forward pass.
    """
    flat = x.data.reshape(-1)
    clamped = np.clip(flat, grid.lo, grid.hi)
    vals, derivs = basis_and_derivative(clamped, grid.knots, grid.spline_order)
    out_shape = x.shape + (grid.num_basis,)
    tape = _active_tape()
    needs = tape is not None and x.requires_grad
    out = Tensor(vals.reshape(out_shape), requires_grad=needs)
    if needs:
        in_domain = (flat >= grid.lo) & (flat <= grid.hi)
        local = derivs * in_domain[:, None]
        def bwd():
            g = out.grad.reshape(-1, grid.num_basis)
            x._accumulate((g * local).sum(axis=1).reshape(x.shape))
        tape.record(bwd)
    return out


class KANLinearLayer(Module):
    """Maps `in_dim` to `out_dim` through per-edge splines plus a base activation path.

    out_j = sum_i base_weight[i,j] * act(x_i) + sum_i sum_b spline_weight[i,j,b] * B_b(x_i)
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 grid: SplineGrid | None = None, base_activation: str = "silu"):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.grid = grid if grid is not None else SplineGrid()
        self.base_activation = base_activation
        nb = self.grid.num_basis
        self.base_weight = Parameter(glorot_uniform(rng, in_dim, out_dim), "base_weight")
        self.spline_weight = Parameter(
            rng.normal(0.0, 0.1 / np.sqrt(nb), size=(in_dim, out_dim, nb)), "spline_weight")

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"kan layer expects last axis {self.in_dim}, got {x.shape}")
        lead = x.shape[:-1]
        flat = T.reshape(x, (-1, self.in_dim)) if x.data.ndim != 2 else x
        base = T.matmul(activation(self.base_activation, flat), self.base_weight)
        nb = self.grid.num_basis
        basis = T.reshape(bspline_basis(self.grid, flat), (-1, self.in_dim * nb))
        w = T.reshape(T.transpose(self.spline_weight, (0, 2, 1)), (self.in_dim * nb, self.out_dim))
        out = T.add(base, T.matmul(basis, w))
        if x.data.ndim != 2:
            out = T.reshape(out, lead + (self.out_dim,))
        return out

    __call__ = forward


def kan_linear_forward(layer: KANLinearLayer, x: Tensor) -> Tensor:
    return layer.forward(x)


def count_kan_parameters(layer: KANLinearLayer) -> int:
    """in * out * (1 + G + k): one base weight plus G+k spline coefficients per edge."""
    return layer.count_parameters()
