"""Activations and the Linear / LayerNorm / GLU building blocks."""

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .tensor import Parameter, Tensor


# ---------------------------------------------------------------------------
# module base

class Module:
    """Minimal container: walks its attributes to find Parameters and children."""

    def named_parameters(self, prefix: str = ""):
        out = {}
        for key, value in vars(self).items():
            path = f"{prefix}{key}"
            if isinstance(value, Parameter):
                out[path] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{path}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        out[f"{path}.{i}"] = item
                    elif isinstance(item, Module):
                        out.update(item.named_parameters(f"{path}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def count_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def describe(self):
        """Structural signature: class name, child wiring, parameter shapes."""
        children = {}
        params = {}
        for key, value in vars(self).items():
            if isinstance(value, Parameter):
                params[key] = list(value.data.shape)
            elif isinstance(value, Module):
                children[key] = value.describe()
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], (Module, Parameter)):
                children[key] = [
                    v.describe() if isinstance(v, Module) else {"param": list(v.data.shape)}
                    for v in value
                ]
        return {"type": type(self).__name__, "params": params, "children": children}


# ---------------------------------------------------------------------------
# initializers (all take an explicit Generator so runs are reproducible)

def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    limit = np.sqrt(6.0 / max(fan_in + fan_out, 1))
    return rng.uniform(-limit, limit, size=shape if shape is not None else (fan_in, fan_out))


def orthogonal(rng: np.random.Generator, n: int):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# ---------------------------------------------------------------------------
# activations

def silu(x: Tensor) -> Tensor:
    return T.mul(x, T.sigmoid(x))


_ACTIVATIONS = {
    "sigmoid": T.sigmoid,
    "tanh": T.tanh,
    "relu": T.relu,
    "elu": T.elu,
    "silu": silu,
    "linear": lambda x: x,
}


def activation(kind: str, x: Tensor) -> Tensor:
    """Apply one of {sigmoid, silu, elu, relu, tanh, linear} elementwise."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ShapeError(f"unknown activation kind {kind!r}") from None
    return fn(x)


# ---------------------------------------------------------------------------
# blocks

class LinearLayer(Module):
    """Affine map over the last axis: y = x @ weight + bias."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = Parameter(glorot_uniform(rng, in_dim, out_dim), "weight")
        self.bias = Parameter(np.zeros(out_dim), "bias")

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"linear expects last axis {self.in_dim}, got {x.shape}")
        lead = x.shape[:-1]
        flat = T.reshape(x, (-1, self.in_dim)) if x.data.ndim != 2 else x
        out = T.add(T.matmul(flat, self.weight), self.bias)
        if x.data.ndim != 2:
            out = T.reshape(out, lead + (self.out_dim,))
        return out

    __call__ = forward


class LayerNormBlock(Module):
    """Normalize the last axis to zero mean / unit population variance, then scale and shift."""

    def __init__(self, dim: int, epsilon: float = 1e-5):
        self.dim = dim
        self.epsilon = epsilon
        self.gain = Parameter(np.ones(dim), "gain")
        self.shift = Parameter(np.zeros(dim), "shift")

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.dim:
            raise ShapeError(f"layer_norm expects last axis {self.dim}, got {x.shape}")
        mean = T.reduce_mean(x, axis=-1, keepdims=True)
        centered = T.sub(x, mean)
        var = T.reduce_mean(T.mul(centered, centered), axis=-1, keepdims=True)
        inv = T.power(T.add(var, Tensor(self.epsilon)), -0.5)
        return T.add(T.mul(T.mul(centered, inv), self.gain), self.shift)

    __call__ = forward


class GLUBlock(Module):
    """Gated linear unit: sigmoid(gate(x)) ⊙ value(x), both affine d→d."""

    def __init__(self, dim: int, rng: np.random.Generator):
        self.dim = dim
        self.gate = LinearLayer(dim, dim, rng)
        self.value = LinearLayer(dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return T.mul(T.sigmoid(self.gate(x)), self.value(x))

    __call__ = forward


def linear_forward(layer: LinearLayer, x: Tensor) -> Tensor:
    return layer.forward(x)


def layer_norm(block: LayerNormBlock, x: Tensor) -> Tensor:
    return block.forward(x)


def glu_forward(block: GLUBlock, gamma: Tensor) -> Tensor:
    return block.forward(gamma)
