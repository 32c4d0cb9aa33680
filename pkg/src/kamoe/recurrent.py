"""GRU and LSTM layers unrolled step by step on the autodiff tape."""

import numpy as np

from . import tensor as T
from .errors import ShapeError
from .nn import Module, glorot_uniform, orthogonal
from .tensor import Parameter, Tensor


def _input_kernel(rng, in_dim, hidden, gates):
    blocks = [glorot_uniform(rng, in_dim, hidden) for _ in range(gates)]
    return np.concatenate(blocks, axis=1)


def _recurrent_kernel(rng, hidden, gates):
    blocks = [orthogonal(rng, hidden) for _ in range(gates)]
    return np.concatenate(blocks, axis=1)


class GRULayer(Module):
    """Gated recurrent unit; h = (1-z) ⊙ h_prev + z ⊙ candidate.

    The reset gate multiplies h_prev before the candidate matmul.
    """

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 return_sequences: bool = False):
        self.in_dim = in_dim
        self.hidden = hidden
        self.return_sequences = return_sequences
        self.w_x = Parameter(_input_kernel(rng, in_dim, hidden, 3), "w_x")
        self.w_h = Parameter(_recurrent_kernel(rng, hidden, 2), "w_h")
        self.w_c = Parameter(orthogonal(rng, hidden), "w_c")
        self.bias = Parameter(np.zeros(3 * hidden), "bias")

    @property
    def output_signature(self):
        return ("seq" if self.return_sequences else "flat", self.hidden)

    def cell(self, x_t: Tensor, h_prev: Tensor) -> Tensor:
        if x_t.shape[-1] != self.in_dim or h_prev.shape[-1] != self.hidden:
            raise ShapeError(f"gru cell got x {x_t.shape}, h {h_prev.shape}")
        hd = self.hidden
        xg = T.add(T.matmul(x_t, self.w_x), self.bias)
        hg = T.matmul(h_prev, self.w_h)
        z = T.sigmoid(T.add(T.slice_last(xg, 0, hd), T.slice_last(hg, 0, hd)))
        r = T.sigmoid(T.add(T.slice_last(xg, hd, 2 * hd), T.slice_last(hg, hd, 2 * hd)))
        cand = T.tanh(T.add(T.slice_last(xg, 2 * hd, 3 * hd),
                            T.matmul(T.mul(r, h_prev), self.w_c)))
        one_minus_z = T.sub(Tensor(1.0), z)
        return T.add(T.mul(one_minus_z, h_prev), T.mul(z, cand))

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 3 or x.shape[-1] != self.in_dim:
            raise ShapeError(f"gru expects (batch, steps, {self.in_dim}), got {x.shape}")
        batch, steps = x.shape[0], x.shape[1]
        h = Tensor(np.zeros((batch, self.hidden)))
        outputs = []
        for t in range(steps):
            h = self.cell(T.index_axis(x, 1, t), h)
            outputs.append(h)
        return T.stack(outputs, axis=1) if self.return_sequences else outputs[-1]

    __call__ = forward


class LSTMLayer(Module):
    """Long short-term memory with input/forget/candidate/output gates."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator,
                 return_sequences: bool = False):
        self.in_dim = in_dim
        self.hidden = hidden
        self.return_sequences = return_sequences
        self.w_x = Parameter(_input_kernel(rng, in_dim, hidden, 4), "w_x")
        self.w_h = Parameter(_recurrent_kernel(rng, hidden, 4), "w_h")
        self.bias = Parameter(np.zeros(4 * hidden), "bias")

    @property
    def output_signature(self):
        return ("seq" if self.return_sequences else "flat", self.hidden)

    def cell(self, x_t: Tensor, state):
        h_prev, c_prev = state
        if x_t.shape[-1] != self.in_dim or h_prev.shape[-1] != self.hidden:
            raise ShapeError(f"lstm cell got x {x_t.shape}, h {h_prev.shape}")
        hd = self.hidden
        g = T.add(T.add(T.matmul(x_t, self.w_x), T.matmul(h_prev, self.w_h)), self.bias)
        i = T.sigmoid(T.slice_last(g, 0, hd))
        f = T.sigmoid(T.slice_last(g, hd, 2 * hd))
        cand = T.tanh(T.slice_last(g, 2 * hd, 3 * hd))
        o = T.sigmoid(T.slice_last(g, 3 * hd, 4 * hd))
        c = T.add(T.mul(f, c_prev), T.mul(i, cand))
        h = T.mul(o, T.tanh(c))
        return h, c

    def forward(self, x: Tensor) -> Tensor:
        if x.data.ndim != 3 or x.shape[-1] != self.in_dim:
            raise ShapeError(f"lstm expects (batch, steps, {self.in_dim}), got {x.shape}")
        batch, steps = x.shape[0], x.shape[1]
        h = Tensor(np.zeros((batch, self.hidden)))
        c = Tensor(np.zeros((batch, self.hidden)))
        outputs = []
        for t in range(steps):
            h, c = self.cell(T.index_axis(x, 1, t), (h, c))
            outputs.append(h)
        return T.stack(outputs, axis=1) if self.return_sequences else outputs[-1]

    __call__ = forward


def gru_cell(layer: GRULayer, x_t: Tensor, h_prev: Tensor) -> Tensor:
    return layer.cell(x_t, h_prev)


def lstm_cell(layer: LSTMLayer, x_t: Tensor, state):
    return layer.cell(x_t, state)
