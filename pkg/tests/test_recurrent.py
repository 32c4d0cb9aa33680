import numpy as np
import numpy.testing as npt
import pytest

from helpers import gradcheck
from kamoe import tensor as T
from kamoe.errors import ShapeError
from kamoe.experts import expert_forward
from kamoe.recurrent import GRULayer, LSTMLayer, gru_cell, lstm_cell
from kamoe.tensor import Parameter, Tensor


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def test_gru_zero_weights_zero_state():
    rng = np.random.default_rng(0)
    layer = GRULayer(3, 4, rng, return_sequences=True)
    for p in layer.parameters():
        p.data[:] = 0.0
    out = layer(Tensor(rng.normal(size=(2, 5, 3))))
    npt.assert_array_equal(out.data, 0.0)


def test_gru_update_gate_forced_closed_keeps_state():
    rng = np.random.default_rng(1)
    layer = GRULayer(3, 4, rng)
    layer.bias.data[:4] = -20.0  # z ~ 0 so h stays at h_prev
    h_prev = Tensor(rng.normal(size=(2, 4)))
    h = gru_cell(layer, Tensor(rng.normal(size=(2, 3))), h_prev)
    npt.assert_allclose(h.data, h_prev.data, atol=1e-6)


def test_gru_cell_matches_scalar_oracle():
    rng = np.random.default_rng(2)
    hd = 3
    layer = GRULayer(2, hd, rng)
    x = rng.normal(size=(1, 2))
    h_prev = rng.normal(size=(1, hd))
    got = gru_cell(layer, Tensor(x), Tensor(h_prev)).data[0]
    wx, wh, wc, b = layer.w_x.data, layer.w_h.data, layer.w_c.data, layer.bias.data
    xg = x[0] @ wx + b
    hg = h_prev[0] @ wh
    z = _sigmoid(xg[:hd] + hg[:hd])
    r = _sigmoid(xg[hd:2 * hd] + hg[hd:2 * hd])
    cand = np.tanh(xg[2 * hd:] + (r * h_prev[0]) @ wc)
    want = (1.0 - z) * h_prev[0] + z * cand
    npt.assert_allclose(got, want, rtol=1e-12)


def test_lstm_zero_weights_zero_states():
    rng = np.random.default_rng(3)
    layer = LSTMLayer(3, 4, rng)
    for p in layer.parameters():
        p.data[:] = 0.0
    h, c = lstm_cell(layer, Tensor(rng.normal(size=(2, 3))),
                     (Tensor(np.zeros((2, 4))), Tensor(np.zeros((2, 4)))))
    npt.assert_array_equal(h.data, 0.0)
    npt.assert_array_equal(c.data, 0.0)


def test_lstm_memory_carry_limit():
    rng = np.random.default_rng(4)
    hd = 4
    layer = LSTMLayer(3, hd, rng)
    layer.bias.data[0:hd] = -20.0        # input gate ~ 0
    layer.bias.data[hd:2 * hd] = 20.0    # forget gate ~ 1
    c_prev = Tensor(rng.normal(size=(2, hd)))
    _, c = lstm_cell(layer, Tensor(rng.normal(size=(2, 3))),
                     (Tensor(rng.normal(size=(2, hd))), c_prev))
    npt.assert_allclose(c.data, c_prev.data, atol=1e-6)


def test_lstm_cell_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    hd = 3
    layer = LSTMLayer(2, hd, rng)
    x = rng.normal(size=(1, 2))
    h_prev, c_prev = rng.normal(size=(1, hd)), rng.normal(size=(1, hd))
    h, c = lstm_cell(layer, Tensor(x), (Tensor(h_prev), Tensor(c_prev)))
    g = x[0] @ layer.w_x.data + h_prev[0] @ layer.w_h.data + layer.bias.data
    i, f = _sigmoid(g[:hd]), _sigmoid(g[hd:2 * hd])
    cand, o = np.tanh(g[2 * hd:3 * hd]), _sigmoid(g[3 * hd:])
    c_want = f * c_prev[0] + i * cand
    npt.assert_allclose(c.data[0], c_want, rtol=1e-12)
    npt.assert_allclose(h.data[0], o * np.tanh(c_want), rtol=1e-12)


def test_backpropagation_through_time():
    rng = np.random.default_rng(6)
    x = Parameter(rng.uniform(-1.5, 1.5, size=(2, 4, 2)), "x")
    gru = GRULayer(2, 3, rng, return_sequences=True)
    lstm = LSTMLayer(2, 3, rng, return_sequences=False)
    assert gradcheck(lambda: T.reduce_sum(T.mul(gru(x), gru(x))),
                     [x] + gru.parameters()) < 1e-4
    assert gradcheck(lambda: T.reduce_sum(T.mul(lstm(x), lstm(x))),
                     [x] + lstm.parameters()) < 1e-4


def test_return_sequences_consistency():
    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(3, 6, 2)))
    for cls in (GRULayer, LSTMLayer):
        seq_layer = cls(2, 4, np.random.default_rng(99), return_sequences=True)
        full = seq_layer(x).data
        seq_layer.return_sequences = False
        last = seq_layer(x).data
        npt.assert_array_equal(full[:, -1, :], last)


def test_rank_validation():
    rng = np.random.default_rng(8)
    gru = GRULayer(3, 4, rng)
    with pytest.raises(ShapeError):
        gru(Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        expert_forward(gru, Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        gru(Tensor(np.ones((2, 5, 4))))
