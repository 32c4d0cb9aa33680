import numpy as np
import numpy.testing as npt
import pytest

from kamoe.errors import ConfigError, ShapeError
from kamoe.experts import KANExpert, MLPExpert, count_parameters, expert_forward
from kamoe.tensor import Tensor


def test_mlp_parameter_counts_match_reference_cells():
    rng = np.random.default_rng(0)
    for hidden, layers, want in [(5, 1, 51), (10, 2, 211), (100, 1, 1001),
                                 (800, 2, 648801), (25, 4, 2201)]:
        model = MLPExpert(8, hidden, layers, 1, rng)
        assert count_parameters(model) == want


def test_mlp_positive_inputs_pass_through_identity_layers():
    rng = np.random.default_rng(1)
    model = MLPExpert(3, 3, 1, 2, rng)
    model.layers[0].weight.data[:] = np.eye(3)
    model.layers[0].bias.data[:] = 0.0
    x = np.abs(rng.normal(size=(4, 3))) + 0.1
    got = expert_forward(model, Tensor(x)).data
    want = x @ model.layers[1].weight.data + model.layers[1].bias.data
    npt.assert_allclose(got, want, rtol=1e-12)


def test_mlp_widths_chain():
    model = MLPExpert(8, 5, 3, 1, np.random.default_rng(2))
    shapes = [tuple(l.weight.data.shape) for l in model.layers]
    assert shapes == [(8, 5), (5, 5), (5, 5), (5, 1)]
    with pytest.raises(ConfigError):
        MLPExpert(8, 5, 0, 1, np.random.default_rng(2))


def test_kan_expert_is_plain_composition():
    rng = np.random.default_rng(3)
    model = KANExpert(4, 3, 2, 2, rng)
    x = Tensor(rng.uniform(-0.9, 0.9, size=(5, 4)))
    want = model.layers[1](model.layers[0](x)).data
    npt.assert_array_equal(expert_forward(model, x).data, want)


def test_kan_expert_widths_and_counts():
    # depth counts KAN layers: depth 1 maps inputs straight to outputs
    single = KANExpert(8, 5, 1, 1, np.random.default_rng(4))
    assert [(l.in_dim, l.out_dim) for l in single.layers] == [(8, 1)]
    assert count_parameters(single) == 8 * 1 * 9  # 9 scalars per edge, default grid
    deep = KANExpert(8, 5, 2, 1, np.random.default_rng(4))
    assert [(l.in_dim, l.out_dim) for l in deep.layers] == [(8, 5), (5, 1)]
    assert count_parameters(deep) == (8 * 5 + 5 * 1) * 9


def test_expert_forward_rank_check():
    model = MLPExpert(3, 4, 1, 1, np.random.default_rng(5))
    with pytest.raises(ShapeError):
        expert_forward(model, Tensor(np.ones((2, 3, 3))))
