"""Mixture-of-experts regressors gated by KAN-based residual blocks.

Everything runs on a small float64 numpy autodiff engine (`kamoe.tensor`);
the B-spline basis kernels are numba-jitted with a numpy fallback selected
by the KAMOE_NO_NUMBA environment variable.
"""

from .errors import (ConfigError, ContractError, DegenerateColumnError,
                     DegenerateSeriesError, DegenerateTargetError,
                     DivergenceError, KamoeError, ParseError, ShapeError)
from .experts import KANExpert, MLPExpert, count_parameters
from .gating import GRKANBlock, GRNBlock
from .kan import KANLinearLayer, SplineGrid, bspline_basis, count_kan_parameters
from .mixture import MixtureLayer
from .models import SequenceModel, build_model, load_model, save_model
from .nn import GLUBlock, LayerNormBlock, LinearLayer, Module, activation
from .recurrent import GRULayer, LSTMLayer
from .tensor import Parameter, Tape, Tensor, backward
from .training import (Adam, RunMetrics, TrainConfig, aggregate_runs, mse_loss,
                    predict, r2_score, train)

__version__ = "0.1.0"

__all__ = [
    "Adam", "ConfigError", "ContractError", "DegenerateColumnError",
    "DegenerateSeriesError", "DegenerateTargetError", "DivergenceError",
    "GLUBlock", "GRKANBlock", "GRNBlock", "GRULayer", "KamoeError",
    "KANExpert", "KANLinearLayer", "LayerNormBlock", "LinearLayer",
    "LSTMLayer", "MixtureLayer", "MLPExpert", "Module", "Parameter",
    "ParseError", "RunMetrics", "SequenceModel", "ShapeError", "SplineGrid",
    "Tape", "Tensor", "TrainConfig", "activation", "aggregate_runs",
    "backward", "bspline_basis", "build_model", "count_kan_parameters",
    "count_parameters", "load_model", "mse_loss", "predict", "r2_score",
    "save_model", "train",
]
