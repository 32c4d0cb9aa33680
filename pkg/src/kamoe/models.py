"""Model assembly for both tasks, plus flat-array serialization with a JSON manifest."""

import json
import os

import numpy as np

from .errors import ConfigError, ShapeError
from .experts import KANExpert, MLPExpert
from .kan import SplineGrid
from .mixture import MixtureLayer
from .nn import LinearLayer, Module
from .recurrent import GRULayer, LSTMLayer
from .tensor import Tensor

VARIANTS = ("standard", "moe", "kamoe")
FLAT_MODELS = ("mlp", "kan")
SEQ_MODELS = ("gru", "lstm")
_GATING = {"moe": "grn", "kamoe": "grkan"}


class SequenceModel(Module):
    """Two recurrent layers (full sequence, then last step) and a linear head.

    For mixture variants only the first layer is wrapped: it becomes a mixture
    of m sequence-returning recurrent experts.
    """

    def __init__(self, first, second, head):
        self.first = first
        self.second = second
        self.head = head

    def forward(self, x: Tensor) -> Tensor:
        return self.head(self.second(self.first(x)))

    __call__ = forward


def _grid_from(manifest) -> SplineGrid:
    g = manifest.get("grid", {})
    return SplineGrid(g.get("grid_size", 5), g.get("spline_order", 3),
                      tuple(g.get("domain", (-1.0, 1.0))))


def _flat_expert(kind, in_dim, hidden, layers, out_dim, rng, grid):
    if kind == "mlp":
        return MLPExpert(in_dim, hidden, layers, out_dim, rng)
    return KANExpert(in_dim, hidden, layers, out_dim, rng, grid)


def _seq_layer(kind, in_dim, hidden, rng, return_sequences):
    cls = GRULayer if kind == "gru" else LSTMLayer
    return cls(in_dim, hidden, rng, return_sequences=return_sequences)


def build_model(manifest: dict, rng: np.random.Generator) -> Module:
    """Construct a model from a manifest dict (the same dict serialization stores).

    Required keys: task (flat|sequence), variant, model, hidden, layers,
    in_dim, out_dim; sequence tasks add s and n_steps; mixtures add experts.
    """
    task = manifest["task"]
    variant = manifest["variant"]
    kind = manifest["model"]
    hidden = int(manifest["hidden"])
    layers = int(manifest.get("layers", 1))
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    grid = _grid_from(manifest)
    m = int(manifest.get("experts", 3))

    if task == "flat":
        if kind not in FLAT_MODELS:
            raise ConfigError(f"flat task supports models {FLAT_MODELS}, got {kind!r}")
        in_dim = int(manifest["in_dim"])
        out_dim = int(manifest.get("out_dim", 1))
        if variant == "standard":
            return _flat_expert(kind, in_dim, hidden, layers, out_dim, rng, grid)
        experts = [_flat_expert(kind, in_dim, hidden, layers, out_dim, rng, grid)
                   for _ in range(m)]
        return MixtureLayer(experts, (in_dim,), rng, gating=_GATING[variant], grid=grid)

    if task == "sequence":
        if kind not in SEQ_MODELS:
            raise ConfigError(f"sequence task supports models {SEQ_MODELS}, got {kind!r}")
        q = int(manifest["in_dim"])
        s = int(manifest["s"])
        n_steps = int(manifest["n_steps"])
        if variant == "standard":
            first = _seq_layer(kind, q, hidden, rng, return_sequences=True)
        else:
            experts = [_seq_layer(kind, q, hidden, rng, return_sequences=True)
                       for _ in range(m)]
            first = MixtureLayer(experts, (s, q), rng, gating=_GATING[variant], grid=grid)
        second = _seq_layer(kind, hidden, hidden, rng, return_sequences=False)
        return SequenceModel(first, second, LinearLayer(hidden, n_steps, rng))

    raise ConfigError(f"task must be 'flat' or 'sequence', got {task!r}")


def save_model(model: Module, manifest: dict, prefix: str):
    """Write `prefix`.json (manifest) and `prefix`.npz (name -> float64 array)."""
    params = model.named_parameters()
    manifest = dict(manifest)
    manifest["format"] = 1
    tmp = prefix + ".json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    os.replace(tmp, prefix + ".json")
    np.savez(prefix + ".npz", **{k: p.data for k, p in params.items()})
    return prefix + ".json", prefix + ".npz"


def load_model(prefix: str):
    """Rebuild a model from its manifest and restore exact parameter values."""
    if prefix.endswith(".json"):
        prefix = prefix[:-5]
    with open(prefix + ".json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    model = build_model(manifest, np.random.default_rng(0))
    with np.load(prefix + ".npz") as blob:
        stored = {k: blob[k] for k in blob.files}
    params = model.named_parameters()
    if set(params) != set(stored):
        missing = set(params) ^ set(stored)
        raise ConfigError(f"parameter names do not match manifest architecture: {sorted(missing)[:5]}")
    for name, p in params.items():
        if p.data.shape != stored[name].shape:
            raise ShapeError(f"{name}: stored shape {stored[name].shape} != model {p.data.shape}")
        p.data[...] = stored[name]
    return model, manifest
