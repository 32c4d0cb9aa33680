"""Command-line entry point: train, sweep, inspect, and eval subcommands.

Experiments are described by JSON config files; a few flags (--seed, --out)
override config fields so sweeps stay versionable. Set KAMOE_WORKERS to run
sweep cells in a process pool.
"""

import argparse
import concurrent.futures
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import (SynthConfig, load_csv, prepare_housing, prepare_sequence_task,
                   synth_seasonal_series)
from .errors import ConfigError, DivergenceError, KamoeError
from .mixture import MixtureLayer
from .models import SequenceModel, build_model, load_model, save_model
from .tensor import Tensor
from .training import RunMetrics, TrainConfig, aggregate_runs, predict, r2_score, train

TASKS = ("housing", "synthetic-seq", "csv-seq")
_SEQ_FIELDS = ("seq_len", "n_steps", "median_window", "synth", "csv_path", "target_channel")


@dataclass
class ExperimentConfig:
    task: str = "housing"
    variant: str = "standard"
    model: str = "mlp"
    hidden: int = 100
    layers: int = 1
    experts: int | None = None
    seq_len: int = 48
    n_steps: int = 3
    median_window: int | None = None
    test_fraction: float = 0.2
    csv_path: str | None = None
    target_channel: int = 0
    synth: dict = field(default_factory=dict)
    data_seed: int = 7
    split_seed: int = 1990
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "runs/out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        allowed = set(cls.__dataclass_fields__)
        for key in raw:
            if key not in allowed:
                raise ConfigError(f"{key}: unknown config field")
        cfg = dict(raw)
        train_cfg = cfg.pop("train", {})
        if not isinstance(train_cfg, dict):
            raise ConfigError("train: must be an object of TrainConfig fields")
        try:
            tc = TrainConfig(**train_cfg)
        except TypeError as e:
            raise ConfigError(f"train: {e}") from None
        obj = cls(**cfg, train=tc)
        obj.validate(provided=frozenset(raw))
        return obj

    def validate(self, provided=frozenset()):
        if self.task not in TASKS:
            raise ConfigError(f"task: must be one of {TASKS}, got {self.task!r}")
        if self.variant not in ("standard", "moe", "kamoe"):
            raise ConfigError(f"variant: must be standard/moe/kamoe, got {self.variant!r}")
        if self.variant == "standard" and self.experts is not None:
            raise ConfigError("experts: not allowed when variant is 'standard'")
        if self.variant != "standard" and self.experts is not None and self.experts < 1:
            raise ConfigError(f"experts: must be >= 1, got {self.experts}")
        if self.hidden < 1:
            raise ConfigError(f"hidden: must be >= 1, got {self.hidden}")
        if self.layers < 1:
            raise ConfigError(f"layers: must be >= 1, got {self.layers}")
        if self.task == "housing":
            if self.model not in ("mlp", "kan"):
                raise ConfigError(f"model: housing task takes mlp/kan, got {self.model!r}")
            for name in _SEQ_FIELDS:
                if name in provided:
                    raise ConfigError(f"{name}: not allowed for the housing task")
        else:
            if self.model not in ("gru", "lstm"):
                raise ConfigError(f"model: sequence tasks take gru/lstm, got {self.model!r}")
            if self.seq_len < 1 or self.n_steps < 1:
                raise ConfigError("seq_len/n_steps: must be >= 1")
            if self.task == "csv-seq" and not self.csv_path:
                raise ConfigError("csv_path: required for the csv-seq task")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction: must be in (0, 1), got {self.test_fraction}")

    def resolved_median_window(self) -> int:
        if self.median_window is not None:
            return self.median_window
        # two weeks of hourly bars for real series; short default for synthetic data
        return 48 if self.task == "synthetic-seq" else 336

    def n_experts(self) -> int:
        return self.experts if self.experts is not None else 3

    def manifest(self) -> dict:
        """Architecture description consumed by models.build_model."""
        base = {"variant": self.variant, "model": self.model,
                "hidden": self.hidden, "layers": self.layers}
        if self.variant != "standard":
            base["experts"] = self.n_experts()
        if self.task == "housing":
            base.update({"task": "flat", "in_dim": 8, "out_dim": 1})
        else:
            q = self.synth.get("channels", 3) if self.task == "synthetic-seq" else self._csv_channels()
            base.update({"task": "sequence", "in_dim": q,
                         "s": self.seq_len, "n_steps": self.n_steps})
        return base

    def _csv_channels(self) -> int:
        ds = load_csv(self.csv_path)
        return ds.features.shape[1] + ds.targets.shape[1]


def build_dataset(cfg: ExperimentConfig):
    if cfg.task == "housing":
        dataset, _ = prepare_housing(cfg.split_seed, cfg.test_fraction)
        return dataset
    if cfg.task == "synthetic-seq":
        table = synth_seasonal_series(SynthConfig(**cfg.synth), cfg.data_seed)
    else:
        ds = load_csv(cfg.csv_path)
        table = np.column_stack([ds.features, ds.targets])
    return prepare_sequence_task(table, cfg.seq_len, cfg.n_steps,
                                 cfg.resolved_median_window(), cfg.test_fraction,
                                 cfg.target_channel)


def run_experiment(cfg: ExperimentConfig) -> tuple[RunMetrics, object]:
    dataset = build_dataset(cfg)
    model = build_model(cfg.manifest(), np.random.default_rng(cfg.train.seed))
    metrics = train(model, dataset, cfg.train)
    return metrics, model


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config: invalid JSON ({e})") from None


def _write_json(path: str, payload: dict):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw.setdefault("train", {})["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    cfg = ExperimentConfig.from_dict(raw)
    os.makedirs(cfg.out_dir, exist_ok=True)
    metrics, model = run_experiment(cfg)
    prefix = os.path.join(cfg.out_dir, "model")
    save_model(model, cfg.manifest(), prefix)
    payload = {"metrics": metrics.to_dict(), "config": _config_dict(cfg)}
    _write_json(os.path.join(cfg.out_dir, "metrics.json"), payload)
    lines = [f"task={cfg.task} variant={cfg.variant} model={cfg.model} "
             f"hidden={cfg.hidden} layers={cfg.layers} seed={cfg.train.seed}",
             f"r2={metrics.r2:.6f} rmse={metrics.rmse:.6f} mse={metrics.mse:.6f}",
             f"parameters={metrics.parameters} seconds={metrics.seconds:.2f}"]
    with open(os.path.join(cfg.out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["train"] = asdict(cfg.train)
    return d


# ---------------------------------------------------------------------------
# sweep

def _cell_worker(raw_cfg: dict) -> dict:
    cfg = ExperimentConfig.from_dict(raw_cfg)
    metrics, _ = run_experiment(cfg)
    return metrics.to_dict()


def _sweep_cells(raw: dict):
    grid = raw.get("grid")
    if not isinstance(grid, dict):
        raise ConfigError("grid: sweep config requires a 'grid' object")
    hiddens = grid.get("hidden", [100])
    layer_counts = grid.get("layers", [1])
    variants = grid.get("variants", ["standard", "moe", "kamoe"])
    seeds = grid.get("seeds", [0])
    base = {k: v for k, v in raw.items() if k not in ("grid", "out_dir")}
    cells = []
    for variant in variants:
        for hidden in hiddens:
            for layers in layer_counts:
                for seed in seeds:
                    cell = dict(base)
                    cell.update({"variant": variant, "hidden": hidden, "layers": layers})
                    if variant == "standard":
                        cell.pop("experts", None)
                    tc = dict(cell.get("train", {}))
                    tc["seed"] = seed
                    cell["train"] = tc
                    ExperimentConfig.from_dict(cell)  # validate early, field-level
                    cells.append(((variant, hidden, layers), seed, cell))
    return cells, hiddens, layer_counts, variants, seeds


def cmd_sweep(args) -> int:
    raw = _load_config(args.config)
    out_dir = args.out or raw.get("out_dir", "sweep")
    raw.pop("out_dir", None)
    cells, hiddens, layer_counts, variants, seeds = _sweep_cells(raw)
    os.makedirs(out_dir, exist_ok=True)

    workers = int(os.environ.get("KAMOE_WORKERS", "1"))
    results: dict[tuple, list] = {}
    errors = {}
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_cell_worker, cfg): (key, seed) for key, seed, cfg in cells}
            for fut in concurrent.futures.as_completed(futures):
                key, seed = futures[fut]
                try:
                    results.setdefault(key, []).append(fut.result())
                except Exception as e:  # record and continue
                    errors[f"{key}/seed{seed}"] = f"{type(e).__name__}: {e}"
    else:
        for key, seed, cfg in cells:
            try:
                results.setdefault(key, []).append(_cell_worker(cfg))
            except Exception as e:
                errors[f"{key}/seed{seed}"] = f"{type(e).__name__}: {e}"

    aggregates = {}
    for key, runs in results.items():
        agg = aggregate_runs([RunMetrics(**r) for r in runs])
        aggregates[key] = {"mean": agg.mean, "std": agg.std, "n_runs": agg.n_runs}

    _write_json(os.path.join(out_dir, "results.json"),
                {"cells": {f"{v}/h{h}/L{l}": agg for (v, h, l), agg in aggregates.items()},
                 "errors": errors,
                 "grid": {"hidden": hiddens, "layers": layer_counts,
                          "variants": variants, "seeds": seeds}})

    for metric, stat in (("r2", "mean"), ("r2", "std"), ("mse", "mean"),
                         ("rmse", "mean"), ("parameters", "mean"), ("seconds", "mean")):
        _write_table(out_dir, aggregates, metric, stat, hiddens, layer_counts, variants)
    if errors:
        print(f"sweep finished with {len(errors)} failed cells (see results.json)")
    print(f"wrote tables to {out_dir}")
    return 0


def _write_table(out_dir, aggregates, metric, stat, hiddens, layer_counts, variants):
    path = os.path.join(out_dir, f"{stat}_{metric}.csv")
    columns = [(v, l) for v in variants for l in layer_counts]
    rows = [["hidden_units"] + [f"{v}_L{l}" for v, l in columns]]

    def cell(v, h, l):
        agg = aggregates.get((v, h, l))
        return agg[stat][metric] if agg is not None else float("nan")

    for h in hiddens:
        rows.append([h] + [_fmt(cell(v, h, l)) for v, l in columns])
    if stat == "mean" and "standard" in variants:
        footer = ["avg_diff_vs_standard"]
        for v, l in columns:
            if v == "standard":
                footer.append("")
            else:
                diffs = [cell(v, h, l) - cell("standard", h, l) for h in hiddens]
                footer.append(_fmt(float(np.mean(diffs))))
        rows.append(footer)
    tmp = path + ".tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    os.replace(tmp, path)


def _fmt(x) -> str:
    if isinstance(x, float) and (np.isnan(x) or np.isinf(x)):
        return "nan"
    return f"{x:.6g}"


# ---------------------------------------------------------------------------
# inspect / eval

def _find_mixture(model):
    if isinstance(model, MixtureLayer):
        return model
    if isinstance(model, SequenceModel) and isinstance(model.first, MixtureLayer):
        return model.first
    return None


def _load_inputs(path: str) -> np.ndarray:
    if path.endswith(".npz"):
        with np.load(path) as blob:
            key = "windows" if "windows" in blob.files else blob.files[0]
            return blob[key]
    ds = load_csv(path)
    return np.column_stack([ds.features, ds.targets])


def cmd_inspect(args) -> int:
    model, manifest = load_model(args.model)
    mixture = _find_mixture(model)
    if mixture is None:
        print("inspect: model has no mixture layer", file=sys.stderr)
        return 2
    inputs = _load_inputs(args.input)
    expected = mixture.input_shape
    if inputs.shape[1:] != expected:
        if len(expected) == 1 and inputs.ndim == 2 and inputs.shape[1] == expected[0] + 1:
            inputs = inputs[:, :-1]  # allow tables that still carry the target column
        else:
            raise ConfigError(
                f"input: samples shaped {inputs.shape[1:]} do not match model input {expected}")
    gates = mixture.gate_weights(mixture.transform_inputs(Tensor(inputs))).data
    m = gates.shape[1]
    header = "sample," + ",".join(f"expert_{k}" for k in range(m))
    print(header)
    limit = args.limit if args.limit is not None else gates.shape[0]
    for i in range(min(limit, gates.shape[0])):
        print(f"{i}," + ",".join(f"{w:.6f}" for w in gates[i]))
    means = gates.mean(axis=0)
    print("mean," + ",".join(f"{w:.6f}" for w in means))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "gating.json"),
                    {"mean_weight_per_expert": means.tolist(),
                     "n_samples": int(gates.shape[0]),
                     "variant": manifest.get("variant")})
    return 0


def cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    raw = _load_config(args.config)
    if args.seed is not None:
        raw.setdefault("train", {})["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(raw)
    dataset = build_dataset(cfg)
    x_test, y_test = dataset.test_arrays()
    pred = predict(model, x_test)
    mse = float(np.mean((pred - y_test) ** 2))
    payload = {"r2": r2_score(pred, y_test), "mse": mse, "rmse": float(np.sqrt(mse)),
               "n_test": int(x_test.shape[0])}
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "eval.json"), payload)
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kamoe",
                                     description="Train and compare mixture-of-experts regressors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None)
    p_train.set_defaults(fn=cmd_train)

    p_sweep = sub.add_parser("sweep", help="run a hidden/layers/variant/seed grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_inspect = sub.add_parser("inspect", help="report per-sample expert gate weights")
    p_inspect.add_argument("--model", required=True, help="model prefix or .json path")
    p_inspect.add_argument("--input", required=True, help="csv table or .npz with 'windows'")
    p_inspect.add_argument("--limit", type=int, default=None)
    p_inspect.add_argument("--out", default=None)
    p_inspect.set_defaults(fn=cmd_inspect)

    p_eval = sub.add_parser("eval", help="evaluate a saved model on a config's test split")
    p_eval.add_argument("--model", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--out", default=None)
    p_eval.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (KamoeError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
