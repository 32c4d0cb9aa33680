"""Loss, Adam, the training loop, and evaluation metrics."""

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import (ConfigError, DegenerateTargetError, DivergenceError,
                     ShapeError)
from .tensor import Tape, Tensor


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 128
    learning_rate: float = 1e-3
    seed: int = 0
    patience: int = 10
    val_fraction: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.patience < 0:
            raise ConfigError(f"patience must be >= 0, got {self.patience}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must be in [0, 1), got {self.val_fraction}")


@dataclass
class RunMetrics:
    r2: float
    rmse: float
    mse: float
    seconds: float
    parameters: int
    seed: int = 0

    def to_dict(self):
        return {"r2": self.r2, "rmse": self.rmse, "mse": self.mse,
                "seconds": self.seconds, "parameters": self.parameters, "seed": self.seed}


@dataclass
class AggregateMetrics:
    """Per-metric mean and sample standard deviation over repeated runs."""

    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    n_runs: int = 0


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss shapes differ: {pred.shape} vs {target.shape}")
    diff = T.sub(pred, target)
    return T.reduce_mean(T.mul(diff, diff))


def r2_score(pred: np.ndarray, target: np.ndarray) -> float:
    """1 - SS_res/SS_tot; multi-output targets are averaged uniformly."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"r2_score shapes differ: {pred.shape} vs {target.shape}")
    if pred.ndim == 1:
        pred, target = pred[:, None], target[:, None]
    ss_tot = ((target - target.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(ss_tot == 0.0):
        raise DegenerateTargetError("target has a zero-variance column")
    ss_res = ((target - pred) ** 2).sum(axis=0)
    return float(np.mean(1.0 - ss_res / ss_tot))


class Adam:
    """Standard Adam with bias correction; state shaped like the parameters."""

    def __init__(self, params, config: TrainConfig):
        self.params = list(params)
        self.lr = config.learning_rate
        self.beta1, self.beta2, self.eps = config.beta1, config.beta2, config.eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(params, grads, state: Adam | None, config: TrainConfig) -> Adam:
    """Functional surface over Adam: set grads, apply one update, return the state."""
    if state is None:
        state = Adam(params, config)
    for p, g in zip(params, grads):
        p.grad = np.asarray(g, dtype=np.float64)
    state.step()
    return state


def predict(model, x: np.ndarray, batch_size: int = 1024) -> np.ndarray:
    """Forward pass in inference mode (no tape), batched to bound memory."""
    outs = []
    for i in range(0, x.shape[0], batch_size):
        outs.append(model.forward(Tensor(x[i:i + batch_size])).data)
    return np.concatenate(outs, axis=0)


def _epoch_loss(model, x, y, batch_size):
    total, count = 0.0, 0
    for i in range(0, x.shape[0], batch_size):
        xb, yb = x[i:i + batch_size], y[i:i + batch_size]
        err = model.forward(Tensor(xb)).data - yb
        total += float((err * err).sum())
        count += err.size
    return total / count


def train(model, dataset, config: TrainConfig) -> RunMetrics:
    """Seeded minibatch Adam with early stopping on a held-out validation slice.

    The best-validation weights are restored before the test evaluation.
    Raises DivergenceError (with the epoch) if the loss goes non-finite.
    """
    start = time.perf_counter()
    x_train, y_train = dataset.train_arrays()
    x_test, y_test = dataset.test_arrays()
    n = x_train.shape[0]

    ss = np.random.SeedSequence(config.seed)
    rng_split, rng_shuffle = [np.random.default_rng(s) for s in ss.spawn(2)]
    n_val = int(round(config.val_fraction * n))
    perm = rng_split.permutation(n)
    val_rows, fit_rows = perm[:n_val], perm[n_val:]
    x_fit, y_fit = x_train[fit_rows], y_train[fit_rows]
    x_val, y_val = x_train[val_rows], y_train[val_rows]

    params = model.parameters()
    opt = Adam(params, config)
    best_val = np.inf
    best_state = None
    wait = 0

    for epoch in range(config.epochs):
        order = rng_shuffle.permutation(x_fit.shape[0])
        for i in range(0, order.size, config.batch_size):
            rows = order[i:i + config.batch_size]
            with Tape() as tape:
                pred = model.forward(Tensor(x_fit[rows]))
                loss = mse_loss(pred, Tensor(y_fit[rows]))
                if not np.isfinite(loss.data):
                    raise DivergenceError(epoch)
                tape.backward(loss)
            opt.step()
            model.zero_grad()
        if n_val > 0:
            val_loss = _epoch_loss(model, x_val, y_val, config.batch_size)
            if not np.isfinite(val_loss):
                raise DivergenceError(epoch)
            if val_loss < best_val:
                best_val = val_loss
                best_state = {k: p.data.copy() for k, p in model.named_parameters().items()}
                wait = 0
            else:
                wait += 1
                if wait > config.patience:
                    break

    if best_state is not None:
        for k, p in model.named_parameters().items():
            p.data[...] = best_state[k]

    pred_test = predict(model, x_test, config.batch_size)
    mse = float(np.mean((pred_test - y_test) ** 2))
    return RunMetrics(r2=r2_score(pred_test, y_test), rmse=float(np.sqrt(mse)), mse=mse,
                      seconds=time.perf_counter() - start,
                      parameters=model.count_parameters(), seed=config.seed)


_METRIC_KEYS = ("r2", "rmse", "mse", "seconds", "parameters")


def aggregate_runs(runs) -> AggregateMetrics:
    """Mean and sample standard deviation (0 for a single run) per metric."""
    runs = list(runs)
    if not runs:
        raise ConfigError("aggregate_runs needs at least one run")
    agg = AggregateMetrics(n_runs=len(runs))
    for key in _METRIC_KEYS:
        values = np.array([getattr(r, key) for r in runs], dtype=np.float64)
        agg.mean[key] = float(values.mean())
        agg.std[key] = float(values.std(ddof=1)) if len(runs) > 1 else 0.0
    return agg
