"""Dataset ingestion, scaling, windowing, and the synthetic seasonal generator."""

import csv
import gzip
import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConfigError, DegenerateColumnError, DegenerateSeriesError,
                     ParseError, ShapeError)

HOUSING_FEATURES = ["MedInc", "HouseAge", "AveRooms", "AveBedrms",
                    "Population", "AveOccup", "Latitude", "Longitude"]
HOUSING_TARGET = "MedHouseVal"


@dataclass
class TabularDataset:
    """Flat regression table with train/test row indices (set by the pipeline)."""

    features: np.ndarray          # (N, F)
    targets: np.ndarray           # (N, T)
    feature_names: list
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None

    @property
    def n_rows(self):
        return self.features.shape[0]

    def train_arrays(self):
        return self.features[self.train_idx], self.targets[self.train_idx]

    def test_arrays(self):
        return self.features[self.test_idx], self.targets[self.test_idx]


@dataclass
class SequenceDataset:
    """Sliding windows plus their future horizons; windows always precede horizons."""

    windows: np.ndarray           # (N, s, q)
    horizons: np.ndarray          # (N, n_steps)
    metadata: dict = field(default_factory=dict)
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None

    def train_arrays(self):
        return self.windows[self.train_idx], self.horizons[self.train_idx]

    def test_arrays(self):
        return self.windows[self.test_idx], self.horizons[self.test_idx]


def _open_text(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def load_csv(path, schema: list | None = None) -> TabularDataset:
    """Parse a numeric CSV (header row, '.' decimals) into a TabularDataset.

    The last column is the target; any non-numeric data cell raises ParseError
    with its row index. `schema`, when given, must match the header exactly.
    """
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(0, "empty file") from None
        header = [h.strip() for h in header]
        if schema is not None and header != list(schema):
            raise ConfigError(f"header {header} does not match schema {list(schema)}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(i, f"expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(i, f"non-numeric cell in {row!r}") from None
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return TabularDataset(features=data[:, :-1], targets=data[:, -1:],
                          feature_names=header[:-1])


def load_california_housing(path=None) -> TabularDataset:
    """Load the bundled 20,640-row California census block-group table."""
    if path is None:
        path = importlib.resources.files("kamoe.datasets") / "california_housing.csv.gz"
    return load_csv(path, schema=HOUSING_FEATURES + [HOUSING_TARGET])


class Scaler:
    """Min-max to [0,1] or standardization, fitted on training rows only."""

    def __init__(self, kind: str):
        if kind not in ("minmax", "standard"):
            raise ConfigError(f"unknown scaler kind {kind!r}")
        self.kind = kind
        self.stats = None

    def fit(self, train: np.ndarray):
        train = np.asarray(train, dtype=np.float64)
        if self.kind == "minmax":
            lo, hi = train.min(axis=0), train.max(axis=0)
            if np.any(hi <= lo):
                cols = np.nonzero(hi <= lo)[0].tolist()
                raise DegenerateColumnError(f"constant columns {cols} cannot be min-max scaled")
            self.stats = (lo, hi)
        else:
            mean = train.mean(axis=0)
            std = train.std(axis=0)
            std = np.where(std == 0.0, 1.0, std)
            self.stats = (mean, std)
        return self

    def transform(self, x: np.ndarray) -> np.ndarray:
        if self.stats is None:
            raise ConfigError("scaler used before fit")
        a, b = self.stats
        if self.kind == "minmax":
            return (x - a) / (b - a)
        return (x - a) / b

    def fit_transform(self, train: np.ndarray) -> np.ndarray:
        return self.fit(train).transform(train)

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        if self.stats is None:
            raise ConfigError("scaler used before fit")
        a, b = self.stats
        if self.kind == "minmax":
            return x * (b - a) + a
        return x * b + a


def moving_median_normalize(series: np.ndarray, window: int) -> np.ndarray:
    """Divide each value by the median of the `window` values before it.

    Returns rows for original indices [window, len); earlier rows have no
    full trailing window and are dropped.
    """
    series = np.asarray(series, dtype=np.float64)
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    if series.shape[0] <= window:
        raise ConfigError(f"series length {series.shape[0]} too short for window {window}")
    flat = series.ndim == 1
    table = series[:, None] if flat else series
    trailing = np.lib.stride_tricks.sliding_window_view(table[:-1], window, axis=0)
    medians = np.median(trailing, axis=-1)  # medians[i] covers rows [i, i+window)
    if np.any(medians == 0.0):
        raise DegenerateSeriesError("zero moving median encountered")
    out = table[window:] / medians
    return out[:, 0] if flat else out


def make_windows(table: np.ndarray, s: int, n_steps: int,
                 target_channel: int = 0) -> SequenceDataset:
    """Slice (window, horizon) pairs: N = len(table) - s - n_steps + 1."""
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2:
        raise ShapeError(f"expected a (time, channels) table, got shape {table.shape}")
    n = table.shape[0] - s - n_steps + 1
    if n < 1:
        raise ConfigError(
            f"series of length {table.shape[0]} cannot produce windows with s={s}, n_steps={n_steps}")
    windows = np.stack([table[i:i + s] for i in range(n)])
    horizons = np.stack([table[i + s:i + s + n_steps, target_channel] for i in range(n)])
    return SequenceDataset(windows=windows, horizons=horizons,
                           metadata={"s": s, "n_steps": n_steps, "target_channel": target_channel})


@dataclass
class SynthConfig:
    """AR(1)-plus-sinusoid generator standing in for a seasonal market series."""

    length: int = 1000
    channels: int = 3
    period: float = 24.0
    amplitude: float = 1.0
    level: float = 5.0
    ar_coeff: float = 0.7
    noise_std: float = 0.1

    def __post_init__(self):
        if self.length < 2 or self.channels < 1:
            raise ConfigError("synthetic series needs length >= 2 and channels >= 1")


def synth_seasonal_series(config: SynthConfig, seed: int) -> np.ndarray:
    """Deterministic (T, q) table: level + seasonal sinusoid + AR(1) noise."""
    rng = np.random.default_rng(seed)
    t = np.arange(config.length)[:, None]
    phase = np.arange(config.channels)[None, :] / config.channels
    base = config.level + config.amplitude * np.sin(2.0 * np.pi * (t / config.period + phase))
    noise = np.zeros((config.length, config.channels))
    shocks = config.noise_std * rng.standard_normal((config.length, config.channels))
    for i in range(1, config.length):
        noise[i] = config.ar_coeff * noise[i - 1] + shocks[i]
    return base + noise


def split_random(n_rows: int, test_fraction: float, seed: int):
    """Disjoint, exhaustive random train/test row indices."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_rows)
    n_test = int(round(test_fraction * n_rows))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def prepare_housing(seed: int, test_fraction: float = 0.2, path=None):
    """Housing pipeline: random split, features standardized on train rows only."""
    ds = load_california_housing(path)
    train_idx, test_idx = split_random(ds.n_rows, test_fraction, seed)
    scaler = Scaler("standard").fit(ds.features[train_idx])
    return TabularDataset(features=scaler.transform(ds.features),
                          targets=ds.targets, feature_names=ds.feature_names,
                          train_idx=train_idx, test_idx=test_idx), scaler


def prepare_sequence_task(table: np.ndarray, s: int, n_steps: int, median_window: int,
                          test_fraction: float = 0.2, target_channel: int = 0,
                          name: str = "synthetic") -> SequenceDataset:
    """Sequence pipeline: median-normalize, min-max on the train span, window, split.

    The split is chronological; train horizons end before the boundary and test
    horizons start at or after it, so no pair straddles the two regimes.
    """
    norm = moving_median_normalize(table, median_window)
    boundary = int(round(norm.shape[0] * (1.0 - test_fraction)))
    scaler = Scaler("minmax").fit(norm[:boundary])
    scaled = scaler.transform(norm)
    ds = make_windows(scaled, s, n_steps, target_channel)
    starts = np.arange(ds.windows.shape[0])
    ds.train_idx = starts[starts + s + n_steps <= boundary]
    ds.test_idx = starts[starts + s >= boundary]
    ds.metadata.update({"asset": name, "median_window": median_window,
                        "boundary": boundary})
    if ds.train_idx.size == 0 or ds.test_idx.size == 0:
        raise ConfigError("series too short to produce both train and test windows")
    return ds
