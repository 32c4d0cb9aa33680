import numpy as np
import numpy.testing as npt
import pytest

from kamoe.data import (HOUSING_FEATURES, Scaler, SynthConfig, load_csv,
                        load_california_housing, make_windows,
                        moving_median_normalize, prepare_housing,
                        prepare_sequence_task, split_random,
                        synth_seasonal_series)
from kamoe.errors import (ConfigError, DegenerateColumnError,
                          DegenerateSeriesError, ParseError)


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_csv_small_fixture(tmp_path):
    p = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    ds = load_csv(p)
    assert ds.n_rows == 3
    assert ds.feature_names == ["a", "b"]
    npt.assert_array_equal(ds.targets[:, 0], [3.0, 6.0, 9.0])


def test_load_csv_header_only_is_empty_and_valid(tmp_path):
    ds = load_csv(_write(tmp_path, "a,b,y\n"))
    assert ds.n_rows == 0


def test_load_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv")
    with pytest.raises(ParseError) as err:
        load_csv(_write(tmp_path, "a,b\n1,2\n3,oops\n"))
    assert err.value.row == 2
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "a,b\n1,2,3\n"))
    with pytest.raises(ConfigError):
        load_csv(_write(tmp_path, "a,b\n1,2\n"), schema=["x", "y"])


def test_housing_fixture_shape():
    ds = load_california_housing()
    assert ds.n_rows == 20640
    assert ds.features.shape == (20640, 8)
    assert ds.feature_names == HOUSING_FEATURES
    # spot stats of the classic table
    assert abs(ds.features[:, 0].mean() - 3.870671) < 1e-6
    assert abs(ds.targets.mean() - 2.068558) < 1e-6


def test_moving_median_constant_series_is_one():
    out = moving_median_normalize(np.full(50, 3.25), 10)
    npt.assert_allclose(out, 1.0, rtol=1e-12)
    assert out.shape == (40,)


def test_moving_median_hand_case():
    out = moving_median_normalize(np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), 3)
    assert out[0] == 4.0 / 2.0
    assert out[1] == 5.0 / 3.0
    assert out[2] == 6.0 / 4.0


def test_moving_median_scale_invariance():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.5, 2.0, size=(60, 2))
    base = moving_median_normalize(x, 7)
    # power-of-two scaling is an exact exponent shift, so equality is bitwise
    npt.assert_array_equal(moving_median_normalize(128.0 * x, 7), base)
    npt.assert_allclose(moving_median_normalize(123.456 * x, 7), base, rtol=1e-12)


def test_moving_median_degenerate_and_short():
    with pytest.raises(DegenerateSeriesError):
        moving_median_normalize(np.array([0.0, 0.0, 0.0, 1.0, 1.0]), 2)
    with pytest.raises(ConfigError):
        moving_median_normalize(np.ones(5), 5)


def test_minmax_scaler_examples():
    sc = Scaler("minmax")
    npt.assert_allclose(sc.fit_transform(np.array([[2.0], [4.0], [6.0]]))[:, 0], [0, 0.5, 1])
    assert sc.transform(np.array([[8.0]]))[0, 0] == 1.5
    npt.assert_allclose(sc.inverse_transform(np.array([[0.5]]))[0, 0], 4.0)


def test_standard_scaler_statistics():
    rng = np.random.default_rng(1)
    train = rng.normal(3.0, 2.5, size=(200, 4))
    sc = Scaler("standard")
    z = sc.fit_transform(train)
    assert np.max(np.abs(z.mean(axis=0))) < 1e-10
    assert np.max(np.abs(z.std(axis=0) - 1.0)) < 1e-10


def test_scaler_errors():
    with pytest.raises(ConfigError):
        Scaler("robust")
    with pytest.raises(DegenerateColumnError):
        Scaler("minmax").fit(np.ones((5, 2)))
    with pytest.raises(ConfigError):
        Scaler("standard").transform(np.ones((2, 2)))


def test_make_windows_counts_and_boundaries():
    table = np.arange(20.0).reshape(10, 2)
    ds = make_windows(table, 4, 1)
    assert ds.windows.shape == (6, 4, 2)
    ds3 = make_windows(table, 4, 3)
    assert ds3.windows.shape == (4, 4, 2)
    npt.assert_array_equal(ds3.horizons[-1], table[-3:, 0])
    for i in range(ds3.windows.shape[0]):
        assert ds3.windows[i].max() < ds3.horizons[i].min()  # strictly increasing table
    with pytest.raises(ConfigError):
        make_windows(table, 9, 3)


def test_synth_noise_free_matches_closed_form():
    cfg = SynthConfig(length=200, channels=2, period=24.0, amplitude=1.5,
                      level=4.0, ar_coeff=0.5, noise_std=0.0)
    got = synth_seasonal_series(cfg, seed=0)
    t = np.arange(200)[:, None]
    phase = np.arange(2)[None, :] / 2
    want = 4.0 + 1.5 * np.sin(2 * np.pi * (t / 24.0 + phase))
    npt.assert_allclose(got, want, atol=1e-12)


def test_synth_deterministic_under_seed():
    cfg = SynthConfig(length=300, channels=3)
    npt.assert_array_equal(synth_seasonal_series(cfg, 5), synth_seasonal_series(cfg, 5))
    assert not np.array_equal(synth_seasonal_series(cfg, 5), synth_seasonal_series(cfg, 6))


def test_synth_seasonal_autocorrelation():
    cfg = SynthConfig(length=2000, period=24.0, amplitude=1.0, noise_std=0.2)
    x = synth_seasonal_series(cfg, 3)[:, 0]
    x = x - x.mean()

    def acf(lag):
        return float(np.dot(x[:-lag], x[lag:]) / np.dot(x, x))

    assert acf(24) > acf(12)


def test_split_random_disjoint_exhaustive():
    train, test = split_random(100, 0.2, 0)
    assert len(train) == 80 and len(test) == 20
    assert np.array_equal(np.sort(np.concatenate([train, test])), np.arange(100))


def test_prepare_housing_scales_on_train_rows_only():
    ds, scaler = prepare_housing(seed=1990)
    raw = load_california_housing()
    refit = Scaler("standard").fit(raw.features[ds.train_idx])
    npt.assert_array_equal(scaler.transform(raw.features), ds.features)
    npt.assert_array_equal(refit.transform(raw.features), ds.features)
    x_tr, _ = ds.train_arrays()
    assert np.max(np.abs(x_tr.mean(axis=0))) < 1e-10


def test_prepare_sequence_task_split_has_no_leakage():
    cfg = SynthConfig(length=400, channels=2, noise_std=0.05)
    table = synth_seasonal_series(cfg, 0)
    ds = prepare_sequence_task(table, s=12, n_steps=3, median_window=24, test_fraction=0.25)
    boundary = ds.metadata["boundary"]
    s, n = 12, 3
    assert ds.train_idx.size > 0 and ds.test_idx.size > 0
    assert np.all(ds.train_idx + s + n <= boundary)   # train horizons before boundary
    assert np.all(ds.test_idx + s >= boundary)        # test horizons after boundary
    assert set(ds.train_idx) & set(ds.test_idx) == set()
    # windows always precede their horizons
    norm = moving_median_normalize(table, 24)
    refit = Scaler("minmax").fit(norm[:boundary])
    npt.assert_array_equal(ds.windows[0], refit.transform(norm)[:s])
