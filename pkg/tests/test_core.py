import numpy as np
import pytest

from driftcast.core import (
    ConfigError,
    Dataset,
    DriftMeta,
    TimeSeries,
    derive_series_seed,
    load_dataset,
    save_dataset,
)


def make_series(sid="s0", n=30, train_len=20, kind="none", **drift):
    rng = np.random.default_rng(hash(sid) % 2**32)
    return TimeSeries(
        id=sid,
        values=rng.normal(size=n),
        train_len=train_len,
        drift=DriftMeta(kind=kind, **drift),
    )


class TestSeedDerivation:
    def test_identity_offset(self):
        assert derive_series_seed(1000, 0) == 1000

    def test_additive(self):
        assert derive_series_seed(1000, 7) == 1007

    def test_wraps(self):
        assert derive_series_seed(2**64 - 1, 1) == 0

    def test_injective_over_range(self):
        seeds = {derive_series_seed(123456, i) for i in range(5000)}
        assert len(seeds) == 5000

    def test_negative_ordinal_rejected(self):
        with pytest.raises(ValueError):
            derive_series_seed(1, -1)


class TestDriftMeta:
    def test_sudden_needs_t_drift(self):
        DriftMeta(kind="sudden", t_drift=10)
        with pytest.raises(ConfigError):
            DriftMeta(kind="sudden")
        with pytest.raises(ConfigError):
            DriftMeta(kind="sudden", t_drift=10, t_start=5)

    def test_incremental_ordering(self):
        DriftMeta(kind="incremental", t_start=5, t_end=9)
        with pytest.raises(ConfigError):
            DriftMeta(kind="incremental", t_start=9, t_end=5)

    def test_gradual_carries_no_indices(self):
        DriftMeta(kind="gradual", seed=42)
        with pytest.raises(ConfigError):
            DriftMeta(kind="gradual", t_drift=3)

    def test_index_bounds(self):
        meta = DriftMeta(kind="sudden", t_drift=31)
        with pytest.raises(ConfigError):
            meta.validate_indices(30)
        meta.validate_indices(31)

    def test_roundtrip_dict(self):
        meta = DriftMeta(kind="incremental", t_start=3, t_end=8, seed=99)
        assert DriftMeta.from_dict(meta.to_dict()) == meta


class TestTimeSeries:
    def test_rejects_non_finite(self):
        with pytest.raises(ConfigError):
            TimeSeries(id="x", values=[1.0, np.nan], train_len=1)
        with pytest.raises(ConfigError):
            TimeSeries(id="x", values=[1.0, np.inf], train_len=1)

    def test_train_len_bounds(self):
        with pytest.raises(ConfigError):
            TimeSeries(id="x", values=[1.0, 2.0], train_len=0)
        with pytest.raises(ConfigError):
            TimeSeries(id="x", values=[1.0, 2.0], train_len=3)

    def test_values_frozen(self):
        s = make_series()
        with pytest.raises(ValueError):
            s.values[0] = 99.0

    def test_split_views(self):
        s = make_series(n=10, train_len=6)
        assert len(s.train_values) == 6
        assert len(s.test_values) == 4


class TestDataset:
    def test_uniform_shape_required(self):
        a = make_series("a", n=30)
        b = make_series("b", n=31, train_len=20)
        with pytest.raises(ConfigError):
            Dataset(name="d", series=(a, b))

    def test_unique_ids(self):
        a = make_series("a")
        with pytest.raises(ConfigError):
            Dataset(name="d", series=(a, a))

    def test_values_matrix(self):
        ds = Dataset(name="d", series=(make_series("a"), make_series("b")))
        assert ds.values_matrix().shape == (2, 30)


class TestDatasetIO:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        series = []
        for i in range(3):
            values = rng.normal(size=40) * 10.0 ** float(rng.integers(-8, 8))
            values[0] = 0.1  # classic repr-sensitive value
            series.append(
                TimeSeries(
                    id=f"s{i}",
                    values=values,
                    train_len=25,
                    drift=DriftMeta(kind="sudden", t_drift=7, seed=i),
                )
            )
        ds = Dataset(name="roundtrip", series=tuple(series), generator_config={"base_seed": 5})
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.name == ds.name
        assert loaded.generator_config == ds.generator_config
        for orig, back in zip(ds.series, loaded.series):
            assert back.id == orig.id
            assert back.train_len == orig.train_len
            assert back.drift == orig.drift
            assert np.array_equal(back.values, orig.values)

    def test_csv_shape(self, tmp_path):
        ds = Dataset(name="d", series=(make_series("a", n=5, train_len=3),))
        path = tmp_path / "ds.csv"
        save_dataset(ds, path)
        text = path.read_bytes().decode()
        lines = text.split("\n")
        assert lines[0] == "series_id,t,value"
        assert lines[1].startswith("a,1,")
        assert lines[5].startswith("a,5,")
        assert "\r" not in text

    def test_missing_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_dataset(tmp_path / "absent.csv")
