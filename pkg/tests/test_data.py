import numpy as np
import pytest

from sthode.data import (
    ParseError,
    SensorDistances,
    TrafficDataset,
    load_signals,
    synth_generate,
    window_count,
    write_signals_csv,
)
from sthode.hypergraph import dtw_distance


class TestLoadSignals:
    def test_direct_parse(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1,2\n3,4\n")
        values, mask = load_signals(p)
        assert values.shape == (2, 2, 1)
        np.testing.assert_array_equal(values[:, :, 0], [[1.0, 2.0], [3.0, 4.0]])
        assert not mask.any()

    def test_header_skipped(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("s0,s1\n1,2\n3,4\n")
        values, _ = load_signals(p)
        assert values.shape == (2, 2, 1)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("")
        with pytest.raises(ParseError):
            load_signals(p)

    def test_blank_cell_forward_filled(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1,2\n,4\n5,6\n")
        values, mask = load_signals(p)
        assert values[1, 0, 0] == 1.0  # previous time step
        assert mask[1, 0, 0] and mask.sum() == 1

    def test_first_row_blank_uses_column_mean(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text(",2\n4,6\n8,2\n")
        values, mask = load_signals(p)
        assert values[0, 0, 0] == 6.0  # mean of 4 and 8
        assert mask[0, 0, 0]

    def test_ragged_row_names_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(ParseError, match="line 2"):
            load_signals(p)

    def test_non_numeric_names_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("1,2\n3,x\n")
        with pytest.raises(ParseError, match="line 2"):
            load_signals(p)


def make_dataset(t_total=120, n=4, t_in=12, horizon=12, seed=0):
    rng = np.random.default_rng(seed)
    sig = rng.uniform(10, 50, (t_total, n, 1))
    return TrafficDataset(sig, np.zeros_like(sig, dtype=bool), t_in=t_in, horizon=horizon)


class TestTrafficDataset:
    def test_split_622(self):
        ds = make_dataset(t_total=200)
        assert ds.split_ranges == {"train": (0, 120), "val": (120, 160), "test": (160, 200)}

    def test_normalization_from_train_only(self):
        ds = make_dataset()
        lo, hi = ds.split_ranges["train"]
        train = ds.signals[lo:hi]
        np.testing.assert_allclose(ds.mean, train.mean(axis=(0, 1)))
        np.testing.assert_allclose(ds.std, train.std(axis=(0, 1)))

    def test_zscore_hand_values(self):
        sig = np.zeros((40, 2, 1))
        sig[::2] = 0.0
        sig[1::2] = 2.0
        ds = TrafficDataset(sig, np.zeros_like(sig, dtype=bool), t_in=4, horizon=4)
        assert ds.mean[0] == pytest.approx(1.0)
        assert ds.std[0] == pytest.approx(1.0)
        np.testing.assert_allclose(np.unique(ds.normalized), [-1.0, 1.0])

    def test_constant_feature_rejected(self):
        sig = np.ones((100, 3, 1))
        with pytest.raises(ValueError, match="feature 0"):
            TrafficDataset(sig, np.zeros_like(sig, dtype=bool))

    def test_round_trip(self):
        ds = make_dataset()
        x = np.random.default_rng(1).uniform(5, 90, (7, 4, 1))
        np.testing.assert_allclose(ds.inverse_zscore(ds.zscore(x)), x, atol=1e-10)

    def test_window_counts(self):
        assert window_count(24, 12, 12) == 1
        assert window_count(25, 12, 12) == 2
        with pytest.raises(ValueError):
            window_count(23, 12, 12)

    def test_too_short_split_rejected(self):
        sig = np.random.default_rng(2).uniform(0, 1, (50, 3, 1))
        with pytest.raises(ValueError, match="too short"):
            TrafficDataset(sig, np.zeros_like(sig, dtype=bool), t_in=12, horizon=12)

    def test_no_leakage(self):
        ds = make_dataset(t_total=200)
        for split in ("train", "val", "test"):
            lo, hi = ds.split_ranges[split]
            x, y, _ = ds.windows(split)
            assert x.shape[0] == ds.window_count(split) == hi - lo - 23
            # last window's final target index stays inside the range
            np.testing.assert_array_equal(y[-1, :, -1], ds.normalized[hi - 1])
            np.testing.assert_array_equal(x[0, :, 0], ds.normalized[lo])

    def test_window_shapes(self):
        ds = make_dataset(t_total=120)
        x, y, m = ds.windows("train")
        assert x.shape[1:] == (4, 12, 1)
        assert y.shape[1:] == (4, 12, 1)
        assert m.shape == y.shape


class TestSensorDistances:
    def test_round_trip(self, tmp_path):
        d = SensorDistances([(0, 1, 1.5), (1, 2, 2.25)])
        p = tmp_path / "d.csv"
        d.to_csv(p)
        back = SensorDistances.from_csv(p)
        assert back.edges == d.edges

    def test_negative_distance_rejected(self):
        with pytest.raises(ParseError):
            SensorDistances([(0, 1, -2.0)])


class TestSynthGenerate:
    def test_seed_reproducibility(self):
        a = synth_generate(8, 400, seed=7)
        b = synth_generate(8, 400, seed=7)
        np.testing.assert_array_equal(a.dataset.signals, b.dataset.signals)
        np.testing.assert_array_equal(a.truth_hypergraph.incidence,
                                      b.truth_hypergraph.incidence)

    def test_noise_free_is_periodic(self):
        s = synth_generate(8, 700, seed=1, noise=0.0, period=100)
        sig = s.dataset.signals[:, :, 0]
        np.testing.assert_allclose(sig[:300], sig[100:400], atol=1e-9)

    def test_zero_coupling_dtw_neighbor_has_closest_phase(self):
        # equal amplitudes, zero noise: same-group nodes are identical
        # waveforms (phase gap 0), so the DTW-nearest neighbor must be the
        # closest-phase node, with the lowest-index tie-break
        s = synth_generate(12, 600, seed=3, coupling1=0.0, coupling2=0.0,
                           noise=0.0, group_size=3, period=96, amp_range=(1.0, 1.0))
        series = s.dataset.training_series()
        phases = s.phases
        for v in range(12):
            d = np.array([dtw_distance(series[v], series[u]) if u != v else np.inf
                          for u in range(12)])
            nearest = int(np.argmin(d))
            gap = np.abs(np.angle(np.exp(1j * (phases - phases[v]))))
            gap[v] = np.inf
            assert gap[nearest] == np.min(gap)
            assert d[nearest] == pytest.approx(0.0, abs=1e-9)
            # lowest-index tie-break inside the group
            group = [u for u in range(12) if u // 3 == v // 3 and u != v]
            assert nearest == min(group)

    def test_min_nodes(self):
        with pytest.raises(ValueError):
            synth_generate(3, 100, seed=0)

    def test_csv_round_trip(self, tmp_path):
        s = synth_generate(6, 200, seed=5)
        p = tmp_path / "sig.csv"
        write_signals_csv(p, s.dataset.signals)
        values, mask = load_signals(p)
        np.testing.assert_array_equal(values, s.dataset.signals)
        assert not mask.any()
