"""Signal ingestion, normalization, windowing and synthetic data.

Signals CSV: rows are 5-minute time steps, columns are sensors, header
row optional, blank cells are treated as missing (forward-filled and
masked). Distances CSV: `from,to,distance` per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .hypergraph import Hypergraph, build_geo_adjacency, build_spatial_hyperedges


class ParseError(ValueError):
    pass


@dataclass
class SensorDistances:
    """Edge list (from, to, distance) between sensors."""

    edges: list[tuple[int, int, float]]

    def __post_init__(self):
        for i, j, d in self.edges:
            if d < 0:
                raise ParseError(f"negative distance on edge ({i}, {j})")

    @classmethod
    def from_csv(cls, path) -> "SensorDistances":
        edges = []
        with open(path) as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if lineno == 1 and not _is_number(parts[-1]):
                    continue  # header
                if len(parts) != 3:
                    raise ParseError(f"line {lineno}: expected from,to,distance")
                try:
                    edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
                except ValueError as exc:
                    raise ParseError(f"line {lineno}: {exc}") from None
        return cls(edges)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("from,to,distance\n")
            for i, j, d in self.edges:
                fh.write(f"{i},{j},{d!r}\n")


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def load_signals(path):
    """Parse a signals CSV into (values (T, N, 1), missing_mask (T, N, 1)).

    Missing cells are forward-filled from the previous time step (column
    mean when there is no previous step) and flagged in the mask.
    """
    rows, missing_rows = [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cells = line.split(",")
            if width is None and any(not _is_number(c) and c.strip() != "" for c in cells):
                continue  # header row
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(f"line {lineno}: ragged row ({len(cells)} cells, expected {width})")
            vals, miss = [], []
            for ci, c in enumerate(cells):
                c = c.strip()
                if c == "":
                    vals.append(np.nan)
                    miss.append(True)
                elif _is_number(c):
                    vals.append(float(c))
                    miss.append(False)
                else:
                    raise ParseError(f"line {lineno}: non-numeric cell {c!r} in column {ci}")
            rows.append(vals)
            missing_rows.append(miss)
    if not rows:
        raise ParseError(f"no data rows in {path}")
    values = np.asarray(rows, dtype=np.float64)
    mask = np.asarray(missing_rows, dtype=bool)
    # forward fill, first rows fall back to the column mean
    col_mean = np.nanmean(values, axis=0)
    col_mean = np.where(np.isfinite(col_mean), col_mean, 0.0)
    for t in range(values.shape[0]):
        nan = np.isnan(values[t])
        if t == 0:
            values[t, nan] = col_mean[nan]
        else:
            values[t, nan] = values[t - 1, nan]
    return values[:, :, None], mask[:, :, None]


@dataclass
class TrafficDataset:
    """Z-scored signal windows with 6:2:2 split bookkeeping.

    signals are stored time-major (T_total, N, F); window samples come
    out node-major (N, T, F) / (N, S, F).
    """

    signals: np.ndarray            # raw scale, (T_total, N, F)
    missing: np.ndarray            # bool, same shape
    t_in: int = 12
    horizon: int = 12
    ratios: tuple = (0.6, 0.2, 0.2)
    mean: np.ndarray = field(init=False)
    std: np.ndarray = field(init=False)
    split_ranges: dict = field(init=False)

    def __post_init__(self):
        self.signals = np.asarray(self.signals, dtype=np.float64)
        t_total = self.signals.shape[0]
        n_train = int(t_total * self.ratios[0])
        n_val = int(t_total * self.ratios[1])
        self.split_ranges = {
            "train": (0, n_train),
            "val": (n_train, n_train + n_val),
            "test": (n_train + n_val, t_total),
        }
        train = self.signals[0:n_train]
        self.mean = train.mean(axis=(0, 1))
        self.std = train.std(axis=(0, 1))
        zero = np.flatnonzero(self.std == 0)
        if zero.size:
            raise ValueError(f"zero variance in training split for feature {zero[0]}")
        self.normalized = (self.signals - self.mean) / self.std
        for name, (lo, hi) in self.split_ranges.items():
            if hi - lo < self.t_in + self.horizon:
                raise ValueError(
                    f"{name} range of length {hi - lo} too short for "
                    f"T={self.t_in}, S={self.horizon}"
                )

    @property
    def n_nodes(self) -> int:
        return self.signals.shape[1]

    @property
    def n_features(self) -> int:
        return self.signals.shape[2]

    def zscore(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse_zscore(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def window_count(self, split: str) -> int:
        lo, hi = self.split_ranges[split]
        return hi - lo - self.t_in - self.horizon + 1

    def windows(self, split: str):
        """Stacked (inputs, targets, target_missing) for one split.

        inputs: (n, N, T, F) normalized; targets: (n, N, S, F) normalized;
        target_missing: bool mask of imputed points.
        """
        lo, hi = self.split_ranges[split]
        t, s = self.t_in, self.horizon
        xs, ys, ms = [], [], []
        for start in range(lo, hi - t - s + 1):
            xs.append(self.normalized[start : start + t].transpose(1, 0, 2))
            ys.append(self.normalized[start + t : start + t + s].transpose(1, 0, 2))
            ms.append(self.missing[start + t : start + t + s].transpose(1, 0, 2))
        return np.stack(xs), np.stack(ys), np.stack(ms)

    def training_series(self) -> np.ndarray:
        """Per-node raw training series (N, T_train), the DTW input."""
        lo, hi = self.split_ranges["train"]
        return self.signals[lo:hi, :, 0].T

    def manifest(self, extra: dict | None = None) -> dict:
        m = {
            "t_in": self.t_in,
            "horizon": self.horizon,
            "split_ranges": {k: list(v) for k, v in self.split_ranges.items()},
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "n_nodes": self.n_nodes,
            "n_features": self.n_features,
        }
        if extra:
            m.update(extra)
        return m


def window_count(range_len: int, t_in: int, horizon: int) -> int:
    c = range_len - t_in - horizon + 1
    if c < 1:
        raise ValueError(f"range of length {range_len} too short for T={t_in}, S={horizon}")
    return c


@dataclass
class SyntheticData:
    dataset: TrafficDataset
    distances: SensorDistances
    truth_hypergraph: Hypergraph
    phases: np.ndarray


def synth_generate(n_nodes: int, t_total: int, seed: int, *,
                   t_in: int = 12, horizon: int = 12, period: int = 288,
                   coupling1: float = 0.6, coupling2: float = 0.45,
                   lag1: int = 3, lag2: int = 6,
                   noise: float = 0.05, group_size: int = 4,
                   amp_range: tuple = (0.8, 1.2),
                   interleave_groups: bool = False,
                   event_scale: float = 0.0, event_rate: float = 0.015,
                   event_lag: int = 12, event_own: float = 0.5) -> SyntheticData:
    """Seeded synthetic traffic: daily sinusoids with shared phases inside
    groups of `group_size` nodes, 1- and 2-hop lagged diffusion coupling on
    a path graph, plus Gaussian noise. Emits the generative hypergraph so
    structure-recovery checks are possible."""
    if n_nodes < 4:
        raise ValueError("n_nodes must be >= 4")
    rng = np.random.default_rng(seed)
    n_groups = (n_nodes + group_size - 1) // group_size
    group_phase = rng.uniform(0, 2 * np.pi, n_groups)
    # interleaving scatters phase-mates across the path graph so that
    # spatial neighbors and DTW neighbors carry different information
    group_of = (lambda i: i % n_groups) if interleave_groups else (lambda i: i // group_size)
    phases = np.array([group_phase[group_of(i)] for i in range(n_nodes)])
    amp = rng.uniform(amp_range[0], amp_range[1], n_nodes)

    tt = np.arange(t_total + lag2)
    base = np.stack(
        [amp[i] * np.sin(2 * np.pi * tt / period + phases[i])
         + 0.3 * np.sin(4 * np.pi * tt / period + 2 * phases[i])
         for i in range(n_nodes)],
        axis=1,
    )  # (t_total + lag2, N)

    # path-graph adjacency: hop-1 and hop-2 neighbor sets
    hop1 = [[j for j in (i - 1, i + 1) if 0 <= j < n_nodes] for i in range(n_nodes)]
    hop2 = [[j for j in (i - 2, i + 2) if 0 <= j < n_nodes] for i in range(n_nodes)]
    x = base[lag2:].copy()
    for i in range(n_nodes):
        if hop1[i]:
            x[:, i] += coupling1 * base[lag2 - lag1 : lag2 - lag1 + t_total, hop1[i]].mean(axis=1)
        if hop2[i]:
            x[:, i] += coupling2 * base[0:t_total, hop2[i]].mean(axis=1)

    if event_scale > 0:
        # sparse "incident" pulses shared within each phase group.  A node
        # carries its own group's pulses at half strength and its neighbors'
        # pulses at full strength event_lag steps later, so anticipating the
        # transported part requires reading the neighbor windows -- a node's
        # own past does not contain it.
        pad = event_lag + lag1
        onsets = rng.random((t_total + pad, n_groups)) < event_rate
        amp = rng.uniform(1.0, 2.0, onsets.shape) * onsets
        kernel = np.array([1.0, 2.0, 3.0, 2.0, 1.0]) / 3.0
        g = np.stack([np.convolve(amp[:, k], kernel, mode="same")
                      for k in range(n_groups)], axis=1) * event_scale
        e = g[:, [group_of(i) for i in range(n_nodes)]]
        x += event_own * e[pad:]
        for i in range(n_nodes):
            if hop1[i]:
                x[:, i] += e[lag1 : lag1 + t_total, hop1[i]].mean(axis=1)
            if hop2[i]:
                x[:, i] += 0.6 * e[0:t_total, hop2[i]].mean(axis=1)
    x += rng.normal(0.0, noise, x.shape)
    signals = 200.0 + 80.0 * x

    edges = [(i, i + 1, 1.0) for i in range(n_nodes - 1)]
    distances = SensorDistances(edges)
    geo = build_geo_adjacency(edges, n_nodes, sigma=2.0, eps=0.1)
    truth = build_spatial_hyperedges(geo, radius=2)

    dataset = TrafficDataset(signals[:, :, None], np.zeros_like(signals[:, :, None], dtype=bool),
                             t_in=t_in, horizon=horizon)
    return SyntheticData(dataset, distances, truth, phases)


def write_signals_csv(path, signals: np.ndarray):
    """signals (T, N) or (T, N, 1) to CSV, full float precision."""
    if signals.ndim == 3:
        signals = signals[:, :, 0]
    with open(path, "w") as fh:
        for row in signals:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_manifest(path, manifest: dict):
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
