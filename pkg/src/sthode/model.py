"""The forecasting network: TCN -> parallel spatial/temporal ODE branches
-> fusion -> TCN per block, elementwise-max aggregation over blocks, and a
two-layer MLP readout producing S-step forecasts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import metrics as metrics_mod
from .hypergraph import AdaptiveIncidence, Hypergraph, adaptive_incidence, normalized_transform
from .ode import SpatialOdeDynamics, TemporalOdeDynamics, integrate
from .optim import Adam, TrainingError
from .tensor import (
    Parameter,
    Tensor,
    concat,
    dilated_causal_conv,
    huber_loss,
    matmul,
    maximum,
    relu,
    reshape,
)

VALID_ABLATIONS = ("spatial", "temporal", "ode", "adaptive")

# logit of 0.9 / (1 - eps): squashed parameters start near identity-strength
_RAW_NEAR_ONE = 2.21


@dataclass
class ModelConfig:
    n_nodes: int
    t_in: int = 12
    horizon: int = 12
    n_features: int = 1
    k_depth: int = 3
    blocks: int = 3
    tcn_channels: tuple = (64, 32, 64)
    tcn_kernel: int = 2
    mlp_hidden: int = 256
    solver: str = "euler"
    ode_steps: int = 8
    t_end: float = 1.0
    wiring: str = "parallel"
    hard_clamp: bool = False
    ablations: tuple = ()

    def __post_init__(self):
        self.tcn_channels = tuple(self.tcn_channels)
        self.ablations = tuple(sorted(set(self.ablations)))
        for a in self.ablations:
            if a not in VALID_ABLATIONS:
                raise ValueError(f"unknown ablation {a!r}")
        if self.wiring not in ("parallel", "serial"):
            raise ValueError(f"unknown wiring {self.wiring!r}")


class TcnStack:
    """Dilated causal convolution layers with ReLU between them."""

    def __init__(self, name: str, in_ch: int, channels, kernel: int,
                 rng: np.random.Generator, scale: float = 0.08):
        self.layers = []
        prev = in_ch
        for li, ch in enumerate(channels):
            f = Parameter(f"{name}.conv{li}.filters",
                          rng.uniform(-scale, scale, (kernel, prev, ch)))
            b = Parameter(f"{name}.conv{li}.bias", np.zeros(ch))
            self.layers.append((f, b, 2 ** li))
            prev = ch
        self.out_channels = prev

    def parameters(self):
        return [p for f, b, _ in self.layers for p in (f, b)]

    def __call__(self, x: Tensor) -> Tensor:
        for li, (f, b, dilation) in enumerate(self.layers):
            x = dilated_causal_conv(x, f.tensor, dilation) + b.tensor
            if li < len(self.layers) - 1:
                x = relu(x)
        return x


class SthodeBlock:
    def __init__(self, name: str, cfg: ModelConfig, in_ch: int,
                 spatial_hg: Hypergraph, temporal_hg: Hypergraph,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.spatial_hg = spatial_hg
        self.temporal_hg = temporal_hg
        self.tcn_in = TcnStack(f"{name}.tcn_in", in_ch, cfg.tcn_channels, cfg.tcn_kernel, rng)
        ch = self.tcn_in.out_channels
        t = cfg.t_in
        raw = lambda shape: _RAW_NEAR_ONE + rng.uniform(-0.05, 0.05, shape)

        self.use_spatial = "spatial" not in cfg.ablations
        self.use_temporal = "temporal" not in cfg.ablations
        self.use_adaptive = "adaptive" not in cfg.ablations
        self.use_ode = "ode" not in cfg.ablations

        self.adaptive = AdaptiveIncidence.create(spatial_hg, name=f"{name}.adaptive", rng=rng)
        self.spatial_u = [Parameter(f"{name}.spatial.u{k}", raw((t, t)), constraint="unit")
                          for k in range(cfg.k_depth)]
        self.spatial_q = [Parameter(f"{name}.spatial.q{k}", raw((ch, ch)), constraint="unit")
                          for k in range(cfg.k_depth)]
        self.temporal_u = Parameter(f"{name}.temporal.u", raw((t, t)), constraint="unit")
        self.temporal_q = Parameter(f"{name}.temporal.q", raw((ch, ch)), constraint="unit")
        self.a_te = normalized_transform(temporal_hg)

        n_branches = int(self.use_spatial) + int(self.use_temporal)
        if n_branches:
            self.fusion_w = Parameter(f"{name}.fusion.w",
                                      rng.uniform(-0.08, 0.08, (n_branches * ch, ch)))
            self.fusion_b = Parameter(f"{name}.fusion.b", np.zeros(ch))
        else:
            self.fusion_w = self.fusion_b = None
        self.tcn_out = TcnStack(f"{name}.tcn_out", ch, cfg.tcn_channels, cfg.tcn_kernel, rng)
        self.out_channels = self.tcn_out.out_channels

    def parameters(self):
        ps = self.tcn_in.parameters()
        ps += self.adaptive.parameters()
        ps += self.spatial_u + self.spatial_q
        ps += [self.temporal_u, self.temporal_q]
        if self.fusion_w is not None:
            ps += [self.fusion_w, self.fusion_b]
        ps += self.tcn_out.parameters()
        return ps

    def _spatial_transform(self):
        if self.use_adaptive:
            return normalized_transform(self.spatial_hg, adaptive_incidence(self.adaptive))
        return normalized_transform(self.spatial_hg)

    def _run_branch(self, dyn) -> Tensor:
        if self.use_ode:
            return integrate(dyn, dyn.x0, self.cfg.t_end, self.cfg.ode_steps, self.cfg.solver)
        return dyn.discrete_propagation(dyn.x0)

    def __call__(self, x: Tensor) -> Tensor:
        cfg = self.cfg
        h = self.tcn_in(x)
        branches = []
        if self.use_spatial:
            dyn = SpatialOdeDynamics(
                self._spatial_transform(),
                [p.materialize(cfg.hard_clamp) for p in self.spatial_u],
                [p.materialize(cfg.hard_clamp) for p in self.spatial_q],
                x0=h,
            )
            branches.append(self._run_branch(dyn))
        if self.use_temporal:
            dyn = TemporalOdeDynamics(
                self.a_te,
                self.temporal_u.materialize(cfg.hard_clamp),
                self.temporal_q.materialize(cfg.hard_clamp),
                x0=h,
            )
            branches.append(self._run_branch(dyn))
        if branches:
            fused = matmul(concat(branches, axis=-1), self.fusion_w.tensor) + self.fusion_b.tensor
        else:
            fused = h
        return self.tcn_out(fused)


class SthodeNetwork:
    """Stacked blocks pooled by elementwise max, then a two-layer MLP head."""

    def __init__(self, cfg: ModelConfig, spatial_hg: Hypergraph,
                 temporal_hg: Hypergraph, seed: int = 0):
        if spatial_hg.n_nodes != cfg.n_nodes or temporal_hg.n_nodes != cfg.n_nodes:
            raise ValueError("hypergraph node count does not match config")
        self.cfg = cfg
        self.spatial_hg = spatial_hg
        self.temporal_hg = temporal_hg
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.blocks = []
        in_ch = cfg.n_features
        for bi in range(cfg.blocks):
            block = SthodeBlock(f"block{bi}", cfg, in_ch, spatial_hg, temporal_hg, rng)
            self.blocks.append(block)
            if cfg.wiring == "serial":
                in_ch = block.out_channels
        ch = self.blocks[-1].out_channels
        self.head_w1 = Parameter("head.w1",
                                 rng.uniform(-0.08, 0.08, (cfg.t_in * ch, cfg.mlp_hidden)))
        self.head_b1 = Parameter("head.b1", np.zeros(cfg.mlp_hidden))
        self.head_w2 = Parameter("head.w2",
                                 rng.uniform(-0.08, 0.08, (cfg.mlp_hidden, cfg.horizon * cfg.n_features)))
        self.head_b2 = Parameter("head.b2", np.zeros(cfg.horizon * cfg.n_features))

    def parameters(self) -> list[Parameter]:
        ps = []
        for b in self.blocks:
            ps += b.parameters()
        ps += [self.head_w1, self.head_b1, self.head_w2, self.head_b2]
        return ps

    def forward(self, x) -> Tensor:
        """x: (batch, N, T, F) normalized -> (batch, N, S, F)."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        outs = []
        cur = x
        for block in self.blocks:
            if self.cfg.wiring == "serial":
                cur = block(cur)
                outs.append(cur)
            else:
                outs.append(block(x))
        pooled = outs[0] if len(outs) == 1 else maximum(outs)
        b, n = pooled.shape[0], pooled.shape[1]
        flat = reshape(pooled, (b, n, -1))
        hidden = relu(matmul(flat, self.head_w1.tensor) + self.head_b1.tensor)
        out = matmul(hidden, self.head_w2.tensor) + self.head_b2.tensor
        return reshape(out, (b, n, self.cfg.horizon, self.cfg.n_features))


def predict(net: SthodeNetwork, inputs: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Normalized predictions for stacked inputs (n, N, T, F)."""
    preds = []
    for lo in range(0, inputs.shape[0], batch_size):
        preds.append(net.forward(inputs[lo : lo + batch_size]).data)
    return np.concatenate(preds, axis=0)


def naive_last_value(inputs: np.ndarray, horizon: int) -> np.ndarray:
    """Repeat each window's last observation across the horizon."""
    return np.repeat(inputs[:, :, -1:, :], horizon, axis=2)


def batch_loss(net: SthodeNetwork, x: np.ndarray, y: np.ndarray,
               miss: np.ndarray | None = None, delta: float = 1.0) -> Tensor:
    pred = net.forward(x)
    if miss is not None and miss.any():
        # imputed targets contribute zero error and zero gradient
        y = np.where(miss, pred.data, y)
    return huber_loss(Tensor(y), pred, delta=delta)


def train_epoch(net: SthodeNetwork, opt: Adam, inputs: np.ndarray,
                targets: np.ndarray, missing: np.ndarray | None,
                batch_size: int, rng: np.random.Generator,
                delta: float = 1.0) -> float:
    """One pass over seeded-shuffled batches; returns the mean batch loss."""
    order = rng.permutation(inputs.shape[0])
    losses, sizes = [], []
    for bi, lo in enumerate(range(0, len(order), batch_size)):
        idx = order[lo : lo + batch_size]
        opt.zero_grad()
        loss = batch_loss(net, inputs[idx], targets[idx],
                          missing[idx] if missing is not None else None, delta)
        if not np.isfinite(loss.data):
            raise TrainingError(f"non-finite loss in batch {bi}")
        loss.backward()
        opt.step()
        losses.append(loss.item())
        sizes.append(len(idx))
    return float(np.average(losses, weights=sizes))


def eval_loss(net: SthodeNetwork, inputs, targets, missing=None,
              delta: float = 1.0, batch_size: int = 64) -> float:
    losses, weights = [], []
    for lo in range(0, inputs.shape[0], batch_size):
        sl = slice(lo, lo + batch_size)
        loss = batch_loss(net, inputs[sl], targets[sl],
                          missing[sl] if missing is not None else None, delta)
        losses.append(loss.item())
        weights.append(inputs[sl].shape[0])
    return float(np.average(losses, weights=weights))


def evaluate(net: SthodeNetwork, dataset, split: str = "test",
             batch_size: int = 64) -> metrics_mod.MetricReport:
    """De-normalized MAE/RMSE/MAPE, overall and per horizon step."""
    x, y, miss = dataset.windows(split)
    pred = predict(net, x, batch_size=batch_size)
    return metrics_mod.report(dataset.inverse_zscore(y),
                              dataset.inverse_zscore(pred), missing=miss)


# ---------------------------------------------------------------------------
# checkpointing


def save_checkpoint(net: SthodeNetwork, path, extra: dict | None = None):
    """npz container: every parameter by name, the hypergraphs, and a JSON
    config echo; loading reproduces evaluation bitwise."""
    arrays = {f"param:{p.name}": p.tensor.data for p in net.parameters()}
    arrays["hg:spatial:incidence"] = net.spatial_hg.incidence
    arrays["hg:spatial:weights"] = net.spatial_hg.weights
    arrays["hg:temporal:incidence"] = net.temporal_hg.incidence
    arrays["hg:temporal:weights"] = net.temporal_hg.weights
    meta = {"config": asdict(net.cfg), "seed": net.seed, "extra": extra or {}}
    arrays["meta_json"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


class CheckpointError(RuntimeError):
    pass


def load_checkpoint(path) -> tuple[SthodeNetwork, dict]:
    try:
        with np.load(path) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if "meta_json" not in arrays:
        raise CheckpointError(f"{path} is not a model checkpoint")
    meta = json.loads(bytes(arrays["meta_json"]).decode())
    cfg = ModelConfig(**meta["config"])
    spatial = Hypergraph(arrays["hg:spatial:incidence"], arrays["hg:spatial:weights"])
    temporal = Hypergraph(arrays["hg:temporal:incidence"], arrays["hg:temporal:weights"])
    net = SthodeNetwork(cfg, spatial, temporal, seed=meta["seed"])
    for p in net.parameters():
        key = f"param:{p.name}"
        if key not in arrays:
            raise CheckpointError(f"checkpoint missing parameter {p.name}")
        if arrays[key].shape != p.tensor.data.shape:
            raise CheckpointError(f"shape mismatch for parameter {p.name}")
        p.tensor.data = arrays[key].astype(np.float64)
    return net, meta
