"""Operator entry points: build-graph, train, evaluate, ablate, predict.

Exit codes: 0 ok, 2 graph construction, 3 training, 4 checkpoint,
5 query. Config comes from a flat-key JSON file plus flags (flags win),
and every artifact embeds the resolved config.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import model as model_mod
from . import viz
from .hypergraph import (
    ConstructionError,
    Hypergraph,
    build_geo_adjacency,
    build_spatial_hyperedges,
    build_temporal_hypergraph,
)
from .metrics import report as metric_report
from .model import (
    CheckpointError,
    ModelConfig,
    SthodeNetwork,
    evaluate,
    load_checkpoint,
    predict,
    save_checkpoint,
    train_epoch,
)
from .optim import Adam, TrainingError

EXIT_CONSTRUCTION = 2
EXIT_TRAINING = 3
EXIT_CHECKPOINT = 4
EXIT_QUERY = 5


@dataclass
class RunConfig:
    signals: str = ""
    distances: str = ""
    out_dir: str = "out"
    seed: int = 0
    window: int = 12          # T, input steps
    horizon: int = 12         # S, forecast steps
    K: int = 3                # MixHop depth
    r: int = 7                # temporal hyperedge size
    R: int = 2                # spatial hop radius
    blocks: int = 3
    solver: str = "euler"
    ode_steps: int = 8
    t_end: float = 1.0
    lr: float = 0.001
    batch_size: int = 16
    epochs: int = 200
    delta: float = 1.0
    ablation: tuple = ()
    sigma: float = 0.0        # 0 -> std of observed distances
    eps: float = 0.1
    dtw_band: int = 0         # 0 -> unbounded
    tcn_channels: tuple = (64, 32, 64)
    mlp_hidden: int = 256
    wiring: str = "parallel"
    hard_clamp: bool = False

    def __post_init__(self):
        self.ablation = tuple(sorted(set(self.ablation)))
        self.tcn_channels = tuple(self.tcn_channels)


def _resolve_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            values.update(json.load(fh))
    for key in RunConfig.__dataclass_fields__:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return RunConfig(**values)


def _config_echo(cfg: RunConfig) -> str:
    return json.dumps(asdict(cfg), sort_keys=True)


def _csv_header(cfg: RunConfig) -> str:
    return f"# config={_config_echo(cfg)}\n"


def _load_dataset(cfg: RunConfig) -> data_mod.TrafficDataset:
    values, mask = data_mod.load_signals(cfg.signals)
    return data_mod.TrafficDataset(values, mask, t_in=cfg.window, horizon=cfg.horizon)


def _build_hypergraphs(cfg: RunConfig, dataset: data_mod.TrafficDataset):
    dist = data_mod.SensorDistances.from_csv(cfg.distances)
    sigma = cfg.sigma or float(np.std([d for _, _, d in dist.edges])) or 1.0
    geo = build_geo_adjacency(dist.edges, dataset.n_nodes, sigma=sigma, eps=cfg.eps)
    spatial = build_spatial_hyperedges(geo, radius=cfg.R)
    band = cfg.dtw_band if cfg.dtw_band > 0 else None
    temporal = build_temporal_hypergraph(dataset.training_series(), r=cfg.r, band=band)
    return spatial, temporal


def _hypergraph_paths(out_dir: Path):
    return out_dir / "spatial.hg.txt", out_dir / "temporal.hg.txt"


def _get_hypergraphs(cfg: RunConfig, dataset, out_dir: Path):
    sp_path, te_path = _hypergraph_paths(out_dir)
    if sp_path.exists() and te_path.exists():
        return (Hypergraph.from_text(sp_path.read_text()),
                Hypergraph.from_text(te_path.read_text()))
    return _build_hypergraphs(cfg, dataset)


def _model_config(cfg: RunConfig, n_nodes: int, n_features: int) -> ModelConfig:
    return ModelConfig(
        n_nodes=n_nodes, t_in=cfg.window, horizon=cfg.horizon,
        n_features=n_features, k_depth=cfg.K, blocks=cfg.blocks,
        tcn_channels=cfg.tcn_channels, mlp_hidden=cfg.mlp_hidden,
        solver=cfg.solver, ode_steps=cfg.ode_steps, t_end=cfg.t_end,
        wiring=cfg.wiring, hard_clamp=cfg.hard_clamp, ablations=cfg.ablation,
    )


def _degree_histogram(values: np.ndarray) -> dict:
    uniq, counts = np.unique(values.astype(int), return_counts=True)
    return {str(u): int(c) for u, c in zip(uniq, counts)}


def cmd_build_graph(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset = _load_dataset(cfg)
        spatial, temporal = _build_hypergraphs(cfg, dataset)
    except (ConstructionError, data_mod.ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    sp_path, te_path = _hypergraph_paths(out_dir)
    sp_path.write_text(spatial.to_text())
    te_path.write_text(temporal.to_text())
    summary = {
        "config": asdict(cfg),
        "spatial": {
            "n_nodes": spatial.n_nodes,
            "n_hyperedges": spatial.n_hyperedges,
            "node_degree_histogram": _degree_histogram(spatial.node_degrees()),
            "edge_degree_histogram": _degree_histogram(spatial.edge_degrees()),
        },
        "temporal": {
            "n_nodes": temporal.n_nodes,
            "n_hyperedges": temporal.n_hyperedges,
            "node_degree_histogram": _degree_histogram(temporal.node_degrees()),
            "edge_degree_histogram": _degree_histogram(temporal.edge_degrees()),
        },
    }
    (out_dir / "graph_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {sp_path} ({spatial.n_hyperedges} hyperedges), "
          f"{te_path} ({temporal.n_hyperedges} hyperedges)")
    return 0


def _train(cfg: RunConfig, dataset, spatial, temporal, out_dir: Path,
           tag: str = "", ablations=None):
    """Shared training loop; returns (net, log rows, best val loss)."""
    mcfg = _model_config(cfg, dataset.n_nodes, dataset.n_features)
    if ablations is not None:
        mcfg.ablations = tuple(sorted(set(ablations)))
    net = SthodeNetwork(mcfg, spatial, temporal, seed=cfg.seed)
    opt = Adam(net.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    xt, yt, mt = dataset.windows("train")
    xv, yv, mv = dataset.windows("val")
    rows, best_val, best_state = [], np.inf, None
    for epoch in range(cfg.epochs):
        train_loss = train_epoch(net, opt, xt, yt, mt, cfg.batch_size, rng, delta=cfg.delta)
        val_loss = model_mod.eval_loss(net, xv, yv, mv, delta=cfg.delta)
        rows.append((epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_state = {p.name: p.tensor.data.copy() for p in net.parameters()}
    if best_state is not None:
        for p in net.parameters():
            p.tensor.data = best_state[p.name]
    return net, rows, best_val


def cmd_train(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset = _load_dataset(cfg)
        spatial, temporal = _get_hypergraphs(cfg, dataset, out_dir)
    except (ConstructionError, data_mod.ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    try:
        net, rows, best_val = _train(cfg, dataset, spatial, temporal, out_dir)
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    with open(out_dir / "training_log.csv", "w") as fh:
        fh.write(_csv_header(cfg))
        fh.write("epoch,train_loss,val_loss\n")
        for epoch, tr, va in rows:
            fh.write(f"{epoch},{tr!r},{va!r}\n")
    save_checkpoint(net, out_dir / "checkpoint.npz", extra={"config": asdict(cfg)})
    data_mod.save_manifest(out_dir / "dataset_manifest.json",
                           dataset.manifest({"config": asdict(cfg),
                                             "signals": cfg.signals,
                                             "distances": cfg.distances}))
    print(f"best val loss {best_val:.6f}; checkpoint at {out_dir / 'checkpoint.npz'}")
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: str) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        net, meta = load_checkpoint(checkpoint)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    dataset = _load_dataset(cfg)
    if net.cfg.n_nodes != dataset.n_nodes or net.cfg.t_in != cfg.window \
            or net.cfg.horizon != cfg.horizon:
        print("error: checkpoint/config mismatch "
              f"(checkpoint N={net.cfg.n_nodes} T={net.cfg.t_in} S={net.cfg.horizon})",
              file=sys.stderr)
        return EXIT_CHECKPOINT
    rep = evaluate(net, dataset, "test")
    payload = {"config": asdict(cfg), "metrics": rep.to_dict()}
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out_dir / "metrics.txt").write_text(rep.to_table())
    print(rep.to_table(), end="")
    return 0


ABLATION_VARIANTS = ("spatial", "temporal", "ode", "adaptive")


def cmd_ablate(cfg: RunConfig) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        dataset = _load_dataset(cfg)
        spatial, temporal = _get_hypergraphs(cfg, dataset, out_dir)
    except (ConstructionError, data_mod.ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    results = []
    try:
        for variant, abl in [("full", ())] + [(f"w/o {a}", (a,)) for a in ABLATION_VARIANTS]:
            net, _, _ = _train(cfg, dataset, spatial, temporal, out_dir, ablations=abl)
            rep = evaluate(net, dataset, "test")
            results.append((variant, rep))
            print(f"{variant}: test MAE {rep.mae:.4f} RMSE {rep.rmse:.4f} MAPE {rep.mape:.4f}%")
    except TrainingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    with open(out_dir / "ablation.csv", "w") as fh:
        fh.write(_csv_header(cfg))
        fh.write("variant,mae,rmse,mape\n")
        for variant, rep in results:
            fh.write(f"{variant},{rep.mae!r},{rep.rmse!r},{rep.mape!r}\n")
    svg = viz.bar_chart([v for v, _ in results], [r.mae for _, r in results],
                        title="Test MAE by variant", comment=f"config={_config_echo(cfg)}")
    (out_dir / "ablation.svg").write_text(svg)
    return 0


def cmd_predict(cfg: RunConfig, checkpoint: str, nodes: list[int],
                window_range: tuple[int, int] | None) -> int:
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        net, meta = load_checkpoint(checkpoint)
    except CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    dataset = _load_dataset(cfg)
    for node in nodes:
        if not (0 <= node < dataset.n_nodes):
            print(f"error: node id {node} out of range [0, {dataset.n_nodes})", file=sys.stderr)
            return EXIT_QUERY
    x, y, _ = dataset.windows("test")
    lo, hi = window_range or (0, x.shape[0])
    if not (0 <= lo < hi <= x.shape[0]):
        print(f"error: window range [{lo}, {hi}) invalid for {x.shape[0]} windows",
              file=sys.stderr)
        return EXIT_QUERY
    pred = dataset.inverse_zscore(predict(net, x[lo:hi]))
    truth = dataset.inverse_zscore(y[lo:hi])
    with open(out_dir / "predictions.csv", "w") as fh:
        fh.write(_csv_header(cfg))
        fh.write("node,window,step,truth,prediction\n")
        for node in nodes:
            for w in range(lo, hi):
                for s in range(dataset.horizon):
                    fh.write(f"{node},{w},{s + 1},"
                             f"{truth[w - lo, node, s, 0]!r},{pred[w - lo, node, s, 0]!r}\n")
    series = {}
    for node in nodes:
        series[f"truth[{node}]"] = truth[:, node, 0, 0].tolist()
        series[f"pred[{node}]"] = pred[:, node, 0, 0].tolist()
    svg = viz.line_chart(series, title="1-step-ahead truth vs forecast",
                         comment=f"config={_config_echo(cfg)}")
    (out_dir / "predictions.svg").write_text(svg)
    print(f"wrote predictions for {len(nodes)} node(s), windows [{lo}, {hi})")
    return 0


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--signals")
    p.add_argument("--distances")
    p.add_argument("--config")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--R", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--solver", choices=["euler", "rk4"])
    p.add_argument("--ode-steps", dest="ode_steps", type=int)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--ablation", action="append", choices=ABLATION_VARIANTS)
    p.add_argument("--window", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--dtw-band", dest="dtw_band", type=int)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sthode",
                                     description="Hypergraph neural-ODE traffic forecasting")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("build-graph", "train", "evaluate", "ablate", "predict"):
        p = sub.add_parser(name)
        _add_common(p)
        if name in ("evaluate", "predict"):
            p.add_argument("--checkpoint", required=True)
        if name == "predict":
            p.add_argument("--nodes", default="0",
                           help="comma-separated node ids")
            p.add_argument("--range", dest="window_range",
                           help="test-window range start:end")
    args = parser.parse_args(argv)
    cfg = _resolve_config(args)
    if args.command == "build-graph":
        return cmd_build_graph(cfg)
    if args.command == "train":
        return cmd_train(cfg)
    if args.command == "evaluate":
        return cmd_evaluate(cfg, args.checkpoint)
    if args.command == "ablate":
        return cmd_ablate(cfg)
    if args.command == "predict":
        nodes = [int(v) for v in args.nodes.split(",") if v != ""]
        rng = None
        if args.window_range:
            lo, hi = args.window_range.split(":")
            rng = (int(lo), int(hi))
        return cmd_predict(cfg, args.checkpoint, nodes, rng)
    return 0


if __name__ == "__main__":
    sys.exit(main())
