"""Drive the whole pipeline through the command-line interface: write a
synthetic dataset to CSV, build graphs, train, evaluate, and predict."""

import json
import tempfile
from pathlib import Path

from sthode.cli import main
from sthode.data import synth_generate, write_signals_csv

work = Path(tempfile.mkdtemp(prefix="sthode_demo_"))
s = synth_generate(8, 400, seed=2, t_in=6, horizon=6, period=48)
write_signals_csv(work / "signals.csv", s.dataset.signals)
s.distances.to_csv(work / "distances.csv")

cfg = work / "config.json"
cfg.write_text(json.dumps({
    "signals": str(work / "signals.csv"),
    "distances": str(work / "distances.csv"),
    "out_dir": str(work / "run"),
    "window": 6, "horizon": 6,
    "K": 2, "r": 3, "blocks": 1,
    "tcn_channels": [8, 8], "mlp_hidden": 16,
    "ode_steps": 3, "epochs": 5, "batch_size": 32,
}))

for argv in (
    ["build-graph", "--config", str(cfg)],
    ["train", "--config", str(cfg)],
    ["evaluate", "--config", str(cfg), "--checkpoint", str(work / "run" / "checkpoint.npz")],
    ["predict", "--config", str(cfg), "--checkpoint", str(work / "run" / "checkpoint.npz"),
     "--nodes", "0,3"],
):
    print("\n$ sthode", " ".join(argv))
    rc = main(argv)
    assert rc == 0, rc

print("\nartifacts in", work / "run")
for p in sorted((work / "run").iterdir()):
    print(" ", p.name)
print("\nmetrics:", (work / "run" / "metrics.txt").read_text().splitlines()[1:4])
