"""Forecast error measures: MAE, RMSE, MAPE with masking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class UndefinedMetricError(ValueError):
    pass


def _masked(y_true, y_pred, mask):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    if mask is None:
        mask = np.ones(y_true.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise UndefinedMetricError("all points masked")
    return y_true[mask], y_pred[mask]


def mae(y_true, y_pred, mask=None) -> float:
    yt, yp = _masked(y_true, y_pred, mask)
    return float(np.mean(np.abs(yt - yp)))


def rmse(y_true, y_pred, mask=None) -> float:
    yt, yp = _masked(y_true, y_pred, mask)
    return float(np.sqrt(np.mean((yt - yp) ** 2)))


def mape(y_true, y_pred, mask=None) -> float:
    """Percent error; zero targets are masked out (PeMS convention)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    if mask is None:
        mask = np.ones(y_true.shape, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool)
    mask = mask & (y_true != 0)
    yt, yp = _masked(y_true, y_pred, mask)
    return float(np.mean(np.abs((yt - yp) / yt)) * 100.0)


@dataclass
class MetricReport:
    mae: float
    rmse: float
    mape: float
    per_horizon: list = field(default_factory=list)  # [{step, mae, rmse, mape}]
    masked_points: int = 0

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "mape": self.mape,
            "per_horizon": self.per_horizon,
            "masked_points": self.masked_points,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [f"{'step':>6} {'MAE':>10} {'RMSE':>10} {'MAPE%':>10}"]
        for row in self.per_horizon:
            lines.append(
                f"{row['step']:>6} {row['mae']:>10.4f} {row['rmse']:>10.4f} {row['mape']:>10.4f}"
            )
        lines.append(
            f"{'all':>6} {self.mae:>10.4f} {self.rmse:>10.4f} {self.mape:>10.4f}"
        )
        return "\n".join(lines) + "\n"


def report(y_true, y_pred, missing=None) -> MetricReport:
    """Overall and per-horizon-step metrics.

    Arrays are (n, N, S, F) on the original scale; `missing` flags imputed
    points, which are excluded.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    valid = ~np.asarray(missing, dtype=bool) if missing is not None else np.ones(y_true.shape, dtype=bool)
    per = []
    for s in range(y_true.shape[2]):
        m = valid[:, :, s]
        per.append({
            "step": s + 1,
            "mae": mae(y_true[:, :, s], y_pred[:, :, s], m),
            "rmse": rmse(y_true[:, :, s], y_pred[:, :, s], m),
            "mape": mape(y_true[:, :, s], y_pred[:, :, s], m),
        })
    return MetricReport(
        mae=mae(y_true, y_pred, valid),
        rmse=rmse(y_true, y_pred, valid),
        mape=mape(y_true, y_pred, valid),
        per_horizon=per,
        masked_points=int((~valid).sum()),
    )
