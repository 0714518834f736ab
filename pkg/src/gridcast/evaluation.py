"""Forecast metrics, area averages, baselines and metric reports."""

import csv
from dataclasses import dataclass

import numpy as np

from ._io import atomic_open
from .data import denormalize, normalize, window_series
from .model import predict_batch
from .svr import svr_fit_multi, svr_predict_multi

ACC_FLOOR = 1.0  # degC; denominator clamp for the relative error in acc()
REPORT_HEADER = ["cell_lat_idx", "cell_lon_idx", "horizon", "rmse", "acc"]


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    acc: float
    n: int


def _pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.size == 0 or pred.size != truth.size:
        raise ValueError(f"need equal non-empty inputs, got {pred.size} and {truth.size}")
    return pred, truth


def rmse(pred, truth):
    pred, truth = _pair(pred, truth)
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def acc(pred, truth, floor=ACC_FLOOR):
    """One minus the mean relative absolute error.

    The denominator is ``max(|truth|, floor)`` so near-freezing water does not
    blow the score up.  A perfect forecast scores 1.
    """
    pred, truth = _pair(pred, truth)
    rel = np.abs(pred - truth) / np.maximum(np.abs(truth), floor)
    return float(1.0 - np.mean(rel))


def metric_report(pred, truth):
    pred, truth = _pair(pred, truth)
    return MetricReport(rmse(pred, truth), acc(pred, truth), pred.size)


def area_average(per_cell, mask):
    """Unweighted mean of per-cell rmse and acc over the sea cells of ``mask``."""
    mask = np.asarray(mask, dtype=bool)
    reports = [r for (i, j), r in sorted(per_cell.items()) if mask[i, j]]
    if not reports:
        raise ValueError("area average needs at least one sea cell")
    return MetricReport(float(np.mean([r.rmse for r in reports])),
                        float(np.mean([r.acc for r in reports])),
                        int(sum(r.n for r in reports)))


def persistence_forecast(window, l):
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-1] < 1:
        raise ValueError("persistence needs at least one observed value")
    return np.repeat(window[..., -1:], l, axis=-1)


def lstm_cell_forecast(model, series):
    """All stride-1 forecasts a block makes over ``series``.

    Returns ``(pred, truth)``, both ``(n_windows, l)`` in physical units.
    """
    w = window_series(series, model.config.k, model.config.l)
    return predict_batch(model, w.inputs), w.targets


def persistence_cell_forecast(series, k, l):
    w = window_series(series, k, l)
    return persistence_forecast(w.inputs, l), w.targets


def svr_cell_forecast(train_series, series, k, l, norm, C=10.0, epsilon=0.01,
                      sigma=1.6, max_train=1500):
    """SVR baseline on normalized windows, one model per lead day.

    At most ``max_train`` training windows are used, taken evenly across the
    training period.
    """
    train = window_series(normalize(train_series, norm), k, l)
    if len(train) > max_train:
        idx = np.linspace(0, len(train) - 1, max_train).round().astype(int)
        train = type(train)(k, l, train.inputs[idx], train.targets[idx])
    models = svr_fit_multi(train, C=C, epsilon=epsilon, sigma=sigma)
    w = window_series(series, k, l)
    pred = svr_predict_multi(models, normalize(w.inputs, norm))
    return denormalize(pred, norm), w.targets


def write_report(path, rows):
    """Write ``(lat_idx, lon_idx, horizon, MetricReport)`` rows as CSV."""
    with atomic_open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(REPORT_HEADER)
        for i, j, horizon, rep in rows:
            out.writerow([i, j, horizon, repr(rep.rmse), repr(rep.acc)])


def read_report(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [(int(r["cell_lat_idx"]), int(r["cell_lon_idx"]), int(r["horizon"]),
                 float(r["rmse"]), float(r["acc"])) for r in reader]
