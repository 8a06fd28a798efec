from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricPair:
    rmse: float
    mae: float
    n: int


def rmse_mae(truth, prediction=None) -> MetricPair:
    """RMSE and MAE over held-out weights.

    Accepts either two aligned arrays or a single sequence of
    ``(truth, prediction)`` pairs.
    """
    if prediction is None:
        pairs = np.asarray(truth, dtype=float).reshape(-1, 2)
        truth, prediction = pairs[:, 0], pairs[:, 1]
    truth = np.asarray(truth, dtype=float).ravel()
    prediction = np.asarray(prediction, dtype=float).ravel()
    if truth.shape != prediction.shape:
        raise ValueError("truth and prediction differ in length")
    if truth.size == 0:
        raise ValueError("cannot score an empty edge set")
    err = np.abs(truth - prediction)
    scale = err.max()
    # scaled so tiny errors do not underflow when squared
    if scale > 0 and np.isfinite(scale):
        rmse = scale * np.sqrt(np.mean((err / scale) ** 2))
    else:
        rmse = scale  # 0, inf or nan

    return MetricPair(float(rmse), float(np.mean(err)), truth.size)
