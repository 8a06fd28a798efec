"""Repeated-split evaluation and the Table-3 style comparison grid."""
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import UndirectedWeightedGraph, split_edges
from .trainer import RunReport, TrainConfig, TrainingError, train

log = logging.getLogger(__name__)

METRICS = ("RMSE", "MAE")


@dataclass
class CrossValidationResult:
    model_kind: str
    reports: list[RunReport]
    rmse_mean: float
    rmse_std: float
    mae_mean: float
    mae_std: float
    failures: list[str] = field(default_factory=list)

    @property
    def rmse(self) -> np.ndarray:
        return np.array([r.test_rmse for r in self.reports])

    @property
    def mae(self) -> np.ndarray:
        return np.array([r.test_mae for r in self.reports])


def _std(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def summarize(model_kind: str, reports: list[RunReport], failures=()) -> CrossValidationResult:
    rmse = np.array([r.test_rmse for r in reports])
    mae = np.array([r.test_mae for r in reports])
    return CrossValidationResult(model_kind, reports, float(rmse.mean()), _std(rmse),
                                 float(mae.mean()), _std(mae), list(failures))


def cross_validate(g: UndirectedWeightedGraph, model_kind: str, config: TrainConfig,
                   n_reps: int = 5, n_jobs: int = 1) -> CrossValidationResult:
    """Repeat train/test on fresh splits with seeds ``seed, seed+1, ...``.

    Reports the mean and sample standard deviation of test RMSE and MAE.
    """
    configs = [replace(config, model_kind=model_kind, seed=config.seed + k) for k in range(n_reps)]

    def run(cfg):
        try:
            return train(g, split_edges(g, cfg.seed), cfg)[1]
        except TrainingError as exc:
            log.warning("%s seed %d failed: %s", model_kind, cfg.seed, exc)
            return exc

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            outcomes = list(pool.map(run, configs))
    else:
        outcomes = [run(c) for c in configs]
    reports = [o for o in outcomes if isinstance(o, RunReport)]
    failures = [str(o) for o in outcomes if not isinstance(o, RunReport)]
    if not reports:
        raise TrainingError(f"all {n_reps} repetitions of {model_kind} failed")
    return summarize(model_kind, reports, failures)


@dataclass
class ComparisonTable:
    """Rows are (dataset, metric) cases, columns are models, cells mean +/- std (lower is better)."""

    rows: list[tuple[str, str]]
    models: list[str]
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        shape = (len(self.rows), len(self.models))
        if self.mean.shape != shape or self.std.shape != shape:
            raise ValueError(f"cells must be {shape}")
        if np.any(self.std < 0):
            raise ValueError("standard deviations must be non-negative")

    @classmethod
    def from_results(cls, dataset: str, results: dict[str, CrossValidationResult]) -> "ComparisonTable":
        models = list(results)
        mean = [[results[m].rmse_mean for m in models], [results[m].mae_mean for m in models]]
        std = [[results[m].rmse_std for m in models], [results[m].mae_std for m in models]]
        return cls([(dataset, "RMSE"), (dataset, "MAE")], models, mean, std)

    def column(self, model: str) -> np.ndarray:
        return self.mean[:, self.models.index(model)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "metric", "model", "mean", "std"])
        for r, (ds, metric) in enumerate(self.rows):
            for c, m in enumerate(self.models):
                w.writerow([ds, metric, m, repr(float(self.mean[r, c])), repr(float(self.std[r, c]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ComparisonTable":
        rows, models, cells = [], [], {}
        for rec in csv.DictReader(io.StringIO(text)):
            key = (rec["dataset"], rec["metric"])
            if key not in rows:
                rows.append(key)
            if rec["model"] not in models:
                models.append(rec["model"])
            std = rec.get("std") or "0"
            cells[key, rec["model"]] = (float(rec["mean"]), float(std))
        missing = [(k, m) for k in rows for m in models if (k, m) not in cells]
        if missing:
            raise ValueError(f"incomplete table, missing cells: {missing[:5]}")
        mean = [[cells[k, m][0] for m in models] for k in rows]
        std = [[cells[k, m][1] for m in models] for k in rows]
        return cls(rows, models, mean, std)

    def render(self, reference: str | None = None) -> str:
        """Fixed-width text; a club mark flags cells where a model beats ``reference``."""
        reference = reference or self.models[-1]
        ref = self.column(reference)
        head = ["Case", ""] + self.models
        lines = [head]
        losses = {m: 0 for m in self.models}
        for r, (ds, metric) in enumerate(self.rows):
            row = [ds if r == 0 or self.rows[r - 1][0] != ds else "", metric]
            for c, m in enumerate(self.models):
                mark = ""
                if m != reference and self.mean[r, c] < ref[r]:
                    mark = "♣"
                    losses[m] += 1
                row.append(f"{mark}{self.mean[r, c]:.5f}±{self.std[r, c]:.0e}")
            lines.append(row)
        n = len(self.rows)
        lines.append(["♣ Loss/Win", ""] + [
            "-" if m == reference else f"{losses[m]}/{n - losses[m]}" for m in self.models])
        widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
        return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                         for row in lines) + "\n"
