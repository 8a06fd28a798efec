"""Mini-batch Adam training with early stopping, and (eta, lambda) grid search."""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from . import baselines, model
from .graph import EdgeList, EdgeSplit, NormalizedAdjacency, UndirectedWeightedGraph, build_normalized_adjacency
from .metrics import rmse_mae

log = logging.getLogger(__name__)

ETA_GRID = (0.00005, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05)
LAMBDA_GRID = (0.00001, 0.00005, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0)
MODEL_KINDS = ("ngcn", "mf", "gcn")


class TrainingError(RuntimeError):
    def __init__(self, message: str, report: "RunReport | None" = None):
        super().__init__(message)
        self.report = report


class NonFiniteGradientError(TrainingError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.001
    lam: float = 0.0001
    batch_size: int = 2048
    max_epochs: int = 1000
    patience: int = 30
    seed: int = 0
    model_kind: str = "ngcn"
    f: int = 128
    d: int = 128
    L: int = 2

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")
        if min(self.f, self.d) < 1 or self.L < 0:
            raise ValueError("dimensions must be positive")


# -- Adam --------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a, dtype=float) for k, a in params.items()},
                   {k: np.zeros_like(a, dtype=float) for k, a in params.items()})

    def copy(self) -> "AdamState":
        return replace(self, m={k: a.copy() for k, a in self.m.items()},
                       v={k: a.copy() for k, a in self.v.items()})


def adam_step(state: AdamState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              eta: float) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient in tensor {name!r}")
        if np.shape(g) != np.shape(params[name]):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {name!r}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=float)
        m[name] = b1 * state.m[name] + (1 - b1) * g
        v[name] = b2 * state.v[name] + (1 - b2) * g * g
        m_hat = m[name] / (1 - b1 ** t)
        v_hat = v[name] / (1 - b2 ** t)
        new_params[name] = p - eta * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, t=t)


# -- model adapters ------------------------------------------------------------

@dataclass(frozen=True)
class ModelAdapter:
    """Uniform init / adjacency / loss+grad / predict surface over the three model kinds."""

    kind: str
    init: Callable
    adjacency: Callable[[UndirectedWeightedGraph, EdgeList], NormalizedAdjacency]
    loss_grads: Callable
    predict: Callable
    params_type: type


def _ngcn_loss_grads(p, adj, batch, lam):
    loss, grads = model.loss_and_gradients(p, adj, batch, lam)
    return loss, grads.arrays()


def _ngcn_predict(p, adj, edges):
    return model.predict_edges(p, model.forward(p, adj), edges)


def _no_adjacency(g, train):
    return None


ADAPTERS = {
    "ngcn": ModelAdapter(
        "ngcn", lambda n, c: model.init_params(n, c.f, c.d, c.L, c.seed),
        build_normalized_adjacency, _ngcn_loss_grads, _ngcn_predict, model.NgcnParams),
    "mf": ModelAdapter(
        "mf", lambda n, c: baselines.init_mf(n, c.d, c.seed), _no_adjacency,
        lambda p, adj, b, lam: baselines.mf_forward_loss_grads(p, b, lam),
        lambda p, adj, e: baselines.mf_predict(p, e), baselines.MfParams),
    "gcn": ModelAdapter(
        "gcn", lambda n, c: baselines.init_gcn(n, c.f, c.L, c.seed), baselines.self_loop_adjacency,
        baselines.gcn_loss_grads,
        lambda p, adj, e: baselines.gcn_predict(baselines.gcn_forward(p, adj), e), baselines.GcnParams),
}


# -- early stopping / reports ----------------------------------------------------

class EarlyStopping:
    """Tracks the best validation score; signals stop after ``patience`` epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, score: float) -> bool:
        """Record ``score`` for ``epoch``; returns True if it is a new best."""
        if score < self.best:
            self.best, self.best_epoch, self.stale = score, epoch, 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class RunReport:
    config: dict
    train_loss: list[float] = field(default_factory=list)
    val_rmse: list[float] = field(default_factory=list)
    initial_train_loss: float | None = None
    best_epoch: int = 0
    best_val_rmse: float | None = None
    stopped_reason: str | None = None
    test_rmse: float | None = None
    test_mae: float | None = None
    error: str | None = None

    @property
    def seed(self) -> int:
        return self.config["seed"]

    @property
    def n_epochs(self) -> int:
        return len(self.val_rmse)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        return cls(**data)

    def curves_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_rmse"])
        for e, (loss, val) in enumerate(zip(self.train_loss, self.val_rmse), start=1):
            w.writerow([e, repr(loss), repr(val)])
        return buf.getvalue()


def _batches(edges: EdgeList, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(len(edges))
    for start in range(0, len(edges), batch_size):
        yield edges[order[start:start + batch_size]]


def train(g: UndirectedWeightedGraph, split: EdgeSplit, config: TrainConfig):
    """Train one model; returns the best-validation parameters and a :class:`RunReport`.

    Each epoch shuffles the training edges into mini-batches and takes one Adam
    step per batch. Training ends after ``max_epochs`` or once validation RMSE
    has not improved for ``patience`` epochs.
    """
    if len(split.train) == 0:
        raise TrainingError("empty training set")
    if len(split.validation) == 0:
        raise TrainingError("empty validation set")
    adapter = ADAPTERS[config.model_kind]
    rng = np.random.default_rng(config.seed)
    report = RunReport(config=asdict(config))
    adj = adapter.adjacency(g, split.train)
    params = adapter.init(g.n_nodes, config)
    arrays = params.arrays()
    state = AdamState.zeros_like(arrays)

    report.initial_train_loss = float(sum(
        adapter.loss_grads(params, adj, b, config.lam)[0]
        for b in _batches(split.train, config.batch_size, np.random.default_rng(config.seed))))
    stopper = EarlyStopping(config.patience)
    best = params.copy()

    # divergence is detected below and reported, so overflow warnings are noise
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.max_epochs + 1):
            epoch_loss = 0.0
            for batch in _batches(split.train, config.batch_size, rng):
                loss, grads = adapter.loss_grads(params, adj, batch, config.lam)
                if not np.isfinite(loss):
                    report.stopped_reason = "diverged"
                    report.error = f"non-finite training loss at epoch {epoch}"
                    raise TrainingError(report.error, report)
                epoch_loss += loss
                try:
                    arrays, state = adam_step(state, arrays, grads, config.eta)
                except NonFiniteGradientError as exc:
                    report.stopped_reason = "diverged"
                    report.error = f"epoch {epoch}: {exc}"
                    raise NonFiniteGradientError(report.error, report) from exc
                params = adapter.params_type.from_arrays(arrays)
            val = rmse_mae(split.validation.weight, adapter.predict(params, adj, split.validation)).rmse
            if not np.isfinite(val):
                report.stopped_reason = "diverged"
                report.error = f"non-finite validation RMSE at epoch {epoch}"
                raise TrainingError(report.error, report)
            report.train_loss.append(epoch_loss)
            report.val_rmse.append(val)
            if stopper.update(epoch, val):
                best = params.copy()
            if stopper.should_stop:
                report.stopped_reason = "patience"
                break
        else:
            report.stopped_reason = "threshold"

    report.best_epoch = stopper.best_epoch
    report.best_val_rmse = float(stopper.best)
    if len(split.test):
        m = rmse_mae(split.test.weight, adapter.predict(best, adj, split.test))
        report.test_rmse, report.test_mae = m.rmse, m.mae
    log.debug("%s eta=%g lam=%g: best epoch %d, val %.5f, test %s", config.model_kind, config.eta,
              config.lam, report.best_epoch, report.best_val_rmse, report.test_rmse)
    return best, report


def predict(params, g: UndirectedWeightedGraph, train_edges: EdgeList, edges: EdgeList) -> np.ndarray:
    """Predict weights for ``edges`` with a trained model whose operator uses ``train_edges``."""
    kind = {model.NgcnParams: "ngcn", baselines.MfParams: "mf", baselines.GcnParams: "gcn"}[type(params)]
    adapter = ADAPTERS[kind]
    return adapter.predict(params, adapter.adjacency(g, train_edges), edges)


# -- grid search -------------------------------------------------------------------

def _grid_key(cfg: TrainConfig, rep: RunReport):
    return (rep.best_val_rmse, cfg.lam, cfg.eta)


def grid_search(g: UndirectedWeightedGraph, split: EdgeSplit, base_config: TrainConfig,
                etas=ETA_GRID, lambdas=LAMBDA_GRID, n_jobs: int = 1):
    """Train every (eta, lambda) cell; returns ``(best_config, reports)``.

    Selection minimizes best validation RMSE, breaking ties by smaller lambda
    and then smaller eta. Failed cells are kept in ``reports`` with ``error``
    set; the search fails only if every cell fails.
    """
    if not etas or not lambdas:
        raise ValueError("grids must be non-empty")
    configs = [replace(base_config, eta=e, lam=l) for e, l in itertools.product(etas, lambdas)]

    def run(cfg):
        try:
            return train(g, split, cfg)[1]
        except TrainingError as exc:
            rep = exc.report or RunReport(config=asdict(cfg))
            rep.error = str(exc)
            return rep

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            reports = list(pool.map(run, configs))
    else:
        reports = [run(c) for c in configs]

    ok = [(c, r) for c, r in zip(configs, reports) if r.error is None]
    if not ok:
        raise TrainingError("every grid cell failed")
    best_cfg, _ = min(ok, key=lambda cr: _grid_key(*cr))
    return best_cfg, reports
