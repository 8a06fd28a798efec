"""
Training with Adam and early stopping
=====================================

Synthetic weights come from a rank-4 nonnegative factorization, with 40% of the
pairs observed. Training stops after 30 epochs without a validation gain and
hands back the parameters from the best epoch.
"""
import numpy as np

from ngcn.graph import split_edges
from ngcn.synthetic import low_rank_graph
from ngcn.trainer import TrainConfig, predict, train
from ngcn.metrics import rmse_mae

g = low_rank_graph(n_nodes=50, rank=4, observed=0.4, seed=0)
split = split_edges(g, seed=0)
print(g.n_edges, "edges;", len(split.train), "for training")

cfg = TrainConfig(eta=0.005, lam=1e-4, batch_size=64, max_epochs=300, f=8, d=8, seed=0)
params, report = train(g, split, cfg)

print("stopped:", report.stopped_reason, "after", report.n_epochs, "epochs")
print("best epoch:", report.best_epoch, "val RMSE", round(report.best_val_rmse, 5))
print("loss:", round(report.initial_train_loss, 3), "->", round(report.train_loss[-1], 4))
print("test RMSE / MAE:", round(report.test_rmse, 5), round(report.test_mae, 5))
print("learned omega:", round(params.omega, 3))

# The same numbers fall out of predict() directly.
m = rmse_mae(split.test.weight, predict(params, g, split.train, split.test))
assert np.isclose(m.rmse, report.test_rmse)

# Per-epoch curves are plain CSV.
print(report.curves_csv().splitlines()[:4])
