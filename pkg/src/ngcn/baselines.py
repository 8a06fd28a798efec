"""Reference competitors trained under the same harness as NGCN.

* MF: one symmetric factor matrix, ``a_ij ~ <y_i, y_j>``.
* GCN: the standard propagation rule with self-loops and no residual path,
  ``H[l+1] = relu(D^-1/2 (A + I) D^-1/2 H[l] W[l])``, ``a_ij ~ <h_i, h_j>``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import EdgeList, NormalizedAdjacency, UndirectedWeightedGraph
from .model import INIT_HIGH, ForwardTrace, _pair_grad, _rowdot, backprop_layers


@dataclass
class MfParams:
    Y: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.Y.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {"Y": self.Y}

    @classmethod
    def from_arrays(cls, arrays):
        return cls(arrays["Y"])

    def copy(self) -> "MfParams":
        return MfParams(self.Y.copy())


@dataclass
class GcnParams:
    X: np.ndarray
    W: list[np.ndarray]

    @property
    def n_nodes(self) -> int:
        return self.X.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        out = {"X": self.X}
        out.update({f"W{l}": w for l, w in enumerate(self.W)})
        return out

    @classmethod
    def from_arrays(cls, arrays):
        n_layers = sum(1 for k in arrays if k.startswith("W"))
        return cls(arrays["X"], [arrays[f"W{l}"] for l in range(n_layers)])

    def copy(self) -> "GcnParams":
        return GcnParams(self.X.copy(), [w.copy() for w in self.W])


def init_mf(n_nodes: int, d: int, seed: int) -> MfParams:
    rng = np.random.default_rng(seed)
    return MfParams(rng.uniform(0.0, INIT_HIGH, size=(n_nodes, d)))


def init_gcn(n_nodes: int, f: int, L: int, seed: int) -> GcnParams:
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, INIT_HIGH, size=(n_nodes, f))
    return GcnParams(X, [rng.uniform(0.0, INIT_HIGH, size=(f, f)) for _ in range(L)])


def _check_batch(batch: EdgeList):
    if len(batch) == 0:
        raise ValueError("empty batch")


# -- MF ----------------------------------------------------------------------

def mf_predict(p: MfParams, edges: EdgeList) -> np.ndarray:
    return _rowdot(p.Y, edges.src, edges.dst)


def mf_forward_loss_grads(p: MfParams, batch: EdgeList, lam: float):
    """Squared error plus L2 on the batch's factor rows; returns ``(loss, {"Y": dY})``."""
    _check_batch(batch)
    r = mf_predict(p, batch) - batch.weight
    nodes = batch.nodes()
    loss = float(np.sum(r ** 2) + lam * np.sum(p.Y[nodes] ** 2))
    dY = _pair_grad(p.Y, batch, 2.0 * r)
    dY[nodes] += 2.0 * lam * p.Y[nodes]
    return loss, {"Y": dY}


# -- GCN ---------------------------------------------------------------------

def self_loop_adjacency(g: UndirectedWeightedGraph, train: EdgeList) -> NormalizedAdjacency:
    """``D^-1/2 (A + I) D^-1/2`` over training edges, with ``d_ii = 1 + sum_j a_ij``."""
    n = g.n_nodes
    deg = np.ones(n)
    np.add.at(deg, train.src, train.weight)
    np.add.at(deg, train.dst, train.weight)
    inv = 1.0 / np.sqrt(deg)
    rows = np.concatenate([train.src, train.dst, np.arange(n)])
    cols = np.concatenate([train.dst, train.src, np.arange(n)])
    vals = np.concatenate([train.weight, train.weight, np.ones(n)])
    matrix = sp.csr_matrix((vals * (inv[rows] * inv[cols]), (rows, cols)), shape=(n, n))
    matrix.sort_indices()
    return NormalizedAdjacency(n, matrix, deg)


def gcn_forward(p: GcnParams, adj, train: EdgeList | None = None) -> ForwardTrace:
    """Plain GCN stack over a :func:`self_loop_adjacency` operator.

    ``adj`` may also be a graph, in which case the operator is built from
    ``train`` (all of the graph's edges if omitted).
    """
    if isinstance(adj, UndirectedWeightedGraph):
        adj = self_loop_adjacency(adj, adj.edges if train is None else train)
    if adj.n_nodes != p.n_nodes:
        raise ValueError(f"adjacency has {adj.n_nodes} nodes, parameters have {p.n_nodes}")
    H = [p.X]
    pre = []
    for W in p.W:
        if W.shape[0] != H[-1].shape[1]:
            raise ValueError(f"layer weight shape {W.shape} does not fit input width {H[-1].shape[1]}")
        z = (adj.matrix @ H[-1]) @ W
        pre.append(z)
        H.append(np.maximum(z, 0.0))
    return ForwardTrace(H, pre)


def gcn_predict(trace: ForwardTrace, edges: EdgeList) -> np.ndarray:
    return _rowdot(trace.output, edges.src, edges.dst)


def gcn_loss_grads(p: GcnParams, adj: NormalizedAdjacency, batch: EdgeList, lam: float,
                   trace: ForwardTrace | None = None):
    """Squared error plus L2 on batch rows of X and all layer weights."""
    _check_batch(batch)
    if trace is None:
        trace = gcn_forward(p, adj)
    r = gcn_predict(trace, batch) - batch.weight
    nodes = batch.nodes()
    loss = float(np.sum(r ** 2) + lam * (np.sum(p.X[nodes] ** 2) + sum(np.sum(w ** 2) for w in p.W)))
    dH = _pair_grad(trace.output, batch, 2.0 * r)
    dX, dW = backprop_layers(adj, p.W, trace, dH, residual=False)
    dX[nodes] += 2.0 * lam * p.X[nodes]
    grads = {"X": dX}
    grads.update({f"W{l}": gw + 2.0 * lam * w for l, (gw, w) in enumerate(zip(dW, p.W))})
    return loss, grads
