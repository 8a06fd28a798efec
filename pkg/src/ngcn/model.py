"""NGCN: residual weighted propagation fused with symmetric latent factors.

Node representations come from a stack of residual layers over the normalized
adjacency ``C``::

    H[0] = X
    H[l+1] = relu(C @ H[l] @ W[l]) + H[l]

and an edge weight is estimated by blending two inner products::

    a_ij = omega * <h_i, h_j> + (1 - omega) * <y_i, y_j>

where ``h`` is the last layer and ``y`` are the collaboration factors.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import EdgeList, NormalizedAdjacency

INIT_HIGH = 0.05
INIT_OMEGA = 0.5


def _as_dict(obj) -> dict[str, np.ndarray]:
    out = {"X": obj.X, "Y": obj.Y, "omega": np.asarray(obj.omega, dtype=float)}
    out.update({f"W{l}": w for l, w in enumerate(obj.W)})
    return out


@dataclass
class NgcnParams:
    X: np.ndarray
    W: list[np.ndarray]
    Y: np.ndarray
    omega: float

    def __post_init__(self):
        if len(self.W) < 1:
            raise ValueError("need at least one propagation layer")
        f = self.X.shape[1]
        for w in self.W:
            if w.shape != (f, f):
                raise ValueError(f"layer weights must be {f}x{f}, got {w.shape}")
        if self.Y.shape[0] != self.X.shape[0]:
            raise ValueError("X and Y must have one row per node")

    @property
    def n_nodes(self) -> int:
        return self.X.shape[0]

    @property
    def f(self) -> int:
        return self.X.shape[1]

    @property
    def d(self) -> int:
        return self.Y.shape[1]

    @property
    def L(self) -> int:
        return len(self.W)

    def arrays(self) -> dict[str, np.ndarray]:
        return _as_dict(self)

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "NgcnParams":
        n_layers = sum(1 for k in arrays if k.startswith("W"))
        return cls(arrays["X"], [arrays[f"W{l}"] for l in range(n_layers)],
                   arrays["Y"], float(arrays["omega"]))

    def copy(self) -> "NgcnParams":
        return NgcnParams(self.X.copy(), [w.copy() for w in self.W], self.Y.copy(), self.omega)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())


@dataclass
class NgcnGradients:
    X: np.ndarray
    W: list[np.ndarray]
    Y: np.ndarray
    omega: float

    def arrays(self) -> dict[str, np.ndarray]:
        return _as_dict(self)


@dataclass
class ForwardTrace:
    H: list[np.ndarray]
    pre_act: list[np.ndarray] = field(repr=False)

    @property
    def output(self) -> np.ndarray:
        return self.H[-1]


def init_params(n_nodes: int, f: int, d: int, L: int, seed: int) -> NgcnParams:
    """Uniform ``[0, 0.05]`` draws for X, W and Y from one seeded generator; omega = 0.5."""
    if min(n_nodes, f, d, L) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    X = rng.uniform(0.0, INIT_HIGH, size=(n_nodes, f))
    W = [rng.uniform(0.0, INIT_HIGH, size=(f, f)) for _ in range(L)]
    Y = rng.uniform(0.0, INIT_HIGH, size=(n_nodes, d))
    return NgcnParams(X, W, Y, INIT_OMEGA)


def forward(p: NgcnParams, adj: NormalizedAdjacency) -> ForwardTrace:
    if adj.n_nodes != p.n_nodes:
        raise ValueError(f"adjacency has {adj.n_nodes} nodes, parameters have {p.n_nodes}")
    H = [p.X]
    pre = []
    for W in p.W:
        z = (adj.matrix @ H[-1]) @ W
        pre.append(z)
        H.append(np.maximum(z, 0.0) + H[-1])
    return ForwardTrace(H, pre)


def _check_index(n: int, *idx) -> None:
    for i in idx:
        if not (0 <= i < n):
            raise IndexError(f"node index {i} out of range for {n} nodes")


def _rowdot(A: np.ndarray, i, j) -> np.ndarray:
    # elementwise product then sum keeps <a, b> == <b, a> bit-for-bit
    return np.einsum("ij,ij->i", A[i], A[j])


def collab_score(p: NgcnParams, i: int, j: int) -> float:
    _check_index(p.n_nodes, i, j)
    return float(np.sum(p.Y[i] * p.Y[j]))


def predict_edge(p: NgcnParams, trace: ForwardTrace, i: int, j: int) -> float:
    _check_index(p.n_nodes, i, j)
    h = trace.output
    g = float(np.sum(h[i] * h[j]))
    s = float(np.sum(p.Y[i] * p.Y[j]))
    return p.omega * g + (1.0 - p.omega) * s


def _heads(p: NgcnParams, trace: ForwardTrace, edges: EdgeList):
    g = _rowdot(trace.output, edges.src, edges.dst)
    s = _rowdot(p.Y, edges.src, edges.dst)
    return p.omega * g + (1.0 - p.omega) * s, g, s


def predict_edges(p: NgcnParams, trace: ForwardTrace, edges: EdgeList) -> np.ndarray:
    """Vectorized :func:`predict_edge` over an edge list."""
    return _heads(p, trace, edges)[0]


def _penalty(p: NgcnParams, nodes: np.ndarray) -> float:
    return (p.omega * p.omega + np.sum(p.X[nodes] ** 2) + np.sum(p.Y[nodes] ** 2)
            + sum(np.sum(w ** 2) for w in p.W))


def batch_loss(p: NgcnParams, trace: ForwardTrace, batch: EdgeList, lam: float) -> float:
    """Joint squared error of the fused, propagation and collaboration heads plus L2.

    The L2 term covers omega, every layer weight, and the X / Y rows of nodes
    touched by the batch.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    a = batch.weight
    a_hat, g, s = _heads(p, trace, batch)
    sse = np.sum((a - a_hat) ** 2) + np.sum((a - g) ** 2) + np.sum((a - s) ** 2)
    return float(sse + lam * _penalty(p, batch.nodes()))


def _pair_grad(A: np.ndarray, edges: EdgeList, coef: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_k coef_k <a_src_k, a_dst_k>`` with respect to A."""
    out = np.zeros_like(A)
    np.add.at(out, edges.src, coef[:, None] * A[edges.dst])
    np.add.at(out, edges.dst, coef[:, None] * A[edges.src])
    return out


def backprop_layers(adj: NormalizedAdjacency, W: list[np.ndarray], trace: ForwardTrace,
                    dH: np.ndarray, residual: bool = True):
    """Push ``dL/dH[L]`` back through the layers; returns ``(dL/dH[0], [dL/dW[l]])``.

    ReLU's subgradient at exactly zero is taken as zero.
    """
    dW = [None] * len(W)
    for l in reversed(range(len(W))):
        dz = dH * (trace.pre_act[l] > 0)
        dW[l] = (adj.matrix @ trace.H[l]).T @ dz
        # C is symmetric, so C^T dz == C dz
        back = adj.matrix @ (dz @ W[l].T)
        dH = dH + back if residual else back
    return dH, dW


def loss_and_gradients(p: NgcnParams, adj: NormalizedAdjacency, batch: EdgeList, lam: float,
                       trace: ForwardTrace | None = None) -> tuple[float, NgcnGradients]:
    if len(batch) == 0:
        raise ValueError("empty batch")
    if trace is None:
        trace = forward(p, adj)
    a = batch.weight
    a_hat, g, s = _heads(p, trace, batch)
    e_fused = 2.0 * (a_hat - a)
    d_g = p.omega * e_fused + 2.0 * (g - a)
    d_s = (1.0 - p.omega) * e_fused + 2.0 * (s - a)
    nodes = batch.nodes()

    d_omega = float(np.sum(e_fused * (g - s)) + 2.0 * lam * p.omega)

    dY = _pair_grad(p.Y, batch, d_s)
    dY[nodes] += 2.0 * lam * p.Y[nodes]

    dH = _pair_grad(trace.output, batch, d_g)
    dX, dW = backprop_layers(adj, p.W, trace, dH)
    dX[nodes] += 2.0 * lam * p.X[nodes]
    dW = [gw + 2.0 * lam * w for gw, w in zip(dW, p.W)]

    sse = np.sum((a - a_hat) ** 2) + np.sum((a - g) ** 2) + np.sum((a - s) ** 2)
    loss = float(sse + lam * _penalty(p, nodes))
    return loss, NgcnGradients(dX, dW, dY, d_omega)


def batch_gradients(p: NgcnParams, adj: NormalizedAdjacency, batch: EdgeList,
                    lam: float) -> NgcnGradients:
    """Analytic gradients of :func:`batch_loss` with respect to every parameter."""
    return loss_and_gradients(p, adj, batch, lam)[1]
