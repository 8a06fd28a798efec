"""Synthetic undirected weighted graphs with known structure."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .graph import UndirectedWeightedGraph, normalize_weights


def low_rank_graph(n_nodes: int = 50, rank: int = 4, observed: float = 0.4, seed: int = 0,
                   normalize: bool = True) -> UndirectedWeightedGraph:
    """Weights ``<z_i, z_j>`` for nonnegative rank-``rank`` factors on a random ``observed`` fraction of pairs."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(0.0, 1.0, size=(n_nodes, rank))
    iu, ju = np.triu_indices(n_nodes, k=1)
    keep = rng.random(len(iu)) < observed
    i, j = iu[keep], ju[keep]
    w = np.einsum("ij,ij->i", z[i], z[j])
    g = UndirectedWeightedGraph.from_triples(n_nodes, zip(i, j, w))
    return normalize_weights(g) if normalize else g


def knn_low_rank_graph(n_nodes: int = 200, k: int = 12, rank: int = 4, seed: int = 0,
                       dim: int = 2, bandwidth: float = 0.15, noise: float = 0.3,
                       proximity: float = 0.0, normalize: bool = True) -> UndirectedWeightedGraph:
    """Low-rank collaboration weights laid over a k-nearest-neighbour topology.

    Nodes sit at random points in the unit ``dim``-cube and are joined to their
    ``k`` nearest neighbours (symmetrized). Each node's factor vector is a
    spatially smooth field evaluated at its position plus i.i.d. noise, so
    neighbours carry information about one another's factors. Edge weights are
    the factor inner products plus ``proximity`` times a Gaussian kernel of the
    endpoints' distance scaled to the local k-NN radius.
    """
    rng = np.random.default_rng(seed)
    pos = rng.uniform(size=(n_nodes, dim))
    centers = rng.uniform(size=(rank, dim))
    field = np.exp(-((pos[:, None, :] - centers[None]) ** 2).sum(-1) / (2 * bandwidth ** 2))
    z = field + noise * rng.uniform(size=(n_nodes, rank))
    dist, nbr = cKDTree(pos).query(pos, k=k + 1)
    i = np.repeat(np.arange(n_nodes), k)
    j = nbr[:, 1:].ravel()
    pairs = np.unique(np.sort(np.stack([i, j], axis=1), axis=1), axis=0)
    a, b = pairs[:, 0], pairs[:, 1]
    w = np.einsum("ij,ij->i", z[a], z[b])
    if proximity:
        radius = dist[:, -1]
        gap = np.linalg.norm(pos[a] - pos[b], axis=1)
        w = w + proximity * np.exp(-gap ** 2 / (radius[a] * radius[b]))
    g = UndirectedWeightedGraph.from_triples(n_nodes, zip(a, b, w))
    return normalize_weights(g) if normalize else g
