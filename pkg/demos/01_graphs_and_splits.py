"""
Loading a weighted graph and splitting its edges
================================================

Weighted graphs come in as MatrixMarket text or as plain ``i j w`` edge lists.
Everything downstream works on the canonical form: 0-based node ids,
``i < j`` on every edge, weights rescaled into (0, 1].
"""
import io

import numpy as np

from ngcn.graph import (
    build_normalized_adjacency,
    format_edge_list,
    normalize_weights,
    parse_matrix_market,
    split_edges,
)

# A tiny symmetric matrix. Only the lower triangle is stored, indices are 1-based.
text = """%%MatrixMarket matrix coordinate real symmetric
% toy interaction strengths
5 5 6
2 1 4.0
3 1 1.0
3 2 2.0
4 3 8.0
5 4 3.0
5 1 0.5
"""
g = parse_matrix_market(io.StringIO(text))
print(g.n_nodes, "nodes,", g.n_edges, "edges")
print(format_edge_list(g.edges, g.n_nodes))

# Weights are divided by the largest one; the scale is kept so predictions can be mapped back.
g = normalize_weights(g)
print("weight_scale:", g.weight_scale)
print("weights:", g.edges.weight)

###############################################################################
# The propagation operator
# ------------------------
# c_ij = a_ij / sqrt(d_i d_j) with weighted degrees. It is built from training
# edges only, so nothing leaks from the held-out ones.
adj = build_normalized_adjacency(g, g.edges)
print(np.round(adj.matrix.toarray(), 3))

###############################################################################
# Seeded 70/10/20 split
# ---------------------
# Edges are shuffled into ten shards: 0-6 train, 7 validation, 8-9 test.
rng = np.random.default_rng(0)
iu, ju = np.triu_indices(30, k=1)
keep = rng.random(len(iu)) < 0.25
big = normalize_weights(type(g).from_triples(30, zip(iu[keep], ju[keep], rng.uniform(1, 5, keep.sum()))))
split = split_edges(big, seed=42)
print({k: len(getattr(split, k)) for k in ("train", "validation", "test")})

# Same seed, same partition.
again = split_edges(big, seed=42)
assert np.array_equal(split.test.src, again.test.src)
