"""
Residual propagation, fused prediction and a gradient check
===========================================================

Each layer adds its activated message to its input, so with every weight
matrix at zero the node features pass through untouched. Predictions blend a
propagated inner product with a plain factor inner product through a trainable
scalar ``omega``.
"""
import numpy as np

from ngcn.graph import UndirectedWeightedGraph, build_normalized_adjacency
from ngcn.model import NgcnParams, batch_gradients, batch_loss, forward, init_params, predict_edge

# A 3-node path with weights 2 and 6.
g = UndirectedWeightedGraph.from_triples(3, [(0, 1, 2.0), (1, 2, 6.0)])
adj = build_normalized_adjacency(g, g.edges)

p = NgcnParams(X=np.ones((3, 1)), W=[np.ones((1, 1))], Y=np.ones((3, 1)), omega=0.5)
trace = forward(p, adj)
print("middle node after one layer:", trace.output[1, 0])  # 1 + c01 + c12

# Zero weights: the residual path returns X exactly.
p0 = NgcnParams(p.X, [np.zeros((1, 1))] * 3, p.Y, 0.5)
assert np.array_equal(forward(p0, adj).output, p.X)

# Prediction is symmetric in its endpoints, bit for bit.
q = init_params(3, 4, 4, 2, seed=1)
tq = forward(q, adj)
print(predict_edge(q, tq, 0, 1), predict_edge(q, tq, 1, 0))

###############################################################################
# Finite differences
# ------------------
# The analytic gradients are written out by hand; a central difference on a
# handful of coordinates is a quick sanity check.
rng = np.random.default_rng(0)
q = NgcnParams(rng.normal(0, 0.5, (3, 4)), [rng.normal(0, 0.5, (4, 4)) for _ in range(2)],
               rng.normal(0, 0.5, (3, 4)), 0.3)
grads = batch_gradients(q, adj, g.edges, lam=0.01)

h = 1e-5
for name, idx in [("X", (1, 2)), ("W0", (0, 3)), ("Y", (2, 0))]:
    arrays = q.arrays()
    plus = {k: v.copy() for k, v in arrays.items()}
    minus = {k: v.copy() for k, v in arrays.items()}
    plus[name][idx] += h
    minus[name][idx] -= h
    f = lambda a: batch_loss(NgcnParams.from_arrays(a), forward(NgcnParams.from_arrays(a), adj), g.edges, 0.01)
    numeric = (f(plus) - f(minus)) / (2 * h)
    print(f"{name}{idx}: analytic {grads.arrays()[name][idx]: .8f}  numeric {numeric: .8f}")
