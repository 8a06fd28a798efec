import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngcn.graph import EdgeList, UndirectedWeightedGraph, build_normalized_adjacency
from ngcn.model import (
    NgcnParams,
    batch_gradients,
    batch_loss,
    collab_score,
    forward,
    init_params,
    loss_and_gradients,
    predict_edge,
    predict_edges,
)

from conftest import central_differences, max_relative_error, random_graph, random_ngcn_instance


def _loss_of(adj, batch, lam):
    def loss(arrays):
        q = NgcnParams.from_arrays(arrays)
        return batch_loss(q, forward(q, adj), batch, lam)
    return loss


class TestInit:
    def test_deterministic(self):
        a, b = init_params(10, 4, 3, 2, seed=7), init_params(10, 4, 3, 2, seed=7)
        for k in a.arrays():
            assert np.array_equal(a.arrays()[k], b.arrays()[k])

    def test_ranges_and_shapes(self):
        p = init_params(20, 128, 128, 2, seed=1)
        assert p.X.shape == (20, 128) and p.Y.shape == (20, 128)
        assert [w.shape for w in p.W] == [(128, 128), (128, 128)]
        assert p.omega == 0.5
        for a in (p.X, p.Y, *p.W):
            assert a.min() >= 0.0 and a.max() <= 0.05

    def test_rejects_zero_dims(self):
        with pytest.raises(ValueError):
            init_params(5, 0, 3, 1, 0)


class TestForward:
    def test_empty_adjacency_is_identity(self, path3):
        p = init_params(3, 4, 2, 3, seed=0)
        trace = forward(p, build_normalized_adjacency(path3, EdgeList.empty()))
        for h in trace.H:
            assert np.array_equal(h, p.X)

    def test_zero_weights_is_identity(self, path3):
        p = init_params(3, 4, 2, 3, seed=0)
        p.W = [np.zeros((4, 4)) for _ in p.W]
        assert np.array_equal(forward(p, build_normalized_adjacency(path3, path3.edges)).output, p.X)

    def test_path_hand_value(self, path3):
        adj = build_normalized_adjacency(path3, path3.edges)
        p = NgcnParams(np.ones((3, 1)), [np.ones((1, 1))], np.ones((3, 1)), 0.5)
        trace = forward(p, adj)
        c01, c12 = 0.5, 6 / np.sqrt(48)
        np.testing.assert_allclose(trace.pre_act[0].ravel(), [c01, c01 + c12, c12], atol=1e-15)
        assert trace.H[1][1, 0] == pytest.approx(2.3660254037844384, abs=1e-12)

    def test_dimension_mismatch(self, path3):
        with pytest.raises(ValueError):
            forward(init_params(4, 2, 2, 1, 0), build_normalized_adjacency(path3, path3.edges))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10 ** 6))
    def test_residual_increments_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 10, 20)
        p = NgcnParams(rng.normal(size=(10, 3)), [rng.normal(size=(3, 3)) for _ in range(3)],
                       rng.normal(size=(10, 2)), 0.5)
        trace = forward(p, build_normalized_adjacency(g, g.edges))
        assert np.array_equal(trace.H[0], p.X)
        for l in range(3):
            assert np.all(trace.H[l + 1] - trace.H[l] >= 0)
            assert np.array_equal(trace.H[l + 1], np.maximum(trace.pre_act[l], 0) + trace.H[l])


class TestScores:
    def test_unit_vectors(self):
        p = NgcnParams(np.zeros((2, 1)), [np.zeros((1, 1))], np.array([[1.0, 0.0], [1.0, 0.0]]), 0.5)
        assert collab_score(p, 0, 1) == 1.0

    def test_self_inner_product(self):
        p = NgcnParams(np.zeros((1, 1)), [np.zeros((1, 1))], np.array([[3.0, 4.0]]), 0.5)
        assert collab_score(p, 0, 0) == 25.0

    def test_index_errors(self, path3):
        p = init_params(3, 2, 2, 1, 0)
        trace = forward(p, build_normalized_adjacency(path3, path3.edges))
        with pytest.raises(IndexError):
            collab_score(p, 0, 3)
        with pytest.raises(IndexError):
            predict_edge(p, trace, -1, 0)

    def test_fusion_endpoints(self, path3):
        adj = build_normalized_adjacency(path3, path3.edges)
        rng = np.random.default_rng(0)
        p = NgcnParams(rng.normal(size=(3, 2)), [rng.normal(size=(2, 2))], rng.normal(size=(3, 2)), 1.0)
        trace = forward(p, adj)
        h = trace.output
        assert predict_edge(p, trace, 0, 2) == np.sum(h[0] * h[2])
        p.omega = 0.0
        assert predict_edge(p, trace, 0, 2) == collab_score(p, 0, 2)

    def test_fusion_midpoint(self):
        # <h0,h1> = 0.4 with one-dimensional h = (1, 0.4); <y0,y1> = 0.2
        p = NgcnParams(np.array([[1.0], [0.4]]), [np.zeros((1, 1))], np.array([[1.0], [0.2]]), 0.5)
        g = UndirectedWeightedGraph.from_triples(2, [(0, 1, 1.0)])
        trace = forward(p, build_normalized_adjacency(g, EdgeList.empty()))
        assert predict_edge(p, trace, 0, 1) == pytest.approx(0.3, abs=1e-15)

    def test_vectorized_matches_scalar(self):
        g, adj, p = random_ngcn_instance(3)
        trace = forward(p, adj)
        vec = predict_edges(p, trace, g.edges)
        ref = [predict_edge(p, trace, i, j) for i, j, _ in g.edges.triples()]
        np.testing.assert_allclose(vec, ref, rtol=0, atol=1e-14)


class TestLoss:
    def test_single_edge_value(self):
        # a = 1 and every head predicts 0.5 -> 3 * 0.25
        p = NgcnParams(np.array([[1.0], [0.5]]), [np.zeros((1, 1))], np.array([[1.0], [0.5]]), 0.3)
        g = UndirectedWeightedGraph.from_triples(2, [(0, 1, 1.0)])
        trace = forward(p, build_normalized_adjacency(g, EdgeList.empty()))
        assert batch_loss(p, trace, g.edges, 0.0) == pytest.approx(0.75, abs=1e-15)

    def test_perfect_fit_zero(self):
        p = NgcnParams(np.array([[1.0], [0.5]]), [np.zeros((1, 1))], np.array([[1.0], [0.5]]), 0.3)
        g = UndirectedWeightedGraph.from_triples(2, [(0, 1, 0.5)])
        trace = forward(p, build_normalized_adjacency(g, EdgeList.empty()))
        assert batch_loss(p, trace, g.edges, 0.0) == 0.0
        grads = batch_gradients(p, build_normalized_adjacency(g, EdgeList.empty()), g.edges, 0.0)
        for a in grads.arrays().values():
            assert np.all(a == 0)

    def test_penalty_only(self):
        p = NgcnParams(np.array([[1.0], [0.5]]), [np.full((1, 1), 2.0)], np.array([[1.0], [0.5]]), 0.3)
        g = UndirectedWeightedGraph.from_triples(3, [(0, 1, 0.5)])
        p.X = np.vstack([p.X, [[9.0]]])
        p.Y = np.vstack([p.Y, [[9.0]]])
        adj = build_normalized_adjacency(g, EdgeList.empty())
        lam = 0.1
        # node 2 is outside the batch and must not be penalized
        expected = lam * (0.3 ** 2 + (1 + 0.25) + (1 + 0.25) + 4.0)
        assert batch_loss(p, forward(p, adj), g.edges, lam) == pytest.approx(expected, rel=1e-14)

    def test_empty_batch(self, path3):
        p = init_params(3, 2, 2, 1, 0)
        adj = build_normalized_adjacency(path3, path3.edges)
        with pytest.raises(ValueError):
            batch_loss(p, forward(p, adj), EdgeList.empty(), 0.0)
        with pytest.raises(ValueError):
            batch_gradients(p, adj, EdgeList.empty(), 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_decomposition_against_loop_oracle(self, seed):
        g, adj, p = random_ngcn_instance(seed, n_edges=10)
        trace = forward(p, adj)
        h, y = trace.output, p.Y
        total = 0.0
        for i, j, a in g.edges.triples():
            gh = sum(h[i, k] * h[j, k] for k in range(h.shape[1]))
            sy = sum(y[i, k] * y[j, k] for k in range(y.shape[1]))
            total += (a - (p.omega * gh + (1 - p.omega) * sy)) ** 2 + (a - gh) ** 2 + (a - sy) ** 2
        assert batch_loss(p, trace, g.edges, 0.0) == pytest.approx(total, rel=1e-12)


class TestGradients:
    def test_omega_two_node_hand(self):
        # no propagation: h = x; dL/domega = sum 2 (a_hat - a)(<h,h> - <y,y>) + 2 lam omega
        X = np.array([[0.6, 0.2], [0.3, 0.9]])
        Y = np.array([[0.1, 0.5], [0.7, 0.4]])
        p = NgcnParams(X, [np.zeros((2, 2))], Y, 0.4)
        g = UndirectedWeightedGraph.from_triples(2, [(0, 1, 0.8)])
        adj = build_normalized_adjacency(g, EdgeList.empty())
        gh, sy = 0.6 * 0.3 + 0.2 * 0.9, 0.1 * 0.7 + 0.5 * 0.4
        a_hat = 0.4 * gh + 0.6 * sy
        lam = 0.05
        expected = 2 * (a_hat - 0.8) * (gh - sy) + 2 * lam * 0.4
        assert batch_gradients(p, adj, g.edges, lam).omega == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        g, adj, p = random_ngcn_instance(100 + seed)
        lam = 0.01
        batch = g.edges[np.arange(0, len(g.edges), 2)]
        ana = batch_gradients(p, adj, batch, lam).arrays()
        num = central_differences(_loss_of(adj, batch, lam), p.arrays())
        assert max_relative_error(ana, num) < 1e-4

    def test_loss_and_gradients_agree_with_batch_loss(self):
        g, adj, p = random_ngcn_instance(9)
        loss, _ = loss_and_gradients(p, adj, g.edges, 0.2)
        assert loss == pytest.approx(batch_loss(p, forward(p, adj), g.edges, 0.2), rel=1e-14)

    def test_descent_property(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            g, adj, p = random_ngcn_instance(int(rng.integers(1 << 30)))
            lam = float(rng.uniform(0, 0.1))
            loss0, grads = loss_and_gradients(p, adj, g.edges, lam)
            step = {k: v - 1e-4 * grads.arrays()[k] for k, v in p.arrays().items()}
            q = NgcnParams.from_arrays(step)
            assert batch_loss(q, forward(q, adj), g.edges, lam) < loss0
