import numpy as np
import pytest

from oracles import adam_constant_gradient_steps, dense_sage_forward, gcn_dense
from leafgraph.errors import DataError, ShapeError
from leafgraph.graph import SimilarityGraph, full_neighbor_sample
from leafgraph.layers import (
    AdamState,
    LayerParams,
    adam_step,
    dropout,
    dropout_backward,
    gcn_layer_backward,
    gcn_layer_forward,
    init_layer,
    linear_backward,
    linear_forward,
    make_sage_layer,
    relu,
    relu_backward,
    softmax_cross_entropy,
)
from leafgraph.linalg import finite_diff_check
from leafgraph.rng import Rng


class TestLinear:
    def test_identity_weights(self):
        p = LayerParams("id", np.eye(3), np.zeros(3))
        x = Rng(1).normal(6).reshape(2, 3)
        assert np.allclose(linear_forward(p, x), x)

    def test_zero_upstream_zero_grads(self):
        p = init_layer("l", 4, 3, Rng(2))
        x = Rng(3).normal(8).reshape(2, 4)
        linear_backward(p, x, np.zeros((2, 3)))
        assert (p.grad_weight == 0).all() and (p.grad_bias == 0).all()

    def test_finite_difference(self):
        for seed in range(3):
            p = init_layer("l", 4, 3, Rng(seed))
            x = Rng(seed + 10).normal(8).reshape(2, 4)
            dy = np.ones((2, 3))

            err = finite_diff_check(
                lambda v: float(linear_forward(p, v).sum()), x.copy(),
                dy @ p.weight, h=1e-5,
            )
            assert err < 1e-7

            def loss_of_w(w):
                q = LayerParams("t", w, p.bias)
                return float(linear_forward(q, x).sum())

            p.zero_grads()
            linear_backward(p, x, dy)
            err_w = finite_diff_check(loss_of_w, p.weight.copy(), p.grad_weight, h=1e-5)
            assert err_w < 1e-7

    def test_shape_errors(self):
        p = init_layer("l", 4, 3, Rng(0))
        with pytest.raises(ShapeError):
            linear_forward(p, np.zeros((2, 5)))


class TestActivations:
    def test_relu_values(self):
        assert relu(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]

    def test_relu_subgradient_zero_at_kink(self):
        x = np.array([-1.0, 0.0, 2.0])
        dy = np.ones(3)
        assert relu_backward(x, dy).tolist() == [0.0, 0.0, 1.0]

    def test_dropout_eval_identity(self):
        x = Rng(4).normal(10)[None, :]
        y, mask = dropout(x, 0.5, train=False)
        assert y is x and mask is None

    def test_dropout_unbiased(self):
        x = np.ones((1, 100_000))
        y, _ = dropout(x, 0.5, train=True, rng=Rng(5))
        assert 0.99 <= y.mean() <= 1.01

    def test_dropout_backward_uses_mask(self):
        x = np.ones((1, 1000))
        y, mask = dropout(x, 0.5, train=True, rng=Rng(6))
        dy = np.ones_like(y)
        assert (dropout_backward(dy, mask) == mask).all()


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = np.zeros((2, 4))
        onehot = np.eye(4)[:2]
        loss, probs, _ = softmax_cross_entropy(logits, onehot)
        assert np.allclose(probs, 0.25)
        assert loss == pytest.approx(np.log(4.0), abs=1e-12)

    def test_saturated_loss_tiny(self):
        logits = np.array([[10.0, -10.0]])
        onehot = np.array([[1.0, 0.0]])
        loss, _, _ = softmax_cross_entropy(logits, onehot)
        assert loss < 1e-8

    def test_rows_sum_to_one(self):
        logits = Rng(7).normal(12).reshape(3, 4) * 10
        _, probs, _ = softmax_cross_entropy(logits, np.eye(4)[:3])
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9
        assert probs.min() > 0.0 and probs.max() < 1.0

    def test_gradient_matches_fd(self):
        logits = Rng(8).normal(8).reshape(2, 4)
        onehot = np.eye(4)[[1, 3]]
        _, _, dlogits = softmax_cross_entropy(logits, onehot)
        err = finite_diff_check(
            lambda v: softmax_cross_entropy(v, onehot)[0], logits.copy(), dlogits,
            h=1e-5,
        )
        assert err < 1e-7

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            softmax_cross_entropy(np.zeros((1, 1)), np.ones((1, 1)))


class TestGcnLayer:
    def test_identity_adjacency_reduces_to_dense(self):
        p = init_layer("g", 3, 2, Rng(9))
        h = Rng(10).normal(12).reshape(4, 3)
        out, _ = gcn_layer_forward(np.eye(4), h, p)
        assert np.allclose(out, relu(linear_forward(p, h)))

    def test_two_node_hand_weights(self):
        a_hat = np.array([[0.5, 0.5], [0.5, 0.5]])
        h = np.array([[1.0, 2.0], [3.0, 4.0]])
        w = np.array([[1.0, -1.0]])
        p = LayerParams("g", w, np.array([0.1]))
        out, _ = gcn_layer_forward(a_hat, h, p)
        assert np.allclose(out, gcn_dense(a_hat, h, w, np.array([0.1])), atol=1e-9)

    def test_finite_difference_h_and_w(self):
        for seed in range(3):
            p = init_layer("g", 3, 2, Rng(seed))
            a_hat = np.array(
                [[0.5, 0.5, 0.0], [0.5, 0.25, 0.25], [0.0, 0.25, 0.75]]
            )
            h = Rng(seed + 20).normal(9).reshape(3, 3)

            out, cache = gcn_layer_forward(a_hat, h, p)
            p.zero_grads()
            dh = gcn_layer_backward(p, cache, np.ones_like(out))
            err_h = finite_diff_check(
                lambda v: float(gcn_layer_forward(a_hat, v, p)[0].sum()),
                h.copy(), dh, h=1e-5,
            )
            assert err_h < 1e-6

            def loss_of_w(wv):
                q = LayerParams("t", wv, p.bias)
                return float(gcn_layer_forward(a_hat, h, q)[0].sum())

            err_w = finite_diff_check(loss_of_w, p.weight.copy(), p.grad_weight, h=1e-5)
            assert err_w < 1e-6

    def test_permutation_equivariance(self):
        p = init_layer("g", 3, 2, Rng(30))
        a_hat = np.array([[0.5, 0.5, 0.0], [0.5, 0.25, 0.25], [0.0, 0.25, 0.75]])
        h = Rng(31).normal(9).reshape(3, 3)
        out, _ = gcn_layer_forward(a_hat, h, p)
        perm = np.array([2, 0, 1])
        pm = np.eye(3)[perm]
        out_p, _ = gcn_layer_forward(pm @ a_hat @ pm.T, h[perm], p)
        assert np.allclose(out_p, out[perm], atol=1e-9)


def _path_graph_sample(n_nodes, k_layers):
    sets = [set() for _ in range(n_nodes)]
    for v in range(n_nodes - 1):
        sets[v].add(v + 1)
        sets[v + 1].add(v)
    g = SimilarityGraph.from_neighbor_sets(n_nodes, sets)
    return sets, full_neighbor_sample(g, np.arange(n_nodes), k_layers)


def _run_stack(layers, sample, feats):
    h = feats[sample.base_nodes]
    k = len(layers)
    for ell in range(k):
        li = k - 1 - ell
        nodes = sample.levels[li]
        parent = sample.levels[li + 1]
        self_pos = np.searchsorted(parent, nodes)
        offsets, ids = sample.hops[li]
        nbr_pos = np.searchsorted(parent, ids)
        h, _ = layers[ell].forward(h, self_pos, offsets, nbr_pos)
    return h


class TestSageLayer:
    def test_isolated_node_mean_convention(self):
        layer = make_sage_layer("s", 3, 2, Rng(11))
        h = Rng(12).normal(3).reshape(1, 3)
        out, _ = layer.forward(h, np.array([0]), np.array([0, 0]), np.zeros(0, np.int64))
        z = np.concatenate([h[0], np.zeros(3)])
        expected = relu(layer.params.weight @ z + layer.params.bias)
        assert np.allclose(out[0], expected, atol=1e-12)

    @pytest.mark.parametrize("agg", ["mean", "maxpool"])
    def test_path_graph_matches_dense_oracle(self, agg):
        sets, sample = _path_graph_sample(3, 1)
        feats = Rng(13).normal(3 * 4).reshape(3, 4)
        layer = make_sage_layer("s", 4, 3, Rng(14), aggregator=agg)
        ours = _run_stack([layer], sample, feats)
        pool_w = layer.pool.weight if layer.pool else None
        pool_b = layer.pool.bias if layer.pool else None
        oracle = dense_sage_forward(
            sets, feats,
            [(layer.params.weight, layer.params.bias, agg, pool_w, pool_b)],
        )
        assert np.abs(ours - oracle).max() < 1e-9

    @pytest.mark.parametrize("agg", ["mean", "maxpool"])
    def test_two_layer_random_graphs_match_oracle(self, agg):
        rng = Rng(15)
        for trial in range(5):
            n = 4 + rng.below(6)
            sets = [set() for _ in range(n)]
            for v in range(n):
                for u in range(v + 1, n):
                    if rng.uniform() < 0.4:
                        sets[v].add(u)
                        sets[u].add(v)
            g = SimilarityGraph.from_neighbor_sets(n, sets)
            sample = full_neighbor_sample(g, np.arange(n), 2)
            feats = rng.normal(n * 3).reshape(n, 3)
            l1 = make_sage_layer("s1", 3, 4, rng.stream(f"a{trial}"), aggregator=agg)
            l2 = make_sage_layer("s2", 4, 2, rng.stream(f"b{trial}"), aggregator=agg)
            ours = _run_stack([l1, l2], sample, feats)
            oracle = dense_sage_forward(
                sets, feats,
                [
                    (l1.params.weight, l1.params.bias, agg,
                     l1.pool.weight if l1.pool else None,
                     l1.pool.bias if l1.pool else None),
                    (l2.params.weight, l2.params.bias, agg,
                     l2.pool.weight if l2.pool else None,
                     l2.pool.bias if l2.pool else None),
                ],
            )
            assert np.abs(ours - oracle).max() < 1e-9

    def test_permutation_equivariance(self):
        sets = [{1, 2}, {0}, {0, 3}, {2}]
        feats = Rng(16).normal(4 * 3).reshape(4, 3)
        layer = make_sage_layer("s", 3, 2, Rng(17))
        g = SimilarityGraph.from_neighbor_sets(4, sets)
        out = _run_stack([layer], full_neighbor_sample(g, np.arange(4), 1), feats)
        perm = np.array([3, 1, 0, 2])  # node v -> position perm^-1
        inv = np.argsort(perm)
        perm_sets = [set(inv[list(sets[v])].tolist()) for v in perm]
        g2 = SimilarityGraph.from_neighbor_sets(4, perm_sets)
        out2 = _run_stack([layer], full_neighbor_sample(g2, np.arange(4), 1), feats[perm])
        assert np.abs(out2 - out[perm]).max() < 1e-9

    @pytest.mark.parametrize("agg", ["mean", "maxpool"])
    @pytest.mark.parametrize("l2norm", [False, True])
    def test_backward_matches_fd(self, agg, l2norm):
        sets, sample = _path_graph_sample(4, 1)
        rng = Rng(18)
        feats = rng.normal(4 * 3).reshape(4, 3)
        layer = make_sage_layer("s", 3, 2, Rng(19), aggregator=agg,
                                l2_normalize=l2norm)

        nodes = sample.levels[0]
        parent = sample.levels[1]
        self_pos = np.searchsorted(parent, nodes)
        offsets, ids = sample.hops[0]
        nbr_pos = np.searchsorted(parent, ids)

        def run(v):
            out, _ = layer.forward(v, self_pos, offsets, nbr_pos)
            return float((out * weights).sum())

        weights = rng.normal(4 * 2).reshape(4, 2)  # break symmetry
        out, cache = layer.forward(feats, self_pos, offsets, nbr_pos)
        for p in layer.layer_params():
            p.zero_grads()
        dfeats = layer.backward(cache, weights)
        err = finite_diff_check(run, feats.copy(), dfeats, h=1e-5)
        assert err < 1e-6

        def loss_of_w(wv):
            saved = layer.params.weight
            layer.params.weight = wv
            try:
                out2, _ = layer.forward(feats, self_pos, offsets, nbr_pos)
                return float((out2 * weights).sum())
            finally:
                layer.params.weight = saved

        err_w = finite_diff_check(
            loss_of_w, layer.params.weight.copy(), layer.params.grad_weight, h=1e-5
        )
        assert err_w < 1e-6


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        p = init_layer("l", 3, 2, Rng(20))
        before = p.weight.copy()
        state = AdamState()
        adam_step([p], state)
        assert state.t == 1
        assert (p.weight == before).all()

    def test_constant_gradient_step_size(self):
        p = LayerParams("x", np.zeros((1, 1)), None)
        state = AdamState(lr=0.001)
        history = [p.weight[0, 0]]
        for _ in range(100):
            p.zero_grads()
            p.grad_weight[:] = 3.7
            adam_step([p], state)
            history.append(p.weight[0, 0])
        deltas = -np.diff(history)
        oracle = adam_constant_gradient_steps(3.7, lr=0.001, steps=100)
        assert np.abs(deltas - oracle).max() < 1e-12
        assert 0.9 * 0.001 <= deltas[-1] <= 0.001

    def test_scale_invariance(self):
        p1 = LayerParams("a", np.zeros((1, 1)), None)
        p2 = LayerParams("b", np.zeros((1, 1)), None)
        state = AdamState(lr=0.001)
        for _ in range(500):
            p1.zero_grads()
            p2.zero_grads()
            p1.grad_weight[:] = 1.0
            p2.grad_weight[:] = 2.0
            adam_step([p1, p2], state)
        assert abs(p1.weight[0, 0] / p2.weight[0, 0] - 1.0) < 0.01
