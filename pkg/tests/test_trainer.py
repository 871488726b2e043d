import math

import numpy as np
import pytest

from matan.attention import ModelParams, ParamGrads, init_params
from matan.corpus import Graph
from matan.synthetic import planted_network
from matan.trainer import (
    AdamState,
    TrainConfig,
    adam_step,
    sample_negatives,
    sample_positive,
    sample_positives,
    train,
)


def within_3_sigma(count, n, p):
    return abs(count - n * p) <= 3 * math.sqrt(n * p * (1 - p))


class TestSampling:
    def test_single_edge(self, rng):
        g = Graph(3, [(0, 2)])
        for _ in range(20):
            assert set(sample_positive(g, rng)) == {0, 2}

    def test_orientation_randomized(self, rng):
        pos = sample_positives(Graph(2, [(0, 1)]), 4000, rng)
        assert within_3_sigma(int(np.sum(pos[:, 0] == 0)), 4000, 0.5)

    def test_uniform_over_edges(self, rng):
        g = Graph(5, [(0, 1), (1, 2), (3, 4)])
        pos = np.sort(sample_positives(g, 30000, rng), axis=1)
        for edge in g.edges.tolist():
            count = int(np.sum((pos[:, 0] == edge[0]) & (pos[:, 1] == edge[1])))
            assert within_3_sigma(count, 30000, 1 / 3)

    def test_edgeless(self, rng):
        with pytest.raises(ValueError):
            sample_positive(Graph(3, np.zeros((0, 2))), rng)

    def test_m_weighted_follows_rows(self, rng):
        # star centre 0 with leaves 1..3: from a leaf the only move is to 0
        g = Graph(4, [(0, 1), (0, 2), (0, 3)])
        pos = sample_positives(g, 20000, rng, mode="m-weighted")
        assert g.adjacency[pos[:, 0], pos[:, 1]].all()
        assert within_3_sigma(int(np.sum(pos[:, 0] == 0)), 20000, 0.25)

    def test_negatives(self, rng):
        assert sample_negatives(5, 1, rng).tolist() == [0] * 5
        assert len(sample_negatives(3, 10, rng)) == 3
        draws = np.concatenate([sample_negatives(1, 4, rng) for _ in range(40000)])
        for node in range(4):
            assert within_3_sigma(int(np.sum(draws == node)), 40000, 0.25)


class TestAdam:
    def single(self, value):
        return ModelParams(np.array([[value]]), np.array([[value]]), np.array([[value]]))

    def test_zero_gradient_keeps_params(self):
        params = self.single(0.7)
        state = AdamState.zeros_like(params)
        zero = ParamGrads(*(np.zeros((1, 1)) for _ in range(3)))
        adam_step(params, zero, state, lr=0.1)
        assert params.P_Q[0, 0] == 0.7
        assert state.t == 1

    def test_scalar_first_step(self):
        # fresh state, g = 1: m_hat = v_hat = 1, so the step is lr / (1 + eps)
        params = self.single(0.0)
        state = AdamState.zeros_like(params)
        adam_step(params, ParamGrads(*(np.ones((1, 1)) for _ in range(3))), state, lr=0.001)
        assert params.P_Q[0, 0] == pytest.approx(-0.001 / (1 + 1e-8), rel=1e-12)
        assert abs(params.P_V[0, 0]) == pytest.approx(0.001, rel=1e-7)

    def test_deterministic(self):
        g = ParamGrads(*(np.full((2, 2), 0.3) for _ in range(3)))
        results = []
        for _ in range(2):
            params = init_params(2, 1)
            state = AdamState.zeros_like(params)
            for _ in range(3):
                adam_step(params, g, state, lr=0.01)
            results.append(params.P_Q.copy())
        np.testing.assert_array_equal(*results)

    def test_non_finite_gradient(self):
        params = self.single(0.0)
        bad = ParamGrads(np.array([[np.inf]]), np.zeros((1, 1)), np.zeros((1, 1)))
        with pytest.raises(FloatingPointError):
            adam_step(params, bad, AdamState.zeros_like(params), lr=0.1)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"k": 0}, {"n_pairs": -1}, {"beta1": 1.0},
                                        {"sampling": "degree"}, {"batch_size": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


@pytest.fixture(scope="module")
def net():
    return planted_network(n_nodes=60, dim=6, seed=3)


class TestTrain:
    def test_no_pairs_keeps_init(self, net):
        params, trace = train(net.corpus, net.graph, net.embeddings, TrainConfig(n_pairs=0, seed=2))
        init = init_params(6, 2)
        for a, b in zip(params.arrays(), init.arrays()):
            np.testing.assert_array_equal(a, b)
        assert trace.losses == [] and trace.samples_seen == 0

    def test_zero_lr_keeps_init(self, net):
        params, _ = train(net.corpus, net.graph, net.embeddings, TrainConfig(n_pairs=200, lr=0.0, seed=2))
        for a, b in zip(params.arrays(), init_params(6, 2).arrays()):
            np.testing.assert_array_equal(a, b)

    def test_trace_length(self, net):
        _, trace = train(net.corpus, net.graph, net.embeddings, TrainConfig(n_pairs=100, batch_size=32))
        assert len(trace.losses) == math.ceil(100 / 32)
        assert trace.samples_seen == 100
        assert trace.adam.t == len(trace.losses)
        assert all(np.all(v >= 0) for v in trace.adam.v)

    def test_deterministic(self, net):
        cfg = TrainConfig(n_pairs=300, k=2, seed=5, lr=0.01)
        a, ta = train(net.corpus, net.graph, net.embeddings, cfg)
        b, tb = train(net.corpus, net.graph, net.embeddings, cfg)
        for x, y in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)
        assert ta.losses == tb.losses

    def test_negatives_drawn_from_graph_nodes(self, net, monkeypatch):
        import matan.trainer as trainer_mod

        seen = []
        real = trainer_mod._batch_step

        def spy(corpus, table, params, us, vs, zs, cfg):
            seen.append(zs.copy())
            return real(corpus, table, params, us, vs, zs, cfg)

        monkeypatch.setattr(trainer_mod, "_batch_step", spy)
        sub = net.graph.induced(np.arange(0, 60, 2))
        train(net.corpus, sub, net.embeddings, TrainConfig(n_pairs=256, k=3))
        assert np.all(np.concatenate(seen) % 2 == 0)

    def test_loss_decreases_on_planted_network(self):
        big = planted_network(seed=0)
        _, trace = train(big.corpus, big.graph, big.embeddings, TrainConfig(n_pairs=20000, lr=1e-2))
        tenth = len(trace.losses) // 10
        assert np.mean(trace.losses[-tenth:]) < np.mean(trace.losses[:tenth])

    def test_embedding_mismatch(self, net):
        from matan.glove import EmbeddingTable

        with pytest.raises(ValueError):
            train(net.corpus, net.graph, EmbeddingTable(np.zeros((2, 6))), TrainConfig(n_pairs=1))
