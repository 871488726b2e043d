import math

import numpy as np
import pytest

from conftest import central_differences, max_relative_error, sdpa_oracle
from matan.attention import (
    DocStack,
    ModelParams,
    init_params,
    load_model,
    loss_and_grads,
    mutual_embed,
    pair_score,
    save_model,
    sdpa,
)


def identity(D):
    return ModelParams(np.eye(D), np.eye(D), np.eye(D))


def random_instance(rng, D=8, lo=3, hi=6):
    return (rng.normal(size=(rng.integers(lo, hi + 1), D)),
            rng.normal(size=(rng.integers(lo, hi + 1), D)))


class TestInit:
    def test_deterministic(self):
        a, b = init_params(6, seed=4), init_params(6, seed=4)
        for x, y in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)

    def test_seeds_differ(self):
        assert not np.array_equal(init_params(6, 1).P_Q, init_params(6, 2).P_Q)

    def test_shape_and_bound(self):
        p = init_params(256, 0)
        bound = math.sqrt(6 / 512)
        for P in p.arrays():
            assert P.shape == (256, 256)
            assert np.abs(P).max() <= bound

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            init_params(0)


class TestSdpa:
    def test_single_key(self):
        out = sdpa([[1.0, 0.0]], [[0.0, 1.0]], identity(2))
        np.testing.assert_array_equal(out, [[0.0, 1.0]])

    def test_identical_value_rows(self, rng):
        params = init_params(4, 1)
        w = rng.normal(size=4)
        out = sdpa(rng.normal(size=(3, 4)), np.stack([w, w]), params)
        np.testing.assert_allclose(out, np.tile(w @ params.P_V, (3, 1)), atol=1e-12)

    def test_matches_straight_line_oracle(self, rng):
        params = init_params(4, 7)
        W_u, W_v = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
        np.testing.assert_allclose(sdpa(W_u, W_v, params), sdpa_oracle(W_u, W_v, *params.arrays()),
                                   rtol=1e-12, atol=1e-12)

    def test_large_logits_stay_finite(self):
        params = identity(2)
        out = sdpa([[1e4, 0.0]], [[1e4, 0.0], [-1e4, 0.0]], params)
        assert np.all(np.isfinite(out))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            sdpa([[np.nan, 0.0]], [[1.0, 0.0]], identity(2))

    def test_rejects_empty_or_wrong_dim(self):
        with pytest.raises(ValueError):
            sdpa(np.zeros((0, 2)), [[1.0, 0.0]], identity(2))
        with pytest.raises(ValueError):
            sdpa([[1.0, 0.0, 0.0]], [[1.0, 0.0]], identity(2))


class TestMutualEmbed:
    def test_single_words(self):
        e = mutual_embed([[1.0, 0.0]], [[0.0, 1.0]], identity(2))
        np.testing.assert_array_equal(e, [0.0, 1.0])

    def test_duplicated_query_rows(self, rng):
        params = init_params(5, 3)
        w, W_v = rng.normal(size=(1, 5)), rng.normal(size=(4, 5))
        np.testing.assert_allclose(mutual_embed(np.vstack([w, w]), W_v, params),
                                   mutual_embed(w, W_v, params), atol=1e-12)

    def test_mean_of_oracle_rows(self, rng):
        params = init_params(4, 2)
        W_u, W_v = rng.normal(size=(3, 4)), rng.normal(size=(5, 4))
        oracle = sdpa_oracle(W_u, W_v, *params.arrays())
        np.testing.assert_allclose(mutual_embed(W_u, W_v, params), oracle.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(mutual_embed(W_u, W_v, params, "sum"), oracle.sum(axis=0), atol=1e-12)

    def test_unknown_pooling(self):
        with pytest.raises(ValueError):
            mutual_embed([[1.0]], [[1.0]], identity(1), "max")


class TestPairScore:
    def test_orthogonal_words(self):
        assert pair_score([[1.0, 0.0]], [[0.0, 1.0]], identity(2)) == 0.0

    def test_hand_value(self):
        assert pair_score([[1.0, 1.0]], [[1.0, 1.0]], identity(2)) == pytest.approx(2.0)

    def test_symmetric(self, rng):
        params = init_params(8, 0)
        W_u, W_v = random_instance(rng)
        assert abs(pair_score(W_u, W_v, params) - pair_score(W_v, W_u, params)) <= 1e-9

    @pytest.mark.parametrize("pooling", ["mean", "sum"])
    def test_kernel_matches_direct_formula(self, rng, pooling):
        params = init_params(8, 5)
        docs = [rng.normal(size=(rng.integers(1, 7), 8)) for _ in range(5)]
        stack = DocStack(docs, params)
        for i in range(5):
            for j in range(5):
                assert stack.score(i, j, pooling) == pytest.approx(
                    pair_score(docs[i], docs[j], params, pooling), rel=1e-10, abs=1e-12)

    def test_zero_document_scores_zero(self, rng):
        params = init_params(6, 1)
        zero = np.zeros((1, 6))
        W = rng.normal(size=(4, 6))
        # attending over the empty document yields its single zero value row
        assert not mutual_embed(W, zero, params).any()
        assert pair_score(zero, W, params) == 0.0
        assert DocStack([zero, W], params).score(0, 1) == 0.0


class TestLossAndGrads:
    def zero_score_setup(self, k):
        # P_V = 0 makes every mutual embedding, hence every score, zero
        params = ModelParams(np.eye(3), np.eye(3), np.zeros((3, 3)))
        W = np.ones((2, 3))
        return params, (W, W), [(W, W)] * k

    def test_zero_scores_k1(self):
        params, pos, negs = self.zero_score_setup(1)
        loss, _ = loss_and_grads(pos, negs, params)
        assert abs(loss - 2 * math.log(2)) <= 1e-12

    def test_zero_scores_k2(self):
        params, pos, negs = self.zero_score_setup(2)
        loss, _ = loss_and_grads(pos, negs, params)
        assert abs(loss - 3 * math.log(2)) <= 1e-12

    def test_needs_negatives(self):
        params, pos, _ = self.zero_score_setup(1)
        with pytest.raises(ValueError):
            loss_and_grads(pos, [], params)

    def test_extreme_scores_finite(self):
        params = ModelParams(np.eye(2), np.eye(2), 100 * np.eye(2))
        W = np.array([[5.0, 5.0]])
        loss, grads = loss_and_grads((W, -W), [(W, W)], params)
        assert math.isfinite(loss)
        assert all(np.all(np.isfinite(g)) for g in grads.arrays())

    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("pooling", ["mean", "sum"])
    def test_finite_differences(self, seed, pooling):
        rng = np.random.default_rng(seed)
        params = init_params(8, seed)
        u, v = random_instance(rng)
        negs = [(u, rng.normal(size=(rng.integers(3, 7), 8))) for _ in range(2)]
        _, grads = loss_and_grads((u, v), negs, params, pooling)
        numeric = central_differences(lambda p: loss_and_grads((u, v), negs, p, pooling)[0], params)
        assert max_relative_error(grads.arrays(), numeric) < 1e-3


class TestModelFile:
    def test_round_trip(self, tmp_path):
        params = init_params(5, 11)
        params.P_K[0, 0] = 1e-300
        save_model(params, tmp_path / "m.txt")
        back = load_model(tmp_path / "m.txt")
        for a, b in zip(params.arrays(), back.arrays()):
            np.testing.assert_array_equal(a, b)

    def test_format(self, tmp_path):
        save_model(init_params(2, 0), tmp_path / "m.txt")
        lines = (tmp_path / "m.txt").read_text().splitlines()
        assert lines[:3] == ["MATAN-MODEL v1", "dim 2", "PQ"]
        assert lines[5] == "PK" and lines[8] == "PV" and len(lines) == 11

    def test_bad_header(self, tmp_path):
        (tmp_path / "m.txt").write_text("nope\n")
        with pytest.raises(ValueError):
            load_model(tmp_path / "m.txt")
