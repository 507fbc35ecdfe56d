import numpy as np
import pytest

from tifctr import numkernel as nk
from tifctr.errors import ConfigurationError, DataError, InternalError, TrainingError

from conftest import central_diff, rel_error


class TestDense:
    def test_identity(self):
        np.testing.assert_array_equal(nk.dense_forward(np.eye(2), [0, 0], [3, 4]), [3, 4])

    def test_hand_multiply(self):
        out = nk.dense_forward([[1, 2], [3, 4]], [1, 1], [1, 1])
        np.testing.assert_array_equal(out, [4, 8])

    def test_zero_weights(self):
        np.testing.assert_array_equal(nk.dense_forward(np.zeros((1, 3)), [5], [7, -2, 9]), [5])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigurationError):
            nk.dense_forward(np.eye(2), [0, 0], [1, 2, 3])
        with pytest.raises(ConfigurationError):
            nk.dense_forward(np.eye(2), [0], [1, 2])

    def test_backward_by_hand(self):
        a, b = 0.3, -1.7
        tape = nk.Tape()
        nk.dense_forward([[a, b]], [0.0], [2.0, 3.0], tape)
        gW, gb, gx = nk.dense_backward(tape, np.array([1.0]))
        np.testing.assert_array_equal(gW, [[2, 3]])
        np.testing.assert_array_equal(gb, [1])
        np.testing.assert_array_equal(gx, [a, b])
        assert len(tape) == 0

    def test_zero_upstream(self):
        tape = nk.Tape()
        nk.dense_forward(np.ones((3, 2)), np.ones(3), np.ones((4, 2)), tape)
        grads = nk.dense_backward(tape, np.zeros((4, 3)))
        for g in grads:
            assert not g.any()

    def test_empty_tape(self):
        with pytest.raises(InternalError):
            nk.dense_backward(nk.Tape(), np.ones(1))

    def test_tape_order_enforced(self):
        tape = nk.Tape()
        nk.dense_forward(np.eye(2), np.zeros(2), np.ones(2), tape)
        nk.relu(np.ones(2), tape)
        with pytest.raises(InternalError):
            nk.dense_backward(tape, np.ones(2))

    @pytest.mark.parametrize("seed", range(10))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n_in, n_out, batch = rng.integers(1, 9, size=3)
        W = rng.normal(size=(n_out, n_in))
        b = rng.normal(size=n_out)
        x = rng.normal(size=(batch, n_in))
        up = rng.normal(size=(batch, n_out))
        f = lambda: float((nk.dense_forward(W, b, x) * up).sum())
        tape = nk.Tape()
        nk.dense_forward(W, b, x, tape)
        gW, gb, gx = nk.dense_backward(tape, up)
        assert rel_error(gW, central_diff(f, W)) < 1e-4
        assert rel_error(gb, central_diff(f, b)) < 1e-4
        assert rel_error(gx, central_diff(f, x)) < 1e-4


class TestActivations:
    def test_relu(self):
        np.testing.assert_array_equal(nk.relu([-1, 0, 2]), [0, 0, 2])
        assert not nk.relu([-3.0, -0.1]).any()

    def test_relu_gradient_at_zero(self):
        tape = nk.Tape()
        nk.relu(np.array([-1.0, 0.0, 2.0]), tape)
        np.testing.assert_array_equal(nk.relu_backward(tape, np.ones(3)), [0, 0, 1])

    def test_sigmoid(self):
        assert nk.sigmoid(0.0) == 0.5
        big = nk.sigmoid(1e3)
        assert np.isfinite(big) and 1 - 1e-12 < big <= 1.0
        small = nk.sigmoid(-1e3)
        assert np.isfinite(small) and 0.0 <= small < 1e-12
        z = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(nk.sigmoid(-z), 1 - nk.sigmoid(z), atol=1e-15)

    def test_sigmoid_no_warnings(self):
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            nk.sigmoid(np.array([-1e4, -800.0, 0.0, 800.0, 1e4]))


class TestEmbedding:
    def test_oov_row(self):
        table = np.array([[0.0, 0.0], [1.0, 2.0]])
        np.testing.assert_array_equal(nk.embedding_forward(table, [0]), [0, 0])

    def test_shape_and_order(self):
        table = np.arange(12, dtype=float).reshape(6, 2)
        out = nk.embedding_forward(table, [4, 1])
        np.testing.assert_array_equal(out, [8, 9, 2, 3])
        assert nk.embedding_forward(table, [[4, 1], [0, 5], [2, 2]]).shape == (3, 4)

    def test_out_of_range(self):
        with pytest.raises(DataError):
            nk.embedding_forward(np.zeros((3, 2)), [1, 3])

    def test_scatter_only_selected_rows(self):
        table = np.random.default_rng(0).normal(size=(7, 3))
        tape = nk.Tape()
        nk.embedding_forward(table, [[2, 5]], tape)
        grad = nk.embedding_backward(tape, np.ones((1, 6)))
        untouched = [r for r in range(7) if r not in (2, 5)]
        assert np.all(grad[untouched] == 0.0)
        np.testing.assert_array_equal(grad[[2, 5]], 1.0)

    def test_repeated_index_accumulates(self):
        tape = nk.Tape()
        nk.embedding_forward(np.zeros((3, 1)), [[1, 1], [1, 2]], tape)
        grad = nk.embedding_backward(tape, np.array([[1.0, 2.0], [4.0, 8.0]]))
        np.testing.assert_array_equal(grad.ravel(), [0, 7, 8])

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        table = rng.normal(size=(6, 3))
        idx = rng.integers(0, 6, size=(4, 3))
        up = rng.normal(size=(4, 9))
        f = lambda: float((nk.embedding_forward(table, idx) * up).sum())
        tape = nk.Tape()
        nk.embedding_forward(table, idx, tape)
        assert rel_error(nk.embedding_backward(tape, up), central_diff(f, table)) < 1e-4


def pairwise_fm(e):
    e = np.asarray(e, dtype=float)
    total = 0.0
    for i in range(len(e)):
        for j in range(i + 1, len(e)):
            total += float(e[i] @ e[j])
    return total


class TestFM:
    def test_orthogonal(self):
        assert nk.fm_interaction([[1, 0], [0, 1]]) == 0.0

    def test_three_equal_fields(self):
        assert nk.fm_interaction([[1, 0], [1, 0], [1, 0]]) == 3.0

    def test_needs_two_fields(self):
        with pytest.raises(ConfigurationError):
            nk.fm_interaction([[1.0, 2.0]])

    @pytest.mark.parametrize("seed", range(20))
    def test_identity_matches_pairwise_sum(self, seed):
        rng = np.random.default_rng(seed)
        e = rng.normal(size=(rng.integers(2, 9), rng.integers(1, 9)))
        expected = pairwise_fm(e)
        assert abs(nk.fm_interaction(e) - expected) <= 1e-12 * max(1.0, abs(expected))

    @pytest.mark.parametrize("seed", range(5))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        e = rng.normal(size=(3, 4, 5))
        up = rng.normal(size=3)
        f = lambda: float((nk.fm_interaction(e) * up).sum())
        tape = nk.Tape()
        nk.fm_interaction(e, tape)
        assert rel_error(nk.fm_backward(tape, up), central_diff(f, e)) < 1e-4


class TestCross:
    def test_zero_weights_pass_through(self):
        xl = np.array([0.3, -2.0, 5.0])
        out = nk.cross_layer([1.0, 2.0, 3.0], xl, np.zeros(3), np.zeros(3))
        np.testing.assert_array_equal(out, xl)

    def test_hand_evaluation(self):
        out = nk.cross_layer([1, 1], [1, 1], [1, 0], [0, 0])
        np.testing.assert_array_equal(out, [2, 2])

    def test_mismatch(self):
        with pytest.raises(ConfigurationError):
            nk.cross_layer(np.ones(3), np.ones(3), np.ones(2), np.ones(3))

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("batched", [False, True])
    def test_finite_differences(self, seed, batched):
        rng = np.random.default_rng(seed)
        d = rng.integers(1, 9)
        shape = (3, d) if batched else (d,)
        x0, xl, up = (rng.normal(size=shape) for _ in range(3))
        w, b = rng.normal(size=d), rng.normal(size=d)
        f = lambda: float((nk.cross_layer(x0, xl, w, b) * up).sum())
        tape = nk.Tape()
        nk.cross_layer(x0, xl, w, b, tape)
        gx0, gxl, gw, gb = nk.cross_backward(tape, up)
        for analytic, arr in ((gx0, x0), (gxl, xl), (gw, w), (gb, b)):
            assert rel_error(analytic, central_diff(f, arr)) < 1e-4


class TestAdam:
    def test_first_step(self):
        params = {"p": np.array([1.0])}
        state = nk.AdamState(lr=0.1)
        nk.adam_step(params, {"p": np.array([2.0])}, state)
        assert params["p"][0] == pytest.approx(0.9, abs=1e-8)
        assert state.step_count == 1

    def test_zero_gradient(self):
        params = {"p": np.array([1.5, -2.0])}
        nk.adam_step(params, {"p": np.zeros(2)}, nk.AdamState())
        np.testing.assert_array_equal(params["p"], [1.5, -2.0])

    def test_deterministic(self):
        outs = []
        for _ in range(2):
            params = {"a": np.array([0.1, 0.2]), "b": np.array([[1.0]])}
            state = nk.AdamState(lr=0.01)
            for g in ([0.3, -0.1], [0.5, 0.5], [-1.0, 2.0]):
                nk.adam_step(params, {"a": np.array(g), "b": np.array([[g[0]]])}, state)
            outs.append((params["a"].tobytes(), params["b"].tobytes(), state.step_count))
        assert outs[0] == outs[1]

    def test_second_moment_nonnegative(self):
        params = {"p": np.zeros(4)}
        state = nk.AdamState()
        rng = np.random.default_rng(0)
        for k in range(20):
            nk.adam_step(params, {"p": rng.normal(size=4)}, state)
            assert state.step_count == k + 1
            assert np.all(state.second_moment["p"] >= 0)

    def test_non_finite_gradient(self):
        with pytest.raises(TrainingError, match="batch 7"):
            nk.adam_step({"p": np.zeros(2)}, {"p": np.array([1.0, np.nan])}, nk.AdamState(), batch=7)

    def test_shape_mismatch(self):
        with pytest.raises(ConfigurationError):
            nk.adam_step({"p": np.zeros(2)}, {"p": np.zeros(3)}, nk.AdamState())


def test_bounded_inputs_give_finite_outputs():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1e3, 1e3, size=(5, 8))
    W = rng.uniform(-1e3, 1e3, size=(4, 8))
    assert np.all(np.isfinite(nk.relu(nk.dense_forward(W, np.zeros(4), x))))
    assert np.all(np.isfinite(nk.cross_layer(x, x, W[0], W[1])))
    assert np.all(np.isfinite(nk.fm_interaction(x.reshape(5, 2, 4))))
    assert np.all(np.isfinite(nk.sigmoid(x)))
