import numpy as np
import pytest

from numgrad import check_grads, max_rel_err, numeric_grad
from sumsearch import autodiff as ad
from sumsearch.autodiff import (
    DiffArray,
    OptimState,
    adagrad_step,
    backward,
    load_arrays,
    save_arrays,
    zero_grads,
)


class TestDiffArray:
    def test_promotes_vectors_to_rows(self):
        assert DiffArray([1.0, 2.0]).shape == (1, 2)
        assert DiffArray(3.0).shape == (1, 1)

    def test_rejects_rank3(self):
        with pytest.raises(ValueError):
            DiffArray(np.zeros((2, 2, 2)))

    def test_rejects_nan(self):
        with pytest.raises(FloatingPointError):
            DiffArray([np.nan, 1.0])

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_rejects_inf_from_op(self):
        big = DiffArray(np.full((1, 4), 1e30))
        with pytest.raises(FloatingPointError):
            ad.mul(big, big)

    def test_default_dtype_switch(self):
        assert DiffArray([1.0]).values.dtype == np.float32
        ad.set_default_dtype(np.float64)
        assert DiffArray([1.0]).values.dtype == np.float64


class TestMatmul:
    def test_identity(self):
        m = DiffArray([[1.0, 2.0], [3.0, 4.0]])
        out = ad.matmul(DiffArray(np.eye(2)), m)
        np.testing.assert_allclose(out.values, m.values)

    def test_hand_product(self):
        out = ad.matmul(DiffArray([[1.0, 2.0]]), DiffArray([[3.0], [4.0]]))
        assert out.values[0, 0] == 11.0

    def test_shape_mismatch_message(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 3\)"):
            ad.matmul(DiffArray(np.zeros((2, 3))), DiffArray(np.zeros((2, 3))))

    def test_gradient(self, f64):
        rng = np.random.default_rng(0)
        a = ad.parameter(rng.normal(size=(5, 4)))
        b = ad.parameter(rng.normal(size=(4, 3)))
        c = ad.constant(rng.normal(size=(5, 3)))
        check_grads(lambda: ad.sum_all(ad.mul(ad.matmul(a, b), c)), {"a": a, "b": b})


class TestSoftmaxRows:
    def test_symmetric_row(self):
        out = ad.softmax_rows(DiffArray([[0.0, 0.0]]))
        np.testing.assert_allclose(out.values, [[0.5, 0.5]])

    def test_reference_logit_gap(self):
        out = ad.softmax_rows(DiffArray([[14.0, 12.0]]))
        np.testing.assert_allclose(out.values, [[0.8808, 0.1192]], atol=1e-3)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        out = ad.softmax_rows(DiffArray(rng.normal(size=(6, 9)) * 10))
        np.testing.assert_allclose(out.values.sum(axis=1), np.ones(6), atol=1e-6)
        assert (out.values > 0).all() and (out.values < 1).all()

    def test_gradient(self, f64):
        rng = np.random.default_rng(2)
        x = ad.parameter(rng.normal(size=(3, 7)))
        m = ad.constant(rng.normal(size=(3, 7)))
        check_grads(lambda: ad.sum_all(ad.mul(ad.softmax_rows(x), m)), {"x": x})

    def test_log_softmax_gradient(self, f64):
        rng = np.random.default_rng(3)
        x = ad.parameter(rng.normal(size=(3, 7)))
        m = ad.constant(rng.normal(size=(3, 7)))
        check_grads(lambda: ad.sum_all(ad.mul(ad.log_softmax_rows(x), m)), {"x": x})

    def test_log_softmax_matches_log_of_softmax(self):
        rng = np.random.default_rng(4)
        x = DiffArray(rng.normal(size=(2, 5)))
        np.testing.assert_allclose(
            ad.log_softmax_rows(x).values, np.log(ad.softmax_rows(x).values), atol=1e-6
        )


class TestLayerNorm:
    def test_constant_row_zeroed(self):
        out = ad.layer_norm(DiffArray([[5.0, 5.0, 5.0]]), DiffArray(np.ones((1, 3))), DiffArray(np.zeros((1, 3))), 1e-5)
        np.testing.assert_allclose(out.values, np.zeros((1, 3)), atol=1e-6)

    def test_two_point_row(self):
        out = ad.layer_norm(DiffArray([[1.0, 3.0]]), DiffArray(np.ones((1, 2))), DiffArray(np.zeros((1, 2))), 1e-12)
        np.testing.assert_allclose(out.values, [[-1.0, 1.0]], atol=1e-5)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ad.layer_norm(DiffArray(np.zeros((2, 4))), DiffArray(np.ones((1, 3))), DiffArray(np.zeros((1, 4))), 1e-5)

    def test_gradient(self, f64):
        rng = np.random.default_rng(5)
        x = ad.parameter(rng.normal(size=(4, 6)))
        gain = ad.parameter(rng.normal(size=(1, 6)))
        bias = ad.parameter(rng.normal(size=(1, 6)))
        m = ad.constant(rng.normal(size=(4, 6)))
        check_grads(
            lambda: ad.sum_all(ad.mul(ad.layer_norm(x, gain, bias, 1e-5), m)),
            {"x": x, "gain": gain, "bias": bias},
        )


class TestBackward:
    def test_sum_gradient_is_ones(self):
        w = ad.parameter(np.arange(6.0).reshape(2, 3))
        backward(ad.sum_all(w))
        np.testing.assert_allclose(w.grad, np.ones((2, 3)))

    def test_matmul_sum_closed_form(self):
        a = ad.parameter(np.ones((2, 3)))
        b = ad.constant(np.arange(12.0).reshape(3, 4))
        backward(ad.sum_all(ad.matmul(a, b)))
        expected = np.ones((2, 4)) @ b.values.T
        np.testing.assert_allclose(a.grad, expected)

    def test_non_scalar_loss_rejected(self):
        w = ad.parameter(np.ones((2, 2)))
        with pytest.raises(ValueError):
            backward(ad.scale(w, 2.0))

    def test_double_backward_without_reset_rejected(self):
        w = ad.parameter(np.ones((2, 2)))
        backward(ad.sum_all(w))
        with pytest.raises(RuntimeError, match="zero_grads"):
            backward(ad.sum_all(w))
        zero_grads([w])
        backward(ad.sum_all(w))

    def test_gradient_accumulates_over_shared_use(self):
        w = ad.parameter(np.ones((1, 2)))
        backward(ad.sum_all(ad.add(w, w)))
        np.testing.assert_allclose(w.grad, 2 * np.ones((1, 2)))

    def test_deep_graph_no_recursion_limit(self):
        x = ad.parameter(np.ones((1, 1)))
        node = x
        for _ in range(5000):
            node = ad.add(node, ad.constant([[0.0]]))
        backward(node)
        np.testing.assert_allclose(x.grad, [[1.0]])


class TestElementwiseGradients:
    def test_chain_of_ops(self, f64):
        rng = np.random.default_rng(6)
        t = ad.parameter(rng.normal(size=(6, 5)))
        m = ad.constant(rng.normal(size=(1, 10)))

        def build():
            rows = ad.take_rows(t, [2, 0, 2, 4])
            pooled = ad.mean_rows(ad.tanh(rows))
            wide = ad.concat_cols([pooled, ad.relu(pooled)])
            return ad.sum_all(ad.mul(ad.exp(ad.scale(wide, 0.3)), m))

        check_grads(build, {"t": t})

    def test_concat_rows_and_transpose(self, f64):
        rng = np.random.default_rng(7)
        a = ad.parameter(rng.normal(size=(2, 3)))
        b = ad.parameter(rng.normal(size=(1, 3)))
        m = ad.constant(rng.normal(size=(3, 3)))
        check_grads(
            lambda: ad.sum_all(ad.mul(ad.transpose(ad.concat_rows([a, b])), m)),
            {"a": a, "b": b},
        )

    def test_sub_mul_broadcast(self, f64):
        rng = np.random.default_rng(8)
        x = ad.parameter(rng.normal(size=(4, 3)))
        bias = ad.parameter(rng.normal(size=(1, 3)))
        m = ad.constant(rng.normal(size=(4, 3)))
        check_grads(
            lambda: ad.sum_all(ad.mul(ad.sub(x, bias), m)),
            {"x": x, "bias": bias},
        )

    def test_log_positive_domain(self, f64):
        rng = np.random.default_rng(9)
        x = ad.parameter(rng.uniform(0.5, 2.0, size=(3, 3)))
        check_grads(lambda: ad.mean_all(ad.log(x)), {"x": x})

    def test_log_rejects_nonpositive(self):
        with pytest.raises(FloatingPointError):
            ad.log(DiffArray([[0.0]]))


class TestAdagrad:
    def test_zero_grad_is_noop(self):
        p = ad.parameter(np.ones((2, 2)))
        p.grad = np.zeros((2, 2))
        state = OptimState({"p": p}, learning_rate=0.1, epsilon=0.0)
        adagrad_step({"p": p}, state)
        np.testing.assert_allclose(p.values, np.ones((2, 2)))
        np.testing.assert_allclose(state.accum["p"], np.zeros((2, 2)))

    def test_first_step_equals_lr(self):
        p = ad.parameter([[1.0]])
        p.grad = np.array([[1.0]], dtype=p.values.dtype)
        state = OptimState({"p": p}, learning_rate=0.1, epsilon=0.0)
        adagrad_step({"p": p}, state)
        np.testing.assert_allclose(p.values, [[0.9]], atol=1e-7)

    def test_repeated_updates_shrink(self):
        p = ad.parameter([[1.0]])
        state = OptimState({"p": p}, learning_rate=0.1, epsilon=1e-8)
        before = p.values.copy()
        p.grad = np.array([[0.5]], dtype=p.values.dtype)
        adagrad_step({"p": p}, state)
        first = abs(before[0, 0] - p.values[0, 0])
        mid = p.values.copy()
        p.grad = np.array([[0.5]], dtype=p.values.dtype)
        adagrad_step({"p": p}, state)
        second = abs(mid[0, 0] - p.values[0, 0])
        assert second < first

    def test_accumulator_monotone(self):
        rng = np.random.default_rng(10)
        p = ad.parameter(np.ones((3, 3)))
        state = OptimState({"p": p}, 0.01, 1e-8)
        prev = state.accum["p"].copy()
        for _ in range(5):
            p.grad = rng.normal(size=(3, 3)).astype(p.values.dtype)
            adagrad_step({"p": p}, state)
            assert (state.accum["p"] >= prev).all()
            prev = state.accum["p"].copy()

    def test_missing_state_rejected(self):
        p = ad.parameter(np.ones((2, 2)))
        p.grad = np.ones((2, 2), dtype=p.values.dtype)
        state = OptimState({}, 0.01, 1e-8)
        with pytest.raises(ValueError):
            adagrad_step({"p": p}, state)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        arrays = {"w.a": rng.normal(size=(3, 4)).astype(np.float32), "w.b": rng.normal(size=(1, 2)).astype(np.float32)}
        path = tmp_path / "ckpt.bin"
        save_arrays(path, arrays)
        loaded = load_arrays(path)
        assert sorted(loaded) == ["w.a", "w.b"]
        for name in arrays:
            np.testing.assert_array_equal(loaded[name], arrays[name])

    def test_binary_layout(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        save_arrays(path, {"x": np.zeros((2, 3), dtype=np.float32)})
        blob = path.read_bytes()
        assert blob[:4] == b"TS3W"
        assert int.from_bytes(blob[4:8], "little") == 1
        assert int.from_bytes(blob[8:12], "little") == 1
        assert int.from_bytes(blob[12:16], "little") == 1  # name length
        assert blob[16:17] == b"x"
        assert int.from_bytes(blob[17:21], "little") == 2
        assert int.from_bytes(blob[21:25], "little") == 3
        assert len(blob) == 25 + 4 * 6

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_arrays(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "ckpt.bin"
        save_arrays(path, {"x": np.zeros((2, 3), dtype=np.float32)})
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(ValueError, match="truncated"):
            load_arrays(path)
