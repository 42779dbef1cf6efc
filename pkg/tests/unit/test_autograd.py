"""
Unit tests for the tensor tape and its primitives.
"""

import numpy as np
import pytest

from geoformer.autograd import (
    EmptyLossError,
    GradientError,
    IGNORE_INDEX,
    Tape,
    Tensor,
    TensorShapeError,
    backward,
    grad_check,
    grad_check_params,
    ops,
)
from geoformer.autograd.tensor import make_node


def randn(*shape, seed=0):
    return Tensor(np.random.default_rng(seed).normal(size=shape), dtype=np.float64)


@pytest.mark.unit
class TestForwardValues:
    def test_matmul(self):
        out = ops.matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_allclose(out.data, [[3.0], [7.0]])

    def test_softmax(self):
        out = ops.softmax(Tensor([0.0, np.log(3.0)], dtype=np.float64))
        np.testing.assert_allclose(out.data, [0.25, 0.75])

    def test_softmax_is_shift_invariant(self):
        out = ops.softmax(Tensor([1000.0, 1000.0 + np.log(3.0)], dtype=np.float64))
        np.testing.assert_allclose(out.data, [0.25, 0.75])

    def test_layer_norm_of_constant_row(self):
        d = 4
        out = ops.layer_norm(
            Tensor(np.full((2, d), 3.0)), Tensor(np.ones(d)), Tensor(np.zeros(d))
        )
        np.testing.assert_allclose(out.data, 0.0, atol=1e-6)

    def test_causal_mask_blocks_future(self):
        scores = ops.causal_mask(Tensor(np.zeros((3, 3))))
        probs = ops.softmax(scores).data
        np.testing.assert_allclose(probs[0], [1.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(probs[2], [1 / 3] * 3)

    def test_cross_entropy_of_uniform_logits(self):
        loss = ops.cross_entropy(Tensor(np.zeros((3, 10))), np.array([1, 2, 3]))
        assert loss.item() == pytest.approx(np.log(10.0), rel=1e-6)

    def test_cross_entropy_ignores_positions(self):
        logits = randn(4, 5)
        targets = np.array([0, IGNORE_INDEX, 2, IGNORE_INDEX])

        full = ops.cross_entropy(logits, targets).item()
        subset = ops.cross_entropy(Tensor(logits.data[[0, 2]]), np.array([0, 2])).item()

        assert full == pytest.approx(subset)

    def test_cross_entropy_with_every_target_ignored(self):
        with pytest.raises(EmptyLossError):
            ops.cross_entropy(randn(2, 3), np.array([IGNORE_INDEX, IGNORE_INDEX]))

    def test_dropout_is_identity_outside_training(self):
        x = randn(3, 3)
        assert ops.dropout(x, 0.5, None, training=False) is x
        with pytest.raises(GradientError):
            ops.dropout(x, 0.5, None, training=True)

    def test_shape_errors(self):
        with pytest.raises(TensorShapeError):
            ops.matmul(randn(2, 3), randn(2, 3))
        with pytest.raises(TensorShapeError):
            ops.add(randn(2, 3), randn(4, 5))
        with pytest.raises(TensorShapeError):
            ops.embedding(randn(5, 2), np.array([0, 5]))


@pytest.mark.unit
class TestTape:
    """Test recording and reverse accumulation."""

    def test_nothing_recorded_without_tape(self):
        x = randn(2, 2)
        x.requires_grad = True
        out = ops.sum(ops.mul(x, x))
        assert out.is_leaf

    def test_shared_input_accumulates(self):
        """
        Test gradient accumulation through fan-out.

        Purpose: A tensor used twice receives the sum of both contributions.

        Checkpoints:
        - d/dx sum(x * x + x) = 2x + 1
        """
        x = Tensor([1.0, -2.0, 3.0], requires_grad=True, dtype=np.float64)
        with Tape() as tape:
            loss = ops.sum(ops.add(ops.mul(x, x), x))
        backward(tape, loss)
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)

    def test_leaf_gradients_accumulate_across_calls(self):
        x = Tensor([1.0, 2.0], requires_grad=True, dtype=np.float64)
        for _ in range(2):
            with Tape() as tape:
                loss = ops.sum(ops.scale(x, 3.0))
            backward(tape, loss)
        np.testing.assert_allclose(x.grad, [6.0, 6.0])

    def test_unreached_params_get_zero_gradient(self):
        x = Tensor([1.0], requires_grad=True)
        unused = Tensor([[1.0, 2.0]], requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(x)
        backward(tape, loss, params=[x, unused])
        np.testing.assert_array_equal(unused.grad, [[0.0, 0.0]])

    def test_non_scalar_loss(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = ops.scale(x, 2.0)
        with pytest.raises(GradientError):
            backward(tape, y)

    def test_broadcast_gradient_is_reduced(self):
        x = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        with Tape() as tape:
            loss = ops.sum(ops.add(x, b))
        backward(tape, loss)
        np.testing.assert_allclose(b.grad, [3.0] * 4)


@pytest.mark.unit
class TestGradCheck:
    """Test backward rules against central differences."""

    def test_linear_function_is_exact(self):
        w = Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], dtype=np.float64)
        error = grad_check(lambda x: ops.sum(ops.matmul(x, w)), randn(4, 3))
        assert error < 1e-9

    @pytest.mark.parametrize(
        "fn",
        [
            lambda x: ops.sum(ops.gelu(x)),
            lambda x: ops.mean(ops.mul(ops.softmax(x), x)),
            lambda x: ops.sum(ops.mul(ops.transpose(x), ops.transpose(x))),
            lambda x: ops.sum(ops.reshape(ops.scale(x, 2.0), (-1,))),
            lambda x: ops.sum(ops.mul(ops.softmax(ops.causal_mask(x)), x)),
        ],
        ids=["gelu", "softmax", "transpose", "reshape", "masked_softmax"],
    )
    def test_primitive_rules(self, fn):
        assert grad_check(fn, randn(4, 4, seed=2)) < 1e-6

    def test_layer_norm_rule(self):
        gain, bias = randn(5, seed=3), randn(5, seed=4)
        target = randn(3, 5, seed=5)

        def fn(x):
            return ops.sum(ops.mul(ops.layer_norm(x, gain, bias), target))

        assert grad_check(fn, randn(3, 5)) < 1e-6

    def test_embedding_rule(self):
        ids = np.array([[0, 2, 2], [1, 0, 3]])
        target = randn(2, 3, 4, seed=6)
        error = grad_check(
            lambda table: ops.sum(ops.mul(ops.embedding(table, ids), target)), randn(4, 4)
        )
        assert error < 1e-6

    def test_softmax_cross_entropy_composite(self):
        """
        Test a small network end to end.

        Purpose: The composite of matmul, gelu, layer_norm and cross_entropy
        agrees with finite differences for every parameter.

        Checkpoints:
        - Every parameter's max relative error is below 1e-5
        """
        params = {
            "w1": Tensor(randn(6, 8, seed=7).data, requires_grad=True),
            "w2": Tensor(randn(8, 5, seed=8).data, requires_grad=True),
            "g": Tensor(np.ones(8), requires_grad=True, dtype=np.float64),
            "b": Tensor(np.zeros(8), requires_grad=True, dtype=np.float64),
        }
        x = randn(4, 6, seed=9)
        targets = np.array([0, 4, IGNORE_INDEX, 2])

        def loss_fn():
            h = ops.gelu(ops.matmul(x, params["w1"]))
            h = ops.layer_norm(h, params["g"], params["b"])
            return ops.cross_entropy(ops.matmul(h, params["w2"]), targets)

        errors = grad_check_params(loss_fn, params)

        assert max(errors.values()) < 1e-5

    def test_corrupted_rule_is_detected(self):
        """A backward rule that is off by a factor of two must fail the check."""

        def bad_square(x):
            def backward_fn(g):
                return (g * 4.0 * x.data,)

            return make_node(x.data ** 2, (x,), backward_fn, "bad_square")

        error = grad_check(lambda x: ops.sum(bad_square(x)), randn(3, 3))

        assert error > 1e-2

    def test_sampled_coordinates(self):
        error = grad_check(lambda x: ops.sum(ops.gelu(x)), randn(20, 20), max_coords=10)
        assert error < 1e-6

    def test_invalid_step(self):
        with pytest.raises(GradientError):
            grad_check(lambda x: ops.sum(x), randn(2), step=0.0)
