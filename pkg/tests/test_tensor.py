import numpy as np
import pytest

from vihsd.autograd import Tensor, backward, concat, matmul, no_grad, set_debug, stack
from vihsd.errors import ContractError, DimensionError, NumericalError


def test_matmul_identity():
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    out = matmul(Tensor(a), Tensor(np.eye(3, dtype=np.float32)))
    np.testing.assert_array_equal(out.data, a)


def test_matmul_hand_case():
    out = Tensor([[1.0, 2.0]]) @ Tensor([[3.0], [4.0]])
    np.testing.assert_array_equal(out.data, [[11.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_matmul_weight_grad():
    W = Tensor([[2.0], [3.0]], requires_grad=True)
    (Tensor([[1.0, 1.0]]) @ W).sum().backward()
    np.testing.assert_array_equal(W.grad, [[1.0], [1.0]])


def test_square_sum_gradient_is_2x():
    x = Tensor(np.array([1.0, -2.0, 3.5]), requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_allclose(x.grad, 2 * x.data)


def test_gradients_accumulate_across_backward_calls():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    first = x.grad.copy()
    loss.backward()
    np.testing.assert_allclose(x.grad, 2 * first)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError, match="scalar"):
        backward(x * 2)


def test_backward_without_grad_path():
    with pytest.raises(ContractError):
        Tensor(np.ones(2)).sum().backward()


def test_broadcast_add_unbroadcasts_gradient():
    x = Tensor(np.ones((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    (x + b).sum().backward()
    np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])


def test_shared_subexpression_gradient():
    x = Tensor(np.array(3.0), requires_grad=True)
    y = x * x
    (y + y * x).backward()  # x^2 + x^3 -> 2x + 3x^2
    assert x.grad == pytest.approx(6 + 27)


def test_getitem_scatter_gradient():
    x = Tensor(np.arange(5.0), requires_grad=True)
    x[np.array([0, 0, 3])].sum().backward()
    np.testing.assert_array_equal(x.grad, [2, 0, 0, 1, 0])


def test_concat_and_stack_gradients():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    b = Tensor(np.ones((2, 3)), requires_grad=True)
    (concat([a, b], axis=-1) * Tensor(np.arange(5.0))).sum().backward()
    np.testing.assert_array_equal(a.grad, [[0, 1], [0, 1]])
    s = stack([a, a])
    assert s.shape == (2, 2, 2)
    with pytest.raises(DimensionError):
        concat([a, Tensor(np.ones((3, 2)))], axis=-1)


def test_elementwise_ops_match_numpy():
    v = np.array([0.5, 1.5, 2.0])
    x = Tensor(v)
    np.testing.assert_allclose(x.exp().data, np.exp(v), rtol=1e-6)
    np.testing.assert_allclose(x.log().data, np.log(v), rtol=1e-6)
    np.testing.assert_allclose(x.tanh().data, np.tanh(v), rtol=1e-6)
    np.testing.assert_allclose(x.sigmoid().data, 1 / (1 + np.exp(-v)), rtol=1e-6)
    np.testing.assert_allclose((x / 2 - 1).relu().data, [0, 0, 0])
    np.testing.assert_allclose((x ** 2).data, v ** 2)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3
    assert not y.requires_grad


def test_item_requires_single_element():
    assert Tensor([[2.5]]).item() == 2.5
    with pytest.raises(ContractError):
        Tensor(np.ones(2)).item()


def test_default_dtype_is_float32_and_float64_is_kept():
    assert Tensor([1, 2]).dtype == np.float32
    assert Tensor(np.ones(2)).dtype == np.float64
    x = Tensor(np.ones(2))
    assert (x + x).sum().dtype == np.float64


def test_debug_mode_raises_on_nan():
    set_debug(True)
    try:
        with pytest.raises(NumericalError), np.errstate(invalid="ignore"):
            Tensor(np.array([-1.0])).log()
    finally:
        set_debug(False)
