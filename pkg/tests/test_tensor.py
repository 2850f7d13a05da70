import numpy as np
import pytest

from eegdecode.autodiff import Tensor, no_grad, softmax


def test_loss_grad_wrt_itself_is_one():
    x = Tensor([3.0], requires_grad=True)
    y = (x * x).sum()
    y.backward()
    assert y.grad == 1.0
    assert x.grad == pytest.approx(6.0)


def test_shared_subexpression_accumulates():
    # f(x) = x*x + x*x; hand expansion gives df/dx = 4x
    x = Tensor(np.array([1.5, -2.0]), requires_grad=True, dtype=np.float64)
    sq = x * x
    (sq + sq).sum().backward()
    np.testing.assert_allclose(x.grad, 4.0 * x.data)


def test_duplicate_input_matches_hand_expansion():
    # g(a) = a*a with the same tensor on both sides equals the a**2 path
    a = Tensor(np.array([2.0, 3.0]), requires_grad=True, dtype=np.float64)
    (a * a).sum().backward()
    grad_dup = a.grad.copy()

    b = Tensor(np.array([2.0, 3.0]), requires_grad=True, dtype=np.float64)
    (b ** 2).sum().backward()
    np.testing.assert_allclose(grad_dup, b.grad)


def test_broadcast_add_unbroadcasts_grad():
    x = Tensor(np.ones((3, 4)), requires_grad=True, dtype=np.float64)
    row = Tensor(np.ones((1, 4)), requires_grad=True, dtype=np.float64)
    (x + row).sum().backward()
    assert x.grad.shape == (3, 4)
    assert row.grad.shape == (1, 4)
    np.testing.assert_allclose(row.grad, 3.0)


def test_mean_matches_numpy_and_grad():
    x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True, dtype=np.float64)
    m = x.mean(axis=0, keepdims=True)
    np.testing.assert_allclose(m.data, x.data.mean(axis=0, keepdims=True))
    m.sum().backward()
    np.testing.assert_allclose(x.grad, 1.0 / 3.0)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError):
        (x * 2).backward()


def test_detached_tensor_gets_no_grad():
    x = Tensor(np.ones(3), requires_grad=True, dtype=np.float64)
    const = Tensor(np.full(3, 2.0), dtype=np.float64)
    (x * const).sum().backward()
    assert const.grad is None
    np.testing.assert_allclose(x.grad, 2.0)


def test_no_grad_builds_no_graph():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = x * 2
    assert not y.requires_grad
    assert y._parents == ()


def test_transpose_reshape_roundtrip_grad():
    x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 4)),
               requires_grad=True, dtype=np.float64)
    y = x.transpose(0, 2, 1).reshape(2, 12)
    (y * y).sum().backward()
    np.testing.assert_allclose(x.grad, 2.0 * x.data)


def test_matmul_grad():
    rng = np.random.default_rng(1)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True, dtype=np.float64)
    b = Tensor(rng.standard_normal((4, 2)), requires_grad=True, dtype=np.float64)
    (a @ b).sum().backward()
    np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)
    np.testing.assert_allclose(b.grad, a.data.T @ np.ones((3, 2)))


def test_dtype_preserved_through_ops():
    x = Tensor(np.ones((2, 2), np.float32))
    assert ((x + 1.0) * 2.0).dtype == np.float32
    y = Tensor(np.ones((2, 2), np.float64))
    assert (y * 3.0).dtype == np.float64


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(2)
    z = rng.standard_normal((50, 6)) * 10
    p = softmax(z)
    assert (p >= 0).all()
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
