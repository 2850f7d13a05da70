import numpy as np
import pytest

from eegdecode.autodiff import Adam, AdamState, Tensor, adam_step


def test_zero_gradient_leaves_params_unchanged():
    p = {"w": Tensor(np.array([1.0, -2.0]), requires_grad=True, dtype=np.float64)}
    state = AdamState.for_params(p)
    adam_step(p, {"w": np.zeros(2)}, state)
    np.testing.assert_allclose(p["w"].data, [1.0, -2.0])
    assert state.step == 1


def test_first_step_magnitude_is_lr_times_sign():
    # at t=1 the bias correction makes m_hat / sqrt(v_hat) = sign(g)
    g = np.array([0.3, -7.0, 0.001])
    p = {"w": Tensor(np.zeros(3), requires_grad=True, dtype=np.float64)}
    state = AdamState.for_params(p, learning_rate=0.005)
    adam_step(p, {"w": g}, state)
    np.testing.assert_allclose(p["w"].data, -0.005 * np.sign(g), rtol=1e-4)


def test_step_counter_strictly_increments():
    p = {"w": Tensor(np.zeros(1), requires_grad=True, dtype=np.float64)}
    state = AdamState.for_params(p)
    for expected in range(1, 6):
        adam_step(p, {"w": np.ones(1)}, state)
        assert state.step == expected


def test_shape_mismatch_raises():
    p = {"w": Tensor(np.zeros(3), requires_grad=True, dtype=np.float64)}
    state = AdamState.for_params(p)
    with pytest.raises(ValueError, match="shape"):
        adam_step(p, {"w": np.zeros(4)}, state)


def test_quadratic_bowl_converges():
    # f(w) = ||w||^2 from ||w0|| = 1: 500 steps pull it below 1e-2
    w = Tensor(np.full(4, 0.5), requires_grad=True, dtype=np.float64)
    assert np.linalg.norm(w.data) == pytest.approx(1.0)
    opt = Adam({"w": w}, learning_rate=0.005)
    for _ in range(500):
        opt.zero_grad()
        (w * w).sum().backward()
        opt.step()
    assert np.linalg.norm(w.data) < 1e-2


def test_frozen_params_skipped_by_missing_grads():
    p = {"w": Tensor(np.ones(2), requires_grad=True, dtype=np.float64),
         "frozen": Tensor(np.ones(2), requires_grad=True, dtype=np.float64)}
    state = AdamState.for_params(p)
    adam_step(p, {"w": np.ones(2)}, state)
    np.testing.assert_allclose(p["frozen"].data, 1.0)
    assert not np.allclose(p["w"].data, 1.0)
