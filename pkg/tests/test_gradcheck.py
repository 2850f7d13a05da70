import numpy as np

from eegdecode.autodiff import (
    Tensor, clip_min, conv2d, flatten, gradient_check, linear, mean_pool2d,
    run_battery,
)


def test_battery_ten_seeded_instances_all_pass():
    # every differentiable op, >= 10 random instances, worst case reported
    results = run_battery(instances=10)
    names = {r.name for r in results}
    assert {"conv2d", "batch_norm", "linear", "lstm_layer",
            "softmax_cross_entropy", "relu", "dropout"} <= names
    for r in results:
        assert r.max_rel_err < 1e-4, str(r)


def test_conv_passes_tight_tolerance():
    rng = np.random.default_rng(11)
    res = gradient_check(
        lambda x, w, b: conv2d(x, w, b),
        [Tensor(rng.standard_normal((2, 2, 6, 7)), dtype=np.float64),
         Tensor(rng.standard_normal((3, 2, 2, 3)), dtype=np.float64),
         Tensor(rng.standard_normal(3), dtype=np.float64)],
        tolerance=1e-5, name="conv2d")
    assert res.passed, str(res)


def test_tiny_shallow_composition_passes():
    # temporal conv -> spatial conv -> square -> mean pool -> log -> head,
    # differentiated end to end at toy scale
    rng = np.random.default_rng(21)

    def shallow(x, wt, bt, ws, bs, wh, bh):
        h = conv2d(x, wt, bt)
        h = conv2d(h, ws, bs)
        h = h * h
        h = mean_pool2d(h, (1, 3), (1, 2))
        h = clip_min(h, 1e-6).log()
        return linear(flatten(h), wh, bh)

    def t(*shape):
        return Tensor(rng.standard_normal(shape), dtype=np.float64)

    inputs = [t(2, 1, 4, 10), t(3, 1, 1, 3), t(3), t(3, 3, 4, 1), t(3), t(5, 9), t(5)]
    res = gradient_check(shallow, inputs, tolerance=1e-4, name="shallow_tiny")
    assert res.passed, str(res)


def test_report_always_produced_on_failure():
    # a deliberately wrong gradient must yield a failing report, not an exception
    from eegdecode.autodiff.tensor import make_op

    def broken(x):
        out = make_op(x.data * 2.0, (x,))
        if out.requires_grad:
            out._backward = lambda g: x.accumulate_grad(g * 3.0)  # wrong slope
        return out

    res = gradient_check(broken, [Tensor(np.ones(4), dtype=np.float64)], name="broken")
    assert not res.passed
    assert res.max_rel_err > 0.1
