"""Central finite-difference verification of every backward pass.

The checked quantity is a scalar projection sum(op_output * R) with a
fixed random R, so a single backward sweep yields the full Jacobian
action.  Checks run at float64; the reported error is
|analytic - numeric| / max(|analytic| + |numeric|, 1e-3), i.e. relative
with an absolute floor so true-zero gradient entries do not inflate it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import Tensor, no_grad


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    tolerance: float
    per_input: tuple

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return f"{self.name:<24s} max rel err {self.max_rel_err:.3e}  (tol {self.tolerance:.0e})  {status}"


def gradient_check(fn, inputs, tolerance: float = 1e-5, step: float = 1e-5,
                   rng: np.random.Generator | None = None, name: str = "op") -> GradCheckResult:
    """Compare analytic gradients of ``fn(*inputs)`` against central differences.

    ``inputs`` are float64 tensors; all of them are treated as
    differentiable arguments.  ``fn`` must be deterministic.
    """
    rng = rng or np.random.default_rng(0)
    for t in inputs:
        if t.dtype != np.float64:
            raise ValueError("gradient_check requires float64 inputs")
        t.requires_grad = True
        t.zero_grad()

    out = fn(*inputs)
    proj = rng.standard_normal(out.shape) if out.ndim else np.asarray(1.0)

    def scalar_loss() -> float:
        with no_grad():
            val = fn(*inputs)
        return float((val.data * proj).sum())

    (out * Tensor(proj.astype(np.float64))).sum().backward()

    errors = []
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = scalar_loss()
            flat[i] = orig - step
            f_minus = scalar_loss()
            flat[i] = orig
            nflat[i] = (f_plus - f_minus) / (2.0 * step)
        denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-3)
        errors.append(float(np.max(np.abs(analytic - numeric) / denom)))

    return GradCheckResult(name, max(errors) if errors else 0.0, tolerance, tuple(errors))


def _rand(rng, *shape):
    return Tensor(rng.standard_normal(shape), dtype=np.float64)


def _battery_cases(seed: int):
    """One (name, fn, inputs, tolerance) case per differentiable op."""
    rng = np.random.default_rng(seed)
    cases = []

    cases.append(("conv2d", lambda x, w, b: ops.conv2d(x, w, b),
                  [_rand(rng, 2, 2, 5, 6), _rand(rng, 3, 2, 2, 3), _rand(rng, 3)], 1e-5))

    def bn(x, gamma, beta):
        return ops.batch_norm(x, gamma, beta, ops.RunningStats.create(3, np.float64), training=True)
    cases.append(("batch_norm", bn, [_rand(rng, 4, 3, 2, 3), _rand(rng, 3), _rand(rng, 3)], 1e-4))

    cases.append(("linear", lambda x, w, b: ops.linear(x, w, b),
                  [_rand(rng, 4, 5), _rand(rng, 3, 5), _rand(rng, 3)], 1e-5))

    # Sampled away from zero: the kink at exactly 0 is excluded by construction.
    relu_in = rng.uniform(0.1, 1.0, (4, 6)) * rng.choice([-1.0, 1.0], (4, 6))
    cases.append(("relu", ops.relu, [Tensor(relu_in, dtype=np.float64)], 1e-6))

    cases.append(("sigmoid", ops.sigmoid, [_rand(rng, 3, 4)], 1e-6))
    cases.append(("tanh", lambda x: x.tanh(), [_rand(rng, 3, 4)], 1e-6))

    cases.append(("concat", lambda a, b: ops.concat([a, b], axis=1),
                  [_rand(rng, 3, 4), _rand(rng, 3, 2)], 1e-6))

    cases.append(("mean_pool2d", lambda x: ops.mean_pool2d(x, (1, 3), (1, 2)),
                  [_rand(rng, 2, 2, 1, 9)], 1e-6))

    drop_rng_seed = int(rng.integers(2 ** 31))

    def drop(x):
        return ops.dropout(x, 0.5, training=True, rng=np.random.default_rng(drop_rng_seed))
    cases.append(("dropout", drop, [_rand(rng, 5, 7)], 1e-6))

    log_in = Tensor(rng.uniform(0.2, 2.0, (3, 4)), dtype=np.float64)
    cases.append(("clip_log", lambda x: ops.clip_min(x, 1e-6).log(), [log_in], 1e-5))

    hidden, feat = 2, 3
    lstm_p = ops.LstmLayerParams(_rand(rng, 4 * hidden, feat), _rand(rng, 4 * hidden, hidden),
                                 _rand(rng, 4 * hidden), _rand(rng, 4 * hidden))
    cases.append(("lstm_layer", lambda x, wi, wh, bi, bh: ops.lstm_layer(
        x, ops.LstmLayerParams(wi, wh, bi, bh)),
        [_rand(rng, 2, 4, feat)] + lstm_p.tensors(), 1e-4))

    labels = rng.integers(0, 4, 5)
    cases.append(("softmax_cross_entropy", lambda z: ops.softmax_cross_entropy(z, labels),
                  [_rand(rng, 5, 4)], 1e-5))

    return cases


def run_battery(instances: int = 10, tolerance_override: float | None = None,
                base_seed: int = 20240101) -> list[GradCheckResult]:
    """Run every op check on ``instances`` seeded random instances.

    Returns one aggregated result per op (worst error over instances).
    """
    worst: dict[str, GradCheckResult] = {}
    for k in range(instances):
        for name, fn, inputs, tol in _battery_cases(base_seed + k):
            if tolerance_override is not None:
                tol = tolerance_override
            res = gradient_check(fn, inputs, tolerance=tol, name=name,
                                 rng=np.random.default_rng(base_seed + 1000 + k))
            prev = worst.get(name)
            if prev is None or res.max_rel_err > prev.max_rel_err:
                worst[name] = res
    return list(worst.values())
