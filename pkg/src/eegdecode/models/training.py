"""Mini-batch training, prediction, transfer adaptation, checkpoints."""

from __future__ import annotations

import numpy as np

from ..autodiff import Adam, Tensor, no_grad, softmax_cross_entropy
from .. import checkpoint
from .lda import lda_fit, lda_predict
from .networks import ModelParams, ModelSpec, build, forward_logits


class TrainingDivergedError(RuntimeError):
    pass


def _flatten_trials(trials: np.ndarray) -> np.ndarray:
    return np.asarray(trials).reshape(trials.shape[0], -1)


def train_model(mp: ModelParams, trials: np.ndarray, labels: np.ndarray,
                rng: np.random.Generator | None = None,
                epochs: int | None = None, stop_loss: float | None = None) -> list:
    """Train in place; returns the mean loss per epoch.

    Non-finite losses abort immediately (surfaced per fold by the
    harness).  The shuffle and dropout streams both come from ``rng``,
    so one seed fixes the whole run.  ``stop_loss`` ends training early
    once the epoch-mean loss drops below it (memorization probes).
    """
    spec = mp.spec
    if spec.variant == "lda":
        mp.lda = lda_fit(_flatten_trials(trials), labels, spec.n_classes)
        return []

    rng = rng or np.random.default_rng(spec.seed + 1)
    epochs = spec.epochs if epochs is None else epochs
    trainable = mp.trainable()
    opt = Adam(trainable, learning_rate=spec.learning_rate)
    n = trials.shape[0]
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, spec.batch_size):
            idx = order[start:start + spec.batch_size]
            x = Tensor(trials[idx])
            logits = forward_logits(mp, x, training=True, rng=rng)
            loss = softmax_cross_entropy(logits, labels[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDivergedError(f"non-finite loss {value}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            losses.append(value)
        history.append(float(np.mean(losses)))
        if stop_loss is not None and history[-1] < stop_loss:
            break
    return history


def predict_logits(mp: ModelParams, trials: np.ndarray, batch_size: int = 256) -> np.ndarray:
    if mp.spec.variant == "lda":
        raise ValueError("lda produces discriminant scores, not logits")
    outputs = []
    with no_grad():
        for start in range(0, trials.shape[0], batch_size):
            logits = forward_logits(mp, Tensor(trials[start:start + batch_size]), training=False)
            outputs.append(logits.data)
    return np.concatenate(outputs, axis=0)


def evaluate_loss(mp: ModelParams, trials: np.ndarray, labels: np.ndarray,
                  batch_size: int = 256) -> float:
    """Eval-mode cross-entropy over a trial set."""
    logits = predict_logits(mp, trials, batch_size)
    return softmax_cross_entropy(Tensor(logits), labels).item()


def predict(mp: ModelParams, trials: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Argmax class prediction; ties resolve to the lowest index."""
    if mp.spec.variant == "lda":
        if mp.lda is None:
            raise ValueError("lda model has not been fitted")
        return lda_predict(mp.lda, _flatten_trials(trials))
    return np.argmax(predict_logits(mp, trials, batch_size), axis=1)


def transfer_adapt(trained: ModelParams, new_n_classes: int,
                   rng: np.random.Generator | None = None) -> ModelParams:
    """Keep the convolutional blocks, reinitialize the head for new classes.

    All non-head parameters are frozen (excluded from the optimizer);
    only CNN variants are eligible.
    """
    if trained.spec.variant not in ("attention_cnn", "plain_cnn"):
        raise ValueError(f"transfer_adapt supports CNN variants, not '{trained.spec.variant}'")
    rng = rng or np.random.default_rng(trained.spec.seed + 7)
    adapted = trained.clone()
    adapted.spec = ModelSpec(**{**trained.spec.to_dict(), "n_classes": new_n_classes,
                                "mask": trained.spec.mask})
    width = trained.params["head.w"].shape[1]
    dtype = trained.params["head.w"].dtype
    limit = np.sqrt(6.0 / width)
    adapted.params["head.w"] = Tensor(rng.uniform(-limit, limit, (new_n_classes, width)).astype(dtype),
                                      requires_grad=True)
    adapted.params["head.b"] = Tensor(np.zeros(new_n_classes, dtype), requires_grad=True)
    adapted.frozen = frozenset(name for name in adapted.params if not name.startswith("head."))
    return adapted


def save_model(mp: ModelParams, path, epoch: int = 0) -> None:
    arrays = [(name, t.data) for name, t in mp.params.items()]
    for name, rs in mp.state.items():
        arrays.append((f"{name}.running_mean", rs.mean))
        arrays.append((f"{name}.running_var", rs.var))
    checkpoint.save_checkpoint(path, mp.spec.to_dict(), mp.spec.seed, epoch, arrays)


def load_model(path) -> ModelParams:
    header, arrays = checkpoint.load_checkpoint(path)
    spec = ModelSpec.from_dict(header["spec"])
    mp = build(spec)
    for name, t in mp.params.items():
        t.data = arrays[name].astype(t.dtype).reshape(t.shape)
    for name, rs in mp.state.items():
        rs.mean = arrays[f"{name}.running_mean"].astype(rs.mean.dtype)
        rs.var = arrays[f"{name}.running_var"].astype(rs.var.dtype)
    return mp
