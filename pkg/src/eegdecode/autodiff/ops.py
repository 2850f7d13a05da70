"""Neural-network operations on :class:`Tensor` with hand-written backward passes.

Convolution is lowered to an im2col matrix product so the hot loops run
inside BLAS; everything else is plain vectorized numpy.  All ops follow
valid (no padding, stride 1) semantics unless stated otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, make_op


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """[N,C,H,W] -> [N*Ho*Wo, C*kh*kw] patch matrix (copies)."""
    n, c, h, w = x.shape
    ho, wo = h - kh + 1, w - kw + 1
    cols = sliding_window_view(x, (kh, kw), axis=(2, 3))
    return cols.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Valid cross-correlation, stride 1: [N,C,H,W] * [F,C,kh,kw] -> [N,F,H-kh+1,W-kw+1]."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    f, ck, kh, kw = weight.shape
    if ck != c:
        raise ValueError(f"conv2d channel mismatch: input has {c} channels, kernel expects {ck}")
    if kh > h or kw > w:
        raise ValueError(f"conv2d kernel ({kh},{kw}) larger than input ({h},{w})")
    if bias is not None and bias.shape != (f,):
        raise ValueError(f"conv2d bias shape {bias.shape} != ({f},)")

    ho, wo = h - kh + 1, w - kw + 1
    cols = _im2col(x.data, kh, kw)
    wm = weight.data.reshape(f, c * kh * kw)
    out2d = cols @ wm.T
    if bias is not None:
        out2d += bias.data
    out_data = out2d.reshape(n, ho, wo, f).transpose(0, 3, 1, 2)

    parents = (x, weight) if bias is None else (x, weight, bias)
    out = make_op(out_data, parents)
    if out.requires_grad:
        def backward(g):
            gm = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
            if weight.requires_grad:
                weight.accumulate_grad((gm.T @ cols).reshape(f, c, kh, kw))
            if bias is not None and bias.requires_grad:
                bias.accumulate_grad(gm.sum(axis=0))
            if x.requires_grad:
                dcols = (gm @ wm).reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
                dx = np.zeros_like(x.data)
                for p in range(kh):
                    for q in range(kw):
                        dx[:, :, p:p + ho, q:q + wo] += dcols[:, :, :, :, p, q]
                x.accumulate_grad(dx)
        out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    out = make_op(np.maximum(x.data, 0), (x,))
    if out.requires_grad:
        out._backward = lambda g: x.accumulate_grad(g * (x.data > 0))
    return out


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))
    out = make_op(s, (x,))
    if out.requires_grad:
        out._backward = lambda g: x.accumulate_grad(g * s * (1.0 - s))
    return out


def clip_min(x: Tensor, floor: float) -> Tensor:
    """max(x, floor); gradient is zero where the floor is active."""
    out = make_op(np.maximum(x.data, floor), (x,))
    if out.requires_grad:
        out._backward = lambda g: x.accumulate_grad(g * (x.data > floor))
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """x [N,D] @ weight[F,D].T + bias[F]."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear shape mismatch: input {x.shape}, weight {weight.shape}")
    out_data = x.data @ weight.data.T
    if bias is not None:
        out_data += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = make_op(out_data, parents)
    if out.requires_grad:
        def backward(g):
            if x.requires_grad:
                x.accumulate_grad(g @ weight.data)
            if weight.requires_grad:
                weight.accumulate_grad(g.T @ x.data)
            if bias is not None and bias.requires_grad:
                bias.accumulate_grad(g.sum(axis=0))
        out._backward = backward
    return out


def flatten(x: Tensor) -> Tensor:
    """Collapse every axis but the leading batch axis."""
    return x.reshape(x.shape[0], -1)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of an empty sequence")
    base = tensors[0].shape
    for t in tensors[1:]:
        other = t.shape
        if len(other) != len(base) or any(o != b for i, (o, b) in enumerate(zip(other, base)) if i != axis):
            raise ValueError(f"concat axis {axis}: extents {other} incompatible with {base}")
    out = make_op(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.shape[axis] for t in tensors]
        splits = np.cumsum(sizes)[:-1]

        def backward(g):
            for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
                t.accumulate_grad(piece)
        out._backward = backward
    return out


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of one axis."""
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = make_op(x.data[idx], (x,))
    if out.requires_grad:
        def backward(g):
            full = np.zeros_like(x.data)
            full[idx] = g
            x.accumulate_grad(full)
        out._backward = backward
    return out


def mask_channels(x: Tensor, indices) -> Tensor:
    """Keep the listed channel rows (axis -2) bit-exact, zero the rest.

    Copying instead of multiplying by a 0/1 gain keeps the zeroed rows at
    +0.0 regardless of input sign, so masked activations are bitwise
    invariant to non-retained channel content.
    """
    idx = list(indices)
    data = np.zeros_like(x.data)
    data[..., idx, :] = x.data[..., idx, :]
    out = make_op(data, (x,))
    if out.requires_grad:
        def backward(g):
            gz = np.zeros_like(g)
            gz[..., idx, :] = g[..., idx, :]
            x.accumulate_grad(gz)
        out._backward = backward
    return out


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) so E[out] = x."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("training-mode dropout needs a seeded generator")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    out = make_op(x.data * mask, (x,))
    if out.requires_grad:
        out._backward = lambda g: x.accumulate_grad(g * mask)
    return out


def mean_pool2d(x: Tensor, kernel: tuple, stride: tuple) -> Tensor:
    """Valid mean pooling over the two trailing axes of [N,C,H,W]."""
    kh, kw = kernel
    sh, sw = stride
    n, c, h, w = x.shape
    if kh > h or kw > w:
        raise ValueError(f"pool kernel ({kh},{kw}) larger than input ({h},{w})")
    windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    out = make_op(windows.mean(axis=(-2, -1)), (x,))
    if out.requires_grad:
        ho, wo = out.shape[2], out.shape[3]
        scale = 1.0 / (kh * kw)

        def backward(g):
            dx = np.zeros_like(x.data)
            gs = g * scale
            for p in range(kh):
                for q in range(kw):
                    dx[:, :, p:p + sh * ho:sh, q:q + sw * wo:sw] += gs
            x.accumulate_grad(dx)
        out._backward = backward
    return out


@dataclass
class RunningStats:
    """Exponential-moving-average statistics for one batch-norm layer."""
    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def create(cls, num_features: int, dtype=np.float32) -> "RunningStats":
        return cls(np.zeros(num_features, dtype=dtype), np.ones(num_features, dtype=dtype))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running: RunningStats,
               training: bool, eps: float = 1e-5, momentum: float = 0.1) -> Tensor:
    """Normalize per feature map over batch (and spatial) axes.

    Train mode normalizes with batch statistics and folds them into the
    running averages; eval mode normalizes with the running averages.
    Built from primitive ops, so the backward pass is exact by construction.
    """
    if x.ndim == 4:
        axes, pshape = (0, 2, 3), (1, -1, 1, 1)
    elif x.ndim == 2:
        axes, pshape = (0,), (1, -1)
    else:
        raise ValueError(f"batch_norm expects 2-D or 4-D input, got {x.shape}")
    g_r = gamma.reshape(pshape)
    b_r = beta.reshape(pshape)

    if training:
        mu = x.mean(axis=axes, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=axes, keepdims=True)
        out = g_r * (centered / (var + eps).sqrt()) + b_r

        count = int(np.prod([x.shape[a] for a in axes]))
        batch_mean = mu.data.reshape(-1)
        batch_var = var.data.reshape(-1)
        if count > 1:
            batch_var = batch_var * (count / (count - 1.0))
        running.mean += momentum * (batch_mean.astype(running.mean.dtype) - running.mean)
        running.var += momentum * (batch_var.astype(running.var.dtype) - running.var)
        return out

    rm = Tensor(running.mean.astype(x.dtype).reshape(pshape))
    rv = Tensor(running.var.astype(x.dtype).reshape(pshape))
    return g_r * ((x - rm) / (rv + eps).sqrt()) + b_r


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain numpy softmax (log-sum-exp stabilized); rows sum to one."""
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits).

    Computed through log-sum-exp; the gradient is (softmax - onehot) / N.
    """
    if logits.ndim != 2:
        raise ValueError(f"expected [N, C] logits, got {logits.shape}")
    n, c = logits.shape
    if c < 2:
        raise ValueError("need at least two classes")
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} != ({n},)")
    if labels.min() < 0 or labels.max() >= c:
        raise IndexError(f"label outside [0, {c})")

    z = logits.data
    m = z.max(axis=1, keepdims=True)
    zs = z - m
    lse = np.log(np.exp(zs).sum(axis=1)) + m[:, 0]
    picked = z[np.arange(n), labels]
    loss = make_op(np.asarray((lse - picked).mean(), dtype=z.dtype), (logits,))
    if loss.requires_grad:
        def backward(g):
            p = softmax(z, axis=1)
            p[np.arange(n), labels] -= 1.0
            logits.accumulate_grad(p * (g / n))
        loss._backward = backward
    return loss


# ---- recurrent cells -----------------------------------------------------

@dataclass
class LstmLayerParams:
    """Gate order is (input, forget, candidate, output), stacked on axis 0."""
    w_ih: Tensor  # [4H, D]
    w_hh: Tensor  # [4H, H]
    b_ih: Tensor  # [4H]
    b_hh: Tensor  # [4H]

    def tensors(self) -> list[Tensor]:
        return [self.w_ih, self.w_hh, self.b_ih, self.b_hh]


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, p: LstmLayerParams):
    """One gated step: returns (h_next, c_next) for inputs [N,D], state [N,H]."""
    hidden = h.shape[1]
    gates = linear(x, p.w_ih, p.b_ih) + linear(h, p.w_hh, p.b_hh)
    i = sigmoid(narrow(gates, 1, 0, hidden))
    f = sigmoid(narrow(gates, 1, hidden, hidden))
    g = narrow(gates, 1, 2 * hidden, hidden).tanh()
    o = sigmoid(narrow(gates, 1, 3 * hidden, hidden))
    c_next = f * c + i * g
    h_next = o * c_next.tanh()
    return h_next, c_next


def lstm_layer(x: Tensor, p: LstmLayerParams) -> Tensor:
    """Run one LSTM layer over [N,T,D]; returns the full hidden sequence [N,T,H]."""
    if x.ndim != 3:
        raise ValueError(f"lstm_layer expects [N,T,D], got {x.shape}")
    n, t_len, d = x.shape
    if t_len == 0:
        raise ValueError("zero-length sequence")
    hidden = p.w_hh.shape[1]
    h = Tensor(np.zeros((n, hidden), dtype=x.dtype))
    c = Tensor(np.zeros((n, hidden), dtype=x.dtype))
    outputs = []
    for t in range(t_len):
        xt = narrow(x, 1, t, 1).reshape(n, d)
        h, c = lstm_cell(xt, h, c, p)
        outputs.append(h.reshape(n, 1, hidden))
    return concat(outputs, axis=1)


def lstm_stack(x: Tensor, layers: list[LstmLayerParams]) -> Tensor:
    """Feed the hidden sequence of each layer into the next."""
    seq = x
    for p in layers:
        seq = lstm_layer(seq, p)
    return seq
