"""Model zoo: the dual-branch masked CNN and the comparison models.

Every network is a declarative parameter dictionary (declaration order is
the checkpoint order) plus a pure forward function.  The five-layer CNN
block follows the fixed recipe: conv -> batch norm -> ReLU per layer,
dropout(0.5) before the convs of layers 3..5, valid padding, stride 1.
Input 124 x 32 therefore flows 124x32 -> 124x28 -> 1x28 -> 1x24 -> 1x15
-> 1x6 and flattens to 1200 features per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import (
    Tensor, RunningStats, batch_norm, clip_min, concat, conv2d, dropout,
    flatten, linear, lstm_stack, LstmLayerParams, mask_channels, mean_pool2d,
    narrow, relu,
)
from ..datamodel import MaskSpec, MODEL_CHANNELS, MODEL_SAMPLES, N_CATEGORIES, N_EXEMPLARS

VARIANTS = ("attention_cnn", "plain_cnn", "shallow_convnet", "lstm", "lstm_cnn", "lda")

DROPOUT_P = 0.5
LSTM_LAYERS = 2
LSTM_HIDDEN = 100
# Shallow ConvNet rescaled for 62.5 Hz inputs: 13-sample temporal kernel
# (~200 ms), mean-pool window 9, stride 3.
SHALLOW_MAPS = 40
SHALLOW_TEMPORAL = 13
SHALLOW_POOL = 9
SHALLOW_STRIDE = 3

# Table rows: (feature maps, kernel height or None for full height, kernel width,
# dropout before conv).
BLOCK_ROWS = (
    (20, 1, 5, False),
    (20, None, 1, False),
    (40, 1, 5, True),
    (100, 1, 10, True),
    (200, 1, 10, True),
)


class ArchitectureError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of one classifier configuration."""
    variant: str
    n_classes: int
    mask: MaskSpec | None = None
    learning_rate: float = 0.005
    epochs: int = 25
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant '{self.variant}', expected one of {VARIANTS}")
        if self.n_classes not in (N_CATEGORIES, N_EXEMPLARS):
            raise ValueError(f"n_classes must be {N_CATEGORIES} or {N_EXEMPLARS}, got {self.n_classes}")
        if self.variant == "attention_cnn":
            if self.mask is None:
                raise ValueError("attention_cnn requires a channel mask")
        elif self.mask is not None:
            raise ValueError(f"variant '{self.variant}' does not accept a mask")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid training hyperparameters")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "n_classes": self.n_classes,
                "mask": self.mask.to_dict() if self.mask else None,
                "learning_rate": self.learning_rate, "epochs": self.epochs,
                "batch_size": self.batch_size, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        mask = d.get("mask")
        return cls(variant=d["variant"], n_classes=d["n_classes"],
                   mask=MaskSpec(mask["name"], tuple(mask["indices"])) if mask else None,
                   learning_rate=d.get("learning_rate", 0.005), epochs=d.get("epochs", 25),
                   batch_size=d.get("batch_size", 64), seed=d.get("seed", 0))


@dataclass
class ModelParams:
    """Trainable tensors plus batch-norm running statistics.

    ``frozen`` names are excluded from optimization (transfer learning).
    ``lda`` holds the fitted discriminant for the non-gradient variant.
    """
    spec: ModelSpec
    params: dict = field(default_factory=dict)
    state: dict = field(default_factory=dict)
    frozen: frozenset = frozenset()
    lda: object = None

    def trainable(self) -> dict:
        return {k: v for k, v in self.params.items() if k not in self.frozen}

    def clone(self) -> "ModelParams":
        cp = ModelParams(self.spec, frozen=self.frozen, lda=self.lda)
        for k, v in self.params.items():
            cp.params[k] = Tensor(v.data.copy(), requires_grad=True)
        for k, rs in self.state.items():
            cp.state[k] = RunningStats(rs.mean.copy(), rs.var.copy())
        return cp


def _uniform(rng, shape, fan_in, dtype):
    limit = math.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-limit, limit, shape).astype(dtype), requires_grad=True)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape, dtype), requires_grad=True)


def _add_conv(mp, name, maps, in_ch, kh, kw, rng, dtype):
    mp.params[f"{name}.w"] = _uniform(rng, (maps, in_ch, kh, kw), in_ch * kh * kw, dtype)
    mp.params[f"{name}.b"] = _zeros(maps, dtype)


def _add_bn(mp, name, maps, dtype):
    mp.params[f"{name}.gamma"] = Tensor(np.ones(maps, dtype), requires_grad=True)
    mp.params[f"{name}.beta"] = _zeros(maps, dtype)
    mp.state[name] = RunningStats.create(maps, dtype)


def _verify_block_chain(height: int) -> int:
    """Recompute the valid-convolution shape chain; any drift is a build failure."""
    c, h, w = 1, height, MODEL_SAMPLES
    for maps, kh, kw, _ in BLOCK_ROWS:
        kh = h if kh is None else kh
        h, w, c = h - kh + 1, w - kw + 1, maps
        if h < 1 or w < 1:
            raise ArchitectureError(f"block shape chain collapsed at kernel ({kh},{kw})")
    if (c, h, w) != (200, 1, 6):
        raise ArchitectureError(f"block output {(c, h, w)} deviates from (200, 1, 6)")
    return c * h * w


def _add_block(mp, prefix, height, rng, dtype) -> int:
    width = _verify_block_chain(height)
    in_ch, cur_h = 1, height
    for i, (maps, kh, kw, _) in enumerate(BLOCK_ROWS, start=1):
        kh = cur_h if kh is None else kh
        _add_conv(mp, f"{prefix}.l{i}.conv", maps, in_ch, kh, kw, rng, dtype)
        _add_bn(mp, f"{prefix}.l{i}.bn", maps, dtype)
        in_ch, cur_h = maps, cur_h - kh + 1
    return width


def _forward_block(mp, prefix, x, training, rng):
    for i, (_, _, _, drop) in enumerate(BLOCK_ROWS, start=1):
        if drop:
            x = dropout(x, DROPOUT_P, training, rng)
        x = conv2d(x, mp.params[f"{prefix}.l{i}.conv.w"], mp.params[f"{prefix}.l{i}.conv.b"])
        x = batch_norm(x, mp.params[f"{prefix}.l{i}.bn.gamma"], mp.params[f"{prefix}.l{i}.bn.beta"],
                       mp.state[f"{prefix}.l{i}.bn"], training)
        x = relu(x)
    return flatten(x)


def _add_head(mp, in_width, n_classes, rng, dtype):
    mp.params["head.w"] = _uniform(rng, (n_classes, in_width), in_width, dtype)
    mp.params["head.b"] = _zeros(n_classes, dtype)


def _add_lstm(mp, prefix, input_size, hidden, rng, dtype):
    mp.params[f"{prefix}.w_ih"] = _uniform(rng, (4 * hidden, input_size), input_size, dtype)
    mp.params[f"{prefix}.w_hh"] = _uniform(rng, (4 * hidden, hidden), hidden, dtype)
    mp.params[f"{prefix}.b_ih"] = _zeros(4 * hidden, dtype)
    mp.params[f"{prefix}.b_hh"] = _zeros(4 * hidden, dtype)


def _lstm_params(mp, prefix) -> LstmLayerParams:
    return LstmLayerParams(mp.params[f"{prefix}.w_ih"], mp.params[f"{prefix}.w_hh"],
                           mp.params[f"{prefix}.b_ih"], mp.params[f"{prefix}.b_hh"])


def build(spec: ModelSpec, rng: np.random.Generator | None = None,
          dtype=np.float32) -> ModelParams:
    """Deterministic parameter construction (same seed, same bits)."""
    rng = rng or np.random.default_rng(spec.seed)
    mp = ModelParams(spec)
    v = spec.variant
    if v == "attention_cnn":
        wa = _add_block(mp, "block_a", MODEL_CHANNELS, rng, dtype)
        wb = _add_block(mp, "block_b", MODEL_CHANNELS, rng, dtype)
        _add_head(mp, wa + wb, spec.n_classes, rng, dtype)
    elif v == "plain_cnn":
        w = _add_block(mp, "block", MODEL_CHANNELS, rng, dtype)
        _add_head(mp, w, spec.n_classes, rng, dtype)
    elif v == "shallow_convnet":
        _add_conv(mp, "conv_t", SHALLOW_MAPS, 1, 1, SHALLOW_TEMPORAL, rng, dtype)
        _add_conv(mp, "conv_s", SHALLOW_MAPS, SHALLOW_MAPS, MODEL_CHANNELS, 1, rng, dtype)
        t_len = MODEL_SAMPLES - SHALLOW_TEMPORAL + 1
        pooled = (t_len - SHALLOW_POOL) // SHALLOW_STRIDE + 1
        _add_head(mp, SHALLOW_MAPS * pooled, spec.n_classes, rng, dtype)
    elif v == "lstm":
        _add_lstm(mp, "lstm0", MODEL_CHANNELS, LSTM_HIDDEN, rng, dtype)
        _add_lstm(mp, "lstm1", LSTM_HIDDEN, LSTM_HIDDEN, rng, dtype)
        _add_head(mp, LSTM_HIDDEN, spec.n_classes, rng, dtype)
    elif v == "lstm_cnn":
        _add_lstm(mp, "lstm0", MODEL_CHANNELS, LSTM_HIDDEN, rng, dtype)
        _add_lstm(mp, "lstm1", LSTM_HIDDEN, LSTM_HIDDEN, rng, dtype)
        w = _add_block(mp, "block", LSTM_HIDDEN, rng, dtype)
        _add_head(mp, w, spec.n_classes, rng, dtype)
    elif v == "lda":
        pass  # fitted, not gradient-trained
    return mp


def _as_input(x) -> Tensor:
    """Accept [N,C,S] or [N,1,C,S] arrays or tensors; return [N,1,C,S] tensor."""
    if isinstance(x, Tensor):
        t = x
    else:
        t = Tensor(np.asarray(x))
    if t.ndim == 3:
        n, c, s = t.shape
        t = t.reshape(n, 1, c, s)
    if t.ndim != 4 or t.shape[1] != 1:
        raise ValueError(f"expected [N, 1, channels, samples] input, got {t.shape}")
    return t


def forward_attention(mp: ModelParams, x, training: bool = False,
                      rng: np.random.Generator | None = None) -> Tensor:
    """Branch A sees the full input, branch B the mask-retained channels."""
    x = _as_input(x)
    feats_a = _forward_block(mp, "block_a", x, training, rng)
    feats_b = _forward_block(mp, "block_b", mask_channels(x, mp.spec.mask.indices),
                             training, rng)
    merged = concat([feats_a, feats_b], axis=1)
    return linear(merged, mp.params["head.w"], mp.params["head.b"])


def forward_plain(mp, x, training=False, rng=None) -> Tensor:
    x = _as_input(x)
    feats = _forward_block(mp, "block", x, training, rng)
    return linear(feats, mp.params["head.w"], mp.params["head.b"])


def forward_shallow(mp, x, training=False, rng=None) -> Tensor:
    """Temporal conv, full-height spatial conv, square, mean pool, log, head."""
    x = _as_input(x)
    x = conv2d(x, mp.params["conv_t.w"], mp.params["conv_t.b"])
    x = conv2d(x, mp.params["conv_s.w"], mp.params["conv_s.b"])
    x = x * x
    x = mean_pool2d(x, (1, SHALLOW_POOL), (1, SHALLOW_STRIDE))
    x = clip_min(x, 1e-6).log()
    return linear(flatten(x), mp.params["head.w"], mp.params["head.b"])


def _as_sequence(x) -> Tensor:
    """[N,1,C,S] input viewed as S time steps of C features."""
    x = _as_input(x)
    n, _, c, s = x.shape
    return x.reshape(n, c, s).transpose(0, 2, 1)


def forward_lstm(mp, x, training=False, rng=None) -> Tensor:
    seq = _as_sequence(x)
    hidden = lstm_stack(seq, [_lstm_params(mp, "lstm0"), _lstm_params(mp, "lstm1")])
    n, t_len, h = hidden.shape
    last = narrow(hidden, 1, t_len - 1, 1).reshape(n, h)
    return linear(last, mp.params["head.w"], mp.params["head.b"])


def forward_lstm_cnn(mp, x, training=False, rng=None) -> Tensor:
    """The hidden sequence [N,T,H] is re-read as an H x T image for the block."""
    seq = _as_sequence(x)
    hidden = lstm_stack(seq, [_lstm_params(mp, "lstm0"), _lstm_params(mp, "lstm1")])
    n, t_len, h = hidden.shape
    img = hidden.transpose(0, 2, 1).reshape(n, 1, h, t_len)
    feats = _forward_block(mp, "block", img, training, rng)
    return linear(feats, mp.params["head.w"], mp.params["head.b"])


_FORWARDS = {
    "attention_cnn": forward_attention,
    "plain_cnn": forward_plain,
    "shallow_convnet": forward_shallow,
    "lstm": forward_lstm,
    "lstm_cnn": forward_lstm_cnn,
}


def forward_logits(mp: ModelParams, x, training: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    if mp.spec.variant == "lda":
        raise ValueError("lda has no gradient forward; use lda_predict")
    return _FORWARDS[mp.spec.variant](mp, x, training=training, rng=rng)

