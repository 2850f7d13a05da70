from .tensor import Tensor, no_grad, is_grad_enabled, unbroadcast
from .ops import (
    conv2d, relu, sigmoid, clip_min, linear, flatten, concat, narrow,
    dropout, mask_channels, mean_pool2d, RunningStats, batch_norm, softmax,
    softmax_cross_entropy, LstmLayerParams, lstm_cell, lstm_layer, lstm_stack,
)
from .adam import AdamState, adam_step, Adam
from .gradcheck import GradCheckResult, gradient_check, run_battery
