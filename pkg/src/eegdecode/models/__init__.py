from .networks import (
    VARIANTS, ModelSpec, ModelParams, ArchitectureError, build,
    forward_logits, forward_attention, forward_plain, forward_shallow,
    forward_lstm, forward_lstm_cnn,
)
from .lda import LdaModel, lda_fit, lda_predict, lda_scores
from .training import (
    TrainingDivergedError, train_model, predict, predict_logits,
    evaluate_loss, transfer_adapt, save_model, load_model,
)
