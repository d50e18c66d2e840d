"""Edge-aware graph attention network with exact gradients and local training."""

from .checkpoint import load_params, save_params
from .model import (
    attention_coefficients,
    gat_layer_forward,
    gradient,
    local_loss,
    loss_and_gradient,
    model_forward,
    model_logits,
    representations,
)
from .params import GATLayerParams, Hyperparams, ModelParams, ModelSpec, init_params
from .train import AdamState, LocalData, TrainReport, adam_step, evaluate_loss, local_train
from .view import GraphView, build_view, standardize
