from .model import VaeModel, MlpTrunk, init_model, load_model, save_model, encode, decode
from .objective import (
    chol_matrix,
    elbo_loss,
    kl_to_standard_normal,
    reconstruction_loglik,
    reparameterise,
)
from .schedules import kl_weight_schedule, lr_schedule
from .adam import Adam
from .train import TrainConfig, TrainLogRecord, train

__all__ = [
    "VaeModel",
    "MlpTrunk",
    "init_model",
    "load_model",
    "save_model",
    "encode",
    "decode",
    "chol_matrix",
    "elbo_loss",
    "kl_to_standard_normal",
    "reconstruction_loglik",
    "reparameterise",
    "kl_weight_schedule",
    "lr_schedule",
    "Adam",
    "TrainConfig",
    "TrainLogRecord",
    "train",
]
