from .model import ModelConfig, SegModel, NonFiniteActivation, ShapeMismatch
from .loss import LossConfig, LossBreakdown, composite_loss, loss_and_grad, softmax, EmptyBatch, NonFiniteLoss
from .checkpoint import checkpoint_bytes, save_checkpoint, load_into, peek_checkpoint, VersionMismatch, HashMismatch, TruncatedFile
from .train import TrainConfig, TrainResult, train_model, predict_labels, evaluate_clouds, TooFewClouds

__all__ = [
    "ModelConfig", "SegModel", "NonFiniteActivation", "ShapeMismatch",
    "LossConfig", "LossBreakdown", "composite_loss", "loss_and_grad", "softmax",
    "EmptyBatch", "NonFiniteLoss",
    "checkpoint_bytes", "save_checkpoint", "load_into", "peek_checkpoint",
    "VersionMismatch", "HashMismatch", "TruncatedFile",
    "TrainConfig", "TrainResult", "train_model", "predict_labels",
    "evaluate_clouds", "TooFewClouds",
]
