from .checkpoint import ModelCheckpoint
from .config import TrainConfig, desk_adapt_config, desk_category_config, desk_ensemble_config, lr_schedule
from .ema import ema_update
from .nets import PRESETS, SegNet, build_model, count_parameters
from .train import pixel_cross_entropy, predict, predict_scores, train_selftrain, train_supervised

__all__ = [
    "ModelCheckpoint",
    "PRESETS",
    "SegNet",
    "TrainConfig",
    "build_model",
    "count_parameters",
    "desk_adapt_config",
    "desk_category_config",
    "desk_ensemble_config",
    "ema_update",
    "lr_schedule",
    "pixel_cross_entropy",
    "predict",
    "predict_scores",
    "train_selftrain",
    "train_supervised",
]
