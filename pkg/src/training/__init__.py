"""Losses, augmentation, schedule, the training loop and KITTI-protocol evaluation."""

from src.training.augment import AugmentConfig, augment
from src.training.evaluation import EvalReport, evaluate, evaluate_ap
from src.training.losses import LossBreakdown, detection_loss
from src.training.schedule import lr_schedule
from src.training.trainer import Trainer, load_model, predict_scenes, train_step

__all__ = [
    "AugmentConfig",
    "EvalReport",
    "LossBreakdown",
    "Trainer",
    "augment",
    "detection_loss",
    "evaluate",
    "evaluate_ap",
    "load_model",
    "lr_schedule",
    "predict_scenes",
    "train_step",
]
