"""Extreme learning machines and a mixture of ELM experts with a trainable ELM gate."""

__version__ = "0.1.0"

from .data import Dataset, generate_twonorm, load_csv, stratified_folds
from .elm import ElmConfig, ElmModel, init_random
from .eval import cost_estimate, evaluate, precision_recall
from .mixture import MeetgConfig, MeetgModel, gating_target, load_model, predict_meetg, save_model, train_meetg

__all__ = [
    "Dataset",
    "ElmConfig",
    "ElmModel",
    "MeetgConfig",
    "MeetgModel",
    "cost_estimate",
    "evaluate",
    "gating_target",
    "generate_twonorm",
    "init_random",
    "load_csv",
    "load_model",
    "precision_recall",
    "predict_meetg",
    "save_model",
    "stratified_folds",
    "train_meetg",
]
