from .losses import DegenerateInputError, nll_loss, nt_xent_loss, total_loss
from .network import EncoderConfig, InputError, ModeError, Network
from .train import TrainConfig, Trainer, clip_by_global_norm, global_norm, train_epochs

__all__ = [
    "DegenerateInputError",
    "EncoderConfig",
    "InputError",
    "ModeError",
    "Network",
    "TrainConfig",
    "Trainer",
    "clip_by_global_norm",
    "global_norm",
    "nll_loss",
    "nt_xent_loss",
    "total_loss",
    "train_epochs",
]
