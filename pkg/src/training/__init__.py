from .trainer import TrainConfig, Trainer, train
from .loss import DelayLoss, SuppressionLoss
from .optimization import get_optimizer_and_scheduler

__all__ = [
    'TrainConfig',
    'Trainer',
    'train',
    'DelayLoss',
    'SuppressionLoss',
    'get_optimizer_and_scheduler',
]
