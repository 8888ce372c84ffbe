# src/training/optimization.py
import torch.optim as optim
from transformers import get_constant_schedule_with_warmup, get_linear_schedule_with_warmup

from src.utils.exceptions import ConfigError


def get_optimizer_and_scheduler(parameters, optimizer="adam", lr=1e-3, warmup_steps=0, total_steps=10000,
                                schedule="constant", momentum=0.9):
    if optimizer == "adam":
        opt = optim.Adam(parameters, lr=lr, betas=(0.9, 0.999), eps=1e-8)
    elif optimizer == "sgd":
        opt = optim.SGD(parameters, lr=lr, momentum=momentum)
    else:
        raise ConfigError(f"unknown optimizer '{optimizer}', expected adam or sgd")

    if schedule == "linear":
        scheduler = get_linear_schedule_with_warmup(
            opt,
            num_warmup_steps=warmup_steps,
            num_training_steps=max(total_steps, 1)
        )
    elif schedule == "constant":
        scheduler = get_constant_schedule_with_warmup(opt, num_warmup_steps=warmup_steps)
    else:
        raise ConfigError(f"unknown schedule '{schedule}', expected constant or linear")
    return opt, scheduler
