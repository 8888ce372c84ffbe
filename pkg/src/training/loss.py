# src/training/loss.py
import torch
import torch.nn as nn
import torch.nn.functional as F

from src.data.preprocessing import IGNORE_INDEX
from src.dsp.mel import N_BANDS


class DelayLoss(nn.Module):
    """Per-frame cross-entropy over delay categories; frames labelled IGNORE_INDEX do not count."""

    def __init__(self):
        super(DelayLoss, self).__init__()
        self.cross_entropy = nn.CrossEntropyLoss(ignore_index=IGNORE_INDEX)

    def forward(self, outputs, targets):
        logits = outputs["logits"]
        return self.cross_entropy(logits.reshape(-1, logits.size(-1)), targets.reshape(-1))


class SuppressionLoss(nn.Module):
    def __init__(self, alpha=0.7):
        super(SuppressionLoss, self).__init__()
        self.alpha = alpha  # weight of the band-gain term; 1 - alpha weights near-end activity

    def forward(self, outputs, targets):
        gains = outputs["output"][..., :N_BANDS]
        dtd_logit = outputs["logits"][..., N_BANDS]
        mask = targets["mask"]
        weight = mask.sum().clamp(min=1.0)

        gain_loss = (((gains - targets["gains"]) ** 2).mean(dim=-1) * mask).sum() / weight
        dtd_loss = (F.binary_cross_entropy_with_logits(dtd_logit, targets["dtd"], reduction="none") * mask).sum() / weight

        return self.alpha * gain_loss + (1 - self.alpha) * dtd_loss
