# src/training/evaluation.py
import copy
from typing import Callable, Dict, Optional

import torch

from src.data.preprocessing import IGNORE_INDEX
from src.dsp.mel import N_BANDS


def delay_accuracy(outputs, targets, tolerance: int = 0) -> float:
    """Share of scored frames whose argmax category is within `tolerance` of the target."""
    predicted = outputs["logits"].argmax(dim=-1)
    scored = targets != IGNORE_INDEX
    if not scored.any():
        return 0.0
    hits = (predicted - targets).abs() <= tolerance
    return float((hits & scored).sum().item() / scored.sum().item())


def dtd_accuracy(outputs, targets) -> float:
    """Near-end activity accuracy at probability 0.5 over masked-in frames."""
    predicted = (outputs["output"][..., N_BANDS] > 0.5).float()
    mask = targets["mask"]
    if mask.sum() <= 0:
        return 0.0
    return float((((predicted == targets["dtd"]).float()) * mask).sum().item() / mask.sum().item())


def accuracy(outputs, targets) -> float:
    if isinstance(targets, dict):
        return dtd_accuracy(outputs, targets)
    return delay_accuracy(outputs, targets)


def evaluate(model, dataloader, criterion) -> Dict[str, float]:
    """Mean loss and accuracy over a loader, weighted by batch."""
    net = model.net
    net.eval()
    total_loss, total_acc, batches = 0.0, 0.0, 0
    with torch.no_grad():
        for inputs, targets in dataloader:
            outputs = net(inputs)
            total_loss += criterion(outputs, targets).item()
            total_acc += accuracy(outputs, targets)
            batches += 1
    if batches == 0:
        return {"loss": float("nan"), "accuracy": float("nan")}
    return {"loss": total_loss / batches, "accuracy": total_acc / batches}


def _mse_to_targets(outputs, targets):
    return 0.5 * ((outputs["output"] - targets) ** 2).sum()


def gradient_check(model, inputs: torch.Tensor, targets: torch.Tensor, eps: float = 1e-4,
                   loss_fn: Optional[Callable] = None, floor: float = 1e-6) -> Dict[str, float]:
    """Compare autograd gradients with central finite differences, in double precision.

    Inputs are (batch, time, input_dim), so recurrent layers are checked through
    time. Returns the largest relative error per parameter, where the relative
    error of one entry is |numeric - analytic| / max(|numeric| + |analytic|, floor).
    """
    net = copy.deepcopy(model.net).double()
    loss_fn = loss_fn or _mse_to_targets
    inputs = inputs.double()
    targets = targets.double()

    net.zero_grad()
    loss_fn(net(inputs), targets).backward()
    analytic = {name: p.grad.detach().clone() for name, p in net.named_parameters()}

    errors = {}
    with torch.no_grad():
        for name, param in net.named_parameters():
            flat = param.view(-1)
            grad = analytic[name].view(-1)
            worst = 0.0
            for i in range(flat.numel()):
                original = flat[i].item()
                flat[i] = original + eps
                plus = loss_fn(net(inputs), targets).item()
                flat[i] = original - eps
                minus = loss_fn(net(inputs), targets).item()
                flat[i] = original
                numeric = (plus - minus) / (2 * eps)
                diff = abs(numeric - grad[i].item())
                worst = max(worst, diff / max(abs(numeric) + abs(grad[i].item()), floor))
            errors[name] = worst
    return errors
