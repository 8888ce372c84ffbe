# src/data/augmentation.py
"""Loudspeaker nonlinearities applied to the far-end signal before the echo path."""
import numpy as np

from src.utils.exceptions import ConfigError

NONLINEARITIES = ("none", "clip", "sigmoid")
CLIP_RATIO = 0.8
SIGMOID_GAIN = 0.5
SIGMOID_SLOPE = 4.0


def hard_clip(x: np.ndarray, ratio: float = CLIP_RATIO) -> np.ndarray:
    """Clip at `ratio` times the peak magnitude."""
    x = np.asarray(x, dtype=np.float64)
    limit = ratio * float(np.max(np.abs(x))) if x.size else 0.0
    return np.clip(x, -limit, limit)


def soft_sigmoid(x: np.ndarray, gain: float = SIGMOID_GAIN, slope: float = SIGMOID_SLOPE) -> np.ndarray:
    """gain * (2 / (1 + exp(-slope x)) - 1)."""
    x = np.asarray(x, dtype=np.float64)
    return gain * np.tanh(0.5 * slope * x)


def apply_nonlinearity(x: np.ndarray, kind: str = "none") -> np.ndarray:
    if kind == "none":
        return np.asarray(x, dtype=np.float64)
    if kind == "clip":
        return hard_clip(x)
    if kind == "sigmoid":
        return soft_sigmoid(x)
    raise ConfigError(f"unknown nonlinearity '{kind}', expected one of {NONLINEARITIES}")
