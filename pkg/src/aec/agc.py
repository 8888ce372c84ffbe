# src/aec/agc.py
"""Frame-based automatic gain control with sigmoid gain ramps.

Gains come from the frame mean and peak amplitudes, are smoothed across
frames and capped so the peak never exceeds the target maximum. Gain changes
are spread over M samples with a sigmoid: a rising gain ramps the head of the
current frame, a falling gain re-ramps the tail of the previous frame, which
is why the controller holds one frame back.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import expit

from src.dsp.frames import FRAME_SIZE, check_frame
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class AgcConfig:
    target_mean: float = 0.25
    target_max: float = 0.9
    alpha: float = 0.9
    ramp_length: int = FRAME_SIZE
    smooth: bool = True
    silence_threshold: float = 1e-6
    frame_size: int = FRAME_SIZE

    def validate(self):
        if not 0.0 < self.target_mean <= self.target_max <= 1.0:
            raise ConfigError(
                f"AGC targets need 0 < mean <= max <= 1, got mean={self.target_mean} max={self.target_max}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"AGC alpha must be in [0, 1], got {self.alpha}")
        if not 1 <= self.ramp_length <= self.frame_size:
            raise ConfigError(f"AGC ramp length must be in [1, {self.frame_size}], got {self.ramp_length}")


class AgcState:
    def __init__(self, frame_size: int = FRAME_SIZE):
        self.gain = 1.0
        self.pending_frame: Optional[np.ndarray] = None
        self.pending_gains: Optional[np.ndarray] = None
        self.saturations = 0
        self.last_emitted_gain: Optional[float] = None
        self.max_jump = 0.0
        self.last_gains = np.ones(frame_size)


def raw_frame_gain(frame: np.ndarray, cfg: AgcConfig) -> Tuple[float, float]:
    """(min(mean-target gain, peak gain), peak gain) of a non-silent frame."""
    magnitude = np.abs(np.asarray(frame, dtype=np.float64))
    g_mean = cfg.target_mean / max(float(np.mean(magnitude)), 1e-30)
    g_peak = cfg.target_max / max(float(np.max(magnitude)), 1e-30)
    return min(g_mean, g_peak), g_peak


def frame_gain(frame: np.ndarray, cfg: AgcConfig, state: AgcState) -> Tuple[float, float]:
    """Smoothed and peak-guarded gain for the frame; silent frames hold the previous gain."""
    if float(np.max(np.abs(frame))) < cfg.silence_threshold:
        return state.gain, float("inf")
    g_raw, g_peak = raw_frame_gain(frame, cfg)
    g = cfg.alpha * state.gain + (1.0 - cfg.alpha) * g_raw
    return min(g, g_peak), g_peak


def sigmoid_smooth(g_prev: float, g_curr: float, length: int) -> np.ndarray:
    """ramp[m] = g_prev + (g_curr - g_prev) * sigmoid(-5 + 10 m / length), m = 0..length-1."""
    if length < 1:
        raise ConfigError(f"sigmoid ramp length must be >= 1, got {length}")
    m = np.arange(length, dtype=np.float64)
    return g_prev + (g_curr - g_prev) * expit(-5.0 + 10.0 * m / length)


def max_gain_jump(gains: np.ndarray) -> float:
    gains = np.asarray(gains, dtype=np.float64)
    return float(np.max(np.abs(np.diff(gains)))) if len(gains) > 1 else 0.0


def _emit(state: AgcState, cfg: AgcConfig) -> np.ndarray:
    if state.pending_frame is None:
        return np.zeros(cfg.frame_size)
    gains = state.pending_gains
    if state.last_emitted_gain is not None:
        state.max_jump = max(state.max_jump, abs(gains[0] - state.last_emitted_gain))
    state.max_jump = max(state.max_jump, max_gain_jump(gains))
    state.last_emitted_gain = float(gains[-1])
    out = state.pending_frame * gains
    clipped = np.clip(out, -1.0, 1.0)
    saturated = int(np.count_nonzero(clipped != out))
    if saturated:
        state.saturations += saturated
        logger.debug(f"AGC clamped {saturated} samples")
    state.last_gains = gains.copy()
    return clipped


def apply_agc(frame, state: AgcState, cfg: AgcConfig) -> np.ndarray:
    """Buffer `frame` and emit the previous one with its final gain curve (zeros on the first call)."""
    frame = check_frame(frame, cfg.frame_size)
    g_prev = state.gain
    g_curr, _ = frame_gain(frame, cfg, state)
    gains = np.full(cfg.frame_size, g_curr)
    if cfg.smooth and g_curr != g_prev:
        ramp = sigmoid_smooth(g_prev, g_curr, cfg.ramp_length)
        if g_curr > g_prev:
            gains[:cfg.ramp_length] = ramp
        elif state.pending_gains is not None:
            tail = state.pending_gains[-cfg.ramp_length:]
            state.pending_gains[-cfg.ramp_length:] = np.minimum(tail, ramp)
    out = _emit(state, cfg)
    state.pending_frame, state.pending_gains, state.gain = frame, gains, g_curr
    return out


def flush_agc(state: AgcState, cfg: AgcConfig) -> np.ndarray:
    out = _emit(state, cfg)
    state.pending_frame = state.pending_gains = None
    return out


class AutomaticGainControl:
    """Streaming AGC with one frame of look-ahead.

    `process(frame)` returns the previous frame with its final gains applied
    (zeros on the first call); `flush()` returns the last buffered frame.
    """

    latency = 1

    def __init__(self, config: Optional[AgcConfig] = None):
        self.config = config or AgcConfig()
        self.config.validate()
        self.reset()

    def reset(self):
        self.state = AgcState(self.config.frame_size)

    @property
    def last_gains(self) -> np.ndarray:
        return self.state.last_gains

    def process(self, frame) -> np.ndarray:
        return apply_agc(frame, self.state, self.config)

    def flush(self) -> np.ndarray:
        return flush_agc(self.state, self.config)

    def process_stream(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Whole-stream helper; returns (output aligned to the input, per-sample gains)."""
        K = self.config.frame_size
        n = len(x)
        padded = np.zeros(-(-n // K) * K)
        padded[:n] = x
        outputs, gains = [], []
        for start in range(0, len(padded), K):
            out = self.process(padded[start:start + K])
            if start:
                outputs.append(out)
                gains.append(self.last_gains)
        outputs.append(self.flush())
        gains.append(self.last_gains)
        return np.concatenate(outputs)[:n], np.concatenate(gains)[:n]
