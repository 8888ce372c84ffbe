# src/aec/mdf.py
"""Multidelay block frequency-domain adaptive filter.

Overlap-save convolution over N weight partitions of K taps each, with a
per-bin power-normalised block LMS update and the gradient constraint that
keeps the partitions linear (not circular) convolutions.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.dsp.frames import FRAME_SIZE, check_frame
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class MdfConfig:
    frame_size: int = FRAME_SIZE
    n_blocks: int = 32
    step_size: float = 0.25
    power_smoothing: float = 0.9
    regularization: float = 1e-6

    def validate(self):
        if not 0.0 < self.step_size <= 1.0:
            raise ConfigError(f"mdf step_size must be in (0, 1], got {self.step_size}")
        if self.n_blocks < 1 or self.frame_size < 1:
            raise ConfigError("mdf n_blocks and frame_size must be positive")
        if not 0.0 <= self.power_smoothing < 1.0:
            raise ConfigError(f"mdf power_smoothing must be in [0, 1), got {self.power_smoothing}")


class MdfFilter:
    """One adaptive echo-path model.

    State: `weights` (N, K+1) frequency-domain partitions, `far_history`
    (N, K+1) spectra of the last N far blocks with index 0 the newest, and the
    per-bin far power estimate used for normalisation.
    """

    def __init__(self, config: Optional[MdfConfig] = None):
        self.config = config or MdfConfig()
        self.config.validate()
        self.frame_size = self.config.frame_size
        self.n_blocks = self.config.n_blocks
        self.reset()

    def reset(self):
        n_bins = self.frame_size + 1
        self.weights = np.zeros((self.n_blocks, n_bins), dtype=np.complex128)
        self.far_history = np.zeros((self.n_blocks, n_bins), dtype=np.complex128)
        self.power = np.zeros(n_bins)
        self._far_previous = np.zeros(self.frame_size)
        self._excited = False
        self.frames_adapted = 0

    @property
    def regularization(self) -> float:
        return self.config.regularization * float(np.mean(self.power)) + 1e-30

    def process(self, far_frame, near_frame, adapt: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """Filter one frame; returns (echo_estimate, error)."""
        K = self.frame_size
        far = check_frame(far_frame, K)
        near = check_frame(near_frame, K)

        self.far_history = np.roll(self.far_history, 1, axis=0)
        self.far_history[0] = np.fft.rfft(np.concatenate([self._far_previous, far]))
        self._far_previous = far.copy()

        echo = np.fft.irfft(np.sum(self.weights * self.far_history, axis=0), 2 * K)[K:]
        error = near - echo

        current_power = np.abs(self.far_history[0]) ** 2
        if np.any(current_power > 0.0):
            scaled = 0.5 * self.n_blocks * current_power
            if not self._excited:
                self.power[:] = np.mean(scaled)
                self._excited = True
            else:
                a = self.config.power_smoothing
                self.power = a * self.power + (1.0 - a) * scaled

        if adapt and self._excited and np.any(self.far_history != 0.0):
            self._adapt(error)
        return echo, error

    def _adapt(self, error: np.ndarray):
        K = self.frame_size
        delta = self.regularization
        self.power = np.maximum(self.power, delta)
        error_spectrum = np.fft.rfft(np.concatenate([np.zeros(K), error]))
        gradient = np.conj(self.far_history) * error_spectrum / (self.power + delta)
        constrained = np.fft.irfft(gradient, 2 * K, axis=1)
        constrained[:, K:] = 0.0
        self.weights += self.config.step_size * np.fft.rfft(constrained, axis=1)
        self.frames_adapted += 1

    def block_energies(self) -> np.ndarray:
        return np.sum(np.abs(self.weights) ** 2, axis=1)

    def impulse_response(self, taps: Optional[int] = None) -> np.ndarray:
        """Time-domain estimate: first K samples of each partition, concatenated."""
        parts = np.fft.irfft(self.weights, 2 * self.frame_size, axis=1)[:, :self.frame_size]
        response = parts.reshape(-1)
        return response if taps is None else response[:taps]

    def process_stream(self, far: np.ndarray, near: np.ndarray, adapt: bool = True) -> np.ndarray:
        """Run whole streams (length a multiple of K) and return the error stream."""
        K = self.frame_size
        if len(far) != len(near) or len(far) % K:
            raise ValueError(f"streams must share a length divisible by {K}")
        out = np.empty(len(near))
        for start in range(0, len(far), K):
            _, out[start:start + K] = self.process(far[start:start + K], near[start:start + K], adapt)
        return out


def mdf_process(mdf: MdfFilter, far_frame, near_frame, adapt: bool = True):
    return mdf.process(far_frame, near_frame, adapt)


def block_energies(mdf: MdfFilter) -> np.ndarray:
    return mdf.block_energies()
