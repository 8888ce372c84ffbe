# src/aec/res.py
"""Residual echo suppression: training targets, network features, NLP gain and band masks."""
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from src.dsp.frames import FRAME_SIZE
from src.dsp.mel import MelFilterbank, default_filterbank
from src.dsp.mfcc import MfccExtractor
from src.dsp.stft import StftAnalyzer

GAIN_FLOOR = 1e-10
_TINY = 1e-20


@dataclass
class ResConfig:
    nlp_smoothing: float = 0.93
    nlp_bias: float = 0.05
    dtd_threshold_dbfs: float = -50.0


class DtdLabel(NamedTuple):
    far_active: int
    near_active: int


def band_gains_from_energies(speech_energy: np.ndarray, error_energy: np.ndarray, clip: bool = True) -> np.ndarray:
    gains = np.sqrt(np.maximum(speech_energy, GAIN_FLOOR) / np.maximum(error_energy, GAIN_FLOOR))
    return np.clip(gains, 0.0, 1.0) if clip else gains


def target_band_gains(near_clean: np.ndarray, error: np.ndarray, clip: bool = True,
                      filterbank: Optional[MelFilterbank] = None) -> np.ndarray:
    """sqrt(E_s / E_e) per mel band, clipped to [0, 1] for training targets."""
    fb = filterbank or default_filterbank()
    return band_gains_from_energies(fb.band_energies(near_clean), fb.band_energies(error), clip)


def frame_dbfs(frame: np.ndarray) -> float:
    rms = float(np.sqrt(np.mean(np.asarray(frame, dtype=np.float64) ** 2)))
    return 20.0 * np.log10(max(rms, 1e-12))


def target_dtd(far_frame: np.ndarray, near_clean_frame: np.ndarray, threshold_dbfs: float = -50.0) -> DtdLabel:
    return DtdLabel(int(frame_dbfs(far_frame) > threshold_dbfs), int(frame_dbfs(near_clean_frame) > threshold_dbfs))


class FeatureState:
    """Per-stream MFCC state for the far and error signals (two frames of look-ahead)."""

    latency = MfccExtractor.latency

    def __init__(self, frame_size: int = FRAME_SIZE, filterbank: Optional[MelFilterbank] = None):
        self.filterbank = filterbank or default_filterbank()
        self.far_stft = StftAnalyzer(frame_size)
        self.error_stft = StftAnalyzer(frame_size)
        self.far_mfcc = MfccExtractor(self.filterbank.n_bands)
        self.error_mfcc = MfccExtractor(self.filterbank.n_bands)

    def push_spectra(self, far_spectrum: np.ndarray, error_spectrum: np.ndarray) -> np.ndarray:
        far_feature = self.far_mfcc.push(self.filterbank.band_energies(far_spectrum))
        error_feature = self.error_mfcc.push(self.filterbank.band_energies(error_spectrum))
        return np.concatenate([far_feature, error_feature])


def extract_features(far_frame: np.ndarray, error_frame: np.ndarray, state: FeatureState) -> np.ndarray:
    """78-dim [mfcc(far); mfcc(error)] of the frame two steps back."""
    return state.push_spectra(state.far_stft.process(far_frame), state.error_stft.process(error_frame))


class NlpState:
    """Smoothed auto/cross spectra for the coherence suppressor."""

    def __init__(self, n_bins: int = FRAME_SIZE + 1, config: Optional[ResConfig] = None):
        self.config = config or ResConfig()
        self.s_far = np.zeros(n_bins)
        self.s_near = np.zeros(n_bins)
        self.s_error = np.zeros(n_bins)
        self.s_far_near = np.zeros(n_bins, dtype=np.complex128)
        self.s_near_error = np.zeros(n_bins, dtype=np.complex128)

    def update(self, far: np.ndarray, near: np.ndarray, error: np.ndarray):
        a = self.config.nlp_smoothing
        self.s_far = a * self.s_far + (1 - a) * np.abs(far) ** 2
        self.s_near = a * self.s_near + (1 - a) * np.abs(near) ** 2
        self.s_error = a * self.s_error + (1 - a) * np.abs(error) ** 2
        self.s_far_near = a * self.s_far_near + (1 - a) * far * np.conj(near)
        self.s_near_error = a * self.s_near_error + (1 - a) * near * np.conj(error)

    def coherences(self) -> Tuple[np.ndarray, np.ndarray]:
        """(near/error, near/far) magnitude-squared coherence, each in [0, 1]; undefined bins read 0."""
        near_error = np.abs(self.s_near_error) ** 2 / np.maximum(self.s_near * self.s_error, _TINY)
        near_far = np.abs(self.s_far_near) ** 2 / np.maximum(self.s_near * self.s_far, _TINY)
        return np.clip(near_error, 0.0, 1.0), np.clip(near_far, 0.0, 1.0)


def nlp_gain(state: NlpState, far: np.ndarray, near: np.ndarray, error: np.ndarray) -> np.ndarray:
    """Per-bin coherence gain; bins dominated by far-end coherence go to zero.

    Bins with no near or error energy have no evidence of echo and get gain 1.
    """
    state.update(far, near, error)
    coh_ne, coh_nf = state.coherences()
    gain = np.clip(coh_ne * (1.0 - coh_nf) + coh_ne * state.config.nlp_bias, 0.0, 1.0)
    silent = (state.s_near <= _TINY) | (state.s_error <= _TINY)
    gain[silent] = 1.0
    return gain


def suppress_frame(error: np.ndarray, band_gains: np.ndarray,
                   filterbank: Optional[MelFilterbank] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Interpolate band gains to a per-bin mask and apply it; returns (mask, suppressed)."""
    fb = filterbank or default_filterbank()
    mask = np.clip(fb.band_to_bins(np.clip(band_gains, 0.0, 1.0)), 0.0, 1.0)
    return mask, mask * error


def smooth_with_nlp(mask: np.ndarray, nlp: np.ndarray) -> np.ndarray:
    """Network mask combined with the NLP gain as a per-bin geometric mean."""
    return np.sqrt(np.clip(mask, 0.0, 1.0) * np.clip(nlp, 0.0, 1.0))
