# src/dsp/mfcc.py
from collections import deque
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dct

from src.dsp.mel import N_BANDS

N_CEPS = 13
FEATURE_DIM = 3 * N_CEPS
LOG_FLOOR = 1e-10
DELTA_REACH = 2


def static_mfcc(band_energies: np.ndarray, n_ceps: int = N_CEPS) -> np.ndarray:
    log_energies = np.log(np.maximum(np.asarray(band_energies, dtype=np.float64), LOG_FLOOR))
    return dct(log_energies, type=2, norm='ortho')[:n_ceps]


def _deltas(window: np.ndarray):
    """First and second order regression over a (5, n_ceps) window."""
    delta = ((window[3] - window[1]) + 2.0 * (window[4] - window[0])) / 10.0
    accel = (2.0 * (window[0] + window[4]) - (window[1] + window[3]) - 2.0 * window[2]) / 7.0
    return delta, accel


def mfcc_with_deltas(band_history: Sequence[np.ndarray], index: Optional[int] = None) -> np.ndarray:
    """39-dim feature for frame `index` of a band-energy history.

    Deltas use a +-2 frame regression window; frames without full context get
    zero delta blocks. `index` defaults to the centre frame.
    """
    statics = np.stack([static_mfcc(b) for b in band_history])
    if index is None:
        index = len(statics) // 2
    feature = np.zeros(FEATURE_DIM)
    feature[:N_CEPS] = statics[index]
    if index - DELTA_REACH >= 0 and index + DELTA_REACH < len(statics):
        delta, accel = _deltas(statics[index - DELTA_REACH:index + DELTA_REACH + 1])
        feature[N_CEPS:2 * N_CEPS] = delta
        feature[2 * N_CEPS:] = accel
    return feature


class MfccExtractor:
    """Streaming 39-dim MFCC with two frames of look-ahead.

    `push(bands)` for frame t returns the feature of frame t-2. The history is
    pre-filled with silence, so the first two outputs are the floor pattern.
    """

    latency = DELTA_REACH

    def __init__(self, n_bands: int = N_BANDS):
        self.n_bands = n_bands
        self.reset()

    def reset(self):
        floor = static_mfcc(np.zeros(self.n_bands))
        self._statics = deque([floor] * (2 * DELTA_REACH + 1), maxlen=2 * DELTA_REACH + 1)

    def push(self, band_energies: np.ndarray) -> np.ndarray:
        self._statics.append(static_mfcc(band_energies))
        window = np.stack(self._statics)
        delta, accel = _deltas(window)
        return np.concatenate([window[DELTA_REACH], delta, accel])
