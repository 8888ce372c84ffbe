# src/dsp/stft.py
import numpy as np
from scipy.signal import get_window

from src.dsp.frames import FRAME_SIZE, check_frame, check_spectrum, frame_signal


def sqrt_hann(length: int) -> np.ndarray:
    """Square-root periodic Hann; its square overlap-adds to one at 50% hop."""
    return np.sqrt(np.maximum(get_window('hann', length, fftbins=True), 0.0))


def analyze_block(previous: np.ndarray, frame: np.ndarray, window: np.ndarray) -> np.ndarray:
    """One-sided spectrum of the windowed block [previous, frame] with real DC and Nyquist bins."""
    spectrum = np.fft.rfft(np.concatenate([previous, frame]) * window)
    spectrum[0] = spectrum[0].real
    spectrum[-1] = spectrum[-1].real
    return spectrum


class StftAnalyzer:
    """Streaming analysis: each call transforms [previous frame, current frame]."""

    def __init__(self, frame_size: int = FRAME_SIZE):
        self.frame_size = frame_size
        self.window = sqrt_hann(2 * frame_size)
        self.reset()

    def reset(self):
        self._previous = np.zeros(self.frame_size)

    def block(self, frame) -> np.ndarray:
        """Windowed block the next `process` call would transform (state untouched)."""
        frame = check_frame(frame, self.frame_size)
        return np.concatenate([self._previous, frame]) * self.window

    def process(self, frame) -> np.ndarray:
        frame = check_frame(frame, self.frame_size)
        spectrum = analyze_block(self._previous, frame, self.window)
        self._previous = frame.copy()
        return spectrum


class StftSynthesizer:
    """Streaming overlap-add synthesis; output at step t reconstructs input frame t-1."""

    def __init__(self, frame_size: int = FRAME_SIZE):
        self.frame_size = frame_size
        self.window = sqrt_hann(2 * frame_size)
        self.reset()

    def reset(self):
        self._tail = np.zeros(self.frame_size)

    def process(self, spectrum) -> np.ndarray:
        spectrum = check_spectrum(spectrum, self.frame_size + 1)
        block = np.fft.irfft(spectrum, 2 * self.frame_size) * self.window
        out = self._tail + block[:self.frame_size]
        self._tail = block[self.frame_size:].copy()
        return out


def stft(frame, analysis_state: StftAnalyzer) -> np.ndarray:
    return analysis_state.process(frame)


def istft(spectrum, synthesis_state: StftSynthesizer) -> np.ndarray:
    return synthesis_state.process(spectrum)


def spectral_energy(spectrum: np.ndarray) -> float:
    """Time-domain energy of the block a one-sided spectrum came from (Parseval)."""
    power = np.abs(spectrum) ** 2
    fft_size = 2 * (len(spectrum) - 1)
    return float((power[0] + power[-1] + 2.0 * np.sum(power[1:-1])) / fft_size)


def stft_stream(x: np.ndarray, frame_size: int = FRAME_SIZE) -> np.ndarray:
    """Analyse a whole stream frame by frame, shape (n_frames, frame_size + 1)."""
    analyzer = StftAnalyzer(frame_size)
    return np.stack([analyzer.process(f) for f in frame_signal(x, frame_size)])
