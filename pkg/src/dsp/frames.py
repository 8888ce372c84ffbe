# src/dsp/frames.py
"""Stream constants and frame validation.

An audio frame is a float64 array of FRAME_SIZE samples; a spectral frame is
the complex one-sided spectrum (N_BINS values) of a 2*FRAME_SIZE block.
"""
import numpy as np

from src.utils.exceptions import InvalidFrameError, InvalidSpectrumError

SAMPLE_RATE = 16000
FRAME_SIZE = 160
FFT_SIZE = 2 * FRAME_SIZE
N_BINS = FRAME_SIZE + 1
FRAME_MS = 1000 * FRAME_SIZE // SAMPLE_RATE


def check_frame(frame, frame_size: int = FRAME_SIZE) -> np.ndarray:
    samples = np.asarray(frame, dtype=np.float64)
    if samples.ndim != 1 or samples.shape[0] != frame_size:
        raise InvalidFrameError(f"frame has shape {samples.shape}, expected ({frame_size},)")
    return samples


def check_spectrum(spectrum, n_bins: int = N_BINS, tol: float = 1e-9) -> np.ndarray:
    bins = np.asarray(spectrum, dtype=np.complex128)
    if bins.ndim != 1 or bins.shape[0] != n_bins:
        raise InvalidSpectrumError(f"spectrum has shape {bins.shape}, expected ({n_bins},)")
    scale = max(1.0, float(np.max(np.abs(bins))))
    if abs(bins[0].imag) > tol * scale or abs(bins[-1].imag) > tol * scale:
        raise InvalidSpectrumError(
            f"DC/Nyquist bins must be real, got imag {bins[0].imag:.3g} and {bins[-1].imag:.3g}")
    return bins


def frame_signal(x: np.ndarray, frame_size: int = FRAME_SIZE) -> np.ndarray:
    """Split a stream into (n_frames, frame_size), zero-padding the last frame."""
    x = np.asarray(x, dtype=np.float64)
    n_frames = -(-len(x) // frame_size)
    padded = np.zeros(n_frames * frame_size)
    padded[:len(x)] = x
    return padded.reshape(n_frames, frame_size)


def n_frames(n_samples: int, frame_size: int = FRAME_SIZE) -> int:
    return -(-n_samples // frame_size)
