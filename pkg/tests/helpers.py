# tests/helpers.py
"""Reference implementations and signal makers shared by the test modules."""
import os
import unittest

import numba
import numpy as np
from scipy.signal import correlate, lfilter

from src.data.corpus import Corpus, colored_noise, synthetic_utterance
from src.dsp.frames import FRAME_SIZE, SAMPLE_RATE

slow = unittest.skipUnless(os.getenv("ECHOFUSION_SLOW_TESTS") == "1", "set ECHOFUSION_SLOW_TESTS=1 for long runs")


def white_noise(n: int, seed: int = 0, scale: float = 0.3) -> np.ndarray:
    return scale * np.random.default_rng(seed).standard_normal(n)


def speech_like(seconds: float, seed: int = 0, f0: float = 140.0) -> np.ndarray:
    return synthetic_utterance(np.random.default_rng(seed), f0, seconds)


def decaying_path(taps: int, seed: int = 0, decay: float = 0.05) -> np.ndarray:
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(taps) * np.exp(-decay * np.arange(taps))
    h[0] = 1.0
    return 0.5 * h / np.max(np.abs(h))


def echo_of(far: np.ndarray, h: np.ndarray, delay_samples: int = 0) -> np.ndarray:
    y = lfilter(h, [1.0], far)
    out = np.zeros(len(far))
    out[delay_samples:] = y[:len(far) - delay_samples]
    return out


def xcorr_delay(reference: np.ndarray, delayed: np.ndarray, max_lag: int) -> int:
    """Lag in samples (0..max_lag) at which `delayed` best matches `reference`."""
    full = correlate(delayed, reference, mode="full", method="fft")
    zero = len(reference) - 1
    return int(np.argmax(np.abs(full[zero:zero + max_lag + 1])))


def direct_dft(x: np.ndarray) -> np.ndarray:
    n = len(x)
    k = np.arange(n // 2 + 1)[:, None]
    return np.exp(-2j * np.pi * k * np.arange(n)[None, :] / n) @ x


def direct_dct2(x: np.ndarray) -> np.ndarray:
    n = len(x)
    k = np.arange(n)[:, None]
    basis = np.cos(np.pi * k * (2 * np.arange(n)[None, :] + 1) / (2 * n))
    scale = np.full(n, np.sqrt(2.0 / n))
    scale[0] = np.sqrt(1.0 / n)
    return scale * (basis @ x)


@numba.njit(cache=True)
def nlms_reference(far, near, taps, mu, eps):
    """Sample-by-sample NLMS; returns the error signal."""
    w = np.zeros(taps)
    x = np.zeros(taps)
    error = np.zeros(len(near))
    for n in range(len(near)):
        for i in range(taps - 1, 0, -1):
            x[i] = x[i - 1]
        x[0] = far[n]
        y = 0.0
        power = eps
        for i in range(taps):
            y += w[i] * x[i]
            power += x[i] * x[i]
        e = near[n] - y
        for i in range(taps):
            w[i] += mu * e * x[i] / power
        error[n] = e
    return error


def frame_count(seconds: float) -> int:
    return int(seconds * SAMPLE_RATE) // FRAME_SIZE


def tiny_corpus(seed: int = 0, speakers: int = 4, seconds: float = 3.0) -> Corpus:
    """In-memory corpus with a short measured-style RIR so no rooms are simulated."""
    rng = np.random.default_rng(seed)
    corpus = Corpus()
    for s in range(speakers):
        f0 = 100.0 + 25.0 * s
        for u in range(2):
            corpus.speech[f"spk{s:02d}_{u:03d}.wav"] = synthetic_utterance(rng, f0, seconds)
    corpus.noise["noise_00.wav"] = colored_noise(rng, int(seconds * SAMPLE_RATE), slope=1.0)
    rir = np.zeros(400)
    rir[0] = 1.0
    rir[37] = 0.4
    rir[150] = -0.2
    corpus.rirs["room_a.wav"] = rir
    return corpus
