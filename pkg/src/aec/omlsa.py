# src/aec/omlsa.py
"""OMLSA spectral gain with MCRA-style noise tracking, optionally guided by an external gain.

Guided mode takes the smoothed network gain G_n: bins with G_n >= 0.5 are
treated as speech, feed the presence smoothing with 1 and keep the noise
estimate frozen. Unguided mode derives the same indicator from the ratio of the
smoothed power to its tracked minimum, and uses the conditional presence
probability of each bin as the gain exponent.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import exp1

from src.dsp.frames import N_BINS

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-10


@dataclass
class OmlsaConfig:
    alpha_p: float = 0.9
    g_min_db: float = -25.0
    beta: float = 0.92
    alpha_d: float = 0.95
    alpha_s: float = 0.8
    delta: float = 5.0
    xi_min_db: float = -18.0
    window_frames: int = 50
    subwindow_frames: int = 10
    guidance_threshold: float = 0.5
    speech_frame_threshold: float = 0.5

    @property
    def g_min(self) -> float:
        return 10.0 ** (self.g_min_db / 20.0)

    @property
    def xi_min(self) -> float:
        return 10.0 ** (self.xi_min_db / 10.0)


class ClampCounter:
    def __init__(self):
        self.count = 0


def noise_flag(gain: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """I = 1 where the guiding gain is >= threshold (speech-dominated bin), else 0."""
    return (np.asarray(gain) >= threshold).astype(np.float64)


def presence_smooth(previous: np.ndarray, indicator: np.ndarray, alpha_p: float = 0.9) -> np.ndarray:
    return alpha_p * previous + (1.0 - alpha_p) * indicator


def lsa_gain(xi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Log-spectral amplitude gain under speech presence, capped at 1."""
    v = np.maximum(gamma * xi / (1.0 + xi), 1e-10)
    return np.minimum(xi / (1.0 + xi) * np.exp(0.5 * exp1(v)), 1.0)


def conditional_presence(absence: np.ndarray, xi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Speech presence probability of a bin given its a-priori absence probability and SNRs."""
    q = np.clip(absence, 0.0, 1.0 - 1e-6)
    v = gamma * xi / (1.0 + xi)
    return 1.0 / (1.0 + q / (1.0 - q) * (1.0 + xi) * np.exp(-v))


def fusion_probability(p_bins: np.ndarray, p_near: float, threshold: float = 0.5) -> Union[np.ndarray, float]:
    """Per-bin presence on speech frames, the scalar near-end probability otherwise."""
    return p_bins if p_near > threshold else p_near


def fuse_gains(p, g_o: np.ndarray, g_n: np.ndarray, counter: Optional[ClampCounter] = None) -> np.ndarray:
    """G_f = p*G_o + (1-p)*G_n; p outside [0, 1] is clamped and counted."""
    p = np.asarray(p, dtype=np.float64)
    clamped = np.clip(p, 0.0, 1.0)
    outside = int(np.count_nonzero(clamped != p))
    if outside:
        if counter is not None:
            counter.count += outside
        logger.debug(f"clamped {outside} fusion probabilities")
    return clamped * g_o + (1.0 - clamped) * g_n


class MinimaTracker:
    """Minimum of a smoothed power over `n_sub` sub-windows of `sub_len` frames."""

    def __init__(self, n_sub: int, sub_len: int):
        self.sub_len = sub_len
        self.stored = deque(maxlen=max(n_sub - 1, 0))
        self.current = None
        self.count = 0

    def update(self, power: np.ndarray) -> np.ndarray:
        if self.current is None:
            self.current = power.copy()
        else:
            self.current = np.minimum(self.current, power)
        self.count += 1
        minimum = self.current.copy()
        for m in self.stored:
            minimum = np.minimum(minimum, m)
        if self.count >= self.sub_len:
            self.stored.append(self.current)
            self.current = None
            self.count = 0
        return minimum


class OmlsaState:
    """Per-stream OMLSA/MCRA state."""

    def __init__(self, config: Optional[OmlsaConfig] = None, n_bins: int = N_BINS):
        self.config = config or OmlsaConfig()
        self.n_bins = n_bins
        self.reset()

    def reset(self):
        cfg = self.config
        self.noise = None
        self.presence = np.zeros(self.n_bins)
        self.prior_snr = np.full(self.n_bins, cfg.xi_min)
        self.post_snr = np.ones(self.n_bins)
        self.speech_probability = np.zeros(self.n_bins)
        self.last_gain_h1 = np.ones(self.n_bins)
        self.smoothed = None
        self.minima = MinimaTracker(max(1, cfg.window_frames // cfg.subwindow_frames), cfg.subwindow_frames)
        self.clamps = ClampCounter()
        self.frames = 0

    def mcra_indicator(self, power: np.ndarray) -> np.ndarray:
        cfg = self.config
        local = np.convolve(power, [0.25, 0.5, 0.25], mode="same")
        if self.smoothed is None:
            self.smoothed = local.copy()
        else:
            self.smoothed = cfg.alpha_s * self.smoothed + (1.0 - cfg.alpha_s) * local
        minimum = self.minima.update(self.smoothed)
        return (self.smoothed > cfg.delta * np.maximum(minimum, NOISE_FLOOR)).astype(np.float64)


def omlsa_gain(state: OmlsaState, error_spectrum: np.ndarray, presence: np.ndarray,
               indicator: Optional[np.ndarray] = None) -> np.ndarray:
    """OMLSA gain G_H1^p * G_min^(1-p), clamped to [G_min, 1].

    Updates the noise estimate first (seeded from the first frame's power);
    bins with indicator 1 keep their noise value when an indicator is given.
    """
    cfg = state.config
    power = np.abs(error_spectrum) ** 2
    if state.noise is None:
        state.noise = np.maximum(power, NOISE_FLOOR)
    else:
        alpha = cfg.alpha_d + (1.0 - cfg.alpha_d) * presence
        updated = alpha * state.noise + (1.0 - alpha) * power
        if indicator is not None:
            updated = np.where(indicator >= 0.5, state.noise, updated)
        state.noise = np.maximum(updated, NOISE_FLOOR)

    gamma = power / state.noise
    xi = cfg.beta * state.last_gain_h1 ** 2 * state.post_snr + (1.0 - cfg.beta) * np.maximum(gamma - 1.0, 0.0)
    xi = np.maximum(xi, cfg.xi_min)
    gain_h1 = lsa_gain(xi, gamma)
    state.prior_snr, state.post_snr, state.last_gain_h1 = xi, gamma, gain_h1
    g_min = cfg.g_min
    gain = gain_h1 ** presence * g_min ** (1.0 - presence)
    return np.clip(gain, g_min, 1.0)


def mcra_omlsa_gain(state: OmlsaState, error_spectrum: np.ndarray, indicator: np.ndarray) -> np.ndarray:
    """Unguided OMLSA gain G_H1^p * G_min^(1-p), clamped to [G_min, 1].

    p is the conditional presence probability with a-priori absence 1 - p',
    p' being the smoothed MCRA indicator in `state.presence`. The noise
    estimate is smoothed with p after the gain and left unchanged in bins with
    indicator 1; the first frame seeds it.
    """
    cfg = state.config
    power = np.abs(error_spectrum) ** 2
    if state.noise is None:
        state.noise = np.maximum(power, NOISE_FLOOR)

    gamma = power / state.noise
    xi = cfg.beta * state.last_gain_h1 ** 2 * state.post_snr + (1.0 - cfg.beta) * np.maximum(gamma - 1.0, 0.0)
    xi = np.maximum(xi, cfg.xi_min)
    gain_h1 = lsa_gain(xi, gamma)
    p = conditional_presence(1.0 - state.presence, xi, gamma)
    state.prior_snr, state.post_snr, state.last_gain_h1 = xi, gamma, gain_h1
    state.speech_probability = p

    alpha = cfg.alpha_d + (1.0 - cfg.alpha_d) * p
    updated = alpha * state.noise + (1.0 - alpha) * power
    state.noise = np.maximum(np.where(indicator >= 0.5, state.noise, updated), NOISE_FLOOR)
    g_min = cfg.g_min
    return np.clip(gain_h1 ** p * g_min ** (1.0 - p), g_min, 1.0)


class OmlsaSuppressor:
    """Bundles indicator, presence smoothing, OMLSA gain and fusion for one stream."""

    def __init__(self, config: Optional[OmlsaConfig] = None, n_bins: int = N_BINS):
        self.state = OmlsaState(config, n_bins)

    @property
    def config(self) -> OmlsaConfig:
        return self.state.config

    def process(self, error_spectrum: np.ndarray, guidance: Optional[np.ndarray] = None,
                p_near: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Return (fused gain, OMLSA gain) for one frame.

        Without `p_near` the fused gain is the OMLSA gain itself.
        """
        cfg = self.config
        st = self.state
        power = np.abs(error_spectrum) ** 2
        if guidance is not None:
            indicator = noise_flag(guidance, cfg.guidance_threshold)
        else:
            indicator = st.mcra_indicator(power)
        st.presence = presence_smooth(st.presence, indicator, cfg.alpha_p)
        if guidance is not None:
            g_o = omlsa_gain(st, error_spectrum, st.presence, indicator)
        else:
            g_o = mcra_omlsa_gain(st, error_spectrum, indicator)
        st.frames += 1
        if guidance is None or p_near is None:
            return g_o, g_o
        p = fusion_probability(st.presence, p_near, cfg.speech_frame_threshold)
        return fuse_gains(p, g_o, guidance, st.clamps), g_o
