# src/utils/metrics.py
"""Objective measures used by the evaluation harness.

PESQ is not computed; ERLE, SI-SDR and segmental SNR stand in for it.
"""
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

ERLE_CLAMP_DB = 80.0
SI_SDR_CLAMP_DB = 60.0
SEG_SNR_RANGE = (-10.0, 35.0)
EPS = 1e-12


def erle(near: np.ndarray, error: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Echo return loss enhancement in dB, 10*log10(sum near^2 / sum error^2).

    Args:
        near: microphone samples before cancellation
        error: samples after cancellation, same length
        mask: optional boolean sample mask selecting echo-active regions
    """
    near = np.asarray(near, dtype=np.float64)
    error = np.asarray(error, dtype=np.float64)
    if near.shape != error.shape:
        raise ValueError(f"erle needs equal lengths, got {near.shape} and {error.shape}")
    if mask is not None:
        near = near[mask]
        error = error[mask]
    num = float(np.sum(near ** 2))
    den = float(np.sum(error ** 2))
    if den <= 0.0:
        return ERLE_CLAMP_DB
    if num <= 0.0:
        return -ERLE_CLAMP_DB
    return float(np.clip(10.0 * np.log10(num / den), -ERLE_CLAMP_DB, ERLE_CLAMP_DB))


def si_sdr(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Scale-invariant SDR in dB, clamped to +60 dB for a perfect estimate."""
    estimate = np.asarray(estimate, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    ref_energy = float(np.dot(reference, reference))
    if ref_energy <= 0.0:
        return -SI_SDR_CLAMP_DB
    alpha = float(np.dot(estimate, reference)) / ref_energy
    target = alpha * reference
    noise = estimate - target
    noise_energy = float(np.dot(noise, noise))
    target_energy = float(np.dot(target, target))
    if noise_energy <= EPS * max(target_energy, EPS):
        return SI_SDR_CLAMP_DB
    if target_energy <= 0.0:
        return -SI_SDR_CLAMP_DB
    return float(np.clip(10.0 * np.log10(target_energy / noise_energy), -SI_SDR_CLAMP_DB, SI_SDR_CLAMP_DB))


def frame_rms_db(x: np.ndarray, frame_size: int = 160) -> np.ndarray:
    n_frames = len(x) // frame_size
    frames = np.asarray(x[:n_frames * frame_size], dtype=np.float64).reshape(n_frames, frame_size)
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    return 20.0 * np.log10(np.maximum(rms, 1e-10))


def segmental_snr(estimate: np.ndarray, reference: np.ndarray, frame_size: int = 160,
                  active_db: float = -50.0) -> float:
    """Mean per-frame SNR over frames where the reference is active.

    Frames are active when their RMS is within `active_db` of the loudest
    reference frame; per-frame values are clamped to [-10, 35] dB.
    """
    n_frames = min(len(estimate), len(reference)) // frame_size
    if n_frames == 0:
        raise ValueError("segmental_snr needs at least one full frame")
    ref = np.asarray(reference[:n_frames * frame_size], dtype=np.float64).reshape(n_frames, frame_size)
    est = np.asarray(estimate[:n_frames * frame_size], dtype=np.float64).reshape(n_frames, frame_size)
    levels = frame_rms_db(ref.ravel(), frame_size)
    active = levels > levels.max() + active_db
    sig = np.sum(ref ** 2, axis=1)
    err = np.sum((ref - est) ** 2, axis=1)
    snr = 10.0 * np.log10(np.maximum(sig, EPS) / np.maximum(err, EPS))
    snr = np.clip(snr, *SEG_SNR_RANGE)
    return float(np.mean(snr[active]))


def misalignment_db(true_ir: np.ndarray, estimate_ir: np.ndarray) -> float:
    """Normalised misalignment 10*log10(||h - h_hat||^2 / ||h||^2)."""
    h = np.asarray(true_ir, dtype=np.float64)
    h_hat = np.zeros_like(h)
    n = min(len(h), len(estimate_ir))
    h_hat[:n] = estimate_ir[:n]
    return float(10.0 * np.log10(max(np.sum((h - h_hat) ** 2), 1e-30) / np.sum(h ** 2)))


def aggregate(rows: pd.DataFrame, columns: Sequence[str]) -> Dict[str, Dict[str, float]]:
    """mean/min/max/variance per column over non-missing values; variance is the population variance."""
    summary = {}
    for column in columns:
        values = rows[column].dropna().to_numpy(dtype=np.float64)
        if values.size == 0:
            continue
        summary[column] = {
            "mean": float(np.mean(values)),
            "min": float(np.min(values)),
            "max": float(np.max(values)),
            "var": float(np.var(values)),
        }
    return summary
