# src/data/rir.py
"""Shoebox room impulse responses by the image-source method.

Wall reflection coefficients come from Sabine's formula for the requested
T60; every image contributes an integer-delay tap scaled by its reflection
count and 1/(4 pi d).
"""
import logging
import math
from dataclasses import dataclass

import numba
import numpy as np

from src.utils.exceptions import SynthesisError

logger = logging.getLogger(__name__)

SPEED_OF_SOUND = 343.0


@dataclass
class RoomSpec:
    dims: np.ndarray
    source: np.ndarray
    mic: np.ndarray
    t60: float


@numba.njit(cache=True)
def _image_source_taps(source, mic, dims, beta, n_taps, fs, c):
    h = np.zeros(n_taps)
    max_dist = n_taps * c / fs
    orders = np.empty(3, dtype=np.int64)
    for axis in range(3):
        orders[axis] = int(math.ceil(max_dist / (2.0 * dims[axis]))) + 1
    for rx in range(-orders[0], orders[0] + 1):
        for ry in range(-orders[1], orders[1] + 1):
            for rz in range(-orders[2], orders[2] + 1):
                for p in range(8):
                    px = p & 1
                    py = (p >> 1) & 1
                    pz = (p >> 2) & 1
                    ix = (1 - 2 * px) * (source[0] + 2.0 * rx * dims[0])
                    iy = (1 - 2 * py) * (source[1] + 2.0 * ry * dims[1])
                    iz = (1 - 2 * pz) * (source[2] + 2.0 * rz * dims[2])
                    d = math.sqrt((ix - mic[0]) ** 2 + (iy - mic[1]) ** 2 + (iz - mic[2]) ** 2)
                    n = int(round(d / c * fs))
                    if n >= n_taps:
                        continue
                    reflections = abs(rx + px) + abs(rx) + abs(ry + py) + abs(ry) + abs(rz + pz) + abs(rz)
                    h[n] += beta ** reflections / (4.0 * math.pi * max(d, 1e-3))
    return h


def sabine_reflection(dims: np.ndarray, t60: float) -> float:
    """Uniform wall reflection coefficient giving `t60` under Sabine's formula."""
    lx, ly, lz = dims
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    absorption = 24.0 * math.log(10.0) * volume / (SPEED_OF_SOUND * surface * t60)
    if not 0.0 < absorption <= 1.0:
        raise SynthesisError(f"T60 {t60} s is not reachable in a {lx:.1f}x{ly:.1f}x{lz:.1f} m room")
    return math.sqrt(1.0 - absorption)


def image_source_rir(room: RoomSpec, n_taps: int, fs: int = 16000) -> np.ndarray:
    beta = sabine_reflection(room.dims, room.t60)
    return _image_source_taps(room.source.astype(np.float64), room.mic.astype(np.float64),
                              room.dims.astype(np.float64), beta, int(n_taps), float(fs), SPEED_OF_SOUND)


def random_room(rng: np.random.Generator, t60_range=(0.2, 0.6)) -> RoomSpec:
    dims = np.array([rng.uniform(4.0, 8.0), rng.uniform(3.5, 6.0), rng.uniform(2.5, 3.5)])
    margin = 0.5
    source = np.array([rng.uniform(margin, d - margin) for d in dims])
    mic = np.array([rng.uniform(margin, d - margin) for d in dims])
    return RoomSpec(dims=dims, source=source, mic=mic, t60=float(rng.uniform(*t60_range)))


def align_direct_path(h: np.ndarray) -> np.ndarray:
    """Shift the response so its direct path (first tap at half the peak) sits at index 0."""
    h = np.asarray(h, dtype=np.float64)
    if not np.any(h):
        raise SynthesisError("impulse response is all zeros")
    magnitude = np.abs(h)
    onset = int(np.argmax(magnitude >= 0.5 * magnitude.max()))
    return h[onset:].copy()


def generate_rir(seed: int, fs: int = 16000, t60_range=(0.2, 0.6), max_seconds: float = 0.6) -> np.ndarray:
    """Random shoebox RIR with the direct path at index 0, peak-normalised."""
    rng = np.random.default_rng(seed)
    room = random_room(rng, t60_range)
    n_taps = int(max_seconds * fs)
    h = align_direct_path(image_source_rir(room, n_taps, fs))
    return h / np.max(np.abs(h))
