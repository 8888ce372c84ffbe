# src/utils/audio_io.py
import logging
import os

import numpy as np
import soundfile as sf

from src.utils.exceptions import AudioFormatError

logger = logging.getLogger(__name__)

SAMPLE_RATE = 16000


def read_wav(path: str, sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Read a mono PCM16 or float32 WAV as float64 samples in [-1, 1].

    Raises:
        AudioFormatError: missing/truncated file, wrong rate or more than one channel.
    """
    if not os.path.exists(path):
        raise AudioFormatError(f"WAV file not found: {path}")
    try:
        info = sf.info(path)
        data, rate = sf.read(path, dtype='float64', always_2d=True)
    except RuntimeError as e:
        raise AudioFormatError(f"Cannot decode {path}: {e}") from e
    if info.subtype not in ('PCM_16', 'FLOAT'):
        raise AudioFormatError(f"{path}: unsupported subtype {info.subtype}, expected PCM_16 or FLOAT")
    if rate != sample_rate:
        raise AudioFormatError(f"{path}: sample rate {rate} Hz, expected {sample_rate} Hz")
    if data.shape[1] != 1:
        raise AudioFormatError(f"{path}: {data.shape[1]} channels, expected mono")
    if info.frames != data.shape[0]:
        raise AudioFormatError(f"{path}: header announces {info.frames} frames, read {data.shape[0]}")
    return data[:, 0]


def write_wav(path: str, samples: np.ndarray, sample_rate: int = SAMPLE_RATE, as_float: bool = False) -> None:
    """Write mono samples as PCM16 (default) or float32."""
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    samples = np.asarray(samples, dtype=np.float64)
    if as_float:
        sf.write(path, samples.astype(np.float32), sample_rate, subtype='FLOAT')
    else:
        clipped = np.clip(samples, -1.0, 1.0)
        if np.any(clipped != samples):
            logger.warning(f"{path}: {int(np.sum(clipped != samples))} samples clipped for PCM16")
        sf.write(path, clipped, sample_rate, subtype='PCM_16')
