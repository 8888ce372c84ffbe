# src/data/preprocessing.py
"""Turn labelled clips into network training sequences."""
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.aec.res import FeatureState, extract_features
from src.data.synthesis import delay_signal
from src.dsp.frames import SAMPLE_RATE, frame_signal
from src.dsp.mel import N_BANDS
from src.model.architecture import PREPROCESSING
from src.utils.audio_io import read_wav
from src.utils.exceptions import DatasetError

logger = logging.getLogger(__name__)

IGNORE_INDEX = -100
MANIFEST_NAME = "manifest.jsonl"


def load_manifest(data_dir: str, split: Optional[str] = None) -> pd.DataFrame:
    """Read `manifest.jsonl` under `data_dir`, optionally keeping one split."""
    path = Path(data_dir) / MANIFEST_NAME
    if not path.exists():
        raise DatasetError(f"manifest not found: {path}")
    try:
        manifest = pd.read_json(path, lines=True)
    except ValueError as e:
        raise DatasetError(f"unreadable manifest {path}: {e}") from e
    if split is not None:
        manifest = manifest[manifest["split"] == split].reset_index(drop=True)
    return manifest


def load_labels(data_dir: str, record) -> pd.DataFrame:
    return pd.read_csv(Path(data_dir) / record["paths"]["labels"])


def load_energies(data_dir: str, record) -> np.ndarray:
    path = Path(data_dir) / record["paths"].get("energies", "")
    if not path.is_file():
        raise DatasetError(f"clip {record['clip_id']} has no energy sequence")
    return np.load(path).astype(np.float64)


def classifier_sequence(energies: np.ndarray, delay_frames: int, preprocessing: str = "log1p-max-normalize",
                        warmup_frames: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """(T, energy_dim) network inputs and (T,) delay targets; warm-up frames are ignored by the loss."""
    transform = PREPROCESSING[preprocessing]
    inputs = np.stack([transform(v) for v in energies])
    targets = np.full(len(energies), delay_frames, dtype=np.int64)
    targets[:warmup_frames] = IGNORE_INDEX
    return inputs, targets


def suppressor_sequence(far_aligned: np.ndarray, error: np.ndarray, labels: pd.DataFrame,
                        preprocessing: str = "identity", warmup_frames: int = 0) -> Dict[str, np.ndarray]:
    """Features, band-gain targets, near-end DTD targets and a loss mask, all (T - 2) frames long.

    The streaming extractor describes frame t-2 at step t, so targets are shifted to match.
    """
    transform = PREPROCESSING[preprocessing]
    state = FeatureState()
    features = np.stack([transform(extract_features(f, e, state))
                         for f, e in zip(frame_signal(far_aligned), frame_signal(error))])
    lag = FeatureState.latency
    n = min(len(features), len(labels)) - lag
    if n <= 0:
        raise DatasetError("clip is too short for suppressor training")
    gains = labels[[f"g{b}" for b in range(N_BANDS)]].to_numpy(dtype=np.float64)
    mask = np.ones(n)
    mask[:max(warmup_frames - lag, 0)] = 0.0
    return {
        "features": features[lag:lag + n],
        "gains": gains[:n],
        "dtd": labels["dtd_near"].to_numpy(dtype=np.float64)[:n],
        "mask": mask,
    }


def load_suppressor_clip(data_dir: str, record, preprocessing: str = "identity",
                         warmup_frames: int = 0) -> Dict[str, np.ndarray]:
    paths = record["paths"]
    if "error" not in paths:
        raise DatasetError(f"clip {record['clip_id']} has no error track")
    far = read_wav(str(Path(data_dir) / paths["far"]))
    error = read_wav(str(Path(data_dir) / paths["error"]))
    delay = int(record["delay_ms"]) * SAMPLE_RATE // 1000
    return suppressor_sequence(delay_signal(far, delay), error, load_labels(data_dir, record),
                               preprocessing, warmup_frames)
