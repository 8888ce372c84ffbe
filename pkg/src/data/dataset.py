# src/data/dataset.py
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from torch.utils.data import Dataset
from tqdm import tqdm

from src.data.preprocessing import (classifier_sequence, load_energies, load_manifest,
                                    load_suppressor_clip)
from src.utils.exceptions import DatasetError

logger = logging.getLogger(__name__)


class DelaySequenceDataset(Dataset):
    """Energy-vector sequences with per-frame delay categories."""

    def __init__(self, inputs: List[np.ndarray], targets: List[np.ndarray]):
        """
        Args:
            inputs: per clip, (T, energy_dim) preprocessed energy vectors
            targets: per clip, (T,) delay categories (-100 where ignored)
        """
        if len(inputs) != len(targets):
            raise DatasetError(f"{len(inputs)} input sequences but {len(targets)} target sequences")
        if not inputs:
            raise DatasetError("delay dataset is empty")
        self.inputs = [torch.as_tensor(x, dtype=torch.float32) for x in inputs]
        self.targets = [torch.as_tensor(y, dtype=torch.long) for y in targets]

    def __len__(self) -> int:
        return len(self.inputs)

    def __getitem__(self, idx: int) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.inputs[idx], self.targets[idx]

    @classmethod
    def from_manifest(cls, data_dir: str, split: str, preprocessing: str = "log1p-max-normalize",
                      warmup_frames: int = 0, limit: Optional[int] = None) -> "DelaySequenceDataset":
        manifest = load_manifest(data_dir, split)
        if limit is not None:
            manifest = manifest.head(limit)
        inputs, targets = [], []
        for _, record in tqdm(manifest.iterrows(), total=len(manifest), desc=f"load {split}"):
            x, y = classifier_sequence(load_energies(data_dir, record), int(record["delay_frames"]),
                                       preprocessing, warmup_frames)
            inputs.append(x)
            targets.append(y)
        logger.info(f"Loaded {len(inputs)} {split} delay sequences from {data_dir}")
        return cls(inputs, targets)


class SuppressionSequenceDataset(Dataset):
    """MFCC feature sequences with band-gain and near-end activity targets."""

    def __init__(self, clips: List[Dict[str, np.ndarray]]):
        """
        Args:
            clips: dicts with `features` (T, 78), `gains` (T, 22), `dtd` (T,) and `mask` (T,)
        """
        if not clips:
            raise DatasetError("suppression dataset is empty")
        self.clips = [{k: torch.as_tensor(v, dtype=torch.float32) for k, v in c.items()} for c in clips]

    def __len__(self) -> int:
        return len(self.clips)

    def __getitem__(self, idx: int) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
        clip = self.clips[idx]
        return clip["features"], {"gains": clip["gains"], "dtd": clip["dtd"], "mask": clip["mask"]}

    @classmethod
    def from_manifest(cls, data_dir: str, split: str, preprocessing: str = "identity",
                      warmup_frames: int = 0, limit: Optional[int] = None) -> "SuppressionSequenceDataset":
        manifest = load_manifest(data_dir, split)
        if limit is not None:
            manifest = manifest.head(limit)
        clips = [load_suppressor_clip(data_dir, record, preprocessing, warmup_frames)
                 for _, record in tqdm(manifest.iterrows(), total=len(manifest), desc=f"load {split}")]
        logger.info(f"Loaded {len(clips)} {split} suppression sequences from {data_dir}")
        return cls(clips)
