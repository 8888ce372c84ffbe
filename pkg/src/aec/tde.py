# src/aec/tde.py
"""Adaptive-filter-bank time-delay estimation.

M MDF filters share one far-end frame buffer (index 0 is the newest frame).
Filter f is fed the buffered frame at position f*(N-L), so its weight block n
models an echo delayed by f*(N-L)+n frames. Concatenated block energies of all
filters form the energy vector that the delay classifier consumes.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.aec.mdf import MdfConfig, MdfFilter
from src.dsp.frames import FRAME_MS, FRAME_SIZE, check_frame
from src.utils.exceptions import ConfigError, ModelShapeError

logger = logging.getLogger(__name__)


@dataclass
class BankGeometry:
    n_filters: int = 5
    n_blocks: int = 32
    overlap: int = 8
    frame_size: int = FRAME_SIZE

    def validate(self):
        if self.n_filters < 1 or self.n_blocks < 1:
            raise ConfigError("bank needs at least one filter and one block")
        if not 0 <= self.overlap < self.n_blocks:
            raise ConfigError(f"overlap must be in [0, n_blocks), got {self.overlap}")

    @property
    def spacing(self) -> int:
        return self.n_blocks - self.overlap

    @property
    def buffer_length(self) -> int:
        return self.n_filters * self.n_blocks - self.overlap

    @property
    def n_categories(self) -> int:
        return self.buffer_length

    @property
    def energy_dim(self) -> int:
        return self.n_filters * self.n_blocks

    @property
    def observable_span(self) -> int:
        """Delays (in frames) that at least one filter scope can model."""
        return (self.n_filters - 1) * self.spacing + self.n_blocks

    def scope(self, f: int):
        start = f * self.spacing
        return start, start + self.n_blocks

    def category_index(self) -> np.ndarray:
        """Delay category of every energy-vector entry, filter-major."""
        f, n = np.divmod(np.arange(self.energy_dim), self.n_blocks)
        return f * self.spacing + n

    def filter_margins(self, category: int) -> np.ndarray:
        offsets = category - self.spacing * np.arange(self.n_filters)
        return np.minimum(offsets, self.n_blocks - 1 - offsets)

    def best_filter(self, category: int) -> int:
        """Filter whose scope holds `category` with the widest margin; ties to the lower index."""
        return int(np.argmax(self.filter_margins(category)))


def scope_coverage(geometry: BankGeometry) -> List[List[int]]:
    coverage = [[] for _ in range(geometry.n_categories)]
    for f in range(geometry.n_filters):
        start, stop = geometry.scope(f)
        for d in range(start, min(stop, geometry.n_categories)):
            coverage[d].append(f)
    return coverage


@dataclass
class DelayEstimate:
    category: int
    probability: float
    low_confidence: bool = False

    @property
    def ms(self) -> int:
        return self.category * FRAME_MS


class FilterBank:
    """M MDF filters over a shared far-end buffer."""

    def __init__(self, geometry: Optional[BankGeometry] = None, mdf_config: Optional[MdfConfig] = None):
        self.geometry = geometry or BankGeometry()
        self.geometry.validate()
        base = mdf_config or MdfConfig()
        cfg = MdfConfig(
            frame_size=self.geometry.frame_size,
            n_blocks=self.geometry.n_blocks,
            step_size=base.step_size,
            power_smoothing=base.power_smoothing,
            regularization=base.regularization,
        )
        self.filters = [MdfFilter(cfg) for _ in range(self.geometry.n_filters)]
        self.reset()

    def reset(self):
        g = self.geometry
        self.far_buffer = np.zeros((g.buffer_length, g.frame_size))
        for mdf in self.filters:
            mdf.reset()
        self.last_errors = np.zeros((g.n_filters, g.frame_size))

    def push(self, far_frame, near_frame, adapt: bool = True) -> np.ndarray:
        """Shift a far frame in and run every filter against `near_frame`.

        Returns the (M, K) error frames.
        """
        g = self.geometry
        far = check_frame(far_frame, g.frame_size)
        near = check_frame(near_frame, g.frame_size)
        self.far_buffer = np.roll(self.far_buffer, 1, axis=0)
        self.far_buffer[0] = far
        for f, mdf in enumerate(self.filters):
            _, self.last_errors[f] = mdf.process(self.far_buffer[f * g.spacing], near, adapt)
        return self.last_errors.copy()

    def energy_vector(self) -> np.ndarray:
        return np.concatenate([mdf.block_energies() for mdf in self.filters])


def bank_push(bank: FilterBank, far_frame, near_frame) -> np.ndarray:
    return bank.push(far_frame, near_frame)


def energy_vector(bank: FilterBank) -> np.ndarray:
    return bank.energy_vector()


def estimate_delay_argmax(ev: np.ndarray, geometry: Optional[BankGeometry] = None) -> DelayEstimate:
    """Energy-argmax delay: sum the energies landing on each delay, take the largest."""
    geometry = geometry or BankGeometry()
    ev = np.asarray(ev, dtype=np.float64)
    if ev.shape != (geometry.energy_dim,):
        raise ModelShapeError(f"energy vector has shape {ev.shape}, expected ({geometry.energy_dim},)")
    per_delay = np.zeros(geometry.n_categories)
    np.add.at(per_delay, geometry.category_index(), ev)
    total = float(per_delay.sum())
    if total <= 0.0:
        return DelayEstimate(category=0, probability=0.0, low_confidence=True)
    category = int(np.argmax(per_delay))
    return DelayEstimate(category=category, probability=float(per_delay[category] / total))


def estimate_delay_nn(ev: np.ndarray, model, state, geometry: Optional[BankGeometry] = None) -> DelayEstimate:
    """Classifier delay: argmax of the softmax output, one recurrent step.

    Raises:
        ModelShapeError: the model does not output one probability per category.
    """
    geometry = geometry or BankGeometry()
    if model.output_dim != geometry.n_categories:
        raise ModelShapeError(
            f"delay classifier must output {geometry.n_categories} categories, model has {model.output_dim}")
    probs = model.step(model.preprocess(ev), state)
    category = int(np.argmax(probs))
    return DelayEstimate(category=category, probability=float(probs[category]))


def select_optimal_error(bank: FilterBank, est: DelayEstimate) -> np.ndarray:
    return bank.last_errors[bank.geometry.best_filter(est.category)].copy()


@dataclass
class DelayTracker:
    """Hold counter: a new category replaces the current one after winning `hold` frames in a row.

    Low-confidence estimates leave the tracker untouched.
    """
    hold: int = 5
    current: int = 0
    _candidate: Optional[int] = field(default=None, repr=False)
    _count: int = field(default=0, repr=False)

    def update(self, est: DelayEstimate) -> int:
        if est.low_confidence:
            return self.current
        if est.category == self.current:
            self._candidate, self._count = None, 0
        elif est.category == self._candidate:
            self._count += 1
        else:
            self._candidate, self._count = est.category, 1
        if self._candidate is not None and self._count >= self.hold:
            logger.debug(f"delay category {self.current} -> {self._candidate}")
            self.current, self._candidate, self._count = self._candidate, None, 0
        return self.current
