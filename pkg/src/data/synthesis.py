# src/data/synthesis.py
"""Synthetic echo scenarios and the labelled datasets built from them.

A clip mixes reverberant near-end speech, an echo made from the nonlinearly
distorted far-end signal, and background noise. Echo, near speech and noise
share a common delay relative to the far reference, and the echo and noise
levels are set from the speech-to-echo and signal-to-noise ratios.
"""
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import fftconvolve
from tqdm import tqdm

from src.aec.res import target_band_gains, target_dtd
from src.aec.tde import BankGeometry, FilterBank
from src.data.augmentation import NONLINEARITIES, apply_nonlinearity
from src.data.corpus import Corpus, speaker_of
from src.data.rir import align_direct_path, generate_rir
from src.dsp.frames import FRAME_MS, FRAME_SIZE, SAMPLE_RATE, frame_signal
from src.dsp.stft import stft_stream
from src.utils.audio_io import write_wav
from src.utils.exceptions import ConfigError, DatasetError, SynthesisError
from src.utils.metrics import frame_rms_db

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
ACTIVE_RANGE_DB = 50.0
PEAK_LEVEL = 0.9
FAR_LEVEL = 0.5
_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def clip_seed(master_seed: int, index: int) -> int:
    """Per-clip seed; independent of generation order."""
    return splitmix64((master_seed & _MASK64) ^ splitmix64(index)) >> 1


@dataclass
class SynthConfig:
    clip_seconds: float = 4.0
    ser_grid: List[float] = field(default_factory=lambda: [float(v) for v in range(-30, 31, 5)])
    snr_grid: List[float] = field(default_factory=lambda: [float(v) for v in range(-10, 31, 5)])
    nonlinearities: List[str] = field(default_factory=lambda: list(NONLINEARITIES))
    short_delay_grid: bool = False
    noise_prob: float = 0.8
    near_speech_prob: float = 0.7
    near_offset_max_s: float = 2.0
    n_generated_rirs: int = 64
    t60_range: Tuple[float, float] = (0.2, 0.6)
    split: Tuple[float, float, float] = (0.7, 0.2, 0.1)

    def validate(self):
        if self.clip_seconds <= 0:
            raise ConfigError(f"clip_seconds must be positive, got {self.clip_seconds}")
        if not self.ser_grid or not self.snr_grid:
            raise ConfigError("SER and SNR grids must not be empty")
        unknown = set(self.nonlinearities) - set(NONLINEARITIES)
        if unknown or not self.nonlinearities:
            raise ConfigError(f"nonlinearities must be drawn from {NONLINEARITIES}, got {self.nonlinearities}")
        if abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ConfigError(f"split fractions must be non-negative and sum to 1, got {self.split}")

    def delay_grid_ms(self, geometry: Optional[BankGeometry] = None) -> List[int]:
        if self.short_delay_grid:
            return list(range(0, 501, FRAME_MS))
        span = (geometry or BankGeometry()).observable_span
        return [FRAME_MS * d for d in range(span)]

    @property
    def clip_samples(self) -> int:
        return int(round(self.clip_seconds * SAMPLE_RATE))


@dataclass
class ScenarioConfig:
    """One clip's recipe. `None` ratios omit the component (echo or noise)."""
    ser_db: Optional[float]
    snr_db: Optional[float]
    delay_ms: int
    far_id: str
    near_id: Optional[str]
    noise_id: Optional[str]
    rir_echo: str
    rir_near: str
    nonlinearity: str = "none"
    near_offset_ms: int = 0
    seed: int = 0

    def validate(self):
        if self.delay_ms < 0 or self.delay_ms % FRAME_MS:
            raise ConfigError(f"delay_ms must be a non-negative multiple of {FRAME_MS}, got {self.delay_ms}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity '{self.nonlinearity}'")

    @property
    def delay_frames(self) -> int:
        return self.delay_ms // FRAME_MS

    @property
    def delay_samples(self) -> int:
        return self.delay_ms * SAMPLE_RATE // 1000


@dataclass
class LabeledClip:
    clip_id: str
    config: ScenarioConfig
    far: np.ndarray
    mic: np.ndarray
    near: np.ndarray
    echo: np.ndarray
    noise: np.ndarray
    dtd: np.ndarray
    band_gains: Optional[np.ndarray] = None
    error: Optional[np.ndarray] = None
    energies: Optional[np.ndarray] = None

    @property
    def delay_frames(self) -> int:
        return self.config.delay_frames

    @property
    def n_frames(self) -> int:
        return len(self.mic) // FRAME_SIZE

    def aligned_far(self) -> np.ndarray:
        """Far signal delayed by the true delay, the reference the echo lines up with."""
        return delay_signal(self.far, self.config.delay_samples)


def delay_signal(x: np.ndarray, delay: int) -> np.ndarray:
    out = np.zeros(len(x))
    if delay < len(x):
        out[delay:] = x[:len(x) - delay]
    return out


def active_mask(x: np.ndarray, frame_size: int = FRAME_SIZE, range_db: float = ACTIVE_RANGE_DB) -> np.ndarray:
    """Per-sample mask of the frames whose RMS is within `range_db` of the loudest frame."""
    x = np.asarray(x, dtype=np.float64)
    levels = frame_rms_db(frame_signal(x, frame_size).ravel(), frame_size)
    frames = levels > levels.max() - range_db
    return np.repeat(frames, frame_size)[:len(x)]


def active_power(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if not np.any(x):
        return 0.0
    return float(np.mean(x[active_mask(x)] ** 2))


def mix_at_ratio(target: np.ndarray, interferer: np.ndarray, ratio_db: float) -> np.ndarray:
    """Scale `interferer` so 10*log10(P_target / P_interferer) equals `ratio_db` on active regions.

    Raises:
        SynthesisError: either stream has no power.
    """
    p_target = active_power(target)
    p_interferer = active_power(interferer)
    if p_target <= 0.0 or p_interferer <= 0.0:
        raise SynthesisError(f"cannot mix at {ratio_db} dB: zero-power {'target' if p_target <= 0 else 'interferer'}")
    scale = math.sqrt(p_target / (p_interferer * 10.0 ** (ratio_db / 10.0)))
    return np.asarray(interferer, dtype=np.float64) * scale


def measured_ratio_db(target: np.ndarray, interferer: np.ndarray) -> float:
    return 10.0 * math.log10(active_power(target) / active_power(interferer))


def _fit_length(x: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random n-sample excerpt, tiling sources shorter than n."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise SynthesisError("empty source signal")
    if len(x) < n:
        x = np.tile(x, -(-n // len(x)))
    start = int(rng.integers(0, len(x) - n + 1))
    return x[start:start + n].copy()


def _peak_normalise(x: np.ndarray, level: float) -> np.ndarray:
    peak = float(np.max(np.abs(x)))
    return x * (level / peak) if peak > 0 else x


class RirSource:
    """Resolves RIR ids: corpus file names, or `gen:<k>` for generated rooms."""

    def __init__(self, corpus: Corpus, config: SynthConfig, seed: int):
        self.corpus = corpus
        self.config = config
        self.seed = seed

    def ids(self) -> List[str]:
        if self.corpus.rirs:
            return sorted(self.corpus.rirs)
        return [f"gen:{k}" for k in range(self.config.n_generated_rirs)]

    def get(self, rir_id: str) -> np.ndarray:
        if rir_id.startswith("gen:"):
            return _generated_rir(splitmix64(self.seed + int(rir_id[4:])) >> 1, tuple(self.config.t60_range))
        if rir_id not in self.corpus.rirs:
            raise SynthesisError(f"unknown RIR '{rir_id}'")
        h = align_direct_path(self.corpus.rirs[rir_id])
        return h / np.max(np.abs(h))


@lru_cache(maxsize=128)
def _generated_rir(seed: int, t60_range: Tuple[float, float]) -> np.ndarray:
    return generate_rir(seed, t60_range=t60_range)


def _reverberate(x: np.ndarray, h: np.ndarray, rir_id: str, n: int) -> np.ndarray:
    if len(h) > n:
        logger.warning(f"RIR {rir_id} ({len(h)} taps) is longer than the clip, truncating to {n}")
        h = h[:n]
    return fftconvolve(x, h)[:n]


def synthesize_clip(cfg: ScenarioConfig, corpus: Corpus, rirs: RirSource, synth: SynthConfig,
                    clip_id: str = "clip") -> LabeledClip:
    """Render one scenario. Labels that need the filter bank come from `label_clip`."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n = synth.clip_samples
    if cfg.far_id not in corpus.speech:
        raise SynthesisError(f"unknown far-end utterance '{cfg.far_id}'")

    far = _peak_normalise(_fit_length(corpus.speech[cfg.far_id], n, rng), FAR_LEVEL)
    echo_path = rirs.get(cfg.rir_echo)
    echo = delay_signal(_reverberate(apply_nonlinearity(far, cfg.nonlinearity), echo_path, cfg.rir_echo, n),
                        cfg.delay_samples)

    near = np.zeros(n)
    if cfg.near_id is not None:
        offset = min(cfg.near_offset_ms * SAMPLE_RATE // 1000, n - 1)
        speech = np.zeros(n)
        speech[offset:] = _fit_length(corpus.speech[cfg.near_id], n - offset, rng)
        near = delay_signal(_reverberate(speech, rirs.get(cfg.rir_near), cfg.rir_near, n), cfg.delay_samples)
        if not np.any(near):
            raise SynthesisError(f"near-end utterance '{cfg.near_id}' is silent")

    if cfg.ser_db is None:
        echo = np.zeros(n)
    elif cfg.near_id is not None:
        echo = mix_at_ratio(near, echo, cfg.ser_db)
    if not np.any(near) and not np.any(echo):
        raise SynthesisError("scenario has neither near-end speech nor echo")

    noise = np.zeros(n)
    if cfg.snr_db is not None and cfg.noise_id is not None:
        reference = near if np.any(near) else echo
        noise_src = _fit_length(corpus.noise[cfg.noise_id], n, rng)
        noise = delay_signal(mix_at_ratio(reference, noise_src, cfg.snr_db), cfg.delay_samples)

    mic = near + echo + noise
    scale = PEAK_LEVEL / max(float(np.max(np.abs(mic))), 1e-12)
    near, echo, noise, mic = near * scale, echo * scale, noise * scale, mic * scale

    aligned_far = delay_signal(far, cfg.delay_samples)
    dtd = np.array([tuple(target_dtd(f, s)) for f, s in zip(frame_signal(aligned_far), frame_signal(near))],
                   dtype=np.int64)
    return LabeledClip(clip_id=clip_id, config=cfg, far=far, mic=mic, near=near, echo=echo, noise=noise, dtd=dtd)


def label_clip(clip: LabeledClip, geometry: Optional[BankGeometry] = None) -> LabeledClip:
    """Run the filter bank over the clip; store energy vectors, the oracle error and band-gain targets."""
    geometry = geometry or BankGeometry()
    bank = FilterBank(geometry)
    best = geometry.best_filter(clip.delay_frames)
    energies, error_frames = [], []
    for far_frame, mic_frame in zip(frame_signal(clip.far), frame_signal(clip.mic)):
        errors = bank.push(far_frame, mic_frame)
        energies.append(bank.energy_vector())
        error_frames.append(errors[best])
    clip.energies = np.stack(energies)
    clip.error = np.concatenate(error_frames)[:len(clip.mic)]
    near_spec = stft_stream(clip.near)
    error_spec = stft_stream(clip.error)
    clip.band_gains = np.stack([target_band_gains(s, e) for s, e in zip(near_spec, error_spec)])
    return clip


def assign_splits(n_clips: int, fractions=(0.7, 0.2, 0.1)) -> List[str]:
    n_train = int(round(fractions[0] * n_clips))
    n_valid = min(int(round(fractions[1] * n_clips)), n_clips - n_train)
    return ["train"] * n_train + ["valid"] * n_valid + ["test"] * (n_clips - n_train - n_valid)


def speaker_pools(corpus: Corpus, seed: int, fractions=(0.7, 0.2, 0.1)) -> Dict[str, List[str]]:
    """Utterance pools per split; speaker-disjoint when the corpus has at least three speakers."""
    speakers = corpus.speakers
    if len(speakers) < 3:
        logger.warning(f"corpus has {len(speakers)} speakers; splits share speakers")
        return {split: sorted(corpus.speech) for split in SPLITS}
    order = np.random.default_rng(seed).permutation(len(speakers))
    shuffled = [speakers[i] for i in order]
    n = len(speakers)
    # at least one speaker each for valid and test
    n_train = min(max(1, int(round(fractions[0] * n))), n - 2)
    n_valid = max(1, min(int(round(fractions[1] * n)), n - n_train - 1))
    groups = {
        "train": shuffled[:n_train],
        "valid": shuffled[n_train:n_train + n_valid],
        "test": shuffled[n_train + n_valid:],
    }
    return {split: corpus.utterances_of(group) for split, group in groups.items()}


def draw_scenario(seed: int, pool: List[str], corpus: Corpus, rir_ids: List[str], synth: SynthConfig,
                  geometry: Optional[BankGeometry] = None) -> ScenarioConfig:
    rng = np.random.default_rng(seed)
    far_id = pool[int(rng.integers(len(pool)))]
    near_id = None
    if rng.random() < synth.near_speech_prob:
        others = [u for u in pool if speaker_of(u) != speaker_of(far_id)] or [u for u in pool if u != far_id] or pool
        near_id = others[int(rng.integers(len(others)))]
    noise_ids = sorted(corpus.noise)
    use_noise = bool(noise_ids) and rng.random() < synth.noise_prob
    delays = synth.delay_grid_ms(geometry)
    delay_ms = int(delays[int(rng.integers(len(delays)))])
    clip_ms = int(synth.clip_seconds * 1000)
    # leave at least half a second of near-end speech after onset and delay
    max_offset = max(0, min(int(synth.near_offset_max_s * 1000), clip_ms // 2, clip_ms - delay_ms - 500))
    return ScenarioConfig(
        ser_db=float(synth.ser_grid[int(rng.integers(len(synth.ser_grid)))]),
        snr_db=float(synth.snr_grid[int(rng.integers(len(synth.snr_grid)))]) if use_noise else None,
        delay_ms=delay_ms,
        far_id=far_id,
        near_id=near_id,
        noise_id=noise_ids[int(rng.integers(len(noise_ids)))] if use_noise else None,
        rir_echo=rir_ids[int(rng.integers(len(rir_ids)))],
        rir_near=rir_ids[int(rng.integers(len(rir_ids)))],
        nonlinearity=synth.nonlinearities[int(rng.integers(len(synth.nonlinearities)))],
        near_offset_ms=FRAME_MS * int(rng.integers(0, max_offset // FRAME_MS + 1)),
        seed=seed,
    )


def write_clip(clip: LabeledClip, out_dir: str, split: str) -> Dict[str, str]:
    """Write tracks (PCM16, error as float32), the label CSV and energies; return the paths."""
    base = os.path.join(out_dir, split, clip.clip_id)
    paths = {}
    for track in ("far", "mic", "near", "echo", "noise"):
        paths[track] = f"{base}_{track}.wav"
        write_wav(paths[track], getattr(clip, track))
    if clip.error is not None:
        paths["error"] = f"{base}_error.wav"
        write_wav(paths["error"], clip.error, as_float=True)
    n = min(len(clip.dtd), len(clip.band_gains)) if clip.band_gains is not None else len(clip.dtd)
    labels = pd.DataFrame({"frame": np.arange(n), "dtd_far": clip.dtd[:n, 0], "dtd_near": clip.dtd[:n, 1]})
    if clip.band_gains is not None:
        for b in range(clip.band_gains.shape[1]):
            labels[f"g{b}"] = clip.band_gains[:n, b]
    paths["labels"] = f"{base}_labels.csv"
    labels.to_csv(paths["labels"], index=False)
    if clip.energies is not None:
        paths["energies"] = f"{base}_energies.npy"
        np.save(paths["energies"], clip.energies.astype(np.float32))
    return {k: os.path.relpath(v, out_dir) for k, v in paths.items()}


_WORKER: Dict[str, object] = {}


def _init_worker(corpus: Corpus, synth: SynthConfig, seed: int, out_dir: str, geometry: BankGeometry):
    _WORKER.update(corpus=corpus, synth=synth, rirs=RirSource(corpus, synth, seed), out_dir=out_dir,
                   geometry=geometry)


def _render(task: Tuple[int, str, ScenarioConfig]) -> Dict[str, object]:
    index, split, scenario = task
    clip_id = f"clip{index:06d}"
    clip = synthesize_clip(scenario, _WORKER["corpus"], _WORKER["rirs"], _WORKER["synth"], clip_id)
    label_clip(clip, _WORKER["geometry"])
    paths = write_clip(clip, _WORKER["out_dir"], split)
    record = {"clip_id": clip_id, "split": split, "delay_frames": scenario.delay_frames, "paths": paths}
    record.update(asdict(scenario))
    return record


def build_dataset(n_clips: int, corpus: Corpus, out_dir: str, seed: int = 0,
                  synth: Optional[SynthConfig] = None, jobs: int = 1,
                  geometry: Optional[BankGeometry] = None) -> List[Dict[str, object]]:
    """Generate `n_clips` labelled clips under `out_dir` and write `manifest.jsonl`.

    Scenarios are drawn up front from per-clip seeds, so the output depends only
    on (seed, corpus, config) and not on `jobs`.

    Raises:
        SynthesisError: the corpus cannot supply far and near speech plus noise.
    """
    synth = synth or SynthConfig()
    synth.validate()
    geometry = geometry or BankGeometry()
    if n_clips < 1:
        raise ConfigError(f"n_clips must be >= 1, got {n_clips}")
    if len(corpus.speech) < 2 or not corpus.noise:
        raise SynthesisError(
            f"corpus needs at least 2 speech utterances and 1 noise file, "
            f"found {len(corpus.speech)} utterances and {len(corpus.noise)} noises")

    pools = speaker_pools(corpus, seed, synth.split)
    rir_ids = RirSource(corpus, synth, seed).ids()
    splits = assign_splits(n_clips, synth.split)
    tasks = []
    for index, split in enumerate(splits):
        pool = pools[split]
        if not pool:
            raise DatasetError(f"no utterances available for the '{split}' split")
        tasks.append((index, split, draw_scenario(clip_seed(seed, index), pool, corpus, rir_ids, synth, geometry)))

    os.makedirs(out_dir, exist_ok=True)
    logger.info(f"Synthesising {n_clips} clips into {out_dir} with {jobs} job(s)")
    if jobs <= 1:
        _init_worker(corpus, synth, seed, out_dir, geometry)
        records = [_render(t) for t in tqdm(tasks, desc="synth")]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(corpus, synth, seed, out_dir, geometry)) as pool:
            records = list(tqdm(pool.map(_render, tasks, chunksize=4), total=len(tasks), desc="synth"))

    manifest_path = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest_path, "w") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    counts = {s: splits.count(s) for s in SPLITS}
    logger.info(f"Wrote {manifest_path}: {counts}")
    return records
