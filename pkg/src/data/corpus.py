# src/data/corpus.py
"""Source corpora read from WAV directories.

Layout under the corpus root:
    speech/  one file per utterance, `spkXX_*.wav` names carry the speaker id
    noise/   background noise recordings
    rir/     optional measured or pre-generated impulse responses
"""
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from dotenv import load_dotenv
from scipy.signal import lfilter

from src.data.rir import generate_rir
from src.utils.audio_io import SAMPLE_RATE, read_wav, write_wav
from src.utils.exceptions import DatasetError

load_dotenv()

logger = logging.getLogger(__name__)

SPEAKER_PATTERN = re.compile(r"^(spk[0-9A-Za-z]+)_")


def default_data_dir() -> Path:
    return Path(os.getenv("ECHOFUSION_DATA_DIR", "./data"))


def default_model_dir() -> Path:
    return Path(os.getenv("ECHOFUSION_MODEL_DIR", "./models"))


def speaker_of(name: str) -> str:
    match = SPEAKER_PATTERN.match(name)
    return match.group(1) if match else Path(name).stem


@dataclass
class Corpus:
    speech: Dict[str, np.ndarray] = field(default_factory=dict)
    noise: Dict[str, np.ndarray] = field(default_factory=dict)
    rirs: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def speakers(self) -> List[str]:
        return sorted({speaker_of(name) for name in self.speech})

    def utterances_of(self, speakers) -> List[str]:
        wanted = set(speakers)
        return sorted(name for name in self.speech if speaker_of(name) in wanted)


def _read_dir(directory: Path, required: bool) -> Dict[str, np.ndarray]:
    if not directory.is_dir():
        if required:
            raise DatasetError(f"corpus directory missing: {directory}")
        return {}
    files = sorted(directory.glob("*.wav"))
    if required and not files:
        raise DatasetError(f"no WAV files in {directory}")
    return {f.name: read_wav(str(f)) for f in files}


def load_corpus(root: Optional[str] = None) -> Corpus:
    """Load every WAV under `root` (default: $ECHOFUSION_DATA_DIR/corpus).

    Raises:
        DatasetError: speech or noise directory is missing or empty.
    """
    root = Path(root) if root else default_data_dir() / "corpus"
    corpus = Corpus(
        speech=_read_dir(root / "speech", required=True),
        noise=_read_dir(root / "noise", required=True),
        rirs=_read_dir(root / "rir", required=False),
    )
    logger.info(f"Loaded corpus from {root}: {len(corpus.speech)} utterances "
                f"({len(corpus.speakers)} speakers), {len(corpus.noise)} noises, {len(corpus.rirs)} RIRs")
    return corpus


# Desk-scale corpus: formant-filtered pulse trains stand in for speech, spectrally tilted noise for backgrounds.

VOWEL_FORMANTS = ((730, 1090, 2440), (270, 2290, 3010), (300, 870, 2240), (530, 1840, 2480), (570, 840, 2410))


def _resonator(x: np.ndarray, freq: float, bandwidth: float, fs: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / fs)
    a = [1.0, -2.0 * r * np.cos(2 * np.pi * freq / fs), r * r]
    return lfilter([1.0 - r], a, x)


def synthetic_utterance(rng: np.random.Generator, f0: float, seconds: float, fs: int = SAMPLE_RATE) -> np.ndarray:
    """Syllable train of voiced vowels with pauses, peak 0.5."""
    n = int(seconds * fs)
    out = np.zeros(n)
    pos = int(rng.uniform(0.0, 0.2) * fs)
    while pos < n:
        length = int(rng.uniform(0.15, 0.35) * fs)
        pitch = f0 * (1.0 + 0.1 * np.sin(np.linspace(0, rng.uniform(1, 3), length)))
        phase = np.cumsum(pitch / fs)
        pulses = np.diff(np.floor(phase), prepend=0.0) + 0.02 * rng.standard_normal(length)
        voiced = sum(_resonator(pulses, f, 60 + 0.05 * f, fs) for f in VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))])
        end = min(n, pos + length)
        out[pos:end] += (voiced * np.hanning(length))[:end - pos]
        pos = end + int(rng.uniform(0.05, 0.3) * fs)
    return 0.5 * out / max(np.max(np.abs(out)), 1e-12)


def colored_noise(rng: np.random.Generator, n: int, slope: float = 1.0) -> np.ndarray:
    """Gaussian noise with a 1/f^slope power spectrum, peak 0.5."""
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.arange(len(spectrum), dtype=float)
    freqs[0] = 1.0
    x = np.fft.irfft(spectrum / freqs ** (slope / 2), n)
    return 0.5 * x / max(np.max(np.abs(x)), 1e-12)


def write_desk_corpus(root: str, n_speakers: int = 6, utterances_per_speaker: int = 4, n_noises: int = 4,
                      n_rirs: int = 0, seconds: float = 6.0, seed: int = 0) -> Corpus:
    """Write speech/, noise/ and (with `n_rirs`) rir/ under `root` and return the corpus."""
    rng = np.random.default_rng(seed)
    root = Path(root)
    corpus = Corpus()
    for s in range(n_speakers):
        f0 = rng.uniform(90, 250)
        for u in range(utterances_per_speaker):
            corpus.speech[f"spk{s:02d}_{u:03d}.wav"] = synthetic_utterance(rng, f0, seconds)
    for k in range(n_noises):
        corpus.noise[f"noise_{k:02d}.wav"] = colored_noise(rng, int(seconds * SAMPLE_RATE), slope=k % 3)
    for k in range(n_rirs):
        corpus.rirs[f"rir_{k:02d}.wav"] = 0.9 * generate_rir(seed * 1000 + k)

    for sub, tracks in (("speech", corpus.speech), ("noise", corpus.noise), ("rir", corpus.rirs)):
        for name, samples in tracks.items():
            write_wav(str(root / sub / name), samples, as_float=sub == "rir")
    logger.info(f"Wrote desk corpus to {root}: {len(corpus.speech)} utterances, "
                f"{len(corpus.noise)} noises, {len(corpus.rirs)} RIRs")
    return corpus
