# src/aec/pipeline.py
"""Streaming echo canceller: filter-bank delay estimation through AGC.

Stages are cumulative. `tde` emits the selected filter error unchanged, `nlp`
applies the coherence gain in the STFT domain, `nn` replaces it with the
suppressor mask smoothed by the coherence gain, and `omlsa` fuses that gain
with the guided OMLSA gain. AGC can be switched on for any stage.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.aec.agc import AgcConfig, AutomaticGainControl
from src.aec.mdf import MdfConfig
from src.aec.omlsa import OmlsaConfig, OmlsaSuppressor
from src.aec.res import FeatureState, NlpState, ResConfig, nlp_gain, smooth_with_nlp, suppress_frame
from src.aec.tde import (BankGeometry, DelayEstimate, DelayTracker, FilterBank,
                         estimate_delay_argmax, estimate_delay_nn)
from src.dsp.frames import FFT_SIZE, FRAME_MS, check_frame
from src.dsp.mel import N_BANDS
from src.dsp.mfcc import FEATURE_DIM
from src.dsp.stft import StftAnalyzer, StftSynthesizer, analyze_block
from src.model.architecture import NeuralModel, require_dims
from src.model.weights_io import load_model
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

STAGES = ("tde", "nlp", "nn", "omlsa")
SUPPRESSOR_INPUT_DIM = 2 * FEATURE_DIM
SUPPRESSOR_OUTPUT_DIM = N_BANDS + 1


@dataclass
class PipelineConfig:
    stage: str = "omlsa"
    agc: bool = True
    tde_model: Optional[str] = None
    res_model: Optional[str] = None
    hold_frames: int = 5
    geometry: BankGeometry = field(default_factory=BankGeometry)
    mdf: MdfConfig = field(default_factory=MdfConfig)
    res: ResConfig = field(default_factory=ResConfig)
    omlsa: OmlsaConfig = field(default_factory=OmlsaConfig)
    agc_params: AgcConfig = field(default_factory=AgcConfig)

    def validate(self):
        if self.stage not in STAGES:
            raise ConfigError(f"unknown stage '{self.stage}', expected one of {STAGES}")
        if self.hold_frames < 1:
            raise ConfigError(f"hold_frames must be >= 1, got {self.hold_frames}")
        self.geometry.validate()
        self.mdf.validate()
        self.agc_params.validate()

    @property
    def uses_network(self) -> bool:
        return STAGES.index(self.stage) >= STAGES.index("nn")


class EchoCanceller:
    """Frame-synchronous AEC chain for one far/mic stream pair.

    Args:
        config: stage selection and per-module parameters
        delay_model: delay classifier; when absent and `config.tde_model` is
            unset the energy argmax is used
        suppressor_model: residual-echo network, required by the `nn` and
            `omlsa` stages (loaded from `config.res_model` when not given)
    """

    def __init__(self, config: Optional[PipelineConfig] = None,
                 delay_model: Optional[NeuralModel] = None,
                 suppressor_model: Optional[NeuralModel] = None):
        self.config = config or PipelineConfig()
        self.config.validate()
        cfg = self.config
        geometry = cfg.geometry

        if delay_model is None and cfg.tde_model:
            delay_model = load_model(cfg.tde_model, expected_fft_size=FFT_SIZE)
        if delay_model is not None:
            require_dims(delay_model, geometry.energy_dim, geometry.n_categories, "delay")
        self.delay_model = delay_model

        if cfg.uses_network:
            if suppressor_model is None and cfg.res_model:
                suppressor_model = load_model(cfg.res_model, expected_fft_size=FFT_SIZE)
            if suppressor_model is None:
                raise ConfigError(f"stage '{cfg.stage}' needs a suppressor model (res_model)")
            require_dims(suppressor_model, SUPPRESSOR_INPUT_DIM, SUPPRESSOR_OUTPUT_DIM, "suppressor")
        self.suppressor_model = suppressor_model if cfg.uses_network else None

        self.bank = FilterBank(geometry, cfg.mdf)
        self.agc = AutomaticGainControl(cfg.agc_params) if cfg.agc else None
        self.reset()
        logger.info(f"EchoCanceller stage={cfg.stage} agc={cfg.agc} "
                    f"delay={'classifier' if self.delay_model else 'argmax'} latency={self.latency} frames")

    @property
    def latency(self) -> int:
        """Output delay in frames relative to the mic input."""
        stage = STAGES.index(self.config.stage)
        frames = 0
        if stage >= STAGES.index("nlp"):
            frames += 1
        if stage >= STAGES.index("nn"):
            frames += FeatureState.latency
        if self.config.agc:
            frames += AutomaticGainControl.latency
        return frames

    def reset(self):
        cfg = self.config
        K = cfg.geometry.frame_size
        self.bank.reset()
        self.tracker = DelayTracker(hold=cfg.hold_frames)
        self.delay_state = self.delay_model.new_state() if self.delay_model is not None else None
        self.suppressor_state = self.suppressor_model.new_state() if self.suppressor_model is not None else None
        self.mic_stft = StftAnalyzer(K)
        self.error_stft = StftAnalyzer(K)
        self.synthesizer = StftSynthesizer(K)
        self.nlp = NlpState(K + 1, cfg.res)
        self.features = FeatureState(K)
        self.omlsa = OmlsaSuppressor(cfg.omlsa, K + 1)
        self._pending = deque(maxlen=FeatureState.latency + 1)
        for _ in range(FeatureState.latency):
            self._pending.append((np.zeros(K + 1, dtype=np.complex128), np.ones(K + 1)))
        if self.agc is not None:
            self.agc.reset()
        self.frame_index = 0
        self.diagnostics: List[Dict[str, object]] = []

    def _estimate_delay(self) -> DelayEstimate:
        ev = self.bank.energy_vector()
        if self.delay_model is not None:
            return estimate_delay_nn(ev, self.delay_model, self.delay_state, self.config.geometry)
        return estimate_delay_argmax(ev, self.config.geometry)

    def _aligned_far_spectrum(self, category: int) -> np.ndarray:
        buffer = self.bank.far_buffer
        d = min(category, len(buffer) - 2)
        return analyze_block(buffer[d + 1], buffer[d], self.mic_stft.window)

    def process_frame(self, far_frame, mic_frame) -> np.ndarray:
        """Push one far/mic frame pair and return one output frame (`latency` frames late)."""
        cfg = self.config
        K = cfg.geometry.frame_size
        far = check_frame(far_frame, K)
        mic = check_frame(mic_frame, K)
        self.bank.push(far, mic)
        est = self._estimate_delay()
        category = self.tracker.update(est)
        selected = cfg.geometry.best_filter(category)
        error = self.bank.last_errors[selected].copy()
        row = {"frame": self.frame_index, "delay": category, "delay_ms": category * FRAME_MS,
               "estimate": est.category, "probability": est.probability,
               "low_confidence": est.low_confidence, "filter": selected}
        self.frame_index += 1

        if cfg.stage == "tde":
            out = error
        else:
            out = self._suppress(error, mic, category, row)
        if self.agc is not None:
            out = self.agc.process(out)
        self.diagnostics.append(row)
        return out

    def _suppress(self, error: np.ndarray, mic: np.ndarray, category: int, row: Dict[str, object]) -> np.ndarray:
        cfg = self.config
        error_spec = self.error_stft.process(error)
        mic_spec = self.mic_stft.process(mic)
        far_spec = self._aligned_far_spectrum(category)
        g_nlp = nlp_gain(self.nlp, far_spec, mic_spec, error_spec)
        row["gain_nlp"] = float(np.mean(g_nlp))
        if cfg.stage == "nlp":
            return self.synthesizer.process(g_nlp * error_spec)

        # features describe the frame two steps back; hold its spectrum and NLP gain until then
        feature = self.features.push_spectra(far_spec, error_spec)
        self._pending.append((error_spec, g_nlp))
        error_spec, g_nlp = self._pending[0]
        out = self.suppressor_model.step(self.suppressor_model.preprocess(feature), self.suppressor_state)
        band_gains, p_near = out[:N_BANDS], float(out[N_BANDS])
        mask, _ = suppress_frame(error_spec, band_gains, self.features.filterbank)
        g_n = smooth_with_nlp(mask, g_nlp)
        row["p_near"] = p_near
        row["gain_nn"] = float(np.mean(g_n))
        if cfg.stage == "nn":
            return self.synthesizer.process(g_n * error_spec)

        g_f, g_o = self.omlsa.process(error_spec, guidance=g_n, p_near=p_near)
        row["gain_omlsa"] = float(np.mean(g_o))
        row["gain_fused"] = float(np.mean(g_f))
        return self.synthesizer.process(g_f * error_spec)

    def process(self, far: np.ndarray, mic: np.ndarray) -> np.ndarray:
        """Run the frame loop over whole signals; equals concatenating `process_frame` outputs."""
        K = self.config.geometry.frame_size
        far = np.asarray(far, dtype=np.float64)
        mic = np.asarray(mic, dtype=np.float64)
        n = len(mic)
        n_total = -(-n // K) * K
        far_padded = np.zeros(n_total)
        far_padded[:min(len(far), n_total)] = far[:n_total]
        mic_padded = np.zeros(n_total)
        mic_padded[:n] = mic
        frames = [self.process_frame(far_padded[i:i + K], mic_padded[i:i + K]) for i in range(0, n_total, K)]
        return np.concatenate(frames)[:n] if frames else np.zeros(0)

    def enhance(self, far: np.ndarray, mic: np.ndarray) -> np.ndarray:
        """`process` with `latency` frames of trailing silence, trimmed to align with `mic`."""
        K = self.config.geometry.frame_size
        n = len(mic)
        n_total = -(-n // K) * K + self.latency * K
        far_ext = np.zeros(n_total)
        far_ext[:min(len(far), n)] = np.asarray(far, dtype=np.float64)[:n]
        mic_ext = np.zeros(n_total)
        mic_ext[:n] = mic
        out = self.process(far_ext, mic_ext)
        return out[self.latency * K:self.latency * K + n]

    def diagnostics_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.diagnostics)

    def write_diagnostics(self, path: str):
        """CSV with one row per processed frame; the first line is a `#` comment carrying the latency.

        Read it back with `pd.read_csv(path, comment="#")`.
        """
        with open(path, "w", newline="") as f:
            f.write(f"# stage={self.config.stage} agc={self.config.agc} "
                    f"latency_frames={self.latency} latency_ms={self.latency * FRAME_MS:g}\n")
            self.diagnostics_frame().to_csv(f, index=False)
        logger.info(f"Wrote {len(self.diagnostics)} diagnostic rows to {path}")
