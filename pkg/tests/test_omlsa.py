# tests/test_omlsa.py
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.aec.omlsa import (NOISE_FLOOR, ClampCounter, OmlsaConfig, OmlsaSuppressor, conditional_presence,
                           fuse_gains, fusion_probability, lsa_gain, noise_flag, presence_smooth)
from src.dsp.frames import FRAME_SIZE, frame_signal
from src.dsp.stft import StftAnalyzer, StftSynthesizer
from src.utils.metrics import segmental_snr
from tests.helpers import speech_like, white_noise


class TestGainPieces(unittest.TestCase):
    def test_noise_flag_threshold(self):
        assert_allclose(noise_flag(np.array([0.49, 0.5, 0.9])), [0.0, 1.0, 1.0])

    def test_presence_smoothing(self):
        assert_allclose(presence_smooth(np.zeros(3), np.ones(3), 0.9), 0.1)

    def test_lsa_gain_bounded_and_monotone(self):
        gamma = np.full(5, 4.0)
        gains = lsa_gain(np.array([0.01, 0.1, 1.0, 10.0, 100.0]), gamma)
        self.assertTrue(np.all(gains <= 1.0))
        self.assertTrue(np.all(np.diff(gains) >= 0))

    def test_fusion_probability_switch(self):
        bins = np.array([0.2, 0.8])
        assert_allclose(fusion_probability(bins, 0.8), bins)
        self.assertEqual(fusion_probability(bins, 0.3), 0.3)
        self.assertEqual(fusion_probability(bins, 0.5), 0.5)

    def test_fusion_endpoints(self):
        g_o, g_n = np.full(4, 0.2), np.full(4, 0.9)
        assert_allclose(fuse_gains(1.0, g_o, g_n), g_o)
        assert_allclose(fuse_gains(0.0, g_o, g_n), g_n)
        assert_allclose(fuse_gains(0.25, g_o, g_n), 0.25 * 0.2 + 0.75 * 0.9)

    def test_out_of_range_probability_clamped_and_counted(self):
        counter = ClampCounter()
        out = fuse_gains(np.array([1.5, -0.5, 0.5]), np.zeros(3), np.ones(3), counter)
        assert_allclose(out, [0.0, 1.0, 0.5])
        self.assertEqual(counter.count, 2)


def spectra(x: np.ndarray):
    analyzer = StftAnalyzer()
    return [analyzer.process(f) for f in frame_signal(x)]


class TestOmlsaSuppressor(unittest.TestCase):
    def test_stationary_noise_attenuated(self):
        suppressor = OmlsaSuppressor()
        frames = spectra(white_noise(400 * FRAME_SIZE, seed=1, scale=0.05))
        gains = [suppressor.process(s)[0] for s in frames]
        tail = slice(200, None)
        power_in = sum(np.sum(np.abs(s) ** 2) for s in frames[tail])
        power_out = sum(np.sum(np.abs(g * s) ** 2) for g, s in zip(gains[tail], frames[tail]))
        self.assertLess(10 * np.log10(power_out / power_in), -10.0)

    def test_gain_within_bounds(self):
        cfg = OmlsaConfig()
        suppressor = OmlsaSuppressor(cfg)
        x = speech_like(2.0, seed=2) + white_noise(32000, seed=3, scale=0.01)
        for s in spectra(x):
            gain, _ = suppressor.process(s)
            self.assertTrue(np.all(gain >= cfg.g_min - 1e-12))
            self.assertTrue(np.all(gain <= 1.0))

    def test_unguided_mode_returns_omlsa_gain(self):
        suppressor = OmlsaSuppressor()
        for s in spectra(speech_like(1.0, seed=7) + white_noise(16000, seed=8, scale=0.01)):
            fused, g_o = suppressor.process(s)
            assert_allclose(fused, g_o)
        self.assertTrue(np.all((suppressor.state.presence >= 0.0) & (suppressor.state.presence <= 1.0)))

    def test_guidance_marks_speech(self):
        suppressor = OmlsaSuppressor()
        frames = spectra(speech_like(1.0, seed=4) + white_noise(16000, seed=5, scale=0.01))
        suppressor.process(frames[0], guidance=np.ones(len(frames[0])), p_near=0.9)
        seeded = suppressor.state.noise.copy()
        for s in frames[1:]:
            fused, g_o = suppressor.process(s, guidance=np.ones(len(s)), p_near=0.9)
        self.assertGreater(float(np.mean(suppressor.state.presence)), 0.99)
        assert_allclose(suppressor.state.noise, seeded)
        assert_allclose(fused, suppressor.state.presence * g_o + (1 - suppressor.state.presence))

    def test_guided_noise_seeded_from_first_frame(self):
        suppressor = OmlsaSuppressor()
        first = spectra(white_noise(2 * FRAME_SIZE, seed=9, scale=0.1))[1]
        suppressor.process(first, guidance=np.ones(len(first)), p_near=0.9)
        assert_allclose(suppressor.state.noise, np.maximum(np.abs(first) ** 2, NOISE_FLOOR))
        self.assertTrue(np.all(suppressor.state.post_snr <= 1.0 + 1e-9))

    def test_memoryless_presence_equals_indicator(self):
        indicator = np.array([0.0, 1.0, 1.0, 0.0])
        assert_allclose(presence_smooth(np.full(4, 0.7), indicator, 0.0), indicator)
        suppressor = OmlsaSuppressor(OmlsaConfig(alpha_p=0.0))
        guidance = np.where(np.arange(161) % 3 == 0, 0.8, 0.1)
        for s in spectra(white_noise(5 * FRAME_SIZE, seed=12)):
            suppressor.process(s, guidance=guidance, p_near=0.9)
            assert_allclose(suppressor.state.presence, noise_flag(guidance))

    def test_clean_speech_distortion(self):
        lead_in = 50
        degradation = []
        for seed in range(20):
            clean = speech_like(3.0, seed=100 + seed)
            suppressor = OmlsaSuppressor()
            synthesizer = StftSynthesizer()
            out = np.concatenate([synthesizer.process(suppressor.process(s)[0] * s) for s in spectra(clean)])
            # synthesis lags analysis by one frame
            start = lead_in * FRAME_SIZE
            reference = clean[start:len(clean) - FRAME_SIZE]
            estimate = out[start + FRAME_SIZE:]
            degradation.append(segmental_snr(reference, reference) - segmental_snr(estimate, reference))
        self.assertLessEqual(max(degradation), 3.0)

    def test_conditional_presence_limits(self):
        xi = np.array([10.0, 10.0, 0.1])
        gamma = np.array([50.0, 0.0, 1.0])
        p = conditional_presence(np.array([0.5, 0.5, 0.0]), xi, gamma)
        self.assertGreater(p[0], 0.999)
        assert_allclose(p[1], 1.0 / 12.0)
        assert_allclose(p[2], 1.0)

    def test_low_near_probability_follows_network(self):
        suppressor = OmlsaSuppressor()
        guidance = np.full(161, 0.2)
        for s in spectra(white_noise(30 * FRAME_SIZE, seed=6)):
            fused, g_o = suppressor.process(s, guidance=guidance, p_near=0.0)
        assert_allclose(fused, guidance)


if __name__ == "__main__":
    unittest.main()
