# tests/test_agc.py
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.aec.agc import AgcConfig, AutomaticGainControl, max_gain_jump, sigmoid_smooth
from src.dsp.frames import FRAME_SIZE, frame_signal
from src.utils.exceptions import ConfigError

K = FRAME_SIZE


def stepped_sine(levels, frames_per_level: int = 40) -> np.ndarray:
    n = len(levels) * frames_per_level * K
    t = np.arange(n)
    envelope = np.repeat(np.asarray(levels, dtype=float), frames_per_level * K)
    return envelope * np.sin(2 * np.pi * 440.0 * t / 16000.0)


def run_with_frame_gains(agc: AutomaticGainControl, x: np.ndarray):
    """Per-sample gains of the emitted frames and the frame-level gains chosen after each push."""
    frame_gains, sample_gains = [agc.state.gain], []
    for i, frame in enumerate(frame_signal(x)):
        agc.process(frame)
        if i:
            sample_gains.append(agc.last_gains)
        frame_gains.append(agc.state.gain)
    agc.flush()
    sample_gains.append(agc.last_gains)
    return np.array(frame_gains), np.concatenate(sample_gains)


class TestSigmoidRamp(unittest.TestCase):
    def test_matches_direct_evaluation(self):
        g_prev, g_curr = 0.7, 2.3
        ramp = sigmoid_smooth(g_prev, g_curr, K)
        m = np.arange(K)
        direct = g_prev + (g_curr - g_prev) / (1.0 + np.exp(5.0 - 10.0 * m / K))
        assert_allclose(ramp, direct, rtol=0, atol=1e-12)

    def test_midpoint_exact(self):
        ramp = sigmoid_smooth(1.0, 3.0, K)
        self.assertEqual(ramp[K // 2], 2.0)

    def test_invalid_length(self):
        with self.assertRaises(ConfigError):
            sigmoid_smooth(1.0, 2.0, 0)


class TestAutomaticGainControl(unittest.TestCase):
    def setUp(self):
        self.x = stepped_sine([0.05, 0.5, 0.02, 0.4])

    def test_smooth_jump_bounded_by_frame_gain_change(self):
        agc = AutomaticGainControl()
        frame_gains, sample_gains = run_with_frame_gains(agc, self.x)
        bound = np.max(np.abs(np.diff(frame_gains))) * 10.0 / (4 * K)
        self.assertLessEqual(max_gain_jump(sample_gains), bound + 1e-12)
        self.assertAlmostEqual(agc.state.max_jump, max_gain_jump(sample_gains), places=12)

    def test_falling_gain_reramps_previous_tail(self):
        M = 80
        agc = AutomaticGainControl(AgcConfig(alpha=0.0, ramp_length=M))
        quiet, loud = np.full(K, 0.125), np.full(K, 0.25)
        agc.process(quiet)
        agc.process(quiet)
        self.assertEqual(agc.state.gain, 2.0)
        out = agc.process(loud)
        self.assertEqual(agc.state.gain, 1.0)
        ramp = sigmoid_smooth(2.0, 1.0, M)
        assert_allclose(agc.last_gains[:K - M], 2.0)
        assert_allclose(agc.last_gains[K - M:], ramp)
        assert_allclose(out, quiet * agc.last_gains)
        self.assertTrue(np.all(np.diff(agc.last_gains) <= 0))
        self.assertLessEqual(max_gain_jump(agc.last_gains), 1.0 * 10.0 / (4 * M))
        agc.process(loud)
        assert_allclose(agc.last_gains, 1.0)

    def test_step_mode_has_full_jump(self):
        agc = AutomaticGainControl(AgcConfig(smooth=False))
        frame_gains, sample_gains = run_with_frame_gains(agc, self.x)
        full = np.max(np.abs(np.diff(frame_gains)))
        self.assertAlmostEqual(max_gain_jump(sample_gains), full, places=12)

        smooth = AutomaticGainControl()
        _, smooth_gains = run_with_frame_gains(smooth, self.x)
        self.assertLess(max_gain_jump(smooth_gains), 0.1 * full)

    def test_peak_guard(self):
        out, _ = AutomaticGainControl().process_stream(self.x)
        self.assertLessEqual(np.max(np.abs(out)), 0.9 * 1.02)

    def test_stream_is_aligned_with_input(self):
        x = stepped_sine([0.3], frames_per_level=20)[:-37]
        out, gains = AutomaticGainControl().process_stream(x)
        self.assertEqual(len(out), len(x))
        self.assertEqual(len(gains), len(x))
        assert_allclose(out, np.clip(x * gains, -1.0, 1.0))

    def test_silence_holds_gain(self):
        agc = AutomaticGainControl()
        out, gains = agc.process_stream(np.zeros(10 * K))
        self.assertFalse(np.any(out))
        assert_allclose(gains, 1.0)

    def test_first_call_emits_zeros(self):
        agc = AutomaticGainControl()
        self.assertFalse(np.any(agc.process(np.full(K, 0.1))))
        self.assertEqual(AutomaticGainControl.latency, 1)

    def test_invalid_targets(self):
        with self.assertRaises(ConfigError):
            AutomaticGainControl(AgcConfig(target_mean=0.95, target_max=0.9))


if __name__ == "__main__":
    unittest.main()
