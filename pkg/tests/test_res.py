# tests/test_res.py
import unittest

import numpy as np
from numpy.testing import assert_allclose

from src.aec.res import (FeatureState, NlpState, band_gains_from_energies, extract_features, nlp_gain,
                         smooth_with_nlp, suppress_frame, target_band_gains, target_dtd)
from src.dsp.frames import FRAME_SIZE, N_BINS
from src.dsp.mel import N_BANDS, default_filterbank
from tests.helpers import white_noise


def random_spectrum(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    spectrum = rng.standard_normal(N_BINS) + 1j * rng.standard_normal(N_BINS)
    spectrum[0] = spectrum[0].real
    spectrum[-1] = spectrum[-1].real
    return spectrum


class TestTargets(unittest.TestCase):
    def test_gain_is_clipped_to_one(self):
        self.assertEqual(band_gains_from_energies(np.array([4.0]), np.array([1.0]))[0], 1.0)
        self.assertEqual(band_gains_from_energies(np.array([4.0]), np.array([1.0]), clip=False)[0], 2.0)
        self.assertAlmostEqual(band_gains_from_energies(np.array([1.0]), np.array([4.0]))[0], 0.5)

    def test_clean_error_gives_unit_gains(self):
        spectrum = random_spectrum(1)
        gains = target_band_gains(spectrum, spectrum)
        self.assertEqual(gains.shape, (N_BANDS,))
        assert_allclose(gains, 1.0)

    def test_silent_speech_gives_floor(self):
        gains = target_band_gains(np.zeros(N_BINS), random_spectrum(2))
        self.assertTrue(np.all(gains < 1e-3))

    def test_dtd_labels(self):
        loud = white_noise(FRAME_SIZE, seed=3)
        silent = np.zeros(FRAME_SIZE)
        self.assertEqual(tuple(target_dtd(loud, silent)), (1, 0))
        self.assertEqual(tuple(target_dtd(silent, loud)), (0, 1))
        self.assertEqual(tuple(target_dtd(1e-5 * loud, silent)), (0, 0))


class TestNlp(unittest.TestCase):
    def test_pure_echo_is_suppressed(self):
        state = NlpState()
        for t in range(20):
            x = random_spectrum(t)
            gain = nlp_gain(state, x, x, x)
        assert_allclose(gain[1:-1], state.config.nlp_bias, atol=1e-9)

    def test_near_only_passes(self):
        state = NlpState()
        for t in range(20):
            x = random_spectrum(100 + t)
            gain = nlp_gain(state, np.zeros(N_BINS), x, x)
        assert_allclose(gain, 1.0)

    def test_silence_passes(self):
        gain = nlp_gain(NlpState(), np.zeros(N_BINS), np.zeros(N_BINS), np.zeros(N_BINS))
        assert_allclose(gain, 1.0)


class TestMasks(unittest.TestCase):
    def test_flat_band_gains(self):
        error = random_spectrum(5)
        mask, suppressed = suppress_frame(error, np.full(N_BANDS, 0.5))
        assert_allclose(mask, 0.5)
        assert_allclose(suppressed, 0.5 * error)

    def test_gains_above_one_are_clipped(self):
        mask, _ = suppress_frame(random_spectrum(6), np.full(N_BANDS, 3.0))
        assert_allclose(mask, 1.0)

    def test_alternating_gains_interpolate_between_centres(self):
        fb = default_filterbank()
        gains = np.arange(N_BANDS) % 2.0
        assert_allclose(fb.band_to_bins(gains, positions=fb.centers), gains)
        midpoints = 0.5 * (fb.centers[1:] + fb.centers[:-1])
        assert_allclose(fb.band_to_bins(gains, positions=midpoints), 0.5)
        mask, _ = suppress_frame(random_spectrum(7), gains)
        self.assertTrue(np.all((mask >= 0.0) & (mask <= 1.0)))

    def test_suppression_never_adds_energy(self):
        rng = np.random.default_rng(8)
        for seed in range(20):
            error = random_spectrum(seed)
            _, suppressed = suppress_frame(error, rng.uniform(-0.5, 1.5, size=N_BANDS))
            self.assertLessEqual(np.sum(np.abs(suppressed) ** 2), np.sum(np.abs(error) ** 2))

    def test_geometric_mean_with_nlp(self):
        assert_allclose(smooth_with_nlp(np.full(N_BINS, 0.25), np.ones(N_BINS)), 0.5)
        assert_allclose(smooth_with_nlp(np.ones(N_BINS), np.zeros(N_BINS)), 0.0)


class TestFeatures(unittest.TestCase):
    def test_dimension_and_latency(self):
        state = FeatureState()
        self.assertEqual(FeatureState.latency, 2)
        for t in range(6):
            feature = extract_features(white_noise(FRAME_SIZE, seed=t), white_noise(FRAME_SIZE, seed=50 + t), state)
        self.assertEqual(feature.shape, (78,))
        self.assertTrue(np.all(np.isfinite(feature)))

    def test_identical_inputs_give_identical_halves(self):
        state = FeatureState()
        for t in range(6):
            frame = white_noise(FRAME_SIZE, seed=20 + t)
            feature = extract_features(frame, frame, state)
        assert_allclose(feature[:39], feature[39:])


if __name__ == "__main__":
    unittest.main()
