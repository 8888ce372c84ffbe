# src/dsp/mel.py
import numpy as np

from src.dsp.frames import FRAME_SIZE, SAMPLE_RATE

N_BANDS = 22


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


class MelFilterbank:
    """Triangular mel bands over the one-sided spectrum of a 2K-point transform.

    Band centres are mel-spaced between bin 1 and bin K-1 (fractional bin
    positions). Neighbouring triangles cross at 0.5, so the weights of every
    interior bin sum to one; the DC and Nyquist bins carry no weight.

    Args:
        n_bands: number of bands
        frame_size: K, the spectrum has K + 1 bins
        sample_rate: stream rate in Hz
    """

    def __init__(self, n_bands: int = N_BANDS, frame_size: int = FRAME_SIZE, sample_rate: int = SAMPLE_RATE):
        self.n_bands = n_bands
        self.frame_size = frame_size
        self.n_bins = frame_size + 1
        bin_hz = sample_rate / (2.0 * frame_size)
        low, high = hz_to_mel(bin_hz), hz_to_mel((frame_size - 1) * bin_hz)
        self.centers = mel_to_hz(np.linspace(low, high, n_bands)) / bin_hz
        self.centers[0], self.centers[-1] = 1.0, float(frame_size - 1)

        bins = np.arange(self.n_bins, dtype=np.float64)
        weights = np.empty((n_bands, self.n_bins))
        for b in range(n_bands):
            one_hot = np.zeros(n_bands)
            one_hot[b] = 1.0
            weights[b] = np.interp(bins, self.centers, one_hot)
        weights[:, 0] = 0.0
        weights[:, -1] = 0.0
        self.weights = weights

    def band_energies(self, spectrum: np.ndarray) -> np.ndarray:
        """energies[b] = sum_k w_b(k) |X_k|^2."""
        return self.weights @ (np.abs(spectrum) ** 2)

    def band_to_bins(self, gains: np.ndarray, positions=None) -> np.ndarray:
        """Linear interpolation of per-band values across band centres.

        Positions outside the first/last centre take the edge value. `positions`
        defaults to every bin index 0..K.
        """
        if positions is None:
            positions = np.arange(self.n_bins, dtype=np.float64)
        return np.interp(positions, self.centers, np.asarray(gains, dtype=np.float64))


_DEFAULT = None


def default_filterbank() -> MelFilterbank:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = MelFilterbank()
    return _DEFAULT


def mel_band_energies(spectrum: np.ndarray, filterbank: MelFilterbank = None) -> np.ndarray:
    return (filterbank or default_filterbank()).band_energies(spectrum)
