from .frames import FRAME_SIZE, FFT_SIZE, N_BINS, SAMPLE_RATE
from .mel import MelFilterbank, mel_band_energies
from .mfcc import MfccExtractor, mfcc_with_deltas
from .stft import StftAnalyzer, StftSynthesizer, istft, stft

__all__ = [
    'FRAME_SIZE',
    'FFT_SIZE',
    'N_BINS',
    'SAMPLE_RATE',
    'MelFilterbank',
    'mel_band_energies',
    'MfccExtractor',
    'mfcc_with_deltas',
    'StftAnalyzer',
    'StftSynthesizer',
    'stft',
    'istft',
]
