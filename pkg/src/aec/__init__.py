from .agc import AgcConfig, AutomaticGainControl, apply_agc, sigmoid_smooth
from .mdf import MdfConfig, MdfFilter, block_energies, mdf_process
from .omlsa import OmlsaConfig, OmlsaSuppressor, fuse_gains, omlsa_gain
from .pipeline import STAGES, EchoCanceller, PipelineConfig
from .res import ResConfig, extract_features, nlp_gain, suppress_frame, target_band_gains, target_dtd
from .tde import BankGeometry, DelayEstimate, DelayTracker, FilterBank, estimate_delay_argmax, estimate_delay_nn

__all__ = [
    'AgcConfig',
    'AutomaticGainControl',
    'apply_agc',
    'sigmoid_smooth',
    'MdfConfig',
    'MdfFilter',
    'block_energies',
    'mdf_process',
    'OmlsaConfig',
    'OmlsaSuppressor',
    'fuse_gains',
    'omlsa_gain',
    'STAGES',
    'EchoCanceller',
    'PipelineConfig',
    'ResConfig',
    'extract_features',
    'nlp_gain',
    'suppress_frame',
    'target_band_gains',
    'target_dtd',
    'BankGeometry',
    'DelayEstimate',
    'DelayTracker',
    'FilterBank',
    'estimate_delay_argmax',
    'estimate_delay_nn',
]
