from .architecture import (
    EchoNet,
    LayerSpec,
    NeuralModel,
    classifier_specs,
    parameter_count,
    suppressor_specs,
)
from .weights_io import load_model, save_model

__all__ = [
    'EchoNet',
    'LayerSpec',
    'NeuralModel',
    'classifier_specs',
    'suppressor_specs',
    'parameter_count',
    'load_model',
    'save_model',
]
