from .corpus import Corpus, load_corpus
from .dataset import DelaySequenceDataset, SuppressionSequenceDataset
from .preprocessing import load_manifest
from .synthesis import LabeledClip, ScenarioConfig, SynthConfig, build_dataset, synthesize_clip

__all__ = [
    'Corpus',
    'load_corpus',
    'DelaySequenceDataset',
    'SuppressionSequenceDataset',
    'load_manifest',
    'LabeledClip',
    'ScenarioConfig',
    'SynthConfig',
    'build_dataset',
    'synthesize_clip',
]
