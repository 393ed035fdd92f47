"""
Maxent sequence models: maxent-transition HMMs, MEMMs and CRF network construction
"""

from .models import MemmModel, SeqEventBlock, SeqSequence
from .memm import (
    MemmDecode,
    memm_sequence_posterior,
    path_probabilities,
    sequence_probability,
    state_residuals,
    train_memm,
)
from .networks import (
    ConditionalSequenceSpec,
    MaxentHmmSpec,
    SequenceKind,
    StateCloudSpec,
    build_sequence_network,
    crf_network_spec,
    crf_path_distribution,
    crf_path_weights,
    memm_network_spec,
    size_report,
)

__all__ = [
    'MemmModel', 'SeqEventBlock', 'SeqSequence',
    'MemmDecode', 'memm_sequence_posterior', 'path_probabilities', 'sequence_probability',
    'state_residuals', 'train_memm',
    'ConditionalSequenceSpec', 'MaxentHmmSpec', 'SequenceKind', 'StateCloudSpec',
    'build_sequence_network', 'crf_network_spec', 'crf_path_distribution', 'crf_path_weights',
    'memm_network_spec', 'size_report',
]
