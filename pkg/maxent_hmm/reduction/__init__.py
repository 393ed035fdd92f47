"""
Reduction of grouped sub-unit maxent models to chain HMMs, and training through them
"""

from .layout import (
    ChainLayout,
    CloudExit,
    SegmentedNetwork,
    add_cloud,
    build_event_network,
    build_training_network,
)
from .closed_form import ChainBatch, closed_form_counts
from .pipeline import HmmTrainReport, train_maxent_via_hmm

__all__ = [
    'ChainLayout', 'CloudExit', 'SegmentedNetwork', 'add_cloud', 'build_event_network', 'build_training_network',
    'ChainBatch', 'closed_form_counts',
    'HmmTrainReport', 'train_maxent_via_hmm',
]
