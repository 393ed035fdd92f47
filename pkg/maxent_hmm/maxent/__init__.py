"""
Conditional maximum entropy models: data types, scoring, GIS training and group transforms
"""

from .models import Candidate, CompiledDataset, Dataset, Distribution, EventBlock, MaxentModel
from .scoring import (
    accuracy,
    constraint_residual,
    evaluate,
    expected_counts,
    f_sharp,
    log_likelihood,
    max_total_variation,
    mean_kl_divergence,
    observed_counts,
    row_probabilities,
)
from .gis import expand_model, prune_unobserved, train_gis
from .transforms import (
    Group,
    GroupKind,
    GroupPartition,
    ScaleFactor,
    complete_groups,
    make_grouped,
    partition_exclusive,
    scale_group,
    strip_anti_indicators,
    to_subunit,
)

__all__ = [
    'Candidate', 'CompiledDataset', 'Dataset', 'Distribution', 'EventBlock', 'MaxentModel',
    'accuracy', 'constraint_residual', 'evaluate', 'expected_counts', 'f_sharp',
    'log_likelihood', 'max_total_variation', 'mean_kl_divergence', 'observed_counts',
    'row_probabilities',
    'expand_model', 'prune_unobserved', 'train_gis',
    'Group', 'GroupKind', 'GroupPartition', 'ScaleFactor', 'complete_groups', 'make_grouped',
    'partition_exclusive', 'scale_group', 'strip_anti_indicators', 'to_subunit',
]
