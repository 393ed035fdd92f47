"""
HMM networks with non-emitting arcs: construction, exact inference and Baum-Welch training
"""

from .network import (
    Arc,
    ArcCounts,
    HmmNetwork,
    NetworkBuilder,
    ParamRef,
    Polarity,
    first_passage_network,
    join_networks,
    validate,
)
from .engine import (
    absorption_probability,
    expected_counts,
    output_distribution,
    string_log_probability,
    string_probability,
)
from .training import BwUpdate, ParamCounts, bw_update, train_fb
from .oracle import path_sum_counts, path_sum_probability

__all__ = [
    'Arc', 'ArcCounts', 'HmmNetwork', 'NetworkBuilder', 'ParamRef', 'Polarity',
    'first_passage_network', 'join_networks', 'validate',
    'absorption_probability', 'expected_counts', 'output_distribution',
    'string_log_probability', 'string_probability',
    'BwUpdate', 'ParamCounts', 'bw_update', 'train_fb',
    'path_sum_counts', 'path_sum_probability',
]
