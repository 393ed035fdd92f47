"""
Hidden-variable maxent models: a selector over hidden values composed with per-value emitters
"""

from .models import (
    HiddenDataset,
    HiddenEventBlock,
    HiddenMaxentModel,
    HiddenTables,
    bind,
    bind_dataset,
    cross_hidden,
    history_features,
)
from .inference import (
    HiddenPrediction,
    hv_evaluate,
    hv_log_likelihood,
    hv_posterior,
    hv_predict,
    marginal_rows,
    posteriors,
)
from .network import GroupedHidden, HiddenNetwork, build_hidden_network, group_hidden, network_posterior
from .training import initial_hidden_model, train_hv_em_gis, train_hv_fb

__all__ = [
    'HiddenDataset', 'HiddenEventBlock', 'HiddenMaxentModel', 'HiddenTables',
    'bind', 'bind_dataset', 'cross_hidden', 'history_features',
    'HiddenPrediction', 'hv_evaluate', 'hv_log_likelihood', 'hv_posterior', 'hv_predict',
    'marginal_rows', 'posteriors',
    'GroupedHidden', 'HiddenNetwork', 'build_hidden_network', 'group_hidden', 'network_posterior',
    'initial_hidden_model', 'train_hv_em_gis', 'train_hv_fb',
]
