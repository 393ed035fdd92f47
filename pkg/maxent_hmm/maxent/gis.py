"""
Generalized Iterative Scaling for conditional maxent models
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..config import TrainOptions
from ..errors import MaxentHmmError, UnobservedFeaturesError
from ..trace import TrainTrace
from .models import Candidate, Dataset, EventBlock, MaxentModel
from .scoring import (
    f_sharp,
    relative_residual,
    row_log_probabilities,
    soft_counts,
    truth_targets,
)

logger = logging.getLogger(__name__)

# Soft observed mass below this fraction of the largest count is treated as unobserved
OBSERVED_FLOOR = 1e-12
# Log weights stay inside [-LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND]
LOG_WEIGHT_BOUND = 50.0


@dataclass
class GisResult:
    log_weights: np.ndarray
    iterations: int
    residual: float
    converged: bool


def gis_iterate(log_weights: np.ndarray, data: Dataset, targets: np.ndarray,
                row_weights: np.ndarray, fsharp: int, max_iters: int, tol: float,
                trace: Optional[TrainTrace] = None) -> GisResult:
    """
    Run GIS updates log(lambda) += log(observed / expected) / f#

    Args:
        log_weights: starting log weights, one per feature
        data: dataset whose compiled matrix defines the indicators
        targets: observed mass per candidate row (one-hot truth for plain training)
        row_weights: weight applied to each row's model probability when forming expectations
        fsharp: slowing exponent denominator
        max_iters: maximum number of updates
        tol: stop when the max relative constraint residual is at or below this value

    Returns:
        GisResult with the final log weights; the trace gets one entry per evaluated iterate
    """
    log_w = np.clip(np.array(log_weights, dtype=float), -LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND)
    observed = soft_counts(data, targets)
    observed_mask = observed > OBSERVED_FLOOR * max(float(observed.max(initial=0.0)), 1.0)
    observed = np.where(observed_mask, observed, 0.0)
    log_observed = np.log(np.where(observed_mask, observed, 1.0))
    residual = float("inf")
    for it in range(max_iters + 1):
        log_p = row_log_probabilities(MaxentModel(np.exp(log_w)), data)
        probs = np.exp(log_p)
        expected = soft_counts(data, probs * row_weights)
        residual = relative_residual(expected, observed)
        if trace is not None:
            mask = targets > 0
            trace.record(float(np.dot(targets[mask], log_p[mask])), residual)
        logger.debug(f"GIS iteration {it}: residual={residual:.3e}")
        if residual <= tol:
            return GisResult(log_w, it, residual, True)
        if it == max_iters:
            break
        step = np.zeros_like(log_w)
        tiny = np.finfo(float).tiny
        step[observed_mask] = (log_observed[observed_mask] - np.log(np.maximum(expected[observed_mask], tiny))) / fsharp
        log_w = np.clip(log_w + step, -LOG_WEIGHT_BOUND, LOG_WEIGHT_BOUND)
    return GisResult(log_w, max_iters, residual, False)


def train_gis(init: MaxentModel, data: Dataset, opts: TrainOptions) -> Tuple[MaxentModel, TrainTrace]:
    """
    Fit a maxent model to labeled data by Generalized Iterative Scaling

    Raises:
        UnobservedFeaturesError: if any feature never fires on a true candidate
        MaxentHmmError: if the dataset is empty or f# is 0
    """
    if init.num_features != data.num_features:
        raise MaxentHmmError(
            f"initial model has {init.num_features} features, dataset has {data.num_features}"
        )
    if len(data) == 0:
        raise MaxentHmmError("cannot train on an empty dataset")
    targets = truth_targets(data)
    observed = soft_counts(data, targets)
    unobserved = np.flatnonzero(observed <= 0)
    if unobserved.size:
        raise UnobservedFeaturesError(unobserved.tolist())
    fsharp = f_sharp(data)
    if fsharp < 1:
        raise MaxentHmmError("f# is 0: no indicator fires anywhere in the data")

    trace = TrainTrace("gis")
    result = gis_iterate(
        init.log_weights, data, targets, np.ones(data.compiled.n_rows), fsharp,
        opts.max_iters, opts.tol, trace if opts.record_trace else None,
    )
    trace.iterations = result.iterations
    trace.converged = result.converged
    if result.converged:
        logger.info(f"GIS converged after {result.iterations} iterations (residual {result.residual:.3e})")
    else:
        logger.warning(f"GIS stopped at max_iters={opts.max_iters} with residual {result.residual:.3e}")
    if result.iterations == 0:
        return init, trace
    return init.with_weights(np.exp(result.log_weights)), trace


def prune_unobserved(data: Dataset) -> Tuple[Dataset, Dict[int, int]]:
    """Drop features that never fire on a true candidate and renumber the survivors densely"""
    observed = soft_counts(data, truth_targets(data)) if len(data) else np.zeros(data.num_features)
    keep = np.flatnonzero(observed > 0)
    remap = {int(old): new for new, old in enumerate(keep)}
    if len(keep) == data.num_features:
        return data, remap
    if len(keep) == 0:
        logger.warning("every feature is unobserved; pruned dataset has no features")
    else:
        logger.info(f"pruned {data.num_features - len(keep)} unobserved feature(s), {len(keep)} remain")
    return remap_dataset(data, remap, len(keep)), remap


def remap_dataset(data: Dataset, remap: Dict[int, int], num_features: int) -> Dataset:
    """Rewrite every candidate through remap, dropping ids that are not mapped"""
    events = []
    for ev in data.events:
        cands = tuple(
            Candidate.of(c.label, (remap[i] for i in c.active if i in remap)) for c in ev.candidates
        )
        events.append(EventBlock(ev.event_id, ev.true_label, cands))
    return Dataset(tuple(events), num_features)


def expand_model(model: MaxentModel, remap: Dict[int, int], num_features: int) -> MaxentModel:
    """Lift a model trained on pruned ids back to the original id space; pruned ids get weight 1"""
    weights = np.ones(num_features)
    names = {}
    for old, new in remap.items():
        weights[old] = model.weights[new]
        if model.names and new in model.names:
            names[old] = model.names[new]
    return MaxentModel(weights, names or None)
