"""
Evaluation, posteriors and prediction for hidden-variable maxent models
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from ..errors import MaxentHmmError, ZeroProbabilityError
from ..maxent.models import Distribution
from ..maxent.scoring import evaluate, row_probabilities
from .models import HiddenDataset, HiddenEventBlock, HiddenMaxentModel

logger = logging.getLogger(__name__)


def _emitter_distribution(model: HiddenMaxentModel, block: HiddenEventBlock, z: int) -> Distribution:
    if model.is_deterministic:
        out = model.deterministic_outputs[z]
        if out not in block.labels:
            raise MaxentHmmError(
                f"event {block.event_id}: hidden value {model.hidden_values[z]} outputs {out!r}, "
                f"which is not a candidate"
            )
        return Distribution({x: 1.0 if x == out else 0.0 for x in block.labels})
    return evaluate(model.emitters[z], block.emitter_block(z))


def _joint(model: HiddenMaxentModel, block: HiddenEventBlock) -> Tuple[Distribution, Dict[str, np.ndarray]]:
    prior = evaluate(model.selector, block.selector_block())
    joint = {x: np.zeros(model.n_hidden) for x in block.labels}
    for z, hv in enumerate(model.hidden_values):
        em = _emitter_distribution(model, block, z)
        for x in block.labels:
            joint[x][z] = prior[hv] * em[x]
    return prior, joint


def hv_evaluate(model: HiddenMaxentModel, block: HiddenEventBlock) -> Distribution:
    """P(x|h) = sum_z P_selector(z|h) P_emitter_z(x|z,h)"""
    _, joint = _joint(model, block)
    return Distribution({x: float(j.sum()) for x, j in joint.items()})


def hv_posterior(model: HiddenMaxentModel, block: HiddenEventBlock, observed: str) -> Distribution:
    """P(z | x, h) by Bayes' rule"""
    _, joint = _joint(model, block)
    if observed not in joint:
        raise MaxentHmmError(f"event {block.event_id}: {observed!r} is not a candidate")
    row = joint[observed]
    total = row.sum()
    if total <= 0:
        raise ZeroProbabilityError(f"event {block.event_id}: {observed!r} has zero marginal probability")
    return Distribution({hv: float(p / total) for hv, p in zip(model.hidden_values, row)})


@dataclass
class HiddenPrediction:
    label: str
    distribution: Distribution
    posteriors: Dict[str, Distribution]


def hv_predict(model: HiddenMaxentModel, block: HiddenEventBlock) -> HiddenPrediction:
    """Most probable output (ties to the first label), with P(z | x, h) for every output x"""
    _, joint = _joint(model, block)
    dist = Distribution({x: float(j.sum()) for x, j in joint.items()})
    posteriors = {}
    for x, row in joint.items():
        total = row.sum()
        if total > 0:
            posteriors[x] = Distribution({hv: float(p / total) for hv, p in zip(model.hidden_values, row)})
    return HiddenPrediction(dist.argmax(), dist, posteriors)


def stage_probabilities(model: HiddenMaxentModel, data: HiddenDataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Selector table (events x K) and emitter table (K x output rows) for a whole dataset
    """
    data.check_model(model)
    k = data.n_hidden
    n = len(data)
    selector = row_probabilities(model.selector, data.selector_data).reshape(n, k)
    compiled = data.output_data.compiled
    if model.is_deterministic:
        labels = np.array([c.label for ev in data.events for c in ev.emitters[0]], dtype=object)
        emitter = np.array([labels == out for out in model.deterministic_outputs], dtype=float)
        if n:
            covered = np.add.reduceat(emitter, compiled.offsets[:-1], axis=1)
            if np.any(covered < 1):
                raise MaxentHmmError("some hidden value outputs a label that is not a candidate of its event")
    else:
        emitter = row_probabilities(model.stacked_emitter(), data.stacked_data).reshape(k, compiled.n_rows)
    return selector, emitter


def marginal_rows(model: HiddenMaxentModel, data: HiddenDataset) -> np.ndarray:
    """P(x|h) for every output row of the dataset"""
    selector, emitter = stage_probabilities(model, data)
    event_index = data.output_data.compiled.event_index
    return (selector[event_index] * emitter.T).sum(axis=1)


def posteriors(model: HiddenMaxentModel, data: HiddenDataset) -> Tuple[np.ndarray, float]:
    """(events x K) posterior over hidden values given the true labels, and the log-likelihood"""
    if not data.is_labeled:
        raise MaxentHmmError("posteriors need labeled events")
    if len(data) == 0:
        return np.zeros((0, data.n_hidden)), 0.0
    selector, emitter = stage_probabilities(model, data)
    truth = data.output_data.compiled.truth_rows
    joint = selector * emitter[:, truth].T
    marginal = joint.sum(axis=1)
    if np.any(marginal <= 0):
        bad = data.events[int(np.argmin(marginal))].event_id
        raise ZeroProbabilityError(f"event {bad}: true label has zero marginal probability")
    return joint / marginal[:, None], float(np.log(marginal).sum())


def hv_log_likelihood(model: HiddenMaxentModel, data: HiddenDataset) -> float:
    return posteriors(model, data)[1]
