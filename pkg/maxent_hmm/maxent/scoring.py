"""
Evaluation and diagnostics for conditional maxent models
Conditional probabilities, log-likelihood, observed/expected indicator counts and f#
"""

import logging
from typing import Optional

import numpy as np

from ..errors import EmptyCandidatesError, FeatureRangeError, MaxentHmmError
from .models import CompiledDataset, CountVector, Dataset, Distribution, EventBlock, MaxentModel

logger = logging.getLogger(__name__)


def _check_range(model: MaxentModel, num_features: int) -> None:
    if num_features > model.num_features:
        raise FeatureRangeError(
            f"data uses {num_features} features but the model has {model.num_features}"
        )


def evaluate(model: MaxentModel, block: EventBlock) -> Distribution:
    """P(x|h) for every candidate of one event block, computed in log space"""
    if not block.candidates:
        raise EmptyCandidatesError(f"event {block.event_id} has no candidates")
    top = block.max_feature()
    if top >= model.num_features:
        raise FeatureRangeError(
            f"event {block.event_id} uses feature {top}; model has {model.num_features} features"
        )
    log_w = model.log_weights
    scores = np.array([log_w[list(c.active)].sum() for c in block.candidates])
    scores -= scores.max()
    probs = np.exp(scores)
    probs /= probs.sum()
    return Distribution({c.label: float(p) for c, p in zip(block.candidates, probs)})


def segment_log_normalize(scores: np.ndarray, compiled: CompiledDataset) -> np.ndarray:
    """Turn per-row log scores into per-row log P(row | its event)"""
    if compiled.n_rows == 0:
        return scores.copy()
    starts = compiled.offsets[:-1]
    peak = np.maximum.reduceat(scores, starts)
    shifted = np.exp(scores - peak[compiled.event_index])
    log_z = peak + np.log(np.add.reduceat(shifted, starts))
    return scores - log_z[compiled.event_index]


def row_log_probabilities(model: MaxentModel, data: Dataset) -> np.ndarray:
    """log P(x|h) for every candidate row of the dataset, in compiled row order"""
    _check_range(model, data.num_features)
    compiled = data.compiled
    log_w = model.log_weights[: data.num_features]
    scores = compiled.matrix @ log_w if data.num_features else np.zeros(compiled.n_rows)
    return segment_log_normalize(np.asarray(scores, dtype=float), compiled)


def row_probabilities(model: MaxentModel, data: Dataset) -> np.ndarray:
    return np.exp(row_log_probabilities(model, data))


def event_distributions(model: MaxentModel, data: Dataset):
    """evaluate() for every event, vectorised"""
    probs = row_probabilities(model, data)
    offsets = data.compiled.offsets
    out = []
    for k, ev in enumerate(data.events):
        seg = probs[offsets[k]:offsets[k + 1]]
        out.append(Distribution({c.label: float(p) for c, p in zip(ev.candidates, seg)}))
    return out


def _require_labels(data: Dataset) -> None:
    if not data.is_labeled:
        missing = [ev.event_id for ev in data.events if ev.true_label is None][:5]
        raise MaxentHmmError(f"dataset has unlabeled events (e.g. {missing})")


def log_likelihood(model: MaxentModel, data: Dataset) -> float:
    """Sum over events of ln P(true label | history)"""
    if len(data) == 0:
        return 0.0
    _require_labels(data)
    log_p = row_log_probabilities(model, data)
    return float(log_p[data.compiled.truth_rows].sum())


def soft_log_likelihood(model: MaxentModel, data: Dataset, targets: np.ndarray) -> float:
    """Sum over rows of target mass times ln P(row); equals log_likelihood for one-hot targets"""
    if len(data) == 0:
        return 0.0
    log_p = row_log_probabilities(model, data)
    mask = targets > 0
    return float(np.dot(targets[mask], log_p[mask]))


def truth_targets(data: Dataset) -> np.ndarray:
    """One-hot row targets marking each event's true candidate"""
    _require_labels(data)
    targets = np.zeros(data.compiled.n_rows)
    targets[data.compiled.truth_rows] = 1.0
    return targets


def observed_counts(data: Dataset) -> CountVector:
    """Entry i counts the events whose true candidate activates indicator i"""
    if len(data) == 0:
        return np.zeros(data.num_features)
    return soft_counts(data, truth_targets(data))


def soft_counts(data: Dataset, row_mass: np.ndarray) -> CountVector:
    """Indicator counts when each candidate row carries the given mass"""
    if data.compiled.n_rows == 0:
        return np.zeros(data.num_features)
    return np.asarray(data.compiled.matrix.T @ row_mass, dtype=float).reshape(-1)


def expected_counts(model: MaxentModel, data: Dataset,
                    event_weights: Optional[np.ndarray] = None) -> CountVector:
    """Entry i is the model expectation of indicator i summed over events"""
    if len(data) == 0:
        return np.zeros(data.num_features)
    probs = row_probabilities(model, data)
    if event_weights is not None:
        probs = probs * event_weights[data.compiled.event_index]
    return soft_counts(data, probs)


def f_sharp(data: Dataset) -> int:
    """Largest number of indicators active on any one candidate"""
    if len(data) == 0:
        raise MaxentHmmError("f# is undefined for an empty dataset")
    return int(data.compiled.sizes.max())


def relative_residual(expected: CountVector, observed: CountVector) -> float:
    """max_i |expected_i - observed_i| / observed_i over indicators with observed_i > 0"""
    mask = observed > 0
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(expected[mask] - observed[mask]) / observed[mask]))


def constraint_residual(model: MaxentModel, data: Dataset) -> float:
    """Max relative constraint residual of the model on labeled data"""
    observed = observed_counts(data)
    skipped = int(np.sum(observed <= 0))
    if skipped:
        logger.info(f"constraint check skips {skipped} feature(s) with zero observed count")
    return relative_residual(expected_counts(model, data), observed)


def max_total_variation(model_a: MaxentModel, model_b: MaxentModel, data: Dataset) -> float:
    """Largest total variation distance between two models over the dataset's histories"""
    if len(data) == 0:
        return 0.0
    pa = row_probabilities(model_a, data)
    pb = row_probabilities(model_b, data)
    return max_row_total_variation(pa, pb, data.compiled)


def max_row_total_variation(pa: np.ndarray, pb: np.ndarray, compiled: CompiledDataset) -> float:
    if compiled.n_rows == 0:
        return 0.0
    per_event = 0.5 * np.add.reduceat(np.abs(pa - pb), compiled.offsets[:-1])
    return float(per_event.max())


def mean_kl_divergence(p_rows: np.ndarray, q_rows: np.ndarray, compiled: CompiledDataset) -> float:
    """Mean over events of KL(p || q), both given as per-row probabilities"""
    if compiled.n_events == 0:
        return 0.0
    mask = p_rows > 0
    terms = np.zeros_like(p_rows)
    terms[mask] = p_rows[mask] * (np.log(p_rows[mask]) - np.log(np.maximum(q_rows[mask], 1e-300)))
    return float(np.add.reduceat(terms, compiled.offsets[:-1]).mean())


def accuracy(p_rows: np.ndarray, data: Dataset) -> float:
    """Fraction of events whose argmax candidate is the true one (ties to the first label)"""
    if len(data) == 0:
        return 0.0
    _require_labels(data)
    hits = 0
    offsets = data.compiled.offsets
    for k, ev in enumerate(data.events):
        seg = p_rows[offsets[k]:offsets[k + 1]]
        best = seg.max()
        winner = min(c.label for c, p in zip(ev.candidates, seg) if p == best)
        hits += winner == ev.true_label
    return hits / len(data)
