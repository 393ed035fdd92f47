"""
Seeded synthetic data

Histories are built from templates (think word position, tag class, word
class): each history activates exactly one value of every template. With A
template values in total and X outputs, the feature ids are

    0 .. A-1                    template values (history-only)
    A + a*X + x                 template value a paired with output x
    A + A*X + x                 output bias

so the pair and bias features of one history already form exact groups.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..config import SynthSpec
from ..errors import MaxentHmmError
from ..hidden.inference import marginal_rows, stage_probabilities
from ..hidden.models import HiddenMaxentModel, HiddenTables, bind_dataset, default_hidden_values
from ..maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from ..maxent.scoring import mean_kl_divergence, row_probabilities
from .events import serialize_events
from .model_file import serialize_hidden_model, serialize_model

logger = logging.getLogger(__name__)

KL_PROBE_EVENTS = 200
KL_MAX_ATTEMPTS = 10
KL_GROWTH = 1.5

Truth = Union[MaxentModel, HiddenMaxentModel]


@dataclass(frozen=True, eq=False)
class SynthResult:
    dataset: Dataset
    truth: Truth
    events_text: str
    truth_text: str
    emitter_kl: float = 0.0


def output_labels(n_outputs: int) -> List[str]:
    return [f"y{x}" for x in range(n_outputs)]


def _feature_count(spec: SynthSpec) -> Tuple[int, int]:
    a = sum(spec.template_sizes)
    return a, a + a * spec.n_outputs + spec.n_outputs


def _sample_histories(rng: np.random.Generator, spec: SynthSpec, n: int) -> np.ndarray:
    """(n x templates) array of active template value ids"""
    starts = np.cumsum([0] + list(spec.template_sizes[:-1]))
    if n == 0:
        return np.zeros((0, len(spec.template_sizes)), dtype=np.int64)
    picks = [rng.integers(0, size, size=n) + start for size, start in zip(spec.template_sizes, starts)]
    return np.stack(picks, axis=1)


def _events(histories: np.ndarray, spec: SynthSpec, prefix: str = "e") -> List[EventBlock]:
    a, _ = _feature_count(spec)
    x_count = spec.n_outputs
    labels = output_labels(x_count)
    events = []
    for k, attrs in enumerate(histories.tolist()):
        cands = tuple(
            Candidate.of(label, list(attrs) + [a + v * x_count + x for v in attrs] + [a + a * x_count + x])
            for x, label in enumerate(labels)
        )
        events.append(EventBlock(f"{prefix}{k}", None, cands))
    return events


def _label(events: List[EventBlock], rows: np.ndarray, rng: np.random.Generator,
           n_outputs: int) -> Tuple[EventBlock, ...]:
    probs = rows.reshape(len(events), n_outputs)
    out = []
    for ev, p in zip(events, probs):
        x = int(rng.choice(n_outputs, p=p / p.sum()))
        out.append(EventBlock(ev.event_id, ev.candidates[x].label, ev.candidates))
    return tuple(out)


def _plain_truth(rng: np.random.Generator, spec: SynthSpec) -> MaxentModel:
    a, g = _feature_count(spec)
    weights = np.ones(g)
    weights[a:] = np.exp(rng.normal(0.0, spec.weight_scale, size=g - a))
    return MaxentModel(weights)


def _hidden_truth(rng: np.random.Generator, spec: SynthSpec, probe: Dataset) -> Tuple[HiddenMaxentModel, float]:
    a, g = _feature_count(spec)
    k = spec.n_hidden
    n_emit = g - a
    tables = HiddenTables({f: f for f in range(a)}, {a + i: i for i in range(n_emit)})
    selector = MaxentModel(np.exp(rng.normal(0.0, spec.selector_scale, size=k * a + k)))
    base = rng.normal(0.0, spec.emitter_scale, size=(k, n_emit))
    if k >= 2:
        base[1] = -base[0]
    values = default_hidden_values(k)

    kl = 0.0
    for attempt in range(KL_MAX_ATTEMPTS):
        scale = KL_GROWTH ** attempt
        emitters = tuple(MaxentModel(np.exp(scale * row)) for row in base)
        model = HiddenMaxentModel(values, selector, emitters, None, tables)
        if k < 2 or spec.min_emitter_kl == 0:
            return model, kl
        _, emitter = stage_probabilities(model, bind_dataset(model, probe))
        kl = mean_kl_divergence(emitter[0], emitter[1], probe.compiled)
        if kl >= spec.min_emitter_kl:
            if attempt:
                logger.info(f"emitter separation reached after scaling by {scale:.3f}")
            return model, kl
    raise MaxentHmmError(
        f"could not separate emitters to KL {spec.min_emitter_kl} (last {kl:.4f}); raise emitter_scale"
    )


def synth_generate(spec: SynthSpec) -> SynthResult:
    """
    Sample a truth model and labeled events from it; the same spec always
    yields the same bytes. Files are written when the spec names paths.
    """
    rng = np.random.default_rng(spec.seed)
    probe_rng = np.random.default_rng([spec.seed, 1])
    _, g = _feature_count(spec)
    histories = _sample_histories(rng, spec, spec.n_events)
    events = _events(histories, spec)

    kl = 0.0
    if spec.kind == "plain":
        truth: Truth = _plain_truth(rng, spec)
        unlabeled = Dataset(tuple(events), g)
        rows = row_probabilities(truth, unlabeled) if events else np.zeros(0)
        truth_text = serialize_model(truth)
    else:
        probe = Dataset(tuple(_events(_sample_histories(probe_rng, spec, KL_PROBE_EVENTS), spec, "p")), g)
        truth, kl = _hidden_truth(rng, spec, probe)
        unlabeled = Dataset(tuple(events), g)
        rows = marginal_rows(truth, bind_dataset(truth, unlabeled)) if events else np.zeros(0)
        truth_text = serialize_hidden_model(truth)

    dataset = Dataset(_label(events, rows, rng, spec.n_outputs), g)
    header = (
        f"synthetic {spec.kind} events: seed {spec.seed}, {spec.n_events} events, "
        f"templates {list(spec.template_sizes)}, {spec.n_outputs} outputs"
    )
    events_text = serialize_events(dataset, header)

    if spec.events_path:
        Path(spec.events_path).write_text(events_text, encoding="utf-8")
    if spec.truth_path:
        Path(spec.truth_path).write_text(truth_text, encoding="utf-8")
    logger.info(f"generated {len(dataset)} {spec.kind} events over {g} features (seed {spec.seed})")
    return SynthResult(dataset, truth, events_text, truth_text, kl)


def random_dataset(seed: int, n_outputs: int = 3, n_features: int = 8, n_events: int = 40,
                   p_active: float = 0.35, weight_scale: float = 1.0,
                   n_histories: Optional[int] = None) -> Tuple[Dataset, MaxentModel]:
    """
    Unstructured labeled data: each candidate of a history fires a random
    subset of the features, and events cycle through n_histories histories.

    By default there are n_events // (n_outputs + 1) histories and every
    candidate of every history is the true label of at least one event, so
    the training likelihood is bounded and its maximum has finite weights.
    The remaining labels are drawn from the truth model. Passing n_histories
    larger than n_events // n_outputs gives one history per event with all
    labels drawn from the truth, which may be separable.
    """
    if n_outputs < 1 or n_features < 1 or n_events < 0:
        raise MaxentHmmError("random_dataset needs positive sizes")
    if n_histories is not None and n_histories < 1:
        raise MaxentHmmError(f"n_histories must be positive, got {n_histories}")
    rng = np.random.default_rng(seed)
    truth = MaxentModel(np.exp(rng.normal(0.0, weight_scale, size=n_features)))
    labels = output_labels(n_outputs)
    m = n_histories or max(1, n_events // (n_outputs + 1))
    m = min(m, max(n_events, 1))
    pool = [
        tuple(
            Candidate.of(label, np.flatnonzero(rng.random(n_features) < p_active).tolist())
            for label in labels
        )
        for _ in range(m)
    ]
    events = [EventBlock(f"r{k}", None, pool[k % m]) for k in range(n_events)]
    if not events:
        return Dataset((), n_features), truth

    rows = row_probabilities(truth, Dataset(tuple(events), n_features))
    sampled = _label(events, rows, rng, n_outputs)
    covered = m * n_outputs <= n_events
    out = []
    for k, ev in enumerate(sampled):
        if covered and k < m * n_outputs:
            # event k is the (k // m)-th visit of history k % m
            ev = EventBlock(ev.event_id, labels[k // m], ev.candidates)
        out.append(ev)
    return Dataset(tuple(out), n_features), truth
