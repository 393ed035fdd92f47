"""
Hidden-variable maxent models

A selector maxent picks a hidden value z for the history, then the maxent
emitter of z picks the output. P(x|h) = sum_z P_selector(z|h) * P_emitter_z(x|z,h).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from ..errors import FeatureRangeError, MaxentHmmError
from ..maxent.models import Candidate, Dataset, EventBlock, MaxentModel

logger = logging.getLogger(__name__)


def default_hidden_values(n_hidden: int) -> Tuple[str, ...]:
    return tuple(f"z{i}" for i in range(n_hidden))


@dataclass(frozen=True)
class HiddenEventBlock:
    """One event seen through both stages: selector candidates per z, output candidates per z"""

    event_id: str
    true_label: Optional[str]
    selector: Tuple[Candidate, ...]
    emitters: Tuple[Tuple[Candidate, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "selector", tuple(self.selector))
        object.__setattr__(self, "emitters", tuple(tuple(c) for c in self.emitters))
        if len(self.selector) != len(self.emitters):
            raise MaxentHmmError(
                f"event {self.event_id}: {len(self.selector)} selector candidates but "
                f"{len(self.emitters)} emitter candidate lists"
            )
        if not self.emitters or not self.emitters[0]:
            raise MaxentHmmError(f"event {self.event_id} has no output candidates")
        labels = [c.label for c in self.emitters[0]]
        for z, cands in enumerate(self.emitters):
            if [c.label for c in cands] != labels:
                raise MaxentHmmError(f"event {self.event_id}: output candidates differ for hidden value {z}")
        if self.true_label is not None and self.true_label not in labels:
            raise MaxentHmmError(f"event {self.event_id}: true label {self.true_label!r} not among {labels}")

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.emitters[0]]

    def selector_block(self) -> EventBlock:
        return EventBlock(self.event_id, None, self.selector)

    def emitter_block(self, z: int) -> EventBlock:
        return EventBlock(self.event_id, self.true_label, self.emitters[z])


@dataclass(frozen=True)
class HiddenTables:
    """Feature extraction tables: plain feature id -> selector history id / emitter id"""

    selector_map: Dict[int, int]
    emitter_map: Dict[int, int]

    @property
    def n_history(self) -> int:
        return len(self.selector_map)

    @property
    def n_emit(self) -> int:
        return len(self.emitter_map)

    def through(self, remap: Dict[int, int]) -> "HiddenTables":
        """Re-key the tables by the original ids of a pruned dataset (remap is original -> pruned)"""
        return HiddenTables(
            {old: self.selector_map[new] for old, new in remap.items() if new in self.selector_map},
            {old: self.emitter_map[new] for old, new in remap.items() if new in self.emitter_map},
        )


@dataclass(frozen=True, eq=False)
class HiddenMaxentModel:
    """
    Selector over hidden values plus one emitter per hidden value

    With deterministic_outputs set, hidden value z always produces
    deterministic_outputs[z] and there are no emitters.
    """

    hidden_values: Tuple[str, ...]
    selector: MaxentModel
    emitters: Tuple[MaxentModel, ...] = ()
    deterministic_outputs: Optional[Tuple[str, ...]] = None
    tables: Optional[HiddenTables] = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_values", tuple(self.hidden_values))
        object.__setattr__(self, "emitters", tuple(self.emitters))
        k = len(self.hidden_values)
        if k < 1:
            raise MaxentHmmError("a hidden model needs at least one hidden value")
        if self.deterministic_outputs is not None:
            object.__setattr__(self, "deterministic_outputs", tuple(self.deterministic_outputs))
            if len(self.deterministic_outputs) != k:
                raise MaxentHmmError(f"{len(self.deterministic_outputs)} outputs for {k} hidden values")
        elif len(self.emitters) != k:
            raise MaxentHmmError(f"{len(self.emitters)} emitters for {k} hidden values")
        sizes = {m.num_features for m in self.emitters}
        if len(sizes) > 1:
            raise MaxentHmmError(f"emitters disagree on their feature count: {sorted(sizes)}")

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_values)

    @property
    def is_deterministic(self) -> bool:
        return self.deterministic_outputs is not None

    @property
    def n_emit(self) -> int:
        return self.emitters[0].num_features if self.emitters else 0

    def stacked_emitter(self) -> MaxentModel:
        """All emitters as one model over ids z * n_emit + local"""
        if not self.emitters:
            return MaxentModel(np.ones(0))
        return MaxentModel(np.concatenate([m.weights for m in self.emitters]))

    def with_weights(self, selector: np.ndarray, stacked: Optional[np.ndarray] = None) -> "HiddenMaxentModel":
        emitters = self.emitters
        if stacked is not None and self.emitters:
            parts = np.split(np.asarray(stacked, dtype=float), self.n_hidden)
            emitters = tuple(m.with_weights(w) for m, w in zip(self.emitters, parts))
        return HiddenMaxentModel(self.hidden_values, self.selector.with_weights(selector),
                                 emitters, self.deterministic_outputs, self.tables)


def _stack_emitters(events: Sequence[HiddenEventBlock], n_hidden: int, n_emit: int) -> Dataset:
    stacked = []
    for z in range(n_hidden):
        base = z * n_emit
        for ev in events:
            cands = tuple(Candidate(c.label, tuple(base + i for i in c.active)) for c in ev.emitters[z])
            stacked.append(EventBlock(f"{ev.event_id}/{z}", ev.true_label, cands))
    return Dataset(tuple(stacked), n_hidden * n_emit)


@dataclass(frozen=True, eq=False)
class HiddenDataset:
    """Hidden event blocks plus the compiled per-stage datasets used for vectorised training"""

    events: Tuple[HiddenEventBlock, ...]
    hidden_values: Tuple[str, ...]
    n_selector: int
    n_emit: int

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "hidden_values", tuple(self.hidden_values))
        for ev in self.events:
            if [c.label for c in ev.selector] != list(self.hidden_values):
                raise MaxentHmmError(f"event {ev.event_id}: selector candidates must be {self.hidden_values}")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_values)

    @property
    def is_labeled(self) -> bool:
        return all(ev.true_label is not None for ev in self.events)

    @cached_property
    def selector_data(self) -> Dataset:
        return Dataset(tuple(ev.selector_block() for ev in self.events), self.n_selector)

    @cached_property
    def output_data(self) -> Dataset:
        """Output candidates with hidden value 0's features; fixes the output row layout"""
        return Dataset(tuple(ev.emitter_block(0) for ev in self.events), self.n_emit)

    @cached_property
    def stacked_data(self) -> Dataset:
        """Emitter events for every (z, event), z-major, over ids z * n_emit + local"""
        return _stack_emitters(self.events, self.n_hidden, self.n_emit)

    def check_model(self, model: HiddenMaxentModel) -> None:
        if model.hidden_values != self.hidden_values:
            raise MaxentHmmError(f"model hidden values {model.hidden_values} != data {self.hidden_values}")
        if model.selector.num_features < self.n_selector:
            raise FeatureRangeError(
                f"selector has {model.selector.num_features} features, data uses {self.n_selector}"
            )
        if not model.is_deterministic and model.n_emit < self.n_emit:
            raise FeatureRangeError(f"emitters have {model.n_emit} features, data uses {self.n_emit}")


def history_features(data: Dataset) -> np.ndarray:
    """Features that, wherever they fire, fire on every candidate of the event"""
    compiled = data.compiled
    if compiled.n_rows == 0 or data.num_features == 0:
        return np.zeros(0, dtype=np.int64)
    rows_to_events = sparse.csr_matrix(
        (np.ones(compiled.n_rows), (compiled.event_index, np.arange(compiled.n_rows))),
        shape=(compiled.n_events, compiled.n_rows),
    )
    per_event = (rows_to_events @ compiled.matrix).tocoo()
    sizes = np.diff(compiled.offsets)
    partial = per_event.data < sizes[per_event.row]
    seen = np.zeros(data.num_features, dtype=bool)
    seen[per_event.col] = True
    mixed = np.zeros(data.num_features, dtype=bool)
    mixed[per_event.col[partial]] = True
    return np.flatnonzero(seen & ~mixed)


def bind(tables: HiddenTables, hidden_values: Sequence[str], block: EventBlock) -> HiddenEventBlock:
    """
    Turn a plain event into a hidden event block using the extraction tables

    Selector candidate z carries (z, history feature) indicators for every
    history feature present on any candidate, plus the bias of z. Features in
    neither table are ignored.
    """
    k = len(hidden_values)
    n_h = tables.n_history
    present = sorted({tables.selector_map[f] for c in block.candidates for f in c.active
                      if f in tables.selector_map})
    selector = tuple(
        Candidate(hv, tuple([z * n_h + j for j in present] + [k * n_h + z]))
        for z, hv in enumerate(hidden_values)
    )
    outputs = tuple(
        Candidate.of(c.label, (tables.emitter_map[f] for f in c.active if f in tables.emitter_map))
        for c in block.candidates
    )
    return HiddenEventBlock(block.event_id, block.true_label, selector, tuple(outputs for _ in range(k)))


def cross_hidden(data: Dataset, n_hidden: int,
                 hidden_values: Optional[Sequence[str]] = None) -> Tuple[HiddenDataset, HiddenTables]:
    """
    Split a plain dataset's features into selector (history-only) and emitter
    features and bind every event for n_hidden hidden values
    """
    if n_hidden < 1:
        raise MaxentHmmError(f"n_hidden must be at least 1, got {n_hidden}")
    values = tuple(hidden_values) if hidden_values is not None else default_hidden_values(n_hidden)
    if len(values) != n_hidden or len(set(values)) != n_hidden:
        raise MaxentHmmError(f"need {n_hidden} distinct hidden values, got {values}")
    hist = history_features(data).tolist()
    hist_set = set(hist)
    rest = [f for f in range(data.num_features) if f not in hist_set]
    tables = HiddenTables({f: j for j, f in enumerate(hist)}, {f: j for j, f in enumerate(rest)})
    events = tuple(bind(tables, values, ev) for ev in data.events)
    logger.info(
        f"crossed {data.num_features} features with {n_hidden} hidden values: "
        f"{len(hist)} history features, {len(rest)} emitter features"
    )
    n_selector = n_hidden * len(hist) + n_hidden
    return HiddenDataset(events, values, n_selector, len(rest)), tables


def bind_dataset(model: HiddenMaxentModel, data: Dataset) -> HiddenDataset:
    """Bind a plain dataset through a trained model's own extraction tables"""
    if model.tables is None:
        raise MaxentHmmError("model carries no feature extraction tables")
    events = tuple(bind(model.tables, model.hidden_values, ev) for ev in data.events)
    n_selector = model.n_hidden * model.tables.n_history + model.n_hidden
    return HiddenDataset(events, model.hidden_values, n_selector, model.tables.n_emit)
