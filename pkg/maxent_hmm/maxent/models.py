"""
Data models for conditional maximum entropy models
Candidates, event blocks, datasets, weight vectors and distributions
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from scipy import sparse

from ..errors import EmptyCandidatesError, FeatureRangeError, MaxentHmmError

FeatureId = int
CountVector = np.ndarray


@dataclass(frozen=True)
class Candidate:
    """One output symbol together with the ids of the indicators that fire for it"""

    label: str
    active: Tuple[FeatureId, ...] = ()

    def __post_init__(self):
        active = tuple(int(i) for i in self.active)
        if any(i < 0 for i in active):
            raise FeatureRangeError(f"negative feature id in candidate {self.label!r}: {active}")
        if any(b <= a for a, b in zip(active, active[1:])):
            raise MaxentHmmError(
                f"active ids of candidate {self.label!r} must be strictly ascending: {active}"
            )
        object.__setattr__(self, "active", active)

    @classmethod
    def of(cls, label: str, ids: Iterable[int]) -> "Candidate":
        """Build a candidate in canonical form, rejecting duplicate ids"""
        ids = [int(i) for i in ids]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise MaxentHmmError(f"duplicate feature id(s) {dupes} in candidate {label!r}")
        return cls(label, tuple(sorted(ids)))


@dataclass(frozen=True)
class EventBlock:
    """A history with all of its output alternatives; true_label is None for unlabeled blocks"""

    event_id: str
    true_label: Optional[str]
    candidates: Tuple[Candidate, ...]

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        labels = [c.label for c in self.candidates]
        if len(set(labels)) != len(labels):
            raise MaxentHmmError(f"event {self.event_id}: candidate labels are not distinct: {labels}")
        if self.true_label is not None and self.true_label not in labels:
            raise MaxentHmmError(
                f"event {self.event_id}: true label {self.true_label!r} is not among candidates {labels}"
            )

    @property
    def labels(self) -> List[str]:
        return [c.label for c in self.candidates]

    def candidate(self, label: str) -> Candidate:
        for c in self.candidates:
            if c.label == label:
                return c
        raise KeyError(label)

    def max_feature(self) -> int:
        return max((c.active[-1] for c in self.candidates if c.active), default=-1)


@dataclass(frozen=True)
class CompiledDataset:
    """Sparse (candidate rows x features) view of a dataset for vectorised scoring"""

    matrix: sparse.csr_matrix
    offsets: np.ndarray
    event_index: np.ndarray
    truth_rows: np.ndarray
    sizes: np.ndarray

    @property
    def n_rows(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_events(self) -> int:
        return len(self.offsets) - 1


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training or test events over a dense feature id space 0..num_features-1"""

    events: Tuple[EventBlock, ...]
    num_features: int

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if self.num_features < 0:
            raise MaxentHmmError(f"num_features must be non-negative, got {self.num_features}")
        for ev in self.events:
            if not ev.candidates:
                raise EmptyCandidatesError(f"event {ev.event_id} has no candidates")
            top = ev.max_feature()
            if top >= self.num_features:
                raise FeatureRangeError(
                    f"event {ev.event_id} uses feature {top} but the dataset has {self.num_features} features"
                )

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[EventBlock]:
        return iter(self.events)

    @property
    def is_labeled(self) -> bool:
        return all(ev.true_label is not None for ev in self.events)

    @cached_property
    def compiled(self) -> CompiledDataset:
        rows, cols, event_index, truth_rows, sizes = [], [], [], [], []
        offsets = [0]
        row = 0
        for k, ev in enumerate(self.events):
            truth = -1
            for cand in ev.candidates:
                rows.extend([row] * len(cand.active))
                cols.extend(cand.active)
                event_index.append(k)
                sizes.append(len(cand.active))
                if cand.label == ev.true_label:
                    truth = row
                row += 1
            truth_rows.append(truth)
            offsets.append(row)
        matrix = sparse.csr_matrix(
            (np.ones(len(rows)), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(row, self.num_features),
        )
        return CompiledDataset(
            matrix=matrix,
            offsets=np.asarray(offsets, dtype=np.int64),
            event_index=np.asarray(event_index, dtype=np.int64),
            truth_rows=np.asarray(truth_rows, dtype=np.int64),
            sizes=np.asarray(sizes, dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class MaxentModel:
    """Weights lambda_i > 0 of P(x|h) proportional to the product of lambda_i over active i"""

    weights: np.ndarray
    names: Optional[Mapping[int, str]] = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = np.flatnonzero(~np.isfinite(w) | (w <= 0)).tolist()
            raise MaxentHmmError(f"weights must be positive and finite; offending ids {bad[:20]}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.names is not None:
            object.__setattr__(self, "names", dict(self.names))

    @classmethod
    def uniform(cls, num_features: int) -> "MaxentModel":
        return cls(np.ones(num_features))

    @property
    def num_features(self) -> int:
        return int(self.weights.shape[0])

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def with_weights(self, weights: np.ndarray) -> "MaxentModel":
        return MaxentModel(weights, self.names)


@dataclass(frozen=True)
class Distribution:
    """A probability distribution over labels, kept in label insertion order"""

    probs: Dict[str, float] = field(default_factory=dict)

    def __getitem__(self, label: str) -> float:
        return self.probs[label]

    def get(self, label: str, default: float = 0.0) -> float:
        return self.probs.get(label, default)

    def __iter__(self):
        return iter(self.probs)

    def __len__(self) -> int:
        return len(self.probs)

    @property
    def labels(self) -> List[str]:
        return list(self.probs)

    def total(self) -> float:
        return float(sum(self.probs.values()))

    def argmax(self) -> str:
        """Most probable label; exact ties go to the lexicographically first label"""
        best = max(self.probs.values())
        return min(label for label, p in self.probs.items() if p == best)

    def total_variation(self, other: "Distribution") -> float:
        labels = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(self.get(x) - other.get(x)) for x in labels)
