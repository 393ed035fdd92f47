"""
Distribution-preserving rewrites of maxent models
Exclusive-set partitioning, group completion with anti-indicators, group scaling,
sub-unit rescaling and anti-indicator removal
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..errors import MaxentHmmError, PartitionError
from .models import Candidate, Dataset, EventBlock, MaxentModel

logger = logging.getLogger(__name__)

SUBUNIT_MARGIN = 1e-6
ANTI_PREFIX = "__anti__"


class GroupKind(str, Enum):
    EXACT = "exact-group"          # exactly one member fires on every candidate
    EXCLUSIVE = "exclusive-set"    # at most one member fires on every candidate


@dataclass(frozen=True)
class Group:
    members: Tuple[int, ...]
    kind: GroupKind = GroupKind.EXCLUSIVE

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(int(m) for m in self.members)))


@dataclass(frozen=True)
class GroupPartition:
    groups: Tuple[Group, ...]
    anti_ids: FrozenSet[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "anti_ids", frozenset(self.anti_ids))
        seen = set()
        for g in self.groups:
            overlap = seen.intersection(g.members)
            if overlap:
                raise PartitionError(f"feature(s) {sorted(overlap)} belong to more than one group")
            seen.update(g.members)
        for a in self.anti_ids:
            if a not in seen:
                raise PartitionError(f"anti-indicator {a} is not in any group")

    @property
    def num_features(self) -> int:
        return sum(len(g.members) for g in self.groups)

    def group_of(self) -> Dict[int, int]:
        return {m: gi for gi, g in enumerate(self.groups) for m in g.members}

    def anti_of(self, group: Group) -> List[int]:
        return [m for m in group.members if m in self.anti_ids]

    @property
    def all_exact(self) -> bool:
        return all(g.kind == GroupKind.EXACT for g in self.groups)


@dataclass(frozen=True)
class ScaleFactor:
    alpha: float

    def __post_init__(self):
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise MaxentHmmError(f"scale factor must be positive and finite, got {self.alpha}")


@dataclass(frozen=True, eq=False)
class GroupedModel:
    """A model rewritten so every group is exact, together with its rewritten data"""

    model: MaxentModel
    data: Dataset
    partition: GroupPartition
    original_features: int = field(default=0)


def _membership(part: GroupPartition, num_features: int) -> sparse.csr_matrix:
    rows, cols = [], []
    for gi, g in enumerate(part.groups):
        rows.extend(g.members)
        cols.extend([gi] * len(g.members))
    return sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(num_features, len(part.groups))
    )


def group_hits(data: Dataset, part: GroupPartition) -> np.ndarray:
    """(candidate rows x groups) count of active members"""
    if data.compiled.n_rows == 0 or not part.groups:
        return np.zeros((data.compiled.n_rows, len(part.groups)))
    return np.asarray((data.compiled.matrix @ _membership(part, data.num_features)).todense())


def check_partition(data: Dataset, part: GroupPartition) -> np.ndarray:
    """Verify exhaustiveness and exclusivity against every candidate; returns the hit table"""
    covered = sorted(m for g in part.groups for m in g.members)
    if covered != list(range(data.num_features)):
        raise PartitionError(
            f"partition covers {len(covered)} ids but the dataset has {data.num_features} features"
        )
    hits = group_hits(data, part)
    if hits.size and hits.max() > 1:
        row, gi = np.unravel_index(int(np.argmax(hits)), hits.shape)
        ev = data.events[int(data.compiled.event_index[row])]
        raise PartitionError(
            f"event {ev.event_id}: candidate activates {int(hits[row, gi])} members of group {gi}"
        )
    for gi, g in enumerate(part.groups):
        if g.kind == GroupKind.EXACT and hits.size and hits[:, gi].min() < 1:
            raise PartitionError(f"group {gi} is marked exact but some candidate has no active member")
    return hits


def partition_exclusive(data: Dataset) -> GroupPartition:
    """
    Greedily place features, in id order, into the first set where none of its
    members ever fires together with the feature on one candidate
    """
    g = data.num_features
    if g == 0:
        return GroupPartition(())
    matrix = data.compiled.matrix
    co_active = (matrix.T @ matrix).tocsr() if data.compiled.n_rows else sparse.csr_matrix((g, g))
    sets: List[List[int]] = []
    conflicts: List[set] = []
    for f in range(g):
        neighbours = set(co_active.indices[co_active.indptr[f]:co_active.indptr[f + 1]].tolist())
        neighbours.discard(f)
        for members, blocked in zip(sets, conflicts):
            if f not in blocked:
                members.append(f)
                blocked.update(neighbours)
                break
        else:
            sets.append([f])
            conflicts.append(set(neighbours))
    part = GroupPartition(tuple(Group(tuple(s)) for s in sets))
    hits = check_partition(data, part)
    exact = [bool(hits.size == 0 or hits[:, gi].min() == 1) for gi in range(len(sets))]
    part = GroupPartition(tuple(
        Group(s, GroupKind.EXACT if ok else GroupKind.EXCLUSIVE) for s, ok in zip(sets, exact)
    ))
    logger.info(f"partitioned {g} features into {len(sets)} exclusive sets ({sum(exact)} already exact)")
    return part


def anti_name(members: Iterable[int]) -> str:
    return ANTI_PREFIX + ":" + ",".join(str(m) for m in sorted(members))


def complete_groups(model: MaxentModel, data: Dataset,
                    part: GroupPartition) -> Tuple[MaxentModel, Dataset, GroupPartition]:
    """Turn every exclusive set into an exact group by adding an anti-indicator with weight 1"""
    if model.num_features != data.num_features:
        raise PartitionError(f"model has {model.num_features} features, data has {data.num_features}")
    hits = check_partition(data, part)
    g = data.num_features
    new_groups: List[Group] = []
    anti_ids = set(part.anti_ids)
    additions: Dict[int, int] = {}   # group index -> anti id
    row_extra: Dict[int, List[int]] = {}
    names = dict(model.names or {})
    next_id = g
    for gi, grp in enumerate(part.groups):
        lacking = np.flatnonzero(hits[:, gi] == 0) if hits.size else np.array([], dtype=int)
        if lacking.size == 0:
            new_groups.append(Group(grp.members, GroupKind.EXACT))
            continue
        anti = next_id
        next_id += 1
        anti_ids.add(anti)
        names[anti] = anti_name(grp.members)
        additions[gi] = anti
        for row in lacking.tolist():
            row_extra.setdefault(row, []).append(anti)
        new_groups.append(Group(grp.members + (anti,), GroupKind.EXACT))
    if not additions:
        return model, data, GroupPartition(tuple(new_groups), part.anti_ids)

    events = []
    row = 0
    for ev in data.events:
        cands = []
        for cand in ev.candidates:
            extra = row_extra.get(row, [])
            cands.append(Candidate(cand.label, cand.active + tuple(extra)) if extra else cand)
            row += 1
        events.append(EventBlock(ev.event_id, ev.true_label, tuple(cands)))
    weights = np.concatenate([model.weights, np.ones(next_id - g)])
    logger.info(f"added {next_id - g} anti-indicator(s) to complete exclusive sets into groups")
    return (
        MaxentModel(weights, names),
        Dataset(tuple(events), next_id),
        GroupPartition(tuple(new_groups), frozenset(anti_ids)),
    )


def scale_group(model: MaxentModel, group: Group, alpha) -> MaxentModel:
    """Multiply every member of an exact group by alpha; probabilities are unchanged"""
    factor = alpha if isinstance(alpha, ScaleFactor) else ScaleFactor(float(alpha))
    if group.kind != GroupKind.EXACT:
        raise PartitionError("only exact groups can be scaled without changing probabilities")
    weights = np.array(model.weights)
    idx = list(group.members)
    weights[idx] = weights[idx] * factor.alpha
    return model.with_weights(weights)


def to_subunit(model: MaxentModel, part: GroupPartition, margin: float = SUBUNIT_MARGIN) -> MaxentModel:
    """Scale every group by 1/((1+margin) * max weight in the group), so all weights end below 1"""
    if not part.all_exact:
        raise PartitionError("to_subunit requires every group to be exact; run complete_groups first")
    weights = np.array(model.weights)
    for grp in part.groups:
        idx = list(grp.members)
        top = weights[idx].max()
        if top <= 0:
            raise MaxentHmmError(f"group {grp.members} has non-positive maximum weight")
        weights[idx] = weights[idx] / ((1.0 + margin) * top)
    return model.with_weights(weights)


def rescale_groups(weights: np.ndarray, part: GroupPartition, target_max: float) -> np.ndarray:
    """Scale each exact group so its largest weight equals target_max"""
    out = np.array(weights, dtype=float)
    for grp in part.groups:
        idx = list(grp.members)
        out[idx] = out[idx] * (target_max / out[idx].max())
    return out


def strip_anti_indicators(model: MaxentModel, data: Dataset,
                          part: GroupPartition) -> Tuple[MaxentModel, Dataset]:
    """Rescale each group by 1/(anti weight), then delete the anti-indicators"""
    if not part.anti_ids:
        return model, data
    weights = np.array(model.weights)
    for grp in part.groups:
        antis = part.anti_of(grp)
        if len(antis) > 1:
            raise PartitionError(f"group {grp.members} has {len(antis)} anti-indicators")
        if not antis:
            continue
        anti_weight = weights[antis[0]]
        if anti_weight <= 0:
            raise MaxentHmmError(f"anti-indicator {antis[0]} has weight {anti_weight}")
        idx = list(grp.members)
        weights[idx] = weights[idx] / anti_weight
    keep = [i for i in range(model.num_features) if i not in part.anti_ids]
    remap = {old: new for new, old in enumerate(keep)}
    names = {remap[i]: n for i, n in (model.names or {}).items() if i in remap}
    events = []
    for ev in data.events:
        cands = tuple(
            Candidate(c.label, tuple(remap[i] for i in c.active if i in remap)) for c in ev.candidates
        )
        events.append(EventBlock(ev.event_id, ev.true_label, cands))
    return MaxentModel(weights[keep], names or None), Dataset(tuple(events), len(keep))


def make_grouped(model: MaxentModel, data: Dataset, subunit: bool = True,
                 margin: float = SUBUNIT_MARGIN,
                 partition: Optional[GroupPartition] = None) -> GroupedModel:
    """partition_exclusive -> complete_groups -> (optionally) to_subunit"""
    part = partition if partition is not None else partition_exclusive(data)
    full_model, full_data, full_part = complete_groups(model, data, part)
    if subunit:
        full_model = to_subunit(full_model, full_part, margin)
    return GroupedModel(full_model, full_data, full_part, data.num_features)


def parse_anti_name(name: str) -> Optional[Tuple[int, ...]]:
    """Member ids encoded in an anti-indicator name, or None for ordinary features"""
    if not name.startswith(ANTI_PREFIX + ":"):
        return None
    body = name[len(ANTI_PREFIX) + 1:]
    return tuple(int(t) for t in body.split(",") if t)


def partition_from_names(model: MaxentModel) -> GroupPartition:
    """Rebuild the groups that carry anti-indicators from their names; other features become singletons"""
    names = model.names or {}
    groups: List[Group] = []
    used = set()
    antis = set()
    for fid in sorted(names):
        members = parse_anti_name(names[fid])
        if members is None:
            continue
        groups.append(Group(members + (fid,), GroupKind.EXACT))
        used.update(members)
        used.add(fid)
        antis.add(fid)
    for fid in range(model.num_features):
        if fid not in used:
            groups.append(Group((fid,), GroupKind.EXCLUSIVE))
    return GroupPartition(tuple(groups), frozenset(antis))
