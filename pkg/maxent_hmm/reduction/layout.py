"""
Chain networks for grouped sub-unit maxent models

Each candidate becomes a chain of its active weights. From start a fixed arc of
probability 1/|candidates| picks a chain; at every chain node the direct arc
(probability lambda) advances and the complement arc (1 - lambda) goes back to
start. The last direct arc emits the candidate's label and enters end, so the
end is reached with label x with probability proportional to the product of
x's weights.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import EmptyCandidatesError, NetworkError, PartitionError
from ..maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from ..maxent.transforms import GroupPartition
from ..hmm.network import HmmNetwork, NetworkBuilder, ParamRef, StateId, join_networks

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainLayout:
    """Order in which groups appear along every chain; rotating it moves a different group last"""

    group_order: Tuple[int, ...]
    group_of: Dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_partition(cls, part: GroupPartition) -> "ChainLayout":
        return cls(tuple(range(len(part.groups))), part.group_of())

    @property
    def num_groups(self) -> int:
        return len(self.group_order)

    def rotated(self, iteration: int) -> "ChainLayout":
        if not self.group_order:
            return self
        shift = iteration % len(self.group_order)
        return ChainLayout(self.group_order[shift:] + self.group_order[:shift], self.group_of)

    def positions(self) -> np.ndarray:
        pos = np.empty(len(self.group_order), dtype=np.int64)
        pos[list(self.group_order)] = np.arange(len(self.group_order))
        return pos

    def chain(self, candidate: Candidate) -> List[Tuple[int, int]]:
        """(group, feature id) pairs of the candidate in chain order"""
        pos = self.positions()
        links = []
        for f in candidate.active:
            if f not in self.group_of:
                raise PartitionError(f"feature {f} of candidate {candidate.label!r} is in no group")
            links.append((self.group_of[f], f))
        return sorted(links, key=lambda link: pos[link[0]])


@dataclass(frozen=True)
class CloudExit:
    """Where a successful chain goes, and the symbol it emits on the way (None for silent)"""

    dst: StateId
    emit: Optional[str] = None


def add_cloud(builder: NetworkBuilder, entry: StateId, candidates: Sequence[Candidate],
              layout: ChainLayout, exits: Sequence[CloudExit], retry: Optional[StateId] = None,
              offset: int = 0, branch: Optional[float] = None, name: str = "") -> List[int]:
    """
    Wire one chain per candidate from entry; failures go to retry (default entry)

    Args:
        builder: network under construction; its params hold the weights
        entry: state the branch arcs leave from
        candidates: one chain each, over param ids offset + feature id
        layout: chain order of the groups
        exits: per candidate, the state a completed chain enters and what it emits
        retry: state every complement arc returns to
        offset: position of feature 0 in the builder's parameter table
        branch: branch probability; defaults to 1/len(candidates). Any mass left
            over goes to retry on a fixed arc.
        name: prefix for state names

    Returns:
        index of the arc completing each candidate's chain
    """
    if not candidates:
        raise EmptyCandidatesError(f"cloud {name or entry} has no candidates")
    retry = entry if retry is None else retry
    share = 1.0 / len(candidates) if branch is None else branch
    leftover = 1.0 - share * len(candidates)
    if leftover < -1e-12:
        raise NetworkError(f"branch probability {share} is too large for {len(candidates)} candidates")
    fixed = ParamRef.fixed(share)
    finals = []
    for cand, out in zip(candidates, exits):
        links = layout.chain(cand)
        for _, f in links:
            if builder.params[offset + f] >= 1.0:
                raise NetworkError(
                    f"weight {f} is {builder.params[offset + f]:.6g}; chain networks need every weight below 1"
                )
        if not links:
            finals.append(len(builder.arcs))
            builder.add_arc(entry, out.dst, fixed, emit=out.emit)
            continue
        nodes = [builder.add_state(f"{name}{cand.label}:{j}") for j in range(len(links))]
        builder.add_arc(entry, nodes[0], fixed)
        for j, (_, f) in enumerate(links):
            last = j == len(links) - 1
            if last:
                finals.append(len(builder.arcs))
                builder.add_arc(nodes[j], out.dst, ParamRef.direct(offset + f), emit=out.emit)
            else:
                builder.add_arc(nodes[j], nodes[j + 1], ParamRef.direct(offset + f))
            builder.add_arc(nodes[j], retry, ParamRef.complement(offset + f))
    if leftover > 1e-15:
        builder.add_arc(entry, retry, ParamRef.fixed(leftover))
    return finals


def build_event_network(model: MaxentModel, block: EventBlock, layout: ChainLayout) -> HmmNetwork:
    """One start, one chain per candidate, one end; params are the model's weights"""
    if not block.candidates:
        raise EmptyCandidatesError(f"event {block.event_id} has no candidates")
    builder = NetworkBuilder(np.asarray(model.weights, dtype=float))
    start = builder.add_state("start")
    end = builder.add_state("end")
    add_cloud(builder, start, block.candidates, layout,
              [CloudExit(end, c.label) for c in block.candidates])
    return builder.build(start, end)


@dataclass(frozen=True, eq=False)
class SegmentedNetwork:
    """Per-event networks over one shared parameter table, observed with the events' true labels"""

    segments: Tuple[HmmNetwork, ...]
    observations: Tuple[str, ...]
    params: np.ndarray

    def __len__(self) -> int:
        return len(self.segments)

    def pairs(self) -> List[Tuple[HmmNetwork, str]]:
        return list(zip(self.segments, self.observations))

    @property
    def boundaries(self) -> List[int]:
        """Index of the first state of every segment in joined()"""
        return np.cumsum([0] + [s.num_states for s in self.segments[:-1]]).tolist()

    def joined(self) -> HmmNetwork:
        """All segments strung together; the observation is the sequence of true labels"""
        return join_networks(self.segments)


def build_training_network(model: MaxentModel, data: Dataset, layout: ChainLayout,
                           iteration: int = 0) -> SegmentedNetwork:
    """One segment per event, chains ordered by the layout rotated for this iteration"""
    if not data.is_labeled:
        raise NetworkError("training networks need labeled events")
    rotated = layout.rotated(iteration)
    segments = tuple(build_event_network(model, ev, rotated) for ev in data.events)
    return SegmentedNetwork(segments, tuple(ev.true_label for ev in data.events),
                            np.asarray(model.weights, dtype=float))
