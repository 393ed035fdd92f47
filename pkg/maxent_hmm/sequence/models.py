"""
Data models for maxent sequence models
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

from ..errors import MaxentHmmError
from ..maxent.models import Candidate, Distribution, EventBlock, MaxentModel
from ..maxent.scoring import evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeqEventBlock:
    """Transitions out of source_state at one position, given that position's observation"""

    sequence_id: str
    position: int
    source_state: str
    observation: str
    candidates: Tuple[Candidate, ...]
    gold_next: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        labels = [c.label for c in self.candidates]
        if not labels:
            raise MaxentHmmError(f"{self.sequence_id}:{self.position}: no candidate next states")
        if len(set(labels)) != len(labels):
            raise MaxentHmmError(f"{self.sequence_id}:{self.position}: next states are not distinct: {labels}")
        if self.gold_next is not None and self.gold_next not in labels:
            raise MaxentHmmError(
                f"{self.sequence_id}:{self.position}: gold next state {self.gold_next!r} not among {labels}"
            )

    @property
    def next_states(self) -> List[str]:
        return [c.label for c in self.candidates]

    def event_block(self) -> EventBlock:
        return EventBlock(f"{self.sequence_id}:{self.position}:{self.source_state}",
                          self.gold_next, self.candidates)


@dataclass(frozen=True)
class SeqSequence:
    """
    One observation sequence. A position may carry blocks for several source
    states (decoding), or only the gold path's source (training).
    """

    sequence_id: str
    blocks: Tuple[SeqEventBlock, ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        positions = sorted({b.position for b in self.blocks})
        if positions != list(range(1, len(positions) + 1)):
            raise MaxentHmmError(f"sequence {self.sequence_id}: positions must run 1..T, got {positions}")
        seen = set()
        for b in self.blocks:
            key = (b.position, b.source_state)
            if key in seen:
                raise MaxentHmmError(
                    f"sequence {self.sequence_id}: two blocks for source {b.source_state!r} at position {b.position}"
                )
            seen.add(key)
        observed = {}
        for b in self.blocks:
            if observed.setdefault(b.position, b.observation) != b.observation:
                raise MaxentHmmError(f"sequence {self.sequence_id}: conflicting observations at {b.position}")

    @property
    def length(self) -> int:
        return max((b.position for b in self.blocks), default=0)

    def steps(self) -> List[Dict[str, SeqEventBlock]]:
        """Per position (0-based), blocks keyed by source state"""
        out: List[Dict[str, SeqEventBlock]] = [{} for _ in range(self.length)]
        for b in self.blocks:
            out[b.position - 1][b.source_state] = b
        return out

    @property
    def observations(self) -> List[str]:
        return [next(iter(step.values())).observation for step in self.steps()]

    @property
    def gold_path(self) -> Optional[List[str]]:
        path = []
        for step in self.steps():
            golds = {b.gold_next for b in step.values() if b.gold_next is not None}
            if len(golds) != 1:
                return None
            path.append(golds.pop())
        return path


@dataclass(frozen=True, eq=False)
class MemmModel:
    """
    One maxent model over next states per source state

    feature_maps[s] maps global feature ids to that state's local ids; ids the
    state never observed in training are absent and contribute weight 1.
    """

    states: Tuple[str, ...]
    per_state: Mapping[str, MaxentModel]
    feature_maps: Mapping[str, Mapping[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "per_state", dict(self.per_state))
        object.__setattr__(self, "feature_maps", {s: dict(m) for s, m in self.feature_maps.items()})
        for s in self.per_state:
            if s not in self.states:
                raise MaxentHmmError(f"model for unknown state {s!r}")

    def model_for(self, state: str) -> MaxentModel:
        if state not in self.per_state:
            raise MaxentHmmError(f"unseen state {state!r}: no transition model")
        return self.per_state[state]

    def local_block(self, block: SeqEventBlock) -> EventBlock:
        """The block's candidates rewritten into the source state's local ids"""
        model = self.model_for(block.source_state)
        fmap = self.feature_maps.get(block.source_state)
        if fmap is None:
            return block.event_block()
        cands = tuple(
            Candidate.of(c.label, (fmap[i] for i in c.active if i in fmap)) for c in block.candidates
        )
        local = EventBlock(f"{block.sequence_id}:{block.position}", block.gold_next, cands)
        if local.max_feature() >= model.num_features:
            raise MaxentHmmError(f"feature map of state {block.source_state!r} exceeds its model")
        return local

    def transition_distribution(self, block: SeqEventBlock) -> Distribution:
        return evaluate(self.model_for(block.source_state), self.local_block(block))
