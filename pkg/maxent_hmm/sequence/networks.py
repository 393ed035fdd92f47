"""
Sequence networks built from maxent chain clouds

maxent-hmm: every state has a cloud choosing (output, next state); failures
return to the state's entry, success emits the output and enters the next
state's entry.
memm: one cloud per (position, source state); failures return to that cloud's
entrance, success emits the next state and enters the next position.
crf: the memm layout with every failure sent back to the global start, so the
whole sequence is normalized at once.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import MaxentHmmError, NetworkError
from ..hmm.engine import absorption_probability, string_probability
from ..hmm.network import HmmNetwork, NetworkBuilder, ParamRef, StateId, first_passage_network
from ..maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from ..maxent.scoring import f_sharp
from ..maxent.transforms import make_grouped
from ..reduction.layout import ChainLayout, CloudExit, add_cloud
from .models import MemmModel, SeqSequence

logger = logging.getLogger(__name__)


class SequenceKind(str, Enum):
    MAXENT_HMM = "maxent-hmm"
    MEMM = "memm"
    CRF = "crf"


@dataclass(frozen=True, eq=False)
class Cloud:
    """One chain cloud: candidates over ids of the shared parameter table, and their chain order"""

    block: EventBlock
    layout: ChainLayout


def _offset_cloud(block: EventBlock, layout: ChainLayout, offset: int) -> Cloud:
    cands = tuple(Candidate(c.label, tuple(offset + i for i in c.active)) for c in block.candidates)
    group_of = {offset + f: g for f, g in layout.group_of.items()}
    return Cloud(EventBlock(block.event_id, block.true_label, cands), ChainLayout(layout.group_order, group_of))


class _ParamTable:
    """Grouped sub-unit models appended into one parameter table"""

    def __init__(self):
        self.parts: List[np.ndarray] = []
        self.size = 0

    def add(self, model: MaxentModel, data: Dataset) -> List[Cloud]:
        grouped = make_grouped(model, data)
        layout = ChainLayout.from_partition(grouped.partition)
        offset = self.size
        self.parts.append(np.asarray(grouped.model.weights, dtype=float))
        self.size += grouped.model.num_features
        return [_offset_cloud(ev, layout, offset) for ev in grouped.data.events]

    @property
    def params(self) -> np.ndarray:
        return np.concatenate(self.parts) if self.parts else np.zeros(0)


@dataclass(frozen=True)
class StateCloudSpec:
    """A maxent-hmm state: its transition model and, per candidate, (emitted symbol, next state or None for end)"""

    state: str
    model: MaxentModel
    block: EventBlock
    outputs: Tuple[Tuple[str, Optional[str]], ...]

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(tuple(o) for o in self.outputs))
        if len(self.outputs) != len(self.block.candidates):
            raise MaxentHmmError(f"state {self.state}: {len(self.outputs)} outputs for "
                                 f"{len(self.block.candidates)} candidates")


@dataclass(frozen=True)
class MaxentHmmSpec:
    initial: str
    clouds: Tuple[StateCloudSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "clouds", tuple(self.clouds))


@dataclass(frozen=True, eq=False)
class ConditionalSequenceSpec:
    """
    Clouds per position keyed by source state, over one shared parameter table

    initial gives the weight of each source state before position 1.
    """

    steps: Tuple[Dict[str, Cloud], ...]
    params: np.ndarray
    initial: Mapping[str, float] = field(default_factory=dict)

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> List[str]:
        return sorted({c.label for step in self.steps for cloud in step.values() for c in cloud.block.candidates})


def _initial_weights(seq: SeqSequence, initial: Optional[Mapping[str, float]]) -> Dict[str, float]:
    sources = sorted(seq.steps()[0]) if seq.length else []
    if initial is None:
        return {s: 1.0 / len(sources) for s in sources}
    return {s: float(w) for s, w in initial.items() if w > 0}


def memm_network_spec(model: MemmModel, seq: SeqSequence,
                      initial: Optional[Mapping[str, float]] = None) -> ConditionalSequenceSpec:
    """Group each state's model over the sequence's blocks for that state"""
    table = _ParamTable()
    steps: List[Dict[str, Cloud]] = [{} for _ in range(seq.length)]
    by_state: Dict[str, list] = {}
    for b in seq.blocks:
        by_state.setdefault(b.source_state, []).append(b)
    for state in sorted(by_state):
        state_model = model.model_for(state)
        blocks = by_state[state]
        events = tuple(model.local_block(b) for b in blocks)
        clouds = table.add(state_model, Dataset(events, state_model.num_features))
        for b, cloud in zip(blocks, clouds):
            steps[b.position - 1][state] = cloud
    return ConditionalSequenceSpec(tuple(steps), table.params, _initial_weights(seq, initial))


def crf_network_spec(weights: MaxentModel, seq: SeqSequence,
                     initial: Optional[Mapping[str, float]] = None) -> ConditionalSequenceSpec:
    """One weight vector shared by every step, grouped over all of the sequence's blocks"""
    table = _ParamTable()
    events = tuple(b.event_block() for b in seq.blocks)
    clouds = table.add(weights, Dataset(events, weights.num_features))
    steps: List[Dict[str, Cloud]] = [{} for _ in range(seq.length)]
    for b, cloud in zip(seq.blocks, clouds):
        steps[b.position - 1][b.source_state] = cloud
    return ConditionalSequenceSpec(tuple(steps), table.params, _initial_weights(seq, initial))


def _build_conditional(spec: ConditionalSequenceSpec, global_failures: bool) -> HmmNetwork:
    builder = NetworkBuilder(spec.params)
    start = builder.add_state("start")
    end = builder.add_state("end")
    entries: List[Dict[str, StateId]] = [
        {src: builder.add_state(f"E[{t + 1},{src}]") for src in sorted(step)} for t, step in enumerate(spec.steps)
    ]
    if not spec.steps:
        raise NetworkError("sequence networks need at least one position")
    weights = {s: w for s, w in spec.initial.items() if s in entries[0]}
    total = sum(weights.values())
    if total <= 0:
        raise NetworkError("no initial state has a cloud at position 1")
    for src in sorted(weights):
        builder.add_arc(start, entries[0][src], ParamRef.fixed(weights[src] / total))

    k_max = max(len(c.block.candidates) for step in spec.steps for c in step.values())
    for t, step in enumerate(spec.steps):
        last = t == len(spec.steps) - 1
        for src in sorted(step):
            cloud = step[src]
            exits = []
            for c in cloud.block.candidates:
                if last:
                    exits.append(CloudExit(end, c.label))
                elif c.label in entries[t + 1]:
                    exits.append(CloudExit(entries[t + 1][c.label], c.label))
                else:
                    raise NetworkError(f"position {t + 2} has no cloud for source state {c.label!r}")
            add_cloud(builder, entries[t][src], cloud.block.candidates, cloud.layout, exits,
                      retry=start if global_failures else None,
                      branch=1.0 / k_max if global_failures else None,
                      name=f"{t + 1},{src}:")
    return builder.build(start, end)


def _build_maxent_hmm(spec: MaxentHmmSpec) -> HmmNetwork:
    table = _ParamTable()
    clouds = {}
    for sc in spec.clouds:
        if sc.state in clouds:
            raise MaxentHmmError(f"state {sc.state} has two clouds")
        clouds[sc.state] = table.add(sc.model, Dataset((sc.block,), sc.model.num_features))[0]
    if spec.initial not in clouds:
        raise MaxentHmmError(f"initial state {spec.initial!r} has no cloud")
    builder = NetworkBuilder(table.params)
    names = [sc.state for sc in spec.clouds]
    entry = {s: builder.add_state(f"S[{s}]") for s in names}
    end = builder.add_state("end")
    for sc in spec.clouds:
        exits = []
        for symbol, nxt in sc.outputs:
            if nxt is not None and nxt not in entry:
                raise MaxentHmmError(f"state {sc.state} transitions to unknown state {nxt!r}")
            exits.append(CloudExit(end if nxt is None else entry[nxt], symbol))
        add_cloud(builder, entry[sc.state], clouds[sc.state].block.candidates, clouds[sc.state].layout,
                  exits, name=f"{sc.state}:")
    return builder.build(entry[spec.initial], end)


SequenceSpec = Union[MaxentHmmSpec, ConditionalSequenceSpec]


def build_sequence_network(kind: Union[SequenceKind, str], spec: SequenceSpec) -> HmmNetwork:
    """
    Raises:
        MaxentHmmError: for an unknown kind or a spec of the wrong type
    """
    try:
        kind = SequenceKind(kind)
    except ValueError:
        raise MaxentHmmError(f"unknown sequence network kind {kind!r}") from None
    if kind == SequenceKind.MAXENT_HMM:
        if not isinstance(spec, MaxentHmmSpec):
            raise MaxentHmmError("maxent-hmm networks need a MaxentHmmSpec")
        net = _build_maxent_hmm(spec)
    else:
        if not isinstance(spec, ConditionalSequenceSpec):
            raise MaxentHmmError(f"{kind.value} networks need a ConditionalSequenceSpec")
        net = _build_conditional(spec, global_failures=kind == SequenceKind.CRF)
    logger.info(f"built {kind.value} network: {net.num_states} states, {len(net.arcs)} arcs")
    return net


def size_report(spec: MaxentHmmSpec, net: HmmNetwork) -> Dict[str, int]:
    """States and arcs of a maxent-hmm network next to the f# x transitions bound"""
    data = Dataset(tuple(sc.block for sc in spec.clouds),
                   max(sc.model.num_features for sc in spec.clouds))
    fsharp = f_sharp(data)
    transitions = sum(len(sc.block.candidates) for sc in spec.clouds)
    return {
        "states": net.num_states,
        "arcs": len(net.arcs),
        "f_sharp": fsharp,
        "transitions": transitions,
        # holds when every cloud's indicators already form exact groups
        "bound": fsharp * transitions + len(spec.clouds) + 1,
    }


def crf_path_distribution(net: HmmNetwork, states: Sequence[str], length: int) -> Dict[Tuple[str, ...], float]:
    """
    Normalized probability of every state path, read off a crf network: the
    chance one pass from start emits the path and reaches end, divided by the
    chance one pass reaches end at all
    """
    single = first_passage_network(net)
    reach = absorption_probability(single)
    if reach <= 0:
        raise NetworkError("no pass through the network reaches end")
    return {
        path: string_probability(single, list(path)) / reach
        for path in itertools.product(states, repeat=length)
    }


def crf_path_weights(weights: MaxentModel, seq: SeqSequence,
                     initial: Optional[Mapping[str, float]] = None) -> Dict[Tuple[str, ...], float]:
    """Unnormalized path weights: initial weight times the product of per-step maxent numerators"""
    steps = seq.steps()
    pi = _initial_weights(seq, initial)
    log_w = weights.log_weights
    states = sorted({c.label for step in steps for b in step.values() for c in b.candidates})
    out = {}
    for path in itertools.product(states, repeat=seq.length):
        total = 0.0
        for s0, w in pi.items():
            src, score, ok = s0, w, True
            for t, dst in enumerate(path):
                block = steps[t].get(src)
                cand = next((c for c in block.candidates if c.label == dst), None) if block else None
                if cand is None:
                    ok = False
                    break
                score *= float(np.exp(log_w[list(cand.active)].sum()))
                src = dst
            if ok:
                total += score
        out[path] = total
    return out
