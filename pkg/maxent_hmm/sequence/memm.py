"""
Maximum entropy Markov models: per-state GIS training and exact sequence posteriors
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainOptions
from ..errors import MaxentHmmError
from ..maxent.gis import prune_unobserved, train_gis
from ..maxent.models import Dataset, MaxentModel
from ..maxent.scoring import constraint_residual
from ..trace import TrainTrace
from .models import MemmModel, SeqEventBlock, SeqSequence

logger = logging.getLogger(__name__)


def _state_order(blocks: Sequence[SeqEventBlock]) -> Tuple[str, ...]:
    seen: Dict[str, None] = {}
    for b in blocks:
        seen.setdefault(b.source_state, None)
        for s in b.next_states:
            seen.setdefault(s, None)
    return tuple(sorted(seen))


def train_memm(blocks: Sequence[SeqEventBlock], opts: TrainOptions,
               states: Optional[Sequence[str]] = None) -> Tuple[MemmModel, Dict[str, TrainTrace]]:
    """
    Group blocks by source state and fit one maxent model per state with GIS

    Raises:
        MaxentHmmError: on empty data, unlabeled blocks, or a listed state with no blocks
    """
    if not blocks:
        raise MaxentHmmError("cannot train a MEMM on no data")
    if any(b.gold_next is None for b in blocks):
        raise MaxentHmmError("MEMM training needs the gold next state of every block")
    by_state: Dict[str, List[SeqEventBlock]] = {}
    for b in blocks:
        by_state.setdefault(b.source_state, []).append(b)
    all_states = tuple(states) if states is not None else _state_order(blocks)
    if states is not None:
        missing = [s for s in states if s not in by_state]
        if missing:
            raise MaxentHmmError(f"state(s) with no training blocks: {missing}")

    per_state: Dict[str, MaxentModel] = {}
    maps: Dict[str, Dict[int, int]] = {}
    traces: Dict[str, TrainTrace] = {}
    for state in sorted(by_state):
        events = [b.event_block() for b in by_state[state]]
        width = max((ev.max_feature() for ev in events), default=-1) + 1
        pruned, remap = prune_unobserved(Dataset(tuple(events), width))
        if pruned.num_features == 0:
            logger.warning(f"state {state}: no observed features, transitions stay uniform")
            model, trace = MaxentModel.uniform(0), TrainTrace("gis", converged=True)
        else:
            model, trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned, opts)
        per_state[state] = model
        maps[state] = remap
        traces[state] = trace
        logger.info(
            f"state {state}: {len(events)} blocks, {pruned.num_features} features, "
            f"residual {constraint_residual(model, pruned):.3e}"
        )
    return MemmModel(all_states, per_state, maps), traces


def state_residuals(model: MemmModel, blocks: Sequence[SeqEventBlock]) -> Dict[str, float]:
    """Max relative constraint residual of each state's model on its own blocks"""
    by_state: Dict[str, list] = {}
    for b in blocks:
        by_state.setdefault(b.source_state, []).append(model.local_block(b))
    return {
        s: constraint_residual(model.model_for(s), Dataset(tuple(evs), model.model_for(s).num_features))
        for s, evs in by_state.items()
    }


def _initial(seq: SeqSequence, initial: Optional[Mapping[str, float]]) -> Dict[str, float]:
    sources = list(seq.steps()[0]) if seq.length else []
    if initial is None:
        return {s: 1.0 / len(sources) for s in sources}
    unknown = [s for s in initial if initial[s] > 0 and s not in sources]
    if unknown:
        raise MaxentHmmError(f"initial states {unknown} have no block at position 1")
    return dict(initial)


def _step_tables(model: MemmModel, seq: SeqSequence):
    return [
        {src: model.transition_distribution(block) for src, block in step.items()}
        for step in seq.steps()
    ]


def sequence_probability(model: MemmModel, seq: SeqSequence, path: Sequence[str],
                         initial: Optional[Mapping[str, float]] = None) -> float:
    """P(s_1..s_T | o_1..o_T), summing over the source state before position 1"""
    if len(path) != seq.length:
        raise MaxentHmmError(f"path has {len(path)} states, sequence has {seq.length} positions")
    if not path:
        return 1.0
    tables = _step_tables(model, seq)
    pi = _initial(seq, initial)
    prob = sum(w * tables[0][s0].get(path[0]) for s0, w in pi.items() if w > 0)
    for t in range(1, len(path)):
        dist = tables[t].get(path[t - 1])
        prob *= dist.get(path[t]) if dist is not None else 0.0
    return float(prob)


def path_probabilities(model: MemmModel, seq: SeqSequence,
                       initial: Optional[Mapping[str, float]] = None) -> Dict[Tuple[str, ...], float]:
    """Every state path through the sequence with its probability, by enumeration"""
    states = sorted({s for step in seq.steps() for b in step.values() for s in b.next_states})
    return {
        path: sequence_probability(model, seq, path, initial)
        for path in itertools.product(states, repeat=seq.length)
    }


@dataclass
class MemmDecode:
    path: List[str]
    probability: float
    total: float


def memm_sequence_posterior(model: MemmModel, seq: SeqSequence,
                            initial: Optional[Mapping[str, float]] = None) -> MemmDecode:
    """
    Max-product decode of the state sequence, with the sum over all paths as a check

    Raises:
        MaxentHmmError: if a block's source state has no model
    """
    if seq.length == 0:
        return MemmDecode([], 1.0, 1.0)
    tables = _step_tables(model, seq)
    pi = _initial(seq, initial)

    best: Dict[str, float] = {}
    total: Dict[str, float] = {}
    for s0, w in pi.items():
        if w <= 0:
            continue
        for s1, p in tables[0][s0].probs.items():
            best[s1] = best.get(s1, 0.0) + w * p
            total[s1] = total.get(s1, 0.0) + w * p
    backs: List[Dict[str, str]] = []
    for t in range(1, seq.length):
        nxt_best: Dict[str, float] = {}
        nxt_total: Dict[str, float] = {}
        back: Dict[str, str] = {}
        for src in sorted(best):
            dist = tables[t].get(src)
            if dist is None:
                continue
            for dst, p in dist.probs.items():
                score = best[src] * p
                if dst not in nxt_best or score > nxt_best[dst]:
                    nxt_best[dst] = score
                    back[dst] = src
                nxt_total[dst] = nxt_total.get(dst, 0.0) + total[src] * p
        best, total = nxt_best, nxt_total
        backs.append(back)

    if not best:
        raise MaxentHmmError(f"sequence {seq.sequence_id}: no state path has nonzero probability")
    last = min(best, key=lambda s: (-best[s], s))
    path = [last]
    for back in reversed(backs):
        path.append(back[path[-1]])
    path.reverse()
    return MemmDecode(path, float(best[last]), float(np.sum(list(total.values()))))
