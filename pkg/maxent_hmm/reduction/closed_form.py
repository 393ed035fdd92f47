"""
Closed-form expected counts for chain networks

Every pass from start either fails back to start or reaches end, so the number
of failed passes before the observed one is geometric. With s the probability
that one pass reaches end and P_c the product of chain c's weights, expected
traversals split into a failure part, proportional to 1/s, and the final
successful pass.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NetworkError, ZeroProbabilityError
from ..hmm.network import ArcCounts, HmmNetwork, Polarity
from ..hmm.training import ParamCounts
from ..maxent.models import Dataset
from ..maxent.transforms import GroupPartition

logger = logging.getLogger(__name__)


@dataclass
class _Chain:
    label: str
    branch: float
    entry_arc: int
    direct_arcs: List[int]
    complement_arcs: List[int]
    nodes: List[int]


def _find_chains(net: HmmNetwork) -> List[_Chain]:
    out: Dict[int, List[int]] = {}
    for i, a in enumerate(net.arcs):
        out.setdefault(a.src, []).append(i)

    chains = []
    for i in out.get(net.start, []):
        entry = net.arcs[i]
        if entry.prob.polarity != Polarity.FIXED:
            raise NetworkError("non-chain topology: start arcs must have fixed probability")
        if entry.emitting:
            if entry.dst != net.end:
                raise NetworkError("non-chain topology: emitting start arc does not enter end")
            chains.append(_Chain(entry.emit, entry.prob.value, i, [], [], []))
            continue
        chain = _Chain("", entry.prob.value, i, [], [], [])
        node = entry.dst
        while True:
            arcs = out.get(node, [])
            direct = [j for j in arcs if net.arcs[j].prob.polarity == Polarity.DIRECT]
            comp = [j for j in arcs if net.arcs[j].prob.polarity == Polarity.COMPLEMENT]
            if len(arcs) != 2 or len(direct) != 1 or len(comp) != 1:
                raise NetworkError(f"non-chain topology at state {net.state_name(node)}")
            d, c = net.arcs[direct[0]], net.arcs[comp[0]]
            if c.dst != net.start or c.prob.param_id != d.prob.param_id or c.emitting:
                raise NetworkError(f"non-chain topology: state {net.state_name(node)} does not fail to start")
            chain.nodes.append(node)
            chain.direct_arcs.append(direct[0])
            chain.complement_arcs.append(comp[0])
            if d.emitting:
                if d.dst != net.end:
                    raise NetworkError("non-chain topology: emitting chain arc does not enter end")
                chain.label = d.emit
                break
            if len(chain.nodes) > net.num_states:
                raise NetworkError("non-chain topology: chain does not terminate")
            node = d.dst
        chains.append(chain)
    if not chains:
        raise NetworkError("non-chain topology: start has no out-arcs")
    return chains


def closed_form_counts(net: HmmNetwork, observed: str) -> ArcCounts:
    """
    Expected arc counts of a chain network given the emitted label

    Raises:
        NetworkError: if the network is not a start/chains/end network
        ZeroProbabilityError: if no chain emits the observed label
    """
    chains = _find_chains(net)
    params = net.params
    success = []
    for ch in chains:
        thetas = params[[net.arcs[j].prob.param_id for j in ch.direct_arcs]]
        success.append(float(np.prod(thetas)) if thetas.size else 1.0)
    s = sum(ch.branch * p for ch, p in zip(chains, success))
    hit = sum(ch.branch * p for ch, p in zip(chains, success) if ch.label == observed)
    if hit <= 0 or s <= 0:
        raise ZeroProbabilityError(f"label {observed!r} has probability 0 under the network")

    counts = np.zeros(len(net.arcs))
    visits = np.zeros(net.num_states)
    visits[net.start] = 1.0 / s
    visits[net.end] = 1.0
    for ch, p in zip(chains, success):
        final = ch.branch * p / hit if ch.label == observed else 0.0
        counts[ch.entry_arc] = ch.branch * (1.0 - p) / s + final
        prefix = 1.0
        for node, d, c in zip(ch.nodes, ch.direct_arcs, ch.complement_arcs):
            theta = params[net.arcs[d].prob.param_id]
            visits[node] = ch.branch * (prefix - p) / s + final
            counts[c] = ch.branch * prefix * (1.0 - theta) / s
            prefix *= theta
            counts[d] = ch.branch * (prefix - p) / s + final
    return ArcCounts(counts, visits, float(np.log(hit / s)))


@dataclass(frozen=True, eq=False)
class ChainBatch:
    """
    Closed-form E-step for a whole dataset of chain networks at once

    table[r, g] is the feature id candidate row r activates in group g, or -1.
    Rotating the layout permutes the columns.
    """

    table: np.ndarray
    offsets: np.ndarray
    event_index: np.ndarray
    branch: np.ndarray
    num_params: int

    @classmethod
    def from_grouped(cls, data: Dataset, part: GroupPartition) -> "ChainBatch":
        compiled = data.compiled
        group_of = np.full(data.num_features, -1, dtype=np.int64)
        for f, gi in part.group_of().items():
            if f < data.num_features:
                group_of[f] = gi
        matrix = compiled.matrix
        table = np.full((compiled.n_rows, len(part.groups)), -1, dtype=np.int64)
        rows = np.repeat(np.arange(compiled.n_rows), np.diff(matrix.indptr))
        cols = group_of[matrix.indices]
        if np.any(cols < 0):
            raise NetworkError("some active features are in no group")
        table[rows, cols] = matrix.indices
        sizes = np.diff(compiled.offsets)
        branch = 1.0 / sizes[compiled.event_index] if compiled.n_rows else np.zeros(0)
        return cls(table, compiled.offsets, compiled.event_index, branch, data.num_features)

    @property
    def n_rows(self) -> int:
        return int(self.table.shape[0])

    def _chain_products(self, params: np.ndarray, order: Sequence[int]):
        ids = self.table[:, list(order)] if len(order) else self.table[:, :0]
        present = ids >= 0
        thetas = np.where(present, np.asarray(params)[np.where(present, ids, 0)], 1.0)
        through = np.cumprod(thetas, axis=1)
        before = np.hstack([np.ones((self.n_rows, 1)), through[:, :-1]])
        final = through[:, -1] if through.shape[1] else np.ones(self.n_rows)
        return ids, present, thetas, through, before, final

    def _pass_success(self, final: np.ndarray) -> np.ndarray:
        return np.add.reduceat(self.branch * final, self.offsets[:-1])

    def row_log_probabilities(self, params: np.ndarray, order: Sequence[int]) -> np.ndarray:
        """ln P(end reached via row's chain | end reached), per candidate row"""
        *_, final = self._chain_products(params, order)
        s = self._pass_success(final)
        return np.log(self.branch * final) - np.log(s[self.event_index])

    def counts(self, params: np.ndarray, order: Sequence[int], targets: np.ndarray,
               stage_mass: Optional[np.ndarray] = None) -> Tuple[ParamCounts, float]:
        """
        Expected direct and complement traversals per parameter

        Args:
            params: parameter table
            order: chain order of the groups
            targets: expected number of successful passes through each row's chain
            stage_mass: expected number of successful passes per event (default 1)

        Returns:
            ParamCounts and sum over rows of targets * ln P(row)
        """
        if self.n_rows == 0:
            return ParamCounts.zeros(self.num_params), 0.0
        ids, present, thetas, through, before, final = self._chain_products(params, order)
        s = self._pass_success(final)
        mass = np.ones(len(s)) if stage_mass is None else np.asarray(stage_mass, dtype=float)
        scale = (mass / s)[self.event_index] * self.branch

        direct = scale[:, None] * (through - final[:, None]) + targets[:, None]
        complement = scale[:, None] * before * (1.0 - thetas)
        flat = ids[present]
        totals = ParamCounts(
            np.bincount(flat, weights=direct[present], minlength=self.num_params),
            np.bincount(flat, weights=complement[present], minlength=self.num_params),
        )
        log_p = np.log(self.branch * final) - np.log(s[self.event_index])
        mask = targets > 0
        return totals, float(np.dot(targets[mask], log_p[mask]))
