"""
HMM networks with non-emitting arcs and tied parameters
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from ..errors import NetworkError

logger = logging.getLogger(__name__)

OUT_SUM_TOL = 1e-12

StateId = int


class Polarity(str, Enum):
    DIRECT = "direct"            # prob = theta
    COMPLEMENT = "complement"    # prob = 1 - theta
    FIXED = "fixed"              # prob = value


@dataclass(frozen=True)
class ParamRef:
    polarity: Polarity
    param_id: Optional[int] = None
    value: Optional[float] = None

    @classmethod
    def direct(cls, param_id: int) -> "ParamRef":
        return cls(Polarity.DIRECT, int(param_id))

    @classmethod
    def complement(cls, param_id: int) -> "ParamRef":
        return cls(Polarity.COMPLEMENT, int(param_id))

    @classmethod
    def fixed(cls, value: float) -> "ParamRef":
        return cls(Polarity.FIXED, None, float(value))

    def resolve(self, params: np.ndarray) -> float:
        if self.polarity == Polarity.FIXED:
            return float(self.value)
        theta = float(params[self.param_id])
        return theta if self.polarity == Polarity.DIRECT else 1.0 - theta


@dataclass(frozen=True)
class Arc:
    src: StateId
    dst: StateId
    prob: ParamRef
    emit: Optional[str] = None

    @property
    def emitting(self) -> bool:
        return self.emit is not None


@dataclass(frozen=True, eq=False)
class HmmNetwork:
    num_states: int
    arcs: Tuple[Arc, ...]
    start: StateId
    end: StateId
    params: np.ndarray
    state_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))

    def with_params(self, params: np.ndarray) -> "HmmNetwork":
        return replace(self, params=np.asarray(params, dtype=float))

    def arc_probabilities(self) -> np.ndarray:
        return np.array([a.prob.resolve(self.params) for a in self.arcs])

    @property
    def symbols(self) -> List[str]:
        seen: Dict[str, None] = {}
        for a in self.arcs:
            if a.emit is not None:
                seen.setdefault(a.emit, None)
        return list(seen)

    def state_name(self, s: StateId) -> str:
        return self.state_names[s] if self.state_names else str(s)

    def find_state(self, name: str) -> StateId:
        try:
            return self.state_names.index(name)
        except ValueError:
            raise NetworkError(f"no state named {name!r}") from None

    def graph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(range(self.num_states))
        for i, a in enumerate(self.arcs):
            g.add_edge(a.src, a.dst, key=i, emit=a.emit)
        return g


@dataclass
class ArcCounts:
    """Posterior expected arc traversals and state visits for one observation"""

    arc_counts: np.ndarray
    state_visits: np.ndarray
    log_likelihood: float

    @property
    def likelihood(self) -> float:
        return float(np.exp(self.log_likelihood))

    def flow_imbalance(self, net: HmmNetwork) -> np.ndarray:
        """inflow - outflow per state, with the start state's unit source added to its inflow"""
        inflow = np.zeros(net.num_states)
        outflow = np.zeros(net.num_states)
        for a, c in zip(net.arcs, self.arc_counts):
            outflow[a.src] += c
            inflow[a.dst] += c
        inflow[net.start] += 1.0
        imbalance = inflow - outflow
        imbalance[net.end] = 0.0
        return imbalance


@dataclass
class NetworkBuilder:
    """Incremental construction of an HmmNetwork over a shared parameter table"""

    params: np.ndarray
    names: List[str] = field(default_factory=list)
    arcs: List[Arc] = field(default_factory=list)

    def add_state(self, name: str) -> StateId:
        self.names.append(name)
        return len(self.names) - 1

    def add_arc(self, src: StateId, dst: StateId, prob: ParamRef, emit: Optional[str] = None) -> None:
        self.arcs.append(Arc(src, dst, prob, emit))

    def build(self, start: StateId, end: StateId) -> HmmNetwork:
        return HmmNetwork(len(self.names), tuple(self.arcs), start, end, self.params, tuple(self.names))


def validate(net: HmmNetwork) -> List[str]:
    """Return a list of human-readable violations; empty when the network is usable"""
    violations: List[str] = []
    n = net.num_states
    if not (0 <= net.start < n and 0 <= net.end < n):
        return [f"start/end state out of range for {n} states"]
    probs = np.zeros(len(net.arcs))
    for i, a in enumerate(net.arcs):
        if not (0 <= a.src < n and 0 <= a.dst < n):
            violations.append(f"arc {i} connects unknown states {a.src}->{a.dst}")
            continue
        ref = a.prob
        if ref.polarity == Polarity.FIXED:
            if ref.value is None or not (0.0 < ref.value <= 1.0):
                violations.append(f"arc {i} has fixed probability {ref.value} outside (0, 1]")
        elif ref.param_id is None or not (0 <= ref.param_id < len(net.params)):
            violations.append(f"arc {i} references unknown parameter {ref.param_id}")
            continue
        probs[i] = ref.resolve(net.params)
        if a.src == net.end:
            violations.append(f"arc {i} leaves the absorbing end state")
    if violations:
        return violations

    bad_params = np.flatnonzero((net.params < 0) | (net.params > 1))
    if bad_params.size:
        violations.append(f"parameters outside [0, 1]: {bad_params.tolist()[:10]}")

    g = net.graph()
    reachable = nx.descendants(g, net.start) | {net.start}
    out_sum = np.zeros(n)
    np.add.at(out_sum, [a.src for a in net.arcs], probs)
    for s in sorted(reachable):
        if s == net.end:
            continue
        if abs(out_sum[s] - 1.0) > OUT_SUM_TOL:
            violations.append(f"state {net.state_name(s)}: out-sum {out_sum[s]:.12g} != 1")

    if net.end not in reachable:
        violations.append("end is unreachable from start")
    else:
        can_finish = nx.ancestors(g, net.end) | {net.end}
        stuck = sorted(reachable - can_finish)
        if stuck:
            violations.append(f"states that cannot reach end: {[net.state_name(s) for s in stuck[:10]]}")

    certain = nx.DiGraph()
    for a, p in zip(net.arcs, probs):
        if not a.emitting and p >= 1.0 - OUT_SUM_TOL:
            certain.add_edge(a.src, a.dst)
    try:
        cycle = nx.find_cycle(certain)
        violations.append(f"probability-1 non-emitting cycle through {[net.state_name(u) for u, _ in cycle]}")
    except nx.NetworkXNoCycle:
        pass
    return violations


def first_passage_network(net: HmmNetwork) -> HmmNetwork:
    """Copy of net where every arc into start is redirected into a new absorbing sink"""
    sink = net.num_states
    arcs = tuple(
        Arc(a.src, sink, a.prob, a.emit) if a.dst == net.start else a for a in net.arcs
    )
    names = tuple(net.state_names) + ("sink",) if net.state_names else ()
    return HmmNetwork(net.num_states + 1, arcs, net.start, net.end, net.params, names)


def join_networks(parts: Sequence[HmmNetwork]) -> HmmNetwork:
    """String networks together: each part's arcs into its end enter the next part's start"""
    if not parts:
        raise NetworkError("nothing to join")
    offsets = np.cumsum([0] + [p.num_states for p in parts])
    arcs: List[Arc] = []
    names: List[str] = []
    for k, part in enumerate(parts):
        base = int(offsets[k])
        last = k == len(parts) - 1
        nxt = None if last else int(offsets[k + 1]) + parts[k + 1].start
        for a in part.arcs:
            dst = a.dst + base
            if a.dst == part.end and not last:
                dst = nxt
            arcs.append(Arc(a.src + base, dst, a.prob, a.emit))
        names.extend(f"seg{k}:{part.state_name(s)}" for s in range(part.num_states))
    start = parts[0].start
    end = int(offsets[-2]) + parts[-1].end
    return HmmNetwork(int(offsets[-1]), tuple(arcs), start, end, parts[0].params, tuple(names))
