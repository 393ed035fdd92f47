"""
Baum-Welch training of tied-parameter networks
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainOptions
from ..errors import MaxentHmmError
from ..trace import TrainTrace
from .engine import Observation, expected_counts
from .network import ArcCounts, HmmNetwork, Polarity

logger = logging.getLogger(__name__)

PARAM_FLOOR = 1e-12
# An iterate within OSCILLATION_RATIO of the last step from the one before last is a return;
# OSCILLATION_RUN returns in a row are reported
OSCILLATION_RATIO = 0.5
OSCILLATION_RUN = 3
MIN_OSCILLATION_STEP = 1e-12

Segment = Tuple[HmmNetwork, Observation]
SegmentBuilder = Callable[[int, np.ndarray], Sequence[Segment]]
EStep = Callable[[int, np.ndarray], Tuple["ParamCounts", float]]
Distance = Callable[[np.ndarray, np.ndarray], float]


@dataclass
class ParamCounts:
    """Expected traversals of direct-polarity and complement-polarity arcs, per parameter"""

    direct: np.ndarray
    complement: np.ndarray

    @classmethod
    def zeros(cls, num_params: int) -> "ParamCounts":
        return cls(np.zeros(num_params), np.zeros(num_params))

    def add(self, net: HmmNetwork, counts: ArcCounts) -> None:
        for arc, c in zip(net.arcs, counts.arc_counts):
            if arc.prob.polarity == Polarity.DIRECT:
                self.direct[arc.prob.param_id] += c
            elif arc.prob.polarity == Polarity.COMPLEMENT:
                self.complement[arc.prob.param_id] += c

    def __iadd__(self, other: "ParamCounts") -> "ParamCounts":
        self.direct += other.direct
        self.complement += other.complement
        return self


@dataclass
class BwUpdate:
    params: np.ndarray
    unvisited: List[int] = field(default_factory=list)


def bw_update(counts: ParamCounts, params: np.ndarray) -> BwUpdate:
    """theta_j = direct_j / (direct_j + complement_j); unvisited parameters keep their value"""
    params = np.asarray(params, dtype=float)
    denom = counts.direct + counts.complement
    visited = denom > 0
    new = params.copy()
    new[visited] = counts.direct[visited] / denom[visited]
    new = np.where(visited, np.clip(new, PARAM_FLOOR, 1.0 - PARAM_FLOOR), params)
    unvisited = np.flatnonzero(~visited).tolist()
    if unvisited:
        logger.warning(f"{len(unvisited)} parameter(s) received no expected counts and were left unchanged")
    return BwUpdate(new, unvisited)


def segment_estep(build: SegmentBuilder) -> EStep:
    """E-step that runs the generic engine on every segment the builder returns"""

    def estep(iteration: int, params: np.ndarray) -> Tuple[ParamCounts, float]:
        totals = ParamCounts.zeros(len(params))
        log_likelihood = 0.0
        for net, observed in build(iteration, params):
            counts = expected_counts(net, observed)
            totals.add(net, counts)
            log_likelihood += counts.log_likelihood
        return totals, log_likelihood

    return estep


class OscillationMonitor:
    """Warns once when the likelihood falls and once when iterates keep bouncing back"""

    def __init__(self, method: str, distance: Optional[Distance] = None):
        self.method = method
        self.distance = distance or max_abs_distance
        self.before_last: Optional[np.ndarray] = None
        self.returns = 0
        self.warned_drop = False
        self.warned_return = False

    def likelihood(self, it: int, previous: Optional[float], current: float) -> None:
        if previous is None or self.warned_drop:
            return
        if current < previous - 1e-9 * max(1.0, abs(previous)):
            self.warned_drop = True
            logger.warning(
                f"{self.method} log-likelihood fell from {previous:.10f} to {current:.10f} at iteration {it}; "
                f"training may be oscillating"
            )

    def step(self, it: int, old: np.ndarray, new: np.ndarray) -> None:
        moved = self.distance(old, new)
        if self.before_last is not None and moved > MIN_OSCILLATION_STEP:
            back = self.distance(self.before_last, new)
            self.returns = self.returns + 1 if back < OSCILLATION_RATIO * moved else 0
            if self.returns >= OSCILLATION_RUN and not self.warned_return:
                self.warned_return = True
                logger.warning(
                    f"{self.method} iterates returned to the one before last {self.returns} times in a row "
                    f"by iteration {it} (step {moved:.3e}, gap {back:.3e}); training may be oscillating"
                )
        self.before_last = old


def max_abs_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b))) if len(a) else 0.0


def train_fb(params: np.ndarray, opts: TrainOptions,
             build: Optional[SegmentBuilder] = None,
             estep: Optional[EStep] = None,
             rotate: bool = False,
             post_update: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             residual_fn: Optional[Callable[[np.ndarray], float]] = None,
             min_delta: Optional[float] = None,
             distance: Optional[Distance] = None,
             method: str = "fb") -> Tuple[np.ndarray, TrainTrace]:
    """
    Forward-backward EM over a shared parameter table

    Args:
        params: initial parameter table, values in (0, 1)
        opts: iteration limit and tolerance
        build: returns the (network, observation) segments for an iteration index
        estep: replaces the generic per-segment E-step (e.g. a closed-form batch)
        rotate: pass the iteration index to the builder so layouts cycle; otherwise 0
        post_update: applied to the table after every update (group rescaling)
        residual_fn: when given, stop once it drops to opts.tol
        min_delta: likelihood-delta stop; defaults to opts.tol without residual_fn
        distance: between two parameter tables, for the oscillation warning; defaults to max abs difference

    Returns:
        final parameter table and the likelihood trace
    """
    if (build is None) == (estep is None):
        raise MaxentHmmError("train_fb needs exactly one of build or estep")
    step = estep if estep is not None else segment_estep(build)
    if min_delta is None:
        min_delta = opts.tol if residual_fn is None else 1e-13

    params = np.asarray(params, dtype=float).copy()
    trace = TrainTrace(method)
    monitor = OscillationMonitor(method, distance)
    previous = None
    for it in range(opts.max_iters + 1):
        counts, log_likelihood = step(it if rotate else 0, params)
        monitor.likelihood(it, previous, log_likelihood)
        residual = residual_fn(params) if residual_fn is not None else None
        if opts.record_trace:
            trace.record(log_likelihood, residual)
        logger.debug(f"{method} iteration {it}: log-likelihood={log_likelihood:.10f}")
        trace.iterations = it
        if residual is not None and residual <= opts.tol:
            trace.converged = True
            break
        if previous is not None and abs(log_likelihood - previous) < min_delta:
            trace.converged = True
            break
        if it == opts.max_iters:
            break
        previous = log_likelihood
        updated = bw_update(counts, params).params
        if post_update is not None:
            updated = post_update(updated)
        monitor.step(it, params, updated)
        params = updated

    if trace.converged:
        logger.info(f"{method} converged after {trace.iterations} iterations")
    else:
        logger.warning(f"{method} stopped at max_iters={opts.max_iters}")
    return params, trace
