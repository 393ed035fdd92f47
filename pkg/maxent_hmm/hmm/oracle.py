"""
Truncated path-sum oracle

Sums explicitly over paths of increasing length instead of solving the
non-emitting closure. Slow, but independent of the linear-solve engine, which
makes it the reference the engine is tested against on small networks.
"""

import logging

import numpy as np

from ..errors import NetworkError, ZeroProbabilityError
from .engine import Observation, _as_symbols
from .network import ArcCounts, HmmNetwork

logger = logging.getLogger(__name__)

TAIL_TOL = 1e-12
MAX_STEPS = 500_000


def path_sum_counts(net: HmmNetwork, observed: Observation,
                    tail_tol: float = TAIL_TOL, max_steps: int = MAX_STEPS) -> ArcCounts:
    """
    Expected arc counts by enumerating path prefixes step by step until the
    probability mass of unfinished prefixes falls below tail_tol

    Raises:
        NetworkError: if the tail does not shrink below tail_tol within max_steps
        ZeroProbabilityError: if no path produces the observation
    """
    symbols = _as_symbols(observed)
    T = len(symbols)
    n = net.num_states
    m = len(net.arcs)
    probs = net.arc_probabilities()

    silent = np.zeros((n, n))
    emit = np.zeros((T, n, n))
    for a, p in zip(net.arcs, probs):
        if a.emit is None:
            silent[a.src, a.dst] += p
        else:
            for k, sym in enumerate(symbols):
                if a.emit == sym:
                    emit[k, a.src, a.dst] += p

    def advance(x: np.ndarray) -> np.ndarray:
        # x[..., k, s]: mass of prefixes at s having emitted the first k symbols
        y = x @ silent
        for k in range(T):
            y[..., k + 1, :] += x[..., k, :] @ emit[k]
        return y

    # forward mass and, per arc, mass weighted by how often the arc was used
    mass = np.zeros((T + 1, n))
    mass[0, net.start] = 1.0
    weighted = np.zeros((m, T + 1, n))
    total = 0.0
    totals = np.zeros(m)

    for step in range(max_steps):
        total += mass[T, net.end]
        totals += weighted[:, T, net.end]
        mass[:, net.end] = 0.0
        weighted[:, :, net.end] = 0.0
        tail = mass.sum()
        if tail < tail_tol:
            logger.debug(f"path sum converged after {step} steps (tail {tail:.2e})")
            break
        new_weighted = advance(weighted)
        for i, (a, p) in enumerate(zip(net.arcs, probs)):
            if a.emit is None:
                new_weighted[i, :, a.dst] += mass[:, a.src] * p
            else:
                for k, sym in enumerate(symbols):
                    if a.emit == sym:
                        new_weighted[i, k + 1, a.dst] += mass[k, a.src] * p
        weighted = new_weighted
        mass = advance(mass)
    else:
        raise NetworkError(f"path sum did not converge within {max_steps} steps")

    if total <= 0:
        raise ZeroProbabilityError(f"observation {symbols} has probability 0 under the network")
    counts = totals / total
    visits = np.zeros(n)
    visits[net.start] += 1.0
    np.add.at(visits, [a.dst for a in net.arcs], counts)
    return ArcCounts(counts, visits, float(np.log(total)))


def path_sum_probability(net: HmmNetwork, observed: Observation, tail_tol: float = TAIL_TOL) -> float:
    return path_sum_counts(net, observed, tail_tol).likelihood
