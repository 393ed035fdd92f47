"""
Exact inference on HMM networks with non-emitting arcs

Non-emitting arcs may form loops, so the set of paths between two emissions is
infinite. Each layer of the forward and backward passes is closed under
non-emitting moves with one linear solve against (I - N), where N holds the
non-emitting arc probabilities. Forward vectors are rescaled per layer so long
strung-together networks do not underflow.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np
from scipy import linalg

from ..errors import NetworkError, NetworkValidationError, ZeroProbabilityError
from ..maxent.models import Distribution
from .network import ArcCounts, HmmNetwork, validate

logger = logging.getLogger(__name__)

OUTPUT_SUM_TOL = 1e-10

Observation = Union[str, Sequence[str]]


@dataclass
class _Operators:
    probs: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    emitting: np.ndarray
    emit: List[str]
    lu: tuple
    emissions: Dict[str, np.ndarray]


def _as_symbols(observed: Observation) -> List[str]:
    # a bare string is one symbol; labels may be longer than one character
    if isinstance(observed, str):
        return [observed]
    return list(observed)


def _operators(net: HmmNetwork) -> _Operators:
    n = net.num_states
    probs = net.arc_probabilities()
    src = np.array([a.src for a in net.arcs], dtype=np.int64)
    dst = np.array([a.dst for a in net.arcs], dtype=np.int64)
    emitting = np.array([a.emitting for a in net.arcs], dtype=bool)
    emit = [a.emit for a in net.arcs]

    closure = np.eye(n)
    ne = ~emitting
    np.add.at(closure, (src[ne], dst[ne]), -probs[ne])
    lu, piv = linalg.lu_factor(closure)
    if np.any(np.abs(np.diag(lu)) < 1e-300):
        raise NetworkError("non-emitting closure is singular (probability-1 non-emitting loop?)")

    emissions: Dict[str, np.ndarray] = {}
    for i in np.flatnonzero(emitting):
        mat = emissions.setdefault(emit[i], np.zeros((n, n)))
        mat[src[i], dst[i]] += probs[i]
    return _Operators(probs, src, dst, emitting, emit, (lu, piv), emissions)


def _emission(ops: _Operators, symbol: str, n: int) -> np.ndarray:
    mat = ops.emissions.get(symbol)
    return mat if mat is not None else np.zeros((n, n))


def _forward(net: HmmNetwork, ops: _Operators, symbols: List[str]):
    """Scaled forward layers alpha_hat (T+1 x n) and per-layer scale factors"""
    n = net.num_states
    alphas = np.zeros((len(symbols) + 1, n))
    scales = np.zeros(len(symbols) + 1)
    seed = np.zeros(n)
    seed[net.start] = 1.0
    for k in range(len(symbols) + 1):
        if k > 0:
            seed = alphas[k - 1] @ _emission(ops, symbols[k - 1], n)
        layer = linalg.lu_solve(ops.lu, seed, trans=1)
        total = layer.sum()
        if total <= 0:
            return alphas, scales, False
        scales[k] = total
        alphas[k] = layer / total
    return alphas, scales, True


def _backward(net: HmmNetwork, ops: _Operators, symbols: List[str], scales: np.ndarray) -> np.ndarray:
    """Backward layers scaled to pair with the forward layers"""
    n = net.num_states
    betas = np.zeros((len(symbols) + 1, n))
    sink = np.zeros(n)
    sink[net.end] = 1.0
    betas[-1] = linalg.lu_solve(ops.lu, sink)
    for k in range(len(symbols), 0, -1):
        rhs = _emission(ops, symbols[k - 1], n) @ betas[k]
        betas[k - 1] = linalg.lu_solve(ops.lu, rhs) / scales[k]
    return betas


def string_log_probability(net: HmmNetwork, observed: Observation) -> float:
    """ln P(network emits exactly this symbol string and is absorbed at end)"""
    symbols = _as_symbols(observed)
    ops = _operators(net)
    alphas, scales, alive = _forward(net, ops, symbols)
    final = alphas[-1][net.end] if alive else 0.0
    if final <= 0:
        return float("-inf")
    return float(np.log(scales).sum() + np.log(final))


def string_probability(net: HmmNetwork, observed: Observation) -> float:
    return float(np.exp(string_log_probability(net, observed)))


def output_distribution(net: HmmNetwork) -> Distribution:
    """
    Distribution over the single symbol emitted on the way from start to end

    Raises:
        NetworkValidationError: if the network fails validate()
        NetworkError: if some paths emit zero or several symbols
    """
    violations = validate(net)
    if violations:
        raise NetworkValidationError(violations)
    n = net.num_states
    ops = _operators(net)
    start = np.zeros(n)
    start[net.start] = 1.0
    first = linalg.lu_solve(ops.lu, start, trans=1)
    sink = np.zeros(n)
    sink[net.end] = 1.0
    finish = linalg.lu_solve(ops.lu, sink)
    probs = {sym: float(first @ ops.emissions[sym] @ finish) for sym in net.symbols}
    total = sum(probs.values())
    if abs(total - 1.0) > OUTPUT_SUM_TOL:
        raise NetworkError(
            f"single-symbol outputs sum to {total:.12g}; the network does not emit exactly one symbol per path"
        )
    return Distribution(probs)


def expected_counts(net: HmmNetwork, observed: Observation) -> ArcCounts:
    """
    Posterior expected traversal count of every arc and visit count of every state

    Raises:
        ZeroProbabilityError: if the observation cannot be produced by the network
    """
    symbols = _as_symbols(observed)
    ops = _operators(net)
    alphas, scales, alive = _forward(net, ops, symbols)
    final = alphas[-1][net.end] if alive else 0.0
    if final <= 0:
        raise ZeroProbabilityError(f"observation {symbols} has probability 0 under the network")
    betas = _backward(net, ops, symbols, scales)

    counts = np.zeros(len(net.arcs))
    ne = ~ops.emitting
    if np.any(ne):
        pair = alphas[:, ops.src[ne]] * betas[:, ops.dst[ne]]
        counts[ne] = ops.probs[ne] * pair.sum(axis=0)
    em = np.flatnonzero(ops.emitting)
    if em.size and symbols:
        pair = alphas[:-1, ops.src[em]] * betas[1:, ops.dst[em]] / scales[1:, None]
        match = np.array(symbols, dtype=object)[:, None] == np.array([ops.emit[i] for i in em], dtype=object)[None, :]
        counts[em] = ops.probs[em] * (pair * match).sum(axis=0)
    counts /= final
    visits = (alphas * betas).sum(axis=0) / final
    log_p = float(np.log(scales).sum() + np.log(final))
    return ArcCounts(counts, visits, log_p)


def absorption_probability(net: HmmNetwork) -> float:
    """Probability of ever reaching end, whatever is emitted on the way"""
    n = net.num_states
    probs = net.arc_probabilities()
    transient = np.eye(n)
    for a, p in zip(net.arcs, probs):
        transient[a.src, a.dst] -= p
    rhs = np.zeros(n)
    rhs[net.end] = 1.0
    try:
        reach = linalg.solve(transient, rhs)
    except linalg.LinAlgError as exc:
        raise NetworkError(f"absorption system is singular: {exc}") from exc
    return float(reach[net.start])
