"""
Shared fixtures for the maxent-hmm test suite
"""

import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from maxent_hmm.config import TrainOptions
from maxent_hmm.hmm.network import HmmNetwork, NetworkBuilder, ParamRef
from maxent_hmm.maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from maxent_hmm.reduction.layout import ChainLayout


def singleton_layout(num_features: int) -> ChainLayout:
    """Every feature its own group, in id order"""
    return ChainLayout(tuple(range(num_features)), {f: f for f in range(num_features)})


def frequency_events(counts, prefix="e"):
    """Same-history events: feature 0 fires for L, feature 1 for M; counts = {label: n}"""
    cands = (Candidate("L", (0,)), Candidate("M", (1,)))
    events = []
    for label in sorted(counts):
        for _ in range(counts[label]):
            events.append(EventBlock(f"{prefix}{len(events)}", label, cands))
    return Dataset(tuple(events), 2)


def random_chain_network(seed: int, n_inner: int = 4, symbols=("a", "b")) -> HmmNetwork:
    """Random network: start -> inner states with silent and emitting arcs -> end"""
    rng = np.random.default_rng(seed)
    builder = NetworkBuilder(rng.uniform(0.2, 0.8, size=n_inner))
    start = builder.add_state("start")
    end = builder.add_state("end")
    inner = [builder.add_state(f"q{i}") for i in range(n_inner)]
    builder.add_arc(start, inner[0], ParamRef.fixed(1.0))
    for i, q in enumerate(inner):
        nxt = inner[(i + 1) % n_inner]
        back = inner[int(rng.integers(0, n_inner))]
        builder.add_arc(q, nxt, ParamRef.direct(i), emit=symbols[i % len(symbols)])
        if i == n_inner - 1:
            builder.add_arc(q, end, ParamRef.complement(i))
        else:
            builder.add_arc(q, back if back != q else start, ParamRef.complement(i))
    return builder.build(start, end)


@pytest.fixture
def f1_model():
    return MaxentModel(np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.25]))


@pytest.fixture
def f1_block():
    return EventBlock("f1", "L", (Candidate("L", (0, 1, 2)), Candidate("M", (3, 4, 5))))


@pytest.fixture
def f1_dataset(f1_block):
    return Dataset((f1_block,), 6)


@pytest.fixture
def frequency_dataset():
    """Four same-history events, L three times and M once"""
    return frequency_events({"L": 3, "M": 1})


@pytest.fixture
def tight_opts():
    return TrainOptions(max_iters=5000, tol=1e-7, seed=0)
