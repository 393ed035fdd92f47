#!/usr/bin/env python3
"""
Unit tests for MEMMs, crf-style sequence networks and maxent-hmm networks
"""

import numpy as np
import pytest

from maxent_hmm.config import TrainOptions
from maxent_hmm.errors import MaxentHmmError
from maxent_hmm.hmm.engine import string_probability
from maxent_hmm.hmm.network import validate
from maxent_hmm.maxent.models import Candidate, EventBlock, MaxentModel
from maxent_hmm.sequence.memm import (
    memm_sequence_posterior,
    path_probabilities,
    sequence_probability,
    state_residuals,
    train_memm,
)
from maxent_hmm.sequence.models import MemmModel, SeqEventBlock, SeqSequence
from maxent_hmm.sequence.networks import (
    MaxentHmmSpec,
    StateCloudSpec,
    build_sequence_network,
    crf_network_spec,
    crf_path_distribution,
    crf_path_weights,
    memm_network_spec,
    size_report,
)

STATES = ("A", "B")
OBS = ("x", "y")
NUM_FEATURES = len(STATES) * len(STATES) * len(OBS)


def feature(src, dst, obs):
    """One indicator per (source, next, observation)"""
    return (STATES.index(src) * len(STATES) + STATES.index(dst)) * len(OBS) + OBS.index(obs)


def block(seq_id, pos, src, obs, gold=None):
    cands = tuple(Candidate(dst, (feature(src, dst, obs),)) for dst in STATES)
    return SeqEventBlock(seq_id, pos, src, obs, cands, gold)


def lattice(seq_id, observations):
    """A block for every source state at every position"""
    return SeqSequence(seq_id, tuple(
        block(seq_id, t + 1, src, obs) for t, obs in enumerate(observations) for src in STATES
    ))


def random_memm(seed):
    rng = np.random.default_rng(seed)
    return MemmModel(STATES, {s: MaxentModel(np.exp(rng.normal(0, 1, NUM_FEATURES))) for s in STATES})


class TestMemmTraining:

    def test_transition_frequencies(self):
        """Test that per-state GIS reproduces 3:1 transitions out of A on x"""
        blocks = [block(f"s{i}", 1, "A", "x", gold) for i, gold in enumerate("AAAB")]
        blocks += [block(f"t{i}", 1, "B", "y", gold) for i, gold in enumerate("AB")]
        model, traces = train_memm(blocks, TrainOptions(max_iters=5000, tol=1e-7))
        assert model.transition_distribution(blocks[0])["A"] == pytest.approx(0.75, abs=1e-5)
        assert model.transition_distribution(blocks[4])["A"] == pytest.approx(0.5, abs=1e-5)
        assert set(traces) == {"A", "B"}
        assert max(state_residuals(model, blocks).values()) <= 1e-7

    def test_unseen_features_keep_weight_one(self):
        """Test that a feature a state never saw contributes nothing at decode time"""
        blocks = [block(f"s{i}", 1, "A", "x", gold) for i, gold in enumerate("AAAB")]
        model, _ = train_memm(blocks, TrainOptions(max_iters=5000, tol=1e-7))
        assert model.transition_distribution(blocks[0])["A"] == pytest.approx(0.75, abs=1e-5)
        dist = model.transition_distribution(block("d", 1, "A", "y"))
        assert dist["A"] == pytest.approx(0.5)

    def test_unseen_state_raises(self):
        """Test decoding from a state that had no training blocks"""
        blocks = [block("s", 1, "A", "x", "A"), block("t", 1, "A", "x", "B")]
        model, _ = train_memm(blocks, TrainOptions(max_iters=100, tol=1e-6))
        with pytest.raises(MaxentHmmError):
            model.transition_distribution(block("d", 1, "B", "x"))

    def test_needs_gold(self):
        """Test that unlabeled blocks cannot be trained on"""
        with pytest.raises(MaxentHmmError):
            train_memm([block("s", 1, "A", "x")], TrainOptions())

    def test_empty(self):
        """Test that no blocks is an error"""
        with pytest.raises(MaxentHmmError):
            train_memm([], TrainOptions())


class TestMemmDecoding:

    def test_uniform_model(self):
        """Test that all weights 1 give every length-3 path 1/8"""
        model = MemmModel(STATES, {s: MaxentModel.uniform(NUM_FEATURES) for s in STATES})
        seq = lattice("u", ["x", "y", "x"])
        paths = path_probabilities(model, seq)
        assert len(paths) == 8
        assert all(p == pytest.approx(1 / 8) for p in paths.values())

    @pytest.mark.parametrize("seed", range(5))
    def test_decode_matches_enumeration(self, seed):
        """Test max-product decoding against brute force"""
        model = random_memm(seed)
        seq = lattice("r", ["x", "y", "y", "x"])
        paths = path_probabilities(model, seq)
        best = max(paths.values())
        decoded = memm_sequence_posterior(model, seq)
        assert decoded.probability == pytest.approx(best, rel=1e-12)
        assert paths[tuple(decoded.path)] == pytest.approx(best, rel=1e-12)
        assert decoded.total == pytest.approx(1.0, abs=1e-12)

    def test_path_length_checked(self):
        """Test that a path must cover every position"""
        with pytest.raises(MaxentHmmError):
            sequence_probability(random_memm(0), lattice("r", ["x", "y"]), ["A"])

    def test_positions_must_be_contiguous(self):
        """Test that a sequence may not skip a position"""
        with pytest.raises(MaxentHmmError):
            SeqSequence("bad", (block("bad", 1, "A", "x"), block("bad", 3, "A", "x")))


class TestSequenceNetworks:

    @pytest.mark.parametrize("seed", range(3))
    def test_memm_network(self, seed):
        """Test that the memm network emits each path with its MEMM probability"""
        model = random_memm(seed)
        seq = lattice("m", ["x", "y", "x"])
        net = build_sequence_network("memm", memm_network_spec(model, seq))
        assert validate(net) == []
        for path, p in path_probabilities(model, seq).items():
            assert string_probability(net, list(path)) == pytest.approx(p, abs=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_crf_network(self, seed):
        """Test that first-passage path probabilities are the normalized global weights"""
        rng = np.random.default_rng(seed)
        weights = MaxentModel(np.exp(rng.normal(0, 1, NUM_FEATURES)))
        seq = lattice("c", ["y", "x", "y"])
        net = build_sequence_network("crf", crf_network_spec(weights, seq))
        assert validate(net) == []
        dist = crf_path_distribution(net, list(STATES), seq.length)
        raw = crf_path_weights(weights, seq)
        z = sum(raw.values())
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-10)
        for path, w in raw.items():
            assert dist[path] == pytest.approx(w / z, abs=1e-10)

    def test_crf_differs_from_memm(self):
        """Test that global normalization is not the per-step product"""
        rng = np.random.default_rng(9)
        weights = MaxentModel(np.exp(rng.normal(0, 2, NUM_FEATURES)))
        seq = lattice("c", ["x", "y"])
        raw = crf_path_weights(weights, seq)
        z = sum(raw.values())
        memm = MemmModel(STATES, {s: weights for s in STATES})
        local = path_probabilities(memm, seq)
        assert max(abs(raw[p] / z - local[p]) for p in raw) > 1e-6

    def test_unknown_kind(self):
        """Test that an unknown network kind raises"""
        with pytest.raises(MaxentHmmError):
            build_sequence_network("hmm2", None)


class TestMaxentHmm:

    @pytest.fixture
    def spec(self):
        s_block = EventBlock("S", None, (Candidate("a>T", (0,)), Candidate("b>end", (1,))))
        t_block = EventBlock("T", None, (Candidate("a>S", (0,)), Candidate("b>end", (1,))))
        return MaxentHmmSpec("S", (
            StateCloudSpec("S", MaxentModel(np.array([2.0, 1.0])), s_block, (("a", "T"), ("b", None))),
            StateCloudSpec("T", MaxentModel(np.array([1.0, 1.0])), t_block, (("a", "S"), ("b", None))),
        ))

    def test_string_probabilities(self, spec):
        """Test strings produced by alternating between the two state clouds"""
        net = build_sequence_network("maxent-hmm", spec)
        assert validate(net) == []
        assert string_probability(net, ["b"]) == pytest.approx(1 / 3, abs=1e-12)
        assert string_probability(net, ["a", "b"]) == pytest.approx(1 / 3, abs=1e-12)
        assert string_probability(net, ["a", "a", "b"]) == pytest.approx(1 / 9, abs=1e-12)

    def test_size_within_bound(self, spec):
        """Test the state count against f# times transitions"""
        net = build_sequence_network("maxent-hmm", spec)
        report = size_report(spec, net)
        assert report["states"] == 7
        assert report["states"] <= report["bound"]
        assert report["transitions"] == 4

    def test_unknown_next_state(self):
        """Test that a transition to a state without a cloud raises"""
        s_block = EventBlock("S", None, (Candidate("a", (0,)),))
        spec = MaxentHmmSpec("S", (StateCloudSpec("S", MaxentModel(np.array([0.5])), s_block, (("a", "Q"),)),))
        with pytest.raises(MaxentHmmError):
            build_sequence_network("maxent-hmm", spec)

    def test_spec_type_checked(self):
        """Test that a maxent-hmm network refuses a conditional spec"""
        with pytest.raises(MaxentHmmError):
            build_sequence_network("maxent-hmm", crf_network_spec(MaxentModel.uniform(NUM_FEATURES),
                                                                  lattice("c", ["x"])))
