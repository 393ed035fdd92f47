#!/usr/bin/env python3
"""
Unit tests for maxent scoring, counts and GIS training
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import frequency_events

from maxent_hmm.config import TrainOptions
from maxent_hmm.errors import EmptyCandidatesError, FeatureRangeError, MaxentHmmError, UnobservedFeaturesError
from maxent_hmm.formats.synth import random_dataset
from maxent_hmm.maxent.gis import LOG_WEIGHT_BOUND, expand_model, gis_iterate, prune_unobserved, train_gis
from maxent_hmm.maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from maxent_hmm.maxent.scoring import (
    constraint_residual,
    evaluate,
    expected_counts,
    f_sharp,
    log_likelihood,
    observed_counts,
    row_probabilities,
)


class TestEvaluate:

    def test_fixture_f1(self, f1_model, f1_block):
        """Test the worked two-candidate example"""
        dist = evaluate(f1_model, f1_block)
        assert dist["L"] == pytest.approx(2 / 3, abs=1e-12)
        assert dist["M"] == pytest.approx(1 / 3, abs=1e-12)

    def test_identical_active_sets(self):
        """Test that candidates with the same indicators split evenly"""
        model = MaxentModel(np.array([0.3, 4.0]))
        block = EventBlock("e", None, (Candidate("L", (0, 1)), Candidate("M", (0, 1))))
        dist = evaluate(model, block)
        assert dist["L"] == pytest.approx(0.5)
        assert dist["M"] == pytest.approx(0.5)

    def test_single_candidate(self):
        """Test that a lone candidate gets all the mass"""
        model = MaxentModel(np.array([0.01, 100.0]))
        dist = evaluate(model, EventBlock("e", None, (Candidate("L", (0, 1)),)))
        assert dist["L"] == 1.0

    def test_extreme_weights_stay_finite(self):
        """Test log-space evaluation with products far outside float range"""
        model = MaxentModel(np.array([1e-200, 1e-200, 1e200]))
        block = EventBlock("e", None, (Candidate("L", (0, 1)), Candidate("M", (2,))))
        dist = evaluate(model, block)
        assert dist["M"] == pytest.approx(1.0)
        assert math.isfinite(dist["L"])

    def test_feature_out_of_range(self, f1_block):
        """Test that an id beyond the model raises"""
        with pytest.raises(FeatureRangeError):
            evaluate(MaxentModel(np.ones(3)), f1_block)

    def test_empty_candidates(self):
        """Test that a block without candidates raises"""
        with pytest.raises(EmptyCandidatesError):
            evaluate(MaxentModel(np.ones(1)), EventBlock("e", None, ()))

    def test_non_positive_weight_rejected(self):
        """Test that weights must be strictly positive"""
        with pytest.raises(MaxentHmmError):
            MaxentModel(np.array([1.0, 0.0]))

    def test_duplicate_ids_rejected(self):
        """Test that a candidate cannot list an id twice"""
        with pytest.raises(MaxentHmmError):
            Candidate.of("L", [3, 3])

    @pytest.mark.parametrize("seed", range(5))
    def test_distributions_sum_to_one(self, seed):
        """Test normalization on random data"""
        data, truth = random_dataset(seed, n_outputs=4, n_features=10, n_events=20)
        for ev in data.events:
            assert evaluate(truth, ev).total() == pytest.approx(1.0, abs=1e-12)


class TestLikelihoodAndCounts:

    def test_log_likelihood_f1(self, f1_model, f1_dataset):
        """Test ln(2/3) on the single F1 event"""
        assert log_likelihood(f1_model, f1_dataset) == pytest.approx(-0.405465, abs=1e-6)

    def test_log_likelihood_identical_sets(self):
        """Test ln(0.5) when both candidates look the same"""
        data = Dataset((EventBlock("e", "L", (Candidate("L", (0,)), Candidate("M", (0,)))),), 1)
        assert log_likelihood(MaxentModel(np.array([7.0])), data) == pytest.approx(math.log(0.5))

    def test_log_likelihood_empty(self):
        """Test that an empty dataset has log-likelihood 0"""
        assert log_likelihood(MaxentModel(np.ones(2)), Dataset((), 2)) == 0.0

    def test_observed_counts(self, frequency_dataset):
        """Test counting indicators on true candidates"""
        observed = observed_counts(frequency_dataset)
        assert observed.tolist() == [3.0, 1.0]

    def test_observed_counts_unseen_and_always(self):
        """Test a feature never on the truth and one always on it"""
        cands = (Candidate("L", (0, 2)), Candidate("M", (1, 2)))
        data = Dataset(tuple(EventBlock(f"e{i}", "L", cands) for i in range(5)), 3)
        observed = observed_counts(data)
        assert observed[1] == 0.0
        assert observed[2] == 5.0

    def test_expected_counts_f1(self, f1_model, f1_dataset):
        """Test that an L-only feature is expected P(L) times"""
        assert expected_counts(f1_model, f1_dataset)[0] == pytest.approx(2 / 3)

    def test_expected_counts_uniform(self, frequency_dataset):
        """Test N/2 under the uniform model"""
        expected = expected_counts(MaxentModel.uniform(2), frequency_dataset)
        assert expected[0] == pytest.approx(2.0)

    def test_expected_counts_shared_feature(self):
        """Test that a feature on every candidate contributes 1 per event"""
        data = Dataset((EventBlock("e", "L", (Candidate("L", (0, 1)), Candidate("M", (0,)))),), 2)
        assert expected_counts(MaxentModel(np.array([0.3, 2.0])), data)[0] == pytest.approx(1.0)

    def test_f_sharp(self):
        """Test f# as the largest active-set size"""
        three = Dataset((EventBlock("e", None, (Candidate("L", (0, 1, 2)), Candidate("M", (3, 4, 5)))),), 6)
        assert f_sharp(three) == 3
        empty = Dataset((EventBlock("e", None, (Candidate("L"), Candidate("M"))),), 0)
        assert f_sharp(empty) == 0
        mixed = Dataset((EventBlock("e", None, (Candidate("L", tuple(range(7))), Candidate("M", (0, 1)))),), 7)
        assert f_sharp(mixed) == 7


class TestGis:

    def test_empirical_frequency(self, frequency_dataset, tight_opts):
        """Test that GIS reproduces 3:1 label frequencies"""
        model, trace = train_gis(MaxentModel.uniform(2), frequency_dataset, tight_opts)
        dist = evaluate(model, frequency_dataset.events[0])
        assert dist["L"] == pytest.approx(0.75, abs=1e-6)
        assert dist["M"] == pytest.approx(0.25, abs=1e-6)
        assert trace.converged

    def test_fixed_point_needs_no_updates(self):
        """Test that data already matched by the init stops at iteration 0"""
        data = frequency_events({"L": 2, "M": 2})
        init = MaxentModel(np.array([1.5, 1.5]))
        model, trace = train_gis(init, data, TrainOptions(max_iters=10, tol=1e-9))
        assert trace.iterations == 0
        assert np.array_equal(model.weights, init.weights)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_dataset_converges(self, seed):
        """Test convergence and a monotone likelihood on seeded random data"""
        data, _ = random_dataset(seed, n_outputs=3, n_features=8, n_events=40)
        pruned, _ = prune_unobserved(data)
        model, trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned,
                                 TrainOptions(max_iters=5000, tol=1e-4))
        assert constraint_residual(model, pruned) <= 1e-4
        assert trace.is_monotone()

    @pytest.mark.parametrize("seed", [2, 3, 6, 8])
    def test_generated_data_has_finite_optimum(self, seed):
        """Test that GIS reaches a tight residual on generated data with a finite optimum"""
        data, _ = random_dataset(100 + seed, n_outputs=2 + seed % 2, n_features=6 + seed % 5,
                                 n_events=20 + seed)
        pruned, _ = prune_unobserved(data)
        model, trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned,
                                 TrainOptions(max_iters=50000, tol=1e-5))
        assert trace.converged
        assert constraint_residual(model, pruned) <= 1e-4
        assert np.all(np.isfinite(model.log_weights))

    def test_negligible_soft_mass_stays_finite(self):
        """Test that soft targets far below the largest count leave the weights finite and bounded"""
        data = frequency_events({"L": 3, "M": 1})
        targets = np.tile([1.0, 1e-300], len(data))
        result = gis_iterate(np.zeros(2), data, targets, np.ones(data.compiled.n_rows),
                             f_sharp(data), 200, 1e-12)
        assert np.all(np.isfinite(result.log_weights))
        assert np.all(np.abs(result.log_weights) <= LOG_WEIGHT_BOUND)
        MaxentModel(np.exp(result.log_weights))

    def test_unobserved_features_rejected(self):
        """Test that unpruned data with an unseen feature raises with the ids"""
        data = Dataset((EventBlock("e", "L", (Candidate("L", (0,)), Candidate("M", (1,)))),), 2)
        with pytest.raises(UnobservedFeaturesError) as exc:
            train_gis(MaxentModel.uniform(2), data, TrainOptions())
        assert exc.value.features == [1]

    def test_empty_dataset_rejected(self):
        """Test that training needs events"""
        with pytest.raises(MaxentHmmError):
            train_gis(MaxentModel.uniform(1), Dataset((), 1), TrainOptions())

    def test_invalid_options(self):
        """Test pydantic validation of training options"""
        with pytest.raises(ValidationError):
            TrainOptions(max_iters=0)
        with pytest.raises(ValidationError):
            TrainOptions(tol=0)


class TestPruning:

    def test_identity_when_all_observed(self, frequency_dataset):
        """Test that nothing is pruned when every feature is observed"""
        pruned, remap = prune_unobserved(frequency_dataset)
        assert pruned is frequency_dataset
        assert remap == {0: 0, 1: 1}

    def test_one_of_five_unobserved(self):
        """Test that an unobserved id is skipped by the remap"""
        cands = (Candidate("L", (0, 1, 3, 4)), Candidate("M", (2,)))
        data = Dataset((EventBlock("e", "L", cands),), 5)
        pruned, remap = prune_unobserved(data)
        assert pruned.num_features == 4
        assert remap == {0: 0, 1: 1, 3: 2, 4: 3}

    def test_all_unobserved(self):
        """Test the degenerate case with nothing left"""
        data = Dataset((EventBlock("e", "L", (Candidate("L"), Candidate("M", (0,)))),), 1)
        pruned, remap = prune_unobserved(data)
        assert pruned.num_features == 0
        assert remap == {}

    def test_expand_restores_id_space(self):
        """Test that pruned ids come back with weight 1"""
        model = expand_model(MaxentModel(np.array([2.0, 3.0])), {0: 0, 2: 1}, 3)
        assert model.weights.tolist() == [2.0, 1.0, 3.0]

    def test_row_probabilities_match_evaluate(self):
        """Test the vectorised path against per-event evaluation"""
        data, truth = random_dataset(7, n_events=15)
        rows = row_probabilities(truth, data)
        flat = [evaluate(truth, ev)[c.label] for ev in data.events for c in ev.candidates]
        assert np.allclose(rows, flat, atol=1e-12)
