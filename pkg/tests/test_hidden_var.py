#!/usr/bin/env python3
"""
Unit tests for hidden-variable maxent models: evaluation, posteriors, the
two-stage networks and both trainers
"""

import numpy as np
import pytest

from conftest import frequency_events

from maxent_hmm.config import SynthSpec, TrainOptions
from maxent_hmm.errors import MaxentHmmError
from maxent_hmm.formats.synth import random_dataset, synth_generate
from maxent_hmm.hidden import (
    HiddenDataset,
    HiddenEventBlock,
    HiddenMaxentModel,
    HiddenTables,
    bind,
    bind_dataset,
    build_hidden_network,
    cross_hidden,
    group_hidden,
    history_features,
    hv_evaluate,
    hv_log_likelihood,
    hv_posterior,
    hv_predict,
    initial_hidden_model,
    marginal_rows,
    network_posterior,
    posteriors,
    train_hv_em_gis,
    train_hv_fb,
)
from maxent_hmm.hmm.engine import output_distribution
from maxent_hmm.hmm.network import validate
from maxent_hmm.maxent.gis import prune_unobserved, train_gis
from maxent_hmm.maxent.models import Candidate, Dataset, EventBlock, MaxentModel
from maxent_hmm.maxent.scoring import evaluate, row_probabilities
from maxent_hmm.maxent.transforms import Group, GroupKind, scale_group

VALUES = ("z0", "z1")
OUTPUTS = (Candidate("A", (0,)), Candidate("B", (1,)))


def toy_block(event_id="e", true_label="A"):
    """Selector z0 fires feature 0, z1 feature 1; both emitters see A -> 0 and B -> 1"""
    return HiddenEventBlock(event_id, true_label,
                            (Candidate("z0", (0,)), Candidate("z1", (1,))),
                            (OUTPUTS, OUTPUTS))


def toy_model(selector=(1.0, 3.0), em0=(3.0, 1.0), em1=(1.0, 1.0)):
    return HiddenMaxentModel(VALUES, MaxentModel(np.array(selector)),
                             (MaxentModel(np.array(em0)), MaxentModel(np.array(em1))))


def toy_dataset(labels=("A", "A", "A", "B")):
    events = tuple(toy_block(f"e{i}", y) for i, y in enumerate(labels))
    return HiddenDataset(events, VALUES, 2, 2)


def two_history_dataset():
    """History features 0 and 1; label L fires 2 and M fires 3. P(L|0) = 3/4, P(L|1) = 1/3"""
    first = (Candidate("L", (0, 2)), Candidate("M", (0, 3)))
    second = (Candidate("L", (1, 2)), Candidate("M", (1, 3)))
    events = [EventBlock(f"a{i}", y, first) for i, y in enumerate("LLLM")]
    events += [EventBlock(f"b{i}", y, second) for i, y in enumerate("LMM")]
    return Dataset(tuple(events), 4)


def swap_hidden(model, n_history):
    """The same model with the roles of the two hidden values exchanged"""
    sel = model.selector.weights
    swapped = np.concatenate([sel[n_history:2 * n_history], sel[:n_history], sel[[2 * n_history + 1, 2 * n_history]]])
    return HiddenMaxentModel(model.hidden_values, MaxentModel(swapped), model.emitters[::-1], None, model.tables)


class TestEvaluation:

    def test_mixture(self):
        """Test P(A) = 0.25 * 0.75 + 0.75 * 0.5"""
        dist = hv_evaluate(toy_model(), toy_block())
        assert dist["A"] == pytest.approx(0.5625, abs=1e-12)
        assert dist.total() == pytest.approx(1.0, abs=1e-12)

    def test_posterior(self):
        """Test Bayes' rule for P(z | A)"""
        post = hv_posterior(toy_model(), toy_block(), "A")
        assert post["z0"] == pytest.approx(1 / 3, abs=1e-12)
        assert post["z1"] == pytest.approx(2 / 3, abs=1e-12)

    def test_posterior_unknown_label(self):
        """Test that a label outside the candidates raises"""
        with pytest.raises(MaxentHmmError):
            hv_posterior(toy_model(), toy_block(), "Q")

    def test_predict_ties_to_first_label(self):
        """Test that equal outputs pick the first candidate"""
        model = toy_model(em0=(1.0, 1.0))
        pred = hv_predict(model, toy_block())
        assert pred.label == "A"
        assert set(pred.posteriors) == {"A", "B"}

    def test_single_hidden_value_is_plain_maxent(self):
        """Test K = 1: the emitter alone decides"""
        block = HiddenEventBlock("e", "A", (Candidate("z0", (0,)),), (OUTPUTS,))
        model = HiddenMaxentModel(("z0",), MaxentModel(np.array([5.0])), (MaxentModel(np.array([3.0, 1.0])),))
        assert hv_evaluate(model, block)["A"] == pytest.approx(0.75)

    def test_deterministic_outputs(self):
        """Test a selector-only model where each value names its output"""
        model = HiddenMaxentModel(VALUES, MaxentModel(np.array([1.0, 3.0])), (), ("B", "A"))
        assert hv_evaluate(model, toy_block())["A"] == pytest.approx(0.75)

    def test_vectorised_matches_per_event(self):
        """Test marginal_rows and posteriors against the per-event functions"""
        data = toy_dataset()
        model = toy_model()
        rows = marginal_rows(model, data)
        assert rows[:2].tolist() == pytest.approx([0.5625, 0.4375])
        resp, ll = posteriors(model, data)
        assert resp[0, 0] == pytest.approx(1 / 3)
        assert ll == pytest.approx(3 * np.log(0.5625) + np.log(0.4375))
        assert hv_log_likelihood(model, data) == pytest.approx(ll)

    def test_model_data_mismatch(self):
        """Test that hidden values must agree"""
        model = HiddenMaxentModel(("a", "b"), MaxentModel(np.ones(2)),
                                  (MaxentModel(np.ones(2)), MaxentModel(np.ones(2))))
        with pytest.raises(MaxentHmmError):
            marginal_rows(model, toy_dataset())

    def test_emitter_count_checked(self):
        """Test that a model needs one emitter per hidden value"""
        with pytest.raises(MaxentHmmError):
            HiddenMaxentModel(VALUES, MaxentModel(np.ones(2)), (MaxentModel(np.ones(2)),))


class TestNetwork:

    def test_output_matches_evaluation(self):
        """Test the two-stage network's output distribution"""
        grouped = group_hidden(toy_model(), toy_dataset())
        hnet = build_hidden_network(grouped, 0)
        assert validate(hnet.net) == []
        dist = output_distribution(hnet.net)
        assert dist["A"] == pytest.approx(0.5625, abs=1e-10)

    def test_posterior_from_arc_counts(self):
        """Test P(z | x) read from the committing arcs"""
        grouped = group_hidden(toy_model(), toy_dataset())
        hnet = build_hidden_network(grouped, 0)
        post = network_posterior(hnet, "A")
        assert post["z0"] == pytest.approx(1 / 3, abs=1e-10)
        post_b = network_posterior(hnet, "B")
        assert post_b["z0"] == pytest.approx(hv_posterior(toy_model(), toy_block(), "B")["z0"], abs=1e-10)

    @pytest.mark.parametrize("iteration", [0, 1, 2])
    def test_rotation_keeps_distribution(self, iteration):
        """Test rotated layouts on both stages"""
        grouped = group_hidden(toy_model(), toy_dataset())
        dist = output_distribution(build_hidden_network(grouped, 0, iteration).net)
        assert dist["B"] == pytest.approx(0.4375, abs=1e-10)

    def test_deterministic_network(self):
        """Test that a selector-only network emits on the selector chains"""
        model = HiddenMaxentModel(VALUES, MaxentModel(np.array([1.0, 3.0])), (), ("B", "A"))
        hnet = build_hidden_network(group_hidden(model, toy_dataset()), 0)
        assert output_distribution(hnet.net)["A"] == pytest.approx(0.75, abs=1e-10)
        assert all(e is None for e in hnet.entries)

    def test_to_model_round_trip(self):
        """Test that the grouped parameter table reads back as the same model"""
        model = toy_model()
        data = toy_dataset()
        grouped = group_hidden(model, data)
        back = grouped.to_model(grouped.params)
        assert np.allclose(marginal_rows(back, data), marginal_rows(model, data), atol=1e-12)


class TestBinding:

    def test_history_features(self):
        """Test that a feature on every candidate is history and others are not"""
        cands = (Candidate("A", (0, 2)), Candidate("B", (1, 2)))
        data = frequency_events({"L": 1})
        assert history_features(data).tolist() == []
        mixed = Dataset((EventBlock("e", "A", cands),), 3)
        assert history_features(mixed).tolist() == [2]

    def test_bind_ids(self):
        """Test selector ids z * n_history + j and the bias at K * n_history + z"""
        tables = HiddenTables({5: 0}, {0: 0, 1: 1})
        block = EventBlock("e", "A", (Candidate("A", (0, 5)), Candidate("B", (1, 5))))
        hb = bind(tables, VALUES, block)
        assert [c.active for c in hb.selector] == [(0, 2), (1, 3)]
        assert [c.active for c in hb.emitters[1]] == [(0,), (1,)]

    def test_cross_hidden_sizes(self):
        """Test selector and emitter feature counts after crossing"""
        data = frequency_events({"L": 2, "M": 1})
        hdata, tables = cross_hidden(data, 3)
        assert tables.n_history == 0
        assert hdata.n_selector == 3
        assert hdata.n_emit == 2
        assert hdata.hidden_values == ("z0", "z1", "z2")

    def test_cross_hidden_needs_values(self):
        """Test that zero hidden values is refused"""
        with pytest.raises(MaxentHmmError):
            cross_hidden(frequency_events({"L": 1}), 0)

    def test_bind_dataset_needs_tables(self):
        """Test that models without extraction tables cannot bind new data"""
        with pytest.raises(MaxentHmmError):
            bind_dataset(toy_model(), frequency_events({"L": 1}))

    def test_bind_dataset_reuses_tables(self):
        """Test binding fresh events through a model's own tables"""
        data = frequency_events({"L": 2, "M": 1})
        hdata, tables = cross_hidden(data, 2)
        model = initial_hidden_model(hdata, 0, tables=tables)
        rebound = bind_dataset(model, data)
        assert np.allclose(marginal_rows(model, rebound), marginal_rows(model, hdata))

    def test_tables_through_pruning(self):
        """Test that re-keyed tables bind the unpruned events like the pruned ones"""
        cands = (Candidate("A", (1, 3)), Candidate("B", (2, 3)), Candidate("C", (0, 3)))
        data = Dataset((EventBlock("e0", "A", cands), EventBlock("e1", "B", cands)), 4)
        pruned, remap = prune_unobserved(data)
        assert pruned.num_features == 3
        hdata, pruned_tables = cross_hidden(pruned, 2)
        tables = pruned_tables.through(remap)
        assert tables.selector_map == {3: 0}
        assert tables.emitter_map == {1: 0, 2: 1}
        model = initial_hidden_model(hdata, 1, tables=tables)
        assert np.allclose(marginal_rows(model, bind_dataset(model, data)), marginal_rows(model, hdata))


class TestTraining:

    def test_fb_monotone(self):
        """Test that forward-backward never lowers the likelihood"""
        data = toy_dataset(("A", "A", "B", "A", "B", "A"))
        model, trace = train_hv_fb(data, TrainOptions(max_iters=200, tol=1e-10), toy_model())
        assert trace.is_monotone()
        assert trace.log_likelihoods[-1] >= trace.log_likelihoods[0]
        assert hv_log_likelihood(model, data) == pytest.approx(trace.log_likelihoods[-1], abs=1e-6)

    def test_em_monotone(self):
        """Test that EM with a GIS M-step never lowers the likelihood"""
        data = toy_dataset(("A", "A", "B", "A", "B", "A"))
        _, trace = train_hv_em_gis(data, TrainOptions(max_iters=200, tol=1e-10), toy_model())
        assert trace.is_monotone()

    def test_deterministic_fb_and_em_agree(self):
        """Test both trainers on a selector-only model: 3 of 4 events say L"""
        data = frequency_events({"L": 3, "M": 1})
        hdata, _ = cross_hidden(data, 2)
        init = initial_hidden_model(hdata, 0, deterministic_outputs=("L", "M"))
        opts = TrainOptions(max_iters=5000, tol=1e-12)
        fb, _ = train_hv_fb(hdata, opts, init)
        em, _ = train_hv_em_gis(hdata, opts, init)
        assert marginal_rows(fb, hdata)[0] == pytest.approx(0.75, abs=1e-4)
        assert marginal_rows(em, hdata)[0] == pytest.approx(0.75, abs=1e-4)

    def test_one_hidden_value_matches_plain(self):
        """Test K = 1 training against plain GIS"""
        data, _ = random_dataset(4, n_outputs=3, n_features=6, n_events=30)
        pruned, _ = prune_unobserved(data)
        plain, _ = train_gis(MaxentModel.uniform(pruned.num_features), pruned,
                             TrainOptions(max_iters=20000, tol=1e-6))
        hdata, tables = cross_hidden(pruned, 1)
        hidden, _ = train_hv_fb(hdata, TrainOptions(max_iters=20000, tol=1e-11),
                                initial_hidden_model(hdata, 0, tables=tables))
        diff = np.abs(marginal_rows(hidden, hdata) - row_probabilities(plain, pruned))
        assert diff.max() <= 1e-3

    def test_unlabeled_rejected(self):
        """Test that training needs true labels"""
        data = HiddenDataset((toy_block("e", None),), VALUES, 2, 2)
        with pytest.raises(MaxentHmmError):
            train_hv_fb(data, TrainOptions(), toy_model())

    def test_initial_model_jitter(self):
        """Test seeded emitter jitter in [0.9, 1.1] and a uniform selector"""
        model = initial_hidden_model(toy_dataset(), seed=3)
        assert np.all(model.selector.weights == 1.0)
        for em in model.emitters:
            assert np.all((em.weights >= 0.9) & (em.weights <= 1.1))
        again = initial_hidden_model(toy_dataset(), seed=3)
        assert np.array_equal(again.stacked_emitter().weights, model.stacked_emitter().weights)

    def test_em_on_generated_hidden_data(self):
        """Test EM on hidden-factor data with tiny posterior mass keeps every weight finite"""
        data = synth_generate(SynthSpec(kind="hidden", seed=0, n_events=300, n_hidden=2, n_outputs=3)).dataset
        pruned, _ = prune_unobserved(data)
        hdata, tables = cross_hidden(pruned, 2)
        model, trace = train_hv_em_gis(hdata, TrainOptions(max_iters=30, tol=1e-9),
                                       initial_hidden_model(hdata, 0, tables=tables))
        assert np.all(np.isfinite(model.selector.log_weights))
        assert np.all(np.isfinite(model.stacked_emitter().log_weights))
        assert np.isfinite(hv_log_likelihood(model, hdata))
        assert trace.log_likelihoods[-1] >= trace.log_likelihoods[0]

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_fb_and_em_agree_with_emitters(self, seed):
        """Test that both trainers reach the best likelihood on data a two-value mixture fits exactly"""
        hdata, tables = cross_hidden(two_history_dataset(), 2)
        init = initial_hidden_model(hdata, seed, tables=tables)
        opts = TrainOptions(max_iters=20000, tol=1e-12)
        fb, _ = train_hv_fb(hdata, opts, init)
        em, _ = train_hv_em_gis(hdata, opts, init)
        best = 3 * np.log(0.75) + np.log(0.25) + np.log(1 / 3) + 2 * np.log(2 / 3)
        assert hv_log_likelihood(fb, hdata) == pytest.approx(hv_log_likelihood(em, hdata), abs=1e-3)
        assert hv_log_likelihood(em, hdata) == pytest.approx(best, abs=1e-3)
        assert np.abs(marginal_rows(fb, hdata) - marginal_rows(em, hdata)).max() <= 1e-3


class TestSymmetry:

    @pytest.mark.parametrize("method", ["fb", "em"])
    def test_swapped_hidden_values_same_trajectory(self, method):
        """Test that exchanging the hidden values at init leaves the likelihood trajectory unchanged"""
        hdata, tables = cross_hidden(two_history_dataset(), 2)
        rng = np.random.default_rng(5)
        init = initial_hidden_model(hdata, 5, tables=tables)
        init = init.with_weights(rng.uniform(0.5, 2.0, size=hdata.n_selector))
        swapped = swap_hidden(init, tables.n_history)
        assert np.allclose(marginal_rows(swapped, hdata), marginal_rows(init, hdata), atol=1e-12)
        trainer = train_hv_fb if method == "fb" else train_hv_em_gis
        opts = TrainOptions(max_iters=30, tol=1e-300)
        a, trace_a = trainer(hdata, opts, init)
        b, trace_b = trainer(hdata, opts, swapped)
        assert len(trace_a.log_likelihoods) == len(trace_b.log_likelihoods)
        assert np.allclose(trace_a.log_likelihoods, trace_b.log_likelihoods, rtol=0, atol=1e-10)
        assert np.allclose(marginal_rows(a, hdata), marginal_rows(b, hdata), rtol=0, atol=1e-10)

    @pytest.mark.parametrize("method", ["fb", "em"])
    def test_identical_emitters_stay_symmetric(self, method):
        """Test that identical emitters under a uniform selector are a fixed point"""
        hdata, tables = cross_hidden(two_history_dataset(), 2)
        emitter = MaxentModel(np.array([1.3, 0.7]))
        init = HiddenMaxentModel(hdata.hidden_values, MaxentModel(np.ones(hdata.n_selector)),
                                 (emitter, emitter), None, tables)
        trainer = train_hv_fb if method == "fb" else train_hv_em_gis
        model, _ = trainer(hdata, TrainOptions(max_iters=50, tol=1e-300), init)
        for ev in hdata.events:
            sel = evaluate(model.selector, ev.selector_block())
            assert sel["z0"] == pytest.approx(0.5, abs=1e-10)
            assert sel["z1"] == pytest.approx(0.5, abs=1e-10)
            first = evaluate(model.emitters[0], ev.emitter_block(0))
            second = evaluate(model.emitters[1], ev.emitter_block(1))
            for label in ("L", "M"):
                assert first[label] == pytest.approx(second[label], abs=1e-10)

    def test_scaling_exact_groups_keeps_distribution(self):
        """Test that scaling an exact group of either stage leaves every event distribution alone"""
        model, data = toy_model(), toy_dataset()
        exact = Group((0, 1), GroupKind.EXACT)
        selector_scaled = HiddenMaxentModel(VALUES, scale_group(model.selector, exact, 3.7), model.emitters)
        emitter_scaled = HiddenMaxentModel(
            VALUES, model.selector, (model.emitters[0], scale_group(model.emitters[1], exact, 0.2)))
        for ev in data.events:
            base = hv_evaluate(model, ev)
            for scaled in (selector_scaled, emitter_scaled):
                dist = hv_evaluate(scaled, ev)
                for label in ("A", "B"):
                    assert dist[label] == pytest.approx(base[label], abs=1e-12)

    def test_scaling_selector_bias_group(self):
        """Test that the per-value bias features of crossed data form a scalable exact group"""
        hdata, tables = cross_hidden(two_history_dataset(), 2)
        model = initial_hidden_model(hdata, 2, tables=tables)
        bias = Group((2 * tables.n_history, 2 * tables.n_history + 1), GroupKind.EXACT)
        scaled = HiddenMaxentModel(model.hidden_values, scale_group(model.selector, bias, 0.05),
                                   model.emitters, None, tables)
        assert np.allclose(marginal_rows(scaled, hdata), marginal_rows(model, hdata), rtol=0, atol=1e-12)
