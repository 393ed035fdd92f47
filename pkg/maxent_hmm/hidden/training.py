"""
Training hidden-variable maxent models

train_hv_fb runs forward-backward on the two-stage networks, with both stages'
expected counts taken in closed form. train_hv_em_gis is classical EM whose
M-step is GIS on posterior-weighted counts; it serves as an independent check.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ..config import TrainOptions
from ..errors import MaxentHmmError
from ..hmm.training import ParamCounts, train_fb
from ..maxent.gis import gis_iterate
from ..maxent.models import MaxentModel
from ..maxent.scoring import f_sharp, truth_targets
from ..maxent.transforms import rescale_groups
from ..reduction.closed_form import ChainBatch
from ..reduction.pipeline import STABILIZE_GROUP_MAX
from ..trace import TrainTrace
from .inference import posteriors
from .models import HiddenDataset, HiddenMaxentModel, HiddenTables
from .network import group_hidden

logger = logging.getLogger(__name__)

JITTER_LOW, JITTER_HIGH = 0.9, 1.1
INNER_GIS_ITERS = 10
INNER_GIS_TOL = 1e-8


def initial_hidden_model(data: HiddenDataset, seed: int = 0,
                         deterministic_outputs: Optional[Sequence[str]] = None,
                         tables: Optional[HiddenTables] = None) -> HiddenMaxentModel:
    """Uniform selector; emitter weights 1 with seeded jitter in [0.9, 1.1] to break symmetry"""
    selector = MaxentModel(np.ones(data.n_selector))
    if deterministic_outputs is not None:
        return HiddenMaxentModel(data.hidden_values, selector, (), tuple(deterministic_outputs), tables)
    rng = np.random.default_rng(seed)
    emitters = tuple(
        MaxentModel(rng.uniform(JITTER_LOW, JITTER_HIGH, size=data.n_emit)) for _ in data.hidden_values
    )
    return HiddenMaxentModel(data.hidden_values, selector, emitters, None, tables)


def _check_trainable(data: HiddenDataset) -> None:
    if len(data) == 0:
        raise MaxentHmmError("cannot train on an empty dataset")
    if not data.is_labeled:
        raise MaxentHmmError("hidden-variable training needs labeled events")


def train_hv_fb(data: HiddenDataset, opts: TrainOptions,
                init: Optional[HiddenMaxentModel] = None,
                rotate: bool = True) -> Tuple[HiddenMaxentModel, TrainTrace]:
    """Forward-backward on the two-stage networks; stops on likelihood delta below opts.tol"""
    _check_trainable(data)
    model = init if init is not None else initial_hidden_model(data, opts.seed)
    grouped = group_hidden(model, data)
    n, k = len(data), data.n_hidden
    sel_batch = ChainBatch.from_grouped(grouped.selector.data, grouped.selector.partition)
    em_batch = None
    if grouped.emitter is not None:
        em_batch = ChainBatch.from_grouped(grouped.emitter.data, grouped.emitter.partition)
        em_onehot = truth_targets(grouped.emitter.data)
        em_truth = grouped.emitter.data.compiled.truth_rows
        em_events = grouped.emitter.data.compiled.event_index
    else:
        labels = [ev.true_label for ev in data.events]
        allowed = np.array([[out == y for out in model.deterministic_outputs] for y in labels])
        log_allowed = np.where(allowed, 0.0, -np.inf)
    logger.info(f"hidden-variable forward-backward: {n} events, {k} hidden values")

    def estep(iteration: int, params: np.ndarray):
        sel_p, em_p = grouped.split(params)
        sel_layout, em_layout = grouped.layouts(iteration)
        log_sel = sel_batch.row_log_probabilities(sel_p, sel_layout.group_order).reshape(n, k)
        if em_batch is not None:
            log_em = em_batch.row_log_probabilities(em_p, em_layout.group_order)
            log_joint = log_sel + log_em[em_truth].reshape(k, n).T
        else:
            log_joint = log_sel + log_allowed
        log_marginal = logsumexp(log_joint, axis=1)
        resp = np.exp(log_joint - log_marginal[:, None])

        counts, _ = sel_batch.counts(sel_p, sel_layout.group_order, resp.reshape(-1))
        if em_batch is not None:
            mass = resp.T.reshape(-1)
            em_counts, _ = em_batch.counts(em_p, em_layout.group_order,
                                           em_onehot * mass[em_events], stage_mass=mass)
            counts = ParamCounts(np.concatenate([counts.direct, em_counts.direct]),
                                 np.concatenate([counts.complement, em_counts.complement]))
        return counts, float(log_marginal.sum())

    def stabilize(params: np.ndarray) -> np.ndarray:
        sel_p, em_p = grouped.split(params)
        parts = [rescale_groups(sel_p, grouped.selector.partition, STABILIZE_GROUP_MAX)]
        if grouped.emitter is not None:
            parts.append(rescale_groups(em_p, grouped.emitter.partition, STABILIZE_GROUP_MAX))
        return np.concatenate(parts)

    params, trace = train_fb(grouped.params, opts, estep=estep, rotate=rotate,
                             post_update=stabilize, method="hv-fb")
    return grouped.to_model(params), trace


def train_hv_em_gis(data: HiddenDataset, opts: TrainOptions,
                    init: Optional[HiddenMaxentModel] = None,
                    inner_iters: int = INNER_GIS_ITERS) -> Tuple[HiddenMaxentModel, TrainTrace]:
    """EM with a GIS M-step on posterior-weighted counts for the selector and the stacked emitters"""
    _check_trainable(data)
    model = init if init is not None else initial_hidden_model(data, opts.seed)
    sel_data = data.selector_data
    sel_fsharp = f_sharp(sel_data)
    train_emitters = not model.is_deterministic and data.n_emit > 0
    if train_emitters:
        stacked = data.stacked_data
        em_fsharp = f_sharp(stacked)
        em_onehot = truth_targets(stacked)
        em_events = stacked.compiled.event_index
        train_emitters = em_fsharp > 0
    ones = np.ones(sel_data.compiled.n_rows)
    logger.info(f"hidden-variable EM/GIS: {len(data)} events, {data.n_hidden} hidden values")

    trace = TrainTrace("hv-em")
    previous = None
    for it in range(opts.max_iters + 1):
        resp, log_likelihood = posteriors(model, data)
        if opts.record_trace:
            trace.record(log_likelihood)
        trace.iterations = it
        logger.debug(f"hv-em iteration {it}: log-likelihood={log_likelihood:.10f}")
        if previous is not None and abs(log_likelihood - previous) < opts.tol:
            trace.converged = True
            break
        if it == opts.max_iters:
            break
        previous = log_likelihood

        sel_w = np.exp(gis_iterate(model.selector.log_weights, sel_data, resp.reshape(-1), ones,
                                   sel_fsharp, inner_iters, INNER_GIS_TOL).log_weights)
        em_w = None
        if train_emitters:
            mass = resp.T.reshape(-1)[em_events]
            em_w = np.exp(gis_iterate(model.stacked_emitter().log_weights, stacked, em_onehot * mass,
                                      mass, em_fsharp, inner_iters, INNER_GIS_TOL).log_weights)
        model = model.with_weights(sel_w, em_w)

    if trace.converged:
        logger.info(f"hv-em converged after {trace.iterations} iterations")
    else:
        logger.warning(f"hv-em stopped at max_iters={opts.max_iters}")
    return model, trace
