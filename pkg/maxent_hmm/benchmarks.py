"""
Paired benchmark runs on seeded synthetic data

gis_vs_fb: the same data trained by GIS and by forward-backward on the chain networks
rotation_runs: forward-backward with and without rotating chain positions
hidden_vs_plain: held-out accuracy and KL to the generator, hidden-variable vs plain maxent
"""

import logging
from typing import Any, Dict, Optional, Tuple

from .config import SynthSpec, TrainOptions
from .formats.synth import synth_generate
from .hidden.inference import marginal_rows
from .hidden.models import HiddenMaxentModel, bind_dataset, cross_hidden
from .hidden.training import initial_hidden_model, train_hv_em_gis, train_hv_fb
from .maxent.gis import expand_model, prune_unobserved, train_gis
from .maxent.models import Dataset, MaxentModel
from .maxent.scoring import accuracy, max_total_variation, mean_kl_divergence, row_probabilities
from .reduction.pipeline import train_maxent_via_hmm

logger = logging.getLogger(__name__)


def fit_gis(data: Dataset, opts: TrainOptions) -> Tuple[MaxentModel, int]:
    """GIS on the observed features; unobserved ids come back with weight 1"""
    pruned, remap = prune_unobserved(data)
    model, trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned, opts)
    return expand_model(model, remap, data.num_features), trace.iterations


def gis_vs_fb(data: Dataset, opts: TrainOptions, rotate: bool = True) -> Dict[str, Any]:
    pruned, remap = prune_unobserved(data)
    gis_model, gis_trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned, opts)
    fb_model, report = train_maxent_via_hmm(pruned, opts, rotate=rotate, reference=gis_model)
    logger.info(f"gis {gis_trace.iterations} iterations, fb {report.iterations}; max_tv {report.max_tv:.3e}")
    return {
        "gis_iterations": gis_trace.iterations,
        "fb_iterations": report.iterations,
        "gis_converged": gis_trace.converged,
        "fb_converged": report.converged,
        "fb_residual": report.residual,
        "max_tv": report.max_tv,
        "gis_model": expand_model(gis_model, remap, data.num_features),
        "fb_model": expand_model(fb_model, remap, data.num_features),
    }


def rotation_runs(data: Dataset, opts: TrainOptions) -> Dict[str, Any]:
    """Iterations each schedule needs to reach opts.tol, and how far apart the two fits end up"""
    pruned, _ = prune_unobserved(data)
    fixed, fixed_report = train_maxent_via_hmm(pruned, opts, rotate=False)
    rotated, rotated_report = train_maxent_via_hmm(pruned, opts, rotate=True)
    return {
        "groups": rotated_report.num_groups,
        "fixed_iterations": fixed_report.iterations,
        "rotated_iterations": rotated_report.iterations,
        "fixed_converged": fixed_report.converged,
        "rotated_converged": rotated_report.converged,
        "max_tv": max_total_variation(fixed, rotated, pruned),
    }


def split(data: Dataset, n_train: int) -> Tuple[Dataset, Dataset]:
    return (Dataset(data.events[:n_train], data.num_features),
            Dataset(data.events[n_train:], data.num_features))


def hidden_vs_plain(seed: int, n_train: int = 2000, n_test: int = 1000, n_hidden: int = 2,
                    n_outputs: int = 3, opts: Optional[TrainOptions] = None,
                    method: str = "fb") -> Dict[str, Any]:
    """
    Sample one hidden-factor truth, train both model kinds on the same
    training events and score them on held-out events
    """
    opts = opts or TrainOptions(max_iters=300, tol=1e-7, seed=seed)
    result = synth_generate(SynthSpec(kind="hidden", n_outputs=n_outputs, n_hidden=n_hidden,
                                      seed=seed, n_events=n_train + n_test))
    truth: HiddenMaxentModel = result.truth
    train, test = split(result.dataset, n_train)

    plain, _ = fit_gis(train, TrainOptions(max_iters=opts.max_iters, tol=1e-5, seed=seed))
    hdata, tables = cross_hidden(train, n_hidden)
    init = initial_hidden_model(hdata, seed, tables=tables)
    if method == "fb":
        hidden, _ = train_hv_fb(hdata, opts, init)
    else:
        hidden, _ = train_hv_em_gis(hdata, opts, init)

    truth_rows = marginal_rows(truth, bind_dataset(truth, test))
    plain_rows = row_probabilities(plain, test)
    hidden_rows = marginal_rows(hidden, bind_dataset(hidden, test))
    report = {
        "seed": seed,
        "plain_accuracy": accuracy(plain_rows, test),
        "hidden_accuracy": accuracy(hidden_rows, test),
        "plain_kl": mean_kl_divergence(truth_rows, plain_rows, test.compiled),
        "hidden_kl": mean_kl_divergence(truth_rows, hidden_rows, test.compiled),
        "emitter_kl": result.emitter_kl,
    }
    logger.info(
        f"seed {seed}: accuracy plain {report['plain_accuracy']:.4f} hidden {report['hidden_accuracy']:.4f}; "
        f"KL plain {report['plain_kl']:.4f} hidden {report['hidden_kl']:.4f}"
    )
    return report
