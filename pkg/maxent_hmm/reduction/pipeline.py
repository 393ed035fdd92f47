"""
Maxent training by forward-backward on the equivalent chain HMM
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np

from ..config import TrainOptions
from ..errors import MaxentHmmError, UnobservedFeaturesError
from ..hmm.training import train_fb
from ..maxent.models import Dataset, MaxentModel
from ..maxent.scoring import (
    expected_counts,
    max_total_variation,
    observed_counts,
    relative_residual,
    truth_targets,
)
from ..maxent.transforms import make_grouped, rescale_groups, strip_anti_indicators
from ..trace import TrainTrace
from .closed_form import ChainBatch
from .layout import ChainLayout, build_training_network

logger = logging.getLogger(__name__)

STABILIZE_GROUP_MAX = 0.9
INIT_LOW, INIT_HIGH = 0.5, 1.0

Engine = Literal["closed_form", "generic"]


@dataclass
class HmmTrainReport:
    log_likelihood: float
    iterations: int
    converged: bool
    residual: float
    num_groups: int
    num_anti: int
    trace: TrainTrace
    max_tv: Optional[float] = None


def train_maxent_via_hmm(data: Dataset, opts: TrainOptions, rotate: bool = True,
                         reference: Optional[MaxentModel] = None,
                         engine: Engine = "closed_form") -> Tuple[MaxentModel, HmmTrainReport]:
    """
    Group the features, complete the groups with anti-indicators, scale below 1,
    run forward-backward on the chain networks and read the weights back

    Args:
        data: labeled events, pruned of unobserved features
        opts: iteration limit, residual tolerance and initialization seed
        rotate: cycle which group sits last in the chains, one step per iteration
        reference: when given, the report carries the max total variation against it
        engine: "closed_form" for the batched E-step, "generic" for linear solves per segment

    Raises:
        UnobservedFeaturesError: if a feature never fires on a true candidate
    """
    if len(data) == 0:
        raise MaxentHmmError("cannot train on an empty dataset")
    observed = observed_counts(data)
    unobserved = np.flatnonzero(observed <= 0)
    if unobserved.size:
        raise UnobservedFeaturesError(unobserved.tolist())

    rng = np.random.default_rng(opts.seed)
    init = MaxentModel(rng.uniform(INIT_LOW, INIT_HIGH, size=data.num_features))
    grouped = make_grouped(init, data)
    part = grouped.partition
    layout = ChainLayout.from_partition(part)
    g = data.num_features
    logger.info(
        f"training via HMM: {len(part.groups)} groups, {len(part.anti_ids)} anti-indicators, "
        f"engine={engine}, rotate={rotate}"
    )

    def residual_fn(params: np.ndarray) -> float:
        expected = expected_counts(MaxentModel(params), grouped.data)
        return relative_residual(expected[:g], observed)

    def stabilize(params: np.ndarray) -> np.ndarray:
        return rescale_groups(params, part, STABILIZE_GROUP_MAX)

    def conditional_tv(a: np.ndarray, b: np.ndarray) -> float:
        return max_total_variation(MaxentModel(a), MaxentModel(b), grouped.data)

    if engine == "closed_form":
        batch = ChainBatch.from_grouped(grouped.data, part)
        targets = truth_targets(grouped.data)

        def estep(iteration: int, params: np.ndarray):
            order = layout.rotated(iteration).group_order
            return batch.counts(params, order, targets)

        params, trace = train_fb(grouped.model.weights, opts, estep=estep, rotate=rotate,
                                 post_update=stabilize, residual_fn=residual_fn, distance=conditional_tv)
    elif engine == "generic":
        names = grouped.model.names

        def build(iteration: int, params: np.ndarray):
            model = MaxentModel(params, names)
            return build_training_network(model, grouped.data, layout, iteration).pairs()

        params, trace = train_fb(grouped.model.weights, opts, build=build, rotate=rotate,
                                 post_update=stabilize, residual_fn=residual_fn, distance=conditional_tv)
    else:
        raise MaxentHmmError(f"unknown engine {engine!r}")

    trained = MaxentModel(params, grouped.model.names)
    model, _ = strip_anti_indicators(trained, grouped.data, part)
    report = HmmTrainReport(
        log_likelihood=trace.final_log_likelihood,
        iterations=trace.iterations,
        converged=trace.converged,
        residual=residual_fn(params),
        num_groups=len(part.groups),
        num_anti=len(part.anti_ids),
        trace=trace,
    )
    if reference is not None:
        report.max_tv = max_total_variation(model, reference, data)
    return model, report
