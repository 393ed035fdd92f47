"""
Two-stage networks for hidden-variable models

The selector cloud leaves start and picks hidden value z; its failures return
to start. A completed selector chain enters the stage entry E_z, from which the
emitter cloud of z picks the output; emitter failures return to E_z. The joint
probability of (z, x) is then P_selector(z|h) * P_emitter_z(x|z,h).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..hmm.engine import expected_counts
from ..hmm.network import HmmNetwork, NetworkBuilder, StateId
from ..maxent.models import Distribution, MaxentModel
from ..maxent.transforms import GroupedModel, make_grouped, strip_anti_indicators
from ..reduction.layout import ChainLayout, CloudExit, add_cloud
from .models import HiddenDataset, HiddenMaxentModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GroupedHidden:
    """Both stages of a hidden model rewritten into exact sub-unit groups, with their rewritten data"""

    template: HiddenMaxentModel
    data: HiddenDataset
    selector: GroupedModel
    emitter: Optional[GroupedModel]

    @property
    def offset(self) -> int:
        return self.selector.model.num_features

    @property
    def params(self) -> np.ndarray:
        parts = [self.selector.model.weights]
        if self.emitter is not None:
            parts.append(self.emitter.model.weights)
        return np.concatenate(parts)

    def split(self, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return params[: self.offset], params[self.offset:]

    def layouts(self, iteration: int = 0) -> Tuple[ChainLayout, Optional[ChainLayout]]:
        sel = ChainLayout.from_partition(self.selector.partition).rotated(iteration)
        if self.emitter is None:
            return sel, None
        return sel, ChainLayout.from_partition(self.emitter.partition).rotated(iteration)

    def to_model(self, params: np.ndarray) -> HiddenMaxentModel:
        """Read a parameter table back as a hidden model over the original features"""
        sel_w, em_w = self.split(np.asarray(params, dtype=float))
        selector, _ = strip_anti_indicators(
            MaxentModel(sel_w, self.selector.model.names), self.selector.data, self.selector.partition
        )
        stacked = None
        if self.emitter is not None:
            em, _ = strip_anti_indicators(
                MaxentModel(em_w, self.emitter.model.names), self.emitter.data, self.emitter.partition
            )
            stacked = em.weights
        return self.template.with_weights(selector.weights, stacked)


def group_hidden(model: HiddenMaxentModel, data: HiddenDataset) -> GroupedHidden:
    """Partition, complete and sub-unit scale the selector and the stacked emitters"""
    data.check_model(model)
    selector = make_grouped(model.selector, data.selector_data)
    emitter = None
    if not model.is_deterministic:
        emitter = make_grouped(model.stacked_emitter(), data.stacked_data)
    return GroupedHidden(model, data, selector, emitter)


@dataclass(frozen=True, eq=False)
class HiddenNetwork:
    net: HmmNetwork
    hidden_values: Tuple[str, ...]
    entry_arcs: Tuple[int, ...]
    entries: Tuple[Optional[StateId], ...]


def build_hidden_network(grouped: GroupedHidden, event: int, iteration: int = 0) -> HiddenNetwork:
    """Network of one event; entry_arcs[z] is the arc that commits to hidden value z"""
    sel_layout, em_layout = grouped.layouts(iteration)
    values = grouped.template.hidden_values
    builder = NetworkBuilder(grouped.params)
    start = builder.add_state("start")
    end = builder.add_state("end")
    sel_block = grouped.selector.data.events[event]

    if grouped.emitter is None:
        outputs = grouped.template.deterministic_outputs
        exits = [CloudExit(end, outputs[z]) for z in range(len(values))]
        entries: Tuple[Optional[StateId], ...] = tuple(None for _ in values)
    else:
        entries = tuple(builder.add_state(f"E[{hv}]") for hv in values)
        exits = [CloudExit(entries[z]) for z in range(len(values))]
    finals = add_cloud(builder, start, sel_block.candidates, sel_layout, exits, name="sel:")

    if grouped.emitter is not None:
        n = len(grouped.data)
        for z, hv in enumerate(values):
            em_block = grouped.emitter.data.events[z * n + event]
            add_cloud(builder, entries[z], em_block.candidates, em_layout,
                      [CloudExit(end, c.label) for c in em_block.candidates],
                      offset=grouped.offset, name=f"em[{hv}]:")
    return HiddenNetwork(builder.build(start, end), values, tuple(finals), entries)


def network_posterior(hnet: HiddenNetwork, observed: str) -> Distribution:
    """P(z | x) read off as the expected traversals of the arcs committing to each z"""
    counts = expected_counts(hnet.net, observed)
    return Distribution({hv: float(counts.arc_counts[a]) for hv, a in zip(hnet.hidden_values, hnet.entry_arcs)})
