"""
Model Service - Business logic layer for the maxent-hmm command line
Coordinates file formats, trainers and evaluators; every method returns a plain report dict
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config import SynthSpec, TrainOptions
from ..errors import MaxentHmmError
from ..formats.events import parse_events, write_events
from ..formats.model_file import AnyModel, read_any, write_model
from ..formats.seq_file import parse_sequences
from ..formats.synth import synth_generate
from ..hidden.inference import hv_log_likelihood, marginal_rows
from ..hidden.models import HiddenMaxentModel, bind_dataset, cross_hidden
from ..hidden.training import initial_hidden_model, train_hv_em_gis, train_hv_fb
from ..maxent.gis import expand_model, prune_unobserved, train_gis
from ..maxent.models import Dataset, MaxentModel
from ..maxent.scoring import (
    accuracy,
    constraint_residual,
    log_likelihood,
    max_row_total_variation,
    row_probabilities,
)
from ..maxent.transforms import (
    complete_groups,
    make_grouped,
    partition_exclusive,
    partition_from_names,
    strip_anti_indicators,
)
from ..reduction.pipeline import train_maxent_via_hmm
from ..sequence.memm import memm_sequence_posterior, state_residuals, train_memm
from ..sequence.models import MemmModel

logger = logging.getLogger(__name__)

TRAIN_METHODS = ("gis", "fb")
HIDDEN_METHODS = ("fb", "em")
TRANSFORM_OPS = ("subunit", "group", "strip")
REPORTS = ("ll", "acc", "both")


class ModelService:
    """
    Service layer that turns file paths and options into trained models and reports
    Keeps the command line free of any modelling logic
    """

    def __init__(self, opts: Optional[TrainOptions] = None):
        self.opts = opts or TrainOptions()
        logger.info("✅ ModelService initialized")

    # Plain maxent models

    def train(self, data_path: str, out_path: str, method: str = "gis", rotate: bool = False) -> Dict[str, Any]:
        """
        Train a plain maxent model and write it

        Args:
            data_path: labeled events file
            out_path: model file to write
            method: "gis" or "fb" (forward-backward on the reduced HMM)
            rotate: cycle chain positions between forward-backward iterations

        Returns:
            Dict with the fit summary and the per-iteration log-likelihoods

        Raises:
            MaxentHmmError: on malformed input or an impossible fit
        """
        if method not in TRAIN_METHODS:
            raise MaxentHmmError(f"unknown training method {method!r}; expected one of {TRAIN_METHODS}")
        try:
            data = parse_events(data_path)
            pruned, remap = prune_unobserved(data)
            if pruned.num_features == 0:
                raise MaxentHmmError("no feature fires on a true candidate; nothing to train")
            if method == "gis":
                model, trace = train_gis(MaxentModel.uniform(pruned.num_features), pruned, self.opts)
                residual = constraint_residual(model, pruned)
            else:
                model, hmm_report = train_maxent_via_hmm(pruned, self.opts, rotate=rotate)
                trace = hmm_report.trace
                residual = hmm_report.residual
            full = expand_model(model, remap, data.num_features)
            write_model(full, out_path)
            logger.info(f"✅ {method} model written to {out_path}")
            return {
                "method": method,
                "events": len(data),
                "features": data.num_features,
                "trained_features": pruned.num_features,
                "iterations": trace.iterations,
                "converged": trace.converged,
                "log_likelihood": log_likelihood(full, data),
                "residual": residual,
                "trace": list(trace.log_likelihoods),
            }
        except MaxentHmmError as e:
            logger.error(f"❌ Training failed: {e}")
            raise

    def evaluate(self, model_path: str, data_path: str, report: str = "both") -> Dict[str, Any]:
        """Log-likelihood and/or accuracy of a plain or hidden model on labeled events"""
        if report not in REPORTS:
            raise MaxentHmmError(f"unknown report {report!r}; expected one of {REPORTS}")
        try:
            model = read_any(model_path)
            data = parse_events(data_path)
            rows, scored = self._rows(model, data)
            result: Dict[str, Any] = {"events": len(data)}
            if report in ("ll", "both"):
                if isinstance(model, HiddenMaxentModel):
                    result["log_likelihood"] = hv_log_likelihood(model, bind_dataset(model, data))
                else:
                    result["log_likelihood"] = log_likelihood(model, data)
            if report in ("acc", "both"):
                result["accuracy"] = accuracy(rows, scored)
            return result
        except MaxentHmmError as e:
            logger.error(f"❌ Evaluation failed: {e}")
            raise

    def check(self, model_path: str, data_path: str) -> Dict[str, Any]:
        """Max relative gap between expected and observed indicator counts"""
        try:
            model = self._plain(read_any(model_path), model_path)
            data = parse_events(data_path)
            return {"events": len(data), "residual": constraint_residual(model, data)}
        except MaxentHmmError as e:
            logger.error(f"❌ Check failed: {e}")
            raise

    def transform(self, model_path: str, data_path: str, op: str, out_path: str,
                  data_out: Optional[str] = None) -> Dict[str, Any]:
        """
        Rewrite a model into an equivalent one

        group: complete exclusive sets into groups with anti-indicators
        subunit: group if needed, then scale every group below 1
        strip: fold anti-indicators back into their groups and drop them
        """
        if op not in TRANSFORM_OPS:
            raise MaxentHmmError(f"unknown transform {op!r}; expected one of {TRANSFORM_OPS}")
        try:
            model = self._plain(read_any(model_path), model_path)
            data = parse_events(data_path)
            if op == "group":
                new_model, new_data, part = complete_groups(model, data, partition_exclusive(data))
            elif op == "subunit":
                named = partition_from_names(model)
                grouped = make_grouped(model, data, partition=named if named.anti_ids else None)
                new_model, new_data, part = grouped.model, grouped.data, grouped.partition
            else:
                part = partition_from_names(model)
                new_model, new_data = strip_anti_indicators(model, data, part)

            before = row_probabilities(model, data)
            after = row_probabilities(new_model, new_data)
            write_model(new_model, out_path)
            if data_out:
                write_events(new_data, data_out)
            logger.info(f"✅ {op} transform written to {out_path}")
            return {
                "op": op,
                "features_before": model.num_features,
                "features_after": new_model.num_features,
                "groups": len(part.groups),
                "anti_indicators": len(part.anti_ids),
                "max_weight": float(new_model.weights.max()) if new_model.num_features else 0.0,
                "max_tv": max_row_total_variation(before, after, data.compiled),
            }
        except MaxentHmmError as e:
            logger.error(f"❌ Transform failed: {e}")
            raise

    def compare(self, model_a: str, model_b: str, data_path: str) -> Dict[str, Any]:
        """Largest total variation distance between two models' conditionals over the data's histories"""
        try:
            data = parse_events(data_path)
            pa, scored = self._rows(read_any(model_a), data)
            pb, _ = self._rows(read_any(model_b), data)
            return {"events": len(data), "max_tv": max_row_total_variation(pa, pb, scored.compiled)}
        except MaxentHmmError as e:
            logger.error(f"❌ Compare failed: {e}")
            raise

    # Hidden-variable models

    def hv_train(self, data_path: str, out_path: str, hidden: int, method: str = "fb",
                 rotate: bool = True) -> Dict[str, Any]:
        """Cross the events' features with hidden values, train, and write the hidden model"""
        if method not in HIDDEN_METHODS:
            raise MaxentHmmError(f"unknown hidden training method {method!r}; expected one of {HIDDEN_METHODS}")
        try:
            data = parse_events(data_path)
            pruned, remap = prune_unobserved(data)
            hdata, pruned_tables = cross_hidden(pruned, hidden)
            tables = pruned_tables.through(remap)
            init = initial_hidden_model(hdata, self.opts.seed, tables=tables)
            if method == "fb":
                model, trace = train_hv_fb(hdata, self.opts, init, rotate=rotate)
            else:
                model, trace = train_hv_em_gis(hdata, self.opts, init)
            write_model(model, out_path)
            logger.info(f"✅ hidden model ({hidden} values) written to {out_path}")
            return {
                "method": f"hv-{method}",
                "events": len(data),
                "hidden": hidden,
                "history_features": tables.n_history,
                "emitter_features": tables.n_emit,
                "iterations": trace.iterations,
                "converged": trace.converged,
                "log_likelihood": hv_log_likelihood(model, hdata),
                "trace": list(trace.log_likelihoods),
            }
        except MaxentHmmError as e:
            logger.error(f"❌ Hidden-variable training failed: {e}")
            raise

    def synth(self, spec: SynthSpec) -> Dict[str, Any]:
        try:
            result = synth_generate(spec)
        except MaxentHmmError as e:
            logger.error(f"❌ Synthetic generation failed: {e}")
            raise
        report: Dict[str, Any] = {
            "kind": spec.kind,
            "seed": spec.seed,
            "events": len(result.dataset),
            "features": result.dataset.num_features,
        }
        if spec.kind == "hidden":
            report["emitter_kl"] = result.emitter_kl
        return report

    # MEMMs

    def memm_train(self, data_path: str, out_path: str) -> Dict[str, Any]:
        try:
            sequences = parse_sequences(data_path)
            blocks = [b for seq in sequences for b in seq.blocks]
            model, traces = train_memm(blocks, self.opts)
            write_model(model, out_path)
            residuals = state_residuals(model, blocks)
            logger.info(f"✅ MEMM over {len(model.states)} states written to {out_path}")
            return {
                "sequences": len(sequences),
                "blocks": len(blocks),
                "states": len(model.states),
                "converged": all(t.converged for t in traces.values()),
                "max_residual": max(residuals.values(), default=0.0),
                "residuals": dict(sorted(residuals.items())),
            }
        except MaxentHmmError as e:
            logger.error(f"❌ MEMM training failed: {e}")
            raise

    def memm_decode(self, model_path: str, data_path: str) -> List[Dict[str, Any]]:
        """Best state path per sequence, with its probability and the total over all paths"""
        try:
            model = read_any(model_path)
            if not isinstance(model, MemmModel):
                raise MaxentHmmError(f"{model_path} is not a MEMM model file")
            results = []
            for seq in parse_sequences(data_path):
                decoded = memm_sequence_posterior(model, seq)
                gold = seq.gold_path
                results.append({
                    "sequence": seq.sequence_id,
                    "path": decoded.path,
                    "probability": decoded.probability,
                    "total": decoded.total,
                    "correct": None if gold is None else int(np.sum([a == b for a, b in zip(gold, decoded.path)])),
                })
            return results
        except MaxentHmmError as e:
            logger.error(f"❌ MEMM decoding failed: {e}")
            raise

    # Helpers

    @staticmethod
    def _plain(model: AnyModel, path: str) -> MaxentModel:
        if not isinstance(model, MaxentModel):
            raise MaxentHmmError(f"{path} is not a plain maxent model file")
        return model

    @staticmethod
    def _rows(model: AnyModel, data: Dataset) -> Tuple[np.ndarray, Dataset]:
        """Per-candidate P(x|h), plus the dataset whose compiled rows they follow"""
        if isinstance(model, HiddenMaxentModel):
            hdata = bind_dataset(model, data)
            return marginal_rows(model, hdata), hdata.output_data
        if isinstance(model, MemmModel):
            raise MaxentHmmError("MEMM models score sequence files; use memm-decode")
        return row_probabilities(model, data), data


def write_report_lines(report: Dict[str, Any]) -> List[str]:
    """Flatten a report into `key value` lines; floats use %e, nested dicts become key.sub"""
    lines = []
    for key, value in report.items():
        if key == "trace":
            continue
        if isinstance(value, dict):
            lines.extend(f"{key}.{k} {_fmt(v)}" for k, v in value.items())
        else:
            lines.append(f"{key} {_fmt(value)}")
    return lines


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):e}"
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    if value is None:
        return "-"
    return str(value)

