#!/usr/bin/env python3
"""
maxent-hmm command line
Train, evaluate and transform maxent models; reports are `key value` lines on stdout
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from . import __version__
from .config import SynthSpec, TrainOptions, configure_logging
from .errors import MaxentHmmError
from .services import ModelService, write_report_lines

logger = logging.getLogger(__name__)


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=None, help="Maximum number of iterations")
    p.add_argument("--tol", type=float, default=None, help="Convergence tolerance")
    p.add_argument("--seed", type=int, default=0, help="Initialization seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxent-hmm", description="Maxent models trained as HMMs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a plain maxent model")
    p.add_argument("--method", choices=["gis", "fb"], default="gis")
    p.add_argument("--data", required=True, help="Labeled events file")
    p.add_argument("--out", required=True, help="Model file to write")
    p.add_argument("--rotate", action="store_true", help="Rotate chain positions every iteration (fb)")
    _add_train_options(p)

    p = sub.add_parser("eval", help="Score a plain or hidden model on labeled events")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--report", choices=["ll", "acc", "both"], default="both")

    p = sub.add_parser("check", help="Max relative constraint residual of a model on labeled events")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("transform", help="Rewrite a model into an equivalent one")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--op", choices=["subunit", "group", "strip"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--data-out", default=None, help="Write the rewritten events here")

    p = sub.add_parser("compare", help="Max total variation between two models")
    p.add_argument("--model", action="append", required=True, help="Give exactly twice")
    p.add_argument("--data", required=True)

    p = sub.add_parser("hv-train", help="Train a hidden-variable maxent model")
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", type=int, required=True, help="Number of hidden values")
    p.add_argument("--method", choices=["fb", "em"], default="fb")
    p.add_argument("--out", required=True)
    p.add_argument("--no-rotate", action="store_true", help="Keep chain positions fixed (fb)")
    _add_train_options(p)

    p = sub.add_parser("synth", help="Generate seeded synthetic events and their truth model")
    p.add_argument("--gen", choices=["plain", "hv"], default="plain")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=200)
    p.add_argument("--outputs", type=int, default=2)
    p.add_argument("--hidden", type=int, default=2)
    p.add_argument("--templates", default="3,4,5", help="Comma-separated template sizes")
    p.add_argument("--out", required=True)
    p.add_argument("--truth", required=True)

    p = sub.add_parser("memm-train", help="Train a MEMM from a sequence file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    _add_train_options(p)

    p = sub.add_parser("memm-decode", help="Decode every sequence of a sequence file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    return parser


def _train_options(args: argparse.Namespace) -> TrainOptions:
    values: Dict[str, Any] = {"seed": getattr(args, "seed", 0)}
    if getattr(args, "iters", None) is not None:
        values["max_iters"] = args.iters
    if getattr(args, "tol", None) is not None:
        values["tol"] = args.tol
    return TrainOptions(**values)


def _emit(lines: List[str]) -> None:
    for line in lines:
        print(line)


def _trace_lines(report: Dict[str, Any]) -> List[str]:
    return [f"iteration {i} {ll:.10f}" for i, ll in enumerate(report.get("trace", []))]


def run(args: argparse.Namespace) -> None:
    service = ModelService(_train_options(args))
    cmd = args.command
    if cmd == "train":
        report = service.train(args.data, args.out, args.method, rotate=args.rotate)
        _emit(_trace_lines(report) + write_report_lines(report))
    elif cmd == "eval":
        _emit(write_report_lines(service.evaluate(args.model, args.data, args.report)))
    elif cmd == "check":
        _emit(write_report_lines(service.check(args.model, args.data)))
    elif cmd == "transform":
        _emit(write_report_lines(service.transform(args.model, args.data, args.op, args.out, args.data_out)))
    elif cmd == "compare":
        if len(args.model) != 2:
            raise MaxentHmmError(f"compare needs exactly two --model arguments, got {len(args.model)}")
        _emit(write_report_lines(service.compare(args.model[0], args.model[1], args.data)))
    elif cmd == "hv-train":
        report = service.hv_train(args.data, args.out, args.hidden, args.method, rotate=not args.no_rotate)
        _emit(_trace_lines(report) + write_report_lines(report))
    elif cmd == "synth":
        try:
            sizes = [int(s) for s in args.templates.split(",") if s.strip()]
        except ValueError:
            raise MaxentHmmError(f"bad --templates {args.templates!r}") from None
        spec = SynthSpec(
            kind="hidden" if args.gen == "hv" else "plain",
            n_outputs=args.outputs,
            n_hidden=args.hidden,
            template_sizes=sizes,
            seed=args.seed,
            n_events=args.events,
            events_path=args.out,
            truth_path=args.truth,
        )
        _emit(write_report_lines(service.synth(spec)))
    elif cmd == "memm-train":
        _emit(write_report_lines(service.memm_train(args.data, args.out)))
    elif cmd == "memm-decode":
        for result in service.memm_decode(args.model, args.data):
            _emit(write_report_lines(result))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        run(args)
    except (MaxentHmmError, ValidationError, OSError) as e:
        print(f"error {' '.join(str(e).split())}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
