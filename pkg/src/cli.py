"""Command line: run, reproduce, dump-cascade, list-presets, show-binding, serve."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from src.config.base import OUT_ENV_VAR, configure_ledger
from src.config.exception_handler import EXIT_OK, CouplingException
from src.config.logging_setup import configure_logging
from src.config.settings import parse_model_param, load_config
from src.entities.binding.cascade import build_zeta_cascade, dump_cascade
from src.entities.binding.forces import build_binding
from src.entities.system.catalog import build_model, chain
from src.entities.system.models import ModelId
from src.services.harness import RunOutcome, run
from src.services.presets import PRESETS, get_preset, reproduce

logger = logging.getLogger(__name__)


def _out_dir(args: argparse.Namespace) -> str | None:
    return os.environ.get(OUT_ENV_VAR) or args.out


def _print_outcome(outcome: RunOutcome) -> None:
    for check in outcome.report.acceptance:
        value = "" if check.value is None else f" value={check.value:.6g}"
        threshold = "" if check.threshold is None else f" threshold={check.threshold:.6g}"
        print(f"{'PASS' if check.passed else 'FAIL'} {check.name}{value}{threshold}")
    if outcome.report.blow_up:
        print(f"BLOW-UP {outcome.report.blow_up['message']}")
    for kind, path in sorted(outcome.files.items()):
        print(f"{kind}: {path}")


def cmd_run(args: argparse.Namespace) -> int:
    config = load_config(args.config).with_overrides(seed=args.seed, out=_out_dir(args), jobs=args.jobs)
    outcome = run(config)
    _print_outcome(outcome)
    return outcome.exit_code


def cmd_reproduce(args: argparse.Namespace) -> int:
    preset = get_preset(args.experiment)
    if preset.banner is not None:
        print(preset.banner(), end="")
    outcome = reproduce(args.experiment, out=_out_dir(args), seed=args.seed, jobs=args.jobs)
    _print_outcome(outcome)
    return outcome.exit_code


def cmd_dump_cascade(args: argparse.Namespace) -> int:
    print(dump_cascade(build_zeta_cascade(chain(args.a_squared, truncation=args.truncation))), end="")
    return EXIT_OK


def cmd_list_presets(args: argparse.Namespace) -> int:
    width = max(len(name) for name in PRESETS)
    for preset in PRESETS.values():
        print(f"{preset.name:<{width}}  {preset.summary}")
    return EXIT_OK


def cmd_show_binding(args: argparse.Namespace) -> int:
    params = {}
    for item in args.param:
        key, _, value = item.partition("=")
        params[key.strip()] = parse_model_param(value)
    model = build_model(args.model, **params)
    binding = build_binding(model)
    print(f"model: {model.id} (dim {model.dim}, noise on {list(model.noise_dims)})")
    print(f"binding: {binding.name}")
    print(binding.formula)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    configure_ledger(_out_dir(args) or "runs")
    uvicorn.run("src.app:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asymcouple", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help="override the ensemble seed")
        p.add_argument("--out", default=None, help=f"output directory ({OUT_ENV_VAR} takes precedence)")
        p.add_argument("--jobs", type=int, default=None, help="worker threads for the ensemble")

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True, help="path to the experiment file")
    add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reproduce", help="run a pinned preset and check its acceptance predicates")
    p.add_argument("experiment", help="preset id, see list-presets")
    add_run_flags(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("dump-cascade", help="print k*, zeta_l, Q_l and G for the chain")
    p.add_argument("a_squared", type=float)
    p.add_argument("--truncation", type=int, default=None)
    p.set_defaults(func=cmd_dump_cascade)

    p = sub.add_parser("list-presets", help="list reproducible experiments")
    p.set_defaults(func=cmd_list_presets)

    p = sub.add_parser("show-binding", help="print the binding drift G of a model")
    p.add_argument("model", choices=[m.value for m in ModelId])
    p.add_argument("--param", action="append", default=[], help="model parameter key=value")
    p.set_defaults(func=cmd_show_binding)

    p = sub.add_parser("serve", help="serve the run ledger read-only over HTTP")
    p.add_argument("--out", default=None, help="directory holding ledger.db")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except CouplingException as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        logger.debug("details: %s", exc.details)
        return exc.exit_code
