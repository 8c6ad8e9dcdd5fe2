"""Command-line driver.

    qcommit honest --bit 1 --seed 7
    qcommit bind --strategy oracle --trials 1000 --seed 42
    qcommit hide --alice-family rot:z:16
    qcommit epr --alice-family pauli --bob-family rot:x:3 --assumed-bob-family rot:y:3
    qcommit sweep --experiment bind --strategy random --axis m --values 1 2 3 4

Experiment commands print the resolved config on stderr as one canonical
JSON line (identical to the result's ``config_echo``) and write the
result document to ``--output`` or stdout. Exit status is 0 on success,
2 for usage or config errors and 3 when an EPR model exceeds the size cap.
The default seed can be overridden with the ``QCOMMIT_SEED`` environment
variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .adversary import AttackStrategy
from .errors import InvalidArgument, InvalidConfig, ProtocolViolation, ResourceLimit
from .experiments import (
    BINDING,
    CSV,
    EPR_DEMO,
    HIDING,
    STRUCTURED_TEXT,
    SWEEP,
    SWEEP_AXES,
    ExperimentConfig,
    load_config,
    run_experiment,
    serialize_result,
)
from .protocol import BasisPair, ProtocolParams, UnitaryFamily, run_honest

SEED_ENV = "QCOMMIT_SEED"
DEFAULT_TRIALS = 10_000
DEFAULT_FAMILY = "rot:x,y,z:16"
DEFAULT_EPR_ALICE = "pauli"
DEFAULT_EPR_BOB = "rot:x,y,z:4"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3

_KIND_FOR_COMMAND = {"bind": BINDING, "hide": HIDING, "epr": EPR_DEMO, "sweep": SWEEP}
_STRATEGIES = ("honest", "random", "oracle", "epr")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _family(text: str) -> UnitaryFamily:
    try:
        return UnitaryFamily.parse(text)
    except InvalidConfig as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return _seed(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"{SEED_ENV}: {exc}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qcommit", description="Quantum bit commitment simulator and security games.")
    parser.add_argument("--version", action="version", version=f"qcommit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, alice_default=DEFAULT_FAMILY, bob_default=DEFAULT_FAMILY, experiment=True):
        p.add_argument("--seed", type=_seed, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
        p.add_argument("--m", type=_positive_int, default=1, help="parallel qubit instances (default 1)")
        p.add_argument("--basis", choices=BasisPair.NAMED, default="computational")
        p.add_argument("--alice-family", type=_family, default=alice_default,
                       help=f"rot:<axes>:<N>, pauli, haar or list:<path> (default {alice_default})")
        p.add_argument("--bob-family", type=_family, default=bob_default, help=f"(default {bob_default})")
        p.add_argument("--output", "-o", type=Path, default=None, help="write the document here instead of stdout")
        if experiment:
            p.add_argument("--trials", type=_positive_int, default=DEFAULT_TRIALS,
                           help=f"game trials or samples (default {DEFAULT_TRIALS})")
            p.add_argument("--format", choices=(STRUCTURED_TEXT, CSV), default=STRUCTURED_TEXT)
            p.add_argument("--workers", type=_positive_int, default=1,
                           help="threads for trial execution; output does not depend on it")
            p.add_argument("--config", type=Path, default=None,
                           help="read the experiment config from a JSON file instead of flags")
            p.add_argument("--quiet", "-q", action="store_true", help="do not echo the config on stderr")

    p = sub.add_parser("honest", help="run one honest commit/open exchange and print its transcript")
    common(p, experiment=False)
    p.add_argument("--bit", type=int, choices=(0, 1), default=0)

    p = sub.add_parser("bind", help="binding game for a cheating strategy")
    common(p)
    p.add_argument("--strategy", choices=_STRATEGIES, default="honest")
    p.add_argument("--assumed-bob-family", type=_family, default=None,
                   help="Bob family the epr strategy believes in (default: the true one)")

    p = sub.add_parser("hide", help="Bob's distinguishing power before the opening")
    common(p)

    p = sub.add_parser("epr", help="entanglement attack in the register model")
    common(p, alice_default=DEFAULT_EPR_ALICE, bob_default=DEFAULT_EPR_BOB)
    p.add_argument("--assumed-bob-family", type=_family, default=None,
                   help="Bob family used to build V (default: the true one)")

    p = sub.add_parser("sweep", help="repeat an experiment over one parameter axis")
    common(p)
    p.add_argument("--experiment", choices=("bind", "hide", "epr"), default="bind")
    p.add_argument("--strategy", choices=_STRATEGIES, default="honest")
    p.add_argument("--assumed-bob-family", type=_family, default=None)
    p.add_argument("--axis", choices=SWEEP_AXES, default=None)
    p.add_argument("--values", nargs="+", default=None, help="axis values, space separated")
    return parser


def _family_arg(value) -> UnitaryFamily:
    return value if isinstance(value, UnitaryFamily) else UnitaryFamily.parse(value)


def _strategy(args, bob_family: UnitaryFamily) -> AttackStrategy:
    name = getattr(args, "strategy", "honest")
    assumed = getattr(args, "assumed_bob_family", None)
    if args.command == "epr":
        name = "epr"
    if name == "epr":
        return AttackStrategy.epr_model(_family_arg(assumed) if assumed is not None else bob_family)
    if assumed is not None:
        raise UsageError("--assumed-bob-family only applies to the epr strategy")
    return AttackStrategy(name)


def _axis_values(axis: str, values: Sequence[str]):
    if axis in ("m", "trials"):
        return tuple(_positive_int(v) for v in values)
    if axis == "tolerance":
        return tuple(float(v) for v in values)
    if axis == "basis":
        return tuple(values)
    return tuple(UnitaryFamily.parse(v).to_dict() for v in values)


def build_config(args) -> ExperimentConfig:
    """Resolve parsed flags (or a config file) into an ExperimentConfig."""
    kind = _KIND_FOR_COMMAND[args.command]
    if args.config is not None:
        config = load_config(args.config)
        if config.kind != kind:
            raise InvalidConfig(f"config file holds a {config.kind!r} experiment, not {kind!r}")
        return config

    bob_family = _family_arg(args.bob_family)
    params = ProtocolParams(
        basis=BasisPair.named(args.basis),
        alice_family=_family_arg(args.alice_family),
        bob_family=bob_family,
        m=args.m,
    )
    seed = args.seed if args.seed is not None else _default_seed()
    if kind != SWEEP:
        return ExperimentConfig(kind, params, _strategy(args, bob_family), trials=args.trials, master_seed=seed)

    if args.axis is None or not args.values:
        raise UsageError("sweep needs --axis and --values")
    base_kind = _KIND_FOR_COMMAND[args.experiment]
    if base_kind == EPR_DEMO:
        args.strategy = "epr"
    try:
        values = _axis_values(args.axis, args.values)
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise UsageError(f"--values: {exc}") from None
    return ExperimentConfig(
        SWEEP, params, _strategy(args, bob_family), trials=args.trials, master_seed=seed,
        sweep_axis=(args.axis, values), base_kind=base_kind,
    )


def describe_config(config: ExperimentConfig) -> str:
    """Fully resolved config as one canonical JSON line."""
    return config.echo()


def _emit(document: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(document)
        sys.stdout.flush()
    else:
        output.write_text(document)


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> tuple[int, str]:
    """Run one command; returns the exit status and the emitted document."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "honest":
            params = ProtocolParams(
                BasisPair.named(args.basis), _family_arg(args.alice_family), _family_arg(args.bob_family), m=args.m
            )
            seed = args.seed if args.seed is not None else _default_seed()
            document = run_honest(params, args.bit, np.random.default_rng(seed)).to_text()
        else:
            config = build_config(args)
            if not args.quiet:
                print(describe_config(config), file=sys.stderr)
            result = run_experiment(config, workers=args.workers)
            document = serialize_result(result, args.format)
        _emit(document, args.output)
        return EXIT_OK, document
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE, ""
    except (InvalidConfig, InvalidArgument, ProtocolViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, ""
    except ResourceLimit as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE, ""


def main(argv: Optional[Sequence[str]] = None) -> int:
    status, _ = parse_and_dispatch(argv)
    return status


if __name__ == "__main__":
    sys.exit(main())
