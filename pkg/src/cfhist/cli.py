"""Command-line front end: ``cfhist analyze|sweep|evolve``.

Exit codes: 0 success (whatever the verdict), 2 usage or parameter error,
3 internal validation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .histories import FamilyError
from .protocols import (
    FAMILY_MODELS,
    FAMILY_NAMES,
    CircuitModel,
    ConfigError,
    MichelsonConfig,
    MziConfig,
    build_family,
    build_griffiths_mzi,
    build_michelson_cycle,
    build_michelson_multi,
    reflectivity_to_theta,
)
from .report import (
    ReportValidationError,
    analyze,
    evolution,
    render_analysis,
    render_evolution,
    render_sweep,
)
from .statespace import ZERO_TOL, NonUnitaryError, StateSpaceError
from .sweep import sweep_consistency

MODELS = ("griffiths-mzi", "michelson-cycle", "michelson-two-cycle")
EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 3


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--family", choices=FAMILY_NAMES)
    common.add_argument("--M", type=int, default=2, help="outer cycles (outer angle pi/2M)")
    common.add_argument("--N", type=int, default=2, help="inner cycles (inner angle pi/2N)")
    common.add_argument("--bob-blocks", action="store_true")
    common.add_argument("--reflectivity-outer", type=float)
    common.add_argument("--reflectivity-inner", type=float)
    common.add_argument("--range", dest="range_", metavar="LO:HI:STEPS", default="0.05:0.95:181")
    common.add_argument("--tol", type=float, default=ZERO_TOL)
    common.add_argument("--out", type=Path)
    common.add_argument("--format", choices=("csv", "json", "text"))

    parser = argparse.ArgumentParser(
        prog="cfhist", description="Consistent-histories analysis of counterfactual interferometers."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="consistency and probabilities of a family")
    sub.add_parser("sweep", parents=[common], help="consistency versus outer reflectivity")
    sub.add_parser("evolve", parents=[common], help="unprojected state at every time")
    return parser


def _parse_range(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, steps = text.split(":")
        return float(lo), float(hi), int(steps)
    except ValueError:
        raise UsageError(f"--range expects LO:HI:STEPS, got {text!r}") from None


def _resolve_model_name(args: argparse.Namespace, default: str) -> str:
    if args.model:
        model = args.model
    elif args.family:
        model = FAMILY_MODELS[args.family]
    else:
        model = default
    if args.family and FAMILY_MODELS[args.family] != model:
        raise UsageError(f"family {args.family} needs model {FAMILY_MODELS[args.family]}, not {model}")
    return model


def _mzi_config(args: argparse.Namespace, outer: float | None = None) -> MziConfig:
    base = MziConfig.protocol(args.M, args.N)
    theta_outer = base.theta_outer
    theta_inner = base.theta_inner
    r_outer = args.reflectivity_outer if outer is None else outer
    if r_outer is not None:
        theta_outer = reflectivity_to_theta(r_outer)
    if args.reflectivity_inner is not None:
        theta_inner = reflectivity_to_theta(args.reflectivity_inner)
    return MziConfig(theta_outer, theta_inner)


def _build_model(args: argparse.Namespace, name: str) -> CircuitModel:
    if name == "griffiths-mzi":
        if args.bob_blocks:
            raise UsageError("--bob-blocks applies to the Michelson models only")
        return build_griffiths_mzi(_mzi_config(args))
    if args.reflectivity_outer is not None or args.reflectivity_inner is not None:
        raise UsageError("reflectivity overrides apply to griffiths-mzi only; use --M/--N")
    cfg = MichelsonConfig(args.M, args.N, args.bob_blocks)
    if name == "michelson-cycle":
        return build_michelson_cycle(cfg)
    return build_michelson_multi(cfg)


def cmd_analyze(args: argparse.Namespace) -> str:
    name = _resolve_model_name(args, "griffiths-mzi")
    family_name = args.family or {"griffiths-mzi": "FpA", "michelson-cycle": "Y-refined",
                                  "michelson-two-cycle": "two-cycle-2"}[name]
    model = _build_model(args, name)
    family = build_family(model, family_name)
    return render_analysis(analyze(model, family, args.tol), args.format or "text")


def cmd_sweep(args: argparse.Namespace) -> str:
    name = _resolve_model_name(args, "griffiths-mzi")
    if name != "griffiths-mzi":
        raise UsageError("sweep is defined for the griffiths-mzi model")
    if args.reflectivity_outer is not None:
        raise UsageError("sweep varies the outer reflectivity; drop --reflectivity-outer")
    lo, hi, steps = _parse_range(args.range_)
    family_name = args.family or "FC"
    # validate the fixed parameters before sweeping
    _mzi_config(args)
    result = sweep_consistency(
        lambda r: build_griffiths_mzi(_mzi_config(args, outer=r)),
        lambda m: build_family(m, family_name),
        (lo, hi),
        steps,
        tol=args.tol,
    )
    return render_sweep(result, family_name, args.format or "csv")


def cmd_evolve(args: argparse.Namespace) -> str:
    name = _resolve_model_name(args, "michelson-cycle")
    model = _build_model(args, name)
    return render_evolution(evolution(model), args.format or "json")


COMMANDS = {"analyze": cmd_analyze, "sweep": cmd_sweep, "evolve": cmd_evolve}


def run(argv: list[str] | None = None) -> tuple[int, str]:
    """Run a command; returns ``(exit_code, output_text)`` without exiting."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return (EXIT_USAGE if exc.code else EXIT_OK), ""
    if not args.tol > 0:
        return EXIT_USAGE, "error: --tol must be positive\n"
    try:
        text = COMMANDS[args.command](args)
    except NonUnitaryError as exc:
        return EXIT_INTERNAL, f"internal error: {exc}\n"
    except ReportValidationError as exc:
        return EXIT_INTERNAL, f"internal error: {exc}\n"
    except (UsageError, ConfigError, FamilyError, StateSpaceError) as exc:
        return EXIT_USAGE, f"error: {exc}\n"
    if args.out is not None:
        try:
            args.out.write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            return EXIT_USAGE, f"error: cannot write {args.out}: {exc}\n"
        return EXIT_OK, ""
    return EXIT_OK, text


def main(argv: list[str] | None = None) -> int:
    code, text = run(argv)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    stream.write(text)
    stream.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
