"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 unreadable or unparseable file,
4 update undefined (AllZero), 5 propagation did not converge, 6 oracle
check failed, 7 oracle enumeration guard exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys

from icthmc.errors import (
    ConvergenceError,
    GuardExceededError,
    InputError,
    UndefinedUpdateError,
    ValidationError,
)
from icthmc.inference import GbrRegime, gbr_curve, gbr_problem, likelihood_factors, updated_lower_expectation
from icthmc.modelio import load_model, load_query, read_json
from icthmc.oracle import brute_force_updated_lower

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNREADABLE = 3
EXIT_UNDEFINED = 4
EXIT_NO_CONVERGENCE = 5
EXIT_ORACLE_GAP = 6
EXIT_GUARD = 7

UNDEFINED_MESSAGE = "update undefined: upper probability of observation is zero"


class _Exit(Exception):
    def __init__(self, code: int):
        self.code = code


def _read(path):
    try:
        return read_json(path)
    except (OSError, UnicodeDecodeError, ValueError) as exc:
        print(f"cannot read {path}: {exc}", file=sys.stderr)
        raise _Exit(EXIT_UNREADABLE) from None


def _report_invalid(exc: InputError):
    issues = exc.issues if isinstance(exc, ValidationError) else [str(exc)]
    for line in issues:
        print(f"invalid: {line}", file=sys.stderr)
    raise _Exit(EXIT_INVALID)


def _load(model_path, query_path=None):
    model_doc = _read(model_path)
    query_doc = _read(query_path) if query_path is not None else None
    try:
        model = load_model(model_doc)
        query = load_query(query_doc, model) if query_doc is not None else None
    except InputError as exc:
        _report_invalid(exc)
    return model, query


def cmd_validate(args) -> int:
    _load(args.model, args.query)
    print("OK")
    return EXIT_OK


def _undefined(fmt: str = "json") -> int:
    if fmt == "json":
        print(json.dumps({"regime": GbrRegime.ALL_ZERO.value, "message": UNDEFINED_MESSAGE}))
    else:
        print(f"regime: {GbrRegime.ALL_ZERO.value}")
    print(UNDEFINED_MESSAGE, file=sys.stderr)
    return EXIT_UNDEFINED


def cmd_infer(args) -> int:
    model, query = _load(args.model, args.query)
    try:
        result = updated_lower_expectation(model, query)
    except UndefinedUpdateError:
        return _undefined(args.format)
    if args.format == "json":
        print(json.dumps(result.to_dict()))
    else:
        for key, value in result.to_dict().items():
            print(f"{key}: {value}")
    return EXIT_OK


def cmd_gbr_curve(args) -> int:
    model, query = _load(args.model, args.query)
    if args.samples < 2:
        print("invalid: --samples must be at least 2", file=sys.stderr)
        return EXIT_INVALID
    rows = gbr_curve(gbr_problem(model, query), args.samples)
    out = ["mu,G_lower"] + [f"{mu!r},{g!r}" for mu, g in rows]
    sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    model, query = _load(args.model, args.query)
    if args.grid < 1:
        print("invalid: --grid must be a positive integer", file=sys.stderr)
        return EXIT_INVALID
    slack = args.slack if args.slack is not None else 2.0 * query.tolerance
    times, factors = likelihood_factors(model, query.observations)
    # guard first: a refused oracle must not cost a full solve
    oracle = brute_force_updated_lower(
        model.rates, model.initial, times, factors, query.target_time, query.f, args.grid,
        method=args.method,
    )
    try:
        solver = updated_lower_expectation(model, query).lower
    except UndefinedUpdateError:
        return _undefined()
    if oracle is None:
        print(f"solver_lower: {solver!r}")
        print("oracle_lower: undefined")
        return EXIT_ORACLE_GAP
    gap = oracle - solver
    print(f"solver_lower: {solver!r}")
    print(f"oracle_lower: {oracle!r}")
    print(f"gap: {gap!r}")
    return EXIT_OK if gap >= -slack else EXIT_ORACLE_GAP


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="icthmc",
        description="Updated lower and upper expectations for imprecise continuous-time hidden Markov chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file and an optional query file")
    p.add_argument("model")
    p.add_argument("query", nargs="?")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("infer", help="updated lower and upper expectation")
    p.add_argument("model")
    p.add_argument("query")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("gbr-curve", help="CSV of mu and the lower G(mu)")
    p.add_argument("model")
    p.add_argument("query")
    p.add_argument("--samples", type=int, default=41)
    p.set_defaults(func=cmd_gbr_curve)

    p = sub.add_parser("oracle-check", help="compare the solver with the grid-process oracle")
    p.add_argument("model")
    p.add_argument("query")
    p.add_argument("--grid", type=int, default=6)
    p.add_argument("--method", choices=("dp", "enumerate"), default="dp")
    p.add_argument("--slack", type=float, default=None,
                   help="allowed shortfall of the oracle below the solver (default 2*tolerance)")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        return exc.code
    except ConvergenceError as exc:
        print(f"propagation did not converge: last gap {exc.gap!r}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except GuardExceededError as exc:
        print(f"guard exceeded: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InputError as exc:
        try:
            _report_invalid(exc)
        except _Exit as code:
            return code.code


if __name__ == "__main__":
    sys.exit(main())
