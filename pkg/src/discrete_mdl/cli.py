"""Command-line interface: ``discrete-mdl {predict,evaluate,experiment,check}``.

Exit statuses: 0 success / bounds hold, 1 validation error, 2 budget error,
3 bound or invariant violation.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_class_config
from .evaluation import ENGINES, METRICS, BudgetError, check_class, error_series, telescoping
from .experiments import (
    EXIT_BOUND,
    EXIT_BUDGET,
    EXIT_INVALID,
    EXIT_OK,
    REGISTRY,
    ExperimentSpec,
    _series_result,
    run_experiment,
)
from .measures import AlphabetError, ModelError, as_string
from .predictors import MODES, OffSupportError, TieBreak, predict


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _params(items: list[str]) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--param expects KEY=VALUE, got {item!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discrete-mdl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("predict", help="print a one-step prediction vector")
    p.add_argument("--class", dest="cls", required=True, help="class config file")
    p.add_argument("--x", default="", help="history string, e.g. 0110")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--tie-break", type=TieBreak.parse, default=None)

    e = sub.add_parser("evaluate", help="expected error series for a class")
    e.add_argument("--class", dest="cls", required=True)
    e.add_argument("--mode", choices=MODES, required=True)
    e.add_argument("--normalized", action="store_true")
    e.add_argument("--metric", choices=METRICS, default="squared")
    e.add_argument("--n", type=int, default=10)
    e.add_argument("--engine", choices=ENGINES, default="exact-tree")
    e.add_argument("--samples", type=int, default=10_000)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--tie-break", type=TieBreak.parse, default=None)
    e.add_argument("--out")

    x = sub.add_parser("experiment", help="run a registry experiment")
    x.add_argument("--id", required=True, choices=sorted(REGISTRY))
    x.add_argument("--n", type=int, help="override horizon (or depth for lemma-suites)")
    x.add_argument("--samples", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--param", action="append", metavar="KEY=VALUE", help="e.g. N=16")
    x.add_argument("--out")

    c = sub.add_parser("check", help="run invariant suites on a class")
    c.add_argument("--class", dest="cls", required=True)
    c.add_argument("--depth", type=int, default=6)
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    if args.command == "predict":
        cls = load_class_config(args.cls)
        pred = predict(cls, as_string(args.x, cls.alphabet_size), args.mode, args.tie_break)
        vec = pred.vector(args.normalized)
        print(" ".join(f"{a}:{v!r}" for a, v in enumerate(vec)))
        return EXIT_OK
    if args.command == "evaluate":
        cls = load_class_config(args.cls)
        s = error_series(
            cls, args.mode, args.metric, args.n, normalized=args.normalized, engine=args.engine,
            tiebreak=args.tie_break, samples=args.samples, seed=args.seed,
        )
        result = _series_result("evaluate", [("", s)])
    elif args.command == "experiment":
        spec = ExperimentSpec(args.id, args.n, args.samples, args.seed, _params(args.param), args.out)
        result = run_experiment(spec)
    else:
        cls = load_class_config(args.cls)
        violations = check_class(cls, args.depth)
        lhs, rhs = telescoping(cls, args.depth)
        if abs(lhs - rhs) > 1e-10:
            violations["telescoping"] += 1
        for name, count in sorted(violations.items()):
            print(f"{name}: {count} violations", file=sys.stderr)
        print(f"checked {len(cls)} models to depth {args.depth}: {sum(violations.values())} violations")
        return EXIT_BOUND if sum(violations.values()) else EXIT_OK
    _emit(result.to_csv(), getattr(args, "out", None))
    for note in result.notes:
        print(note, file=sys.stderr)
    return result.status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ModelError, AlphabetError, OffSupportError, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
