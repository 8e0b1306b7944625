"""Command-line entry point: ``dichotomy-lab {analyze,verify,plot,list-problems}``.

Exit status is 0 when every check passes, 1 when a check fails (or a stage
errors), and 2 for configuration or usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, harness
from .errors import ConfigError, MissingStage
from .problems import REFUSALS, REGISTRY

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="dichotomy-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run the full chain on a YAML config or builtin problem")
    a.add_argument("spec", help="YAML config path, or the name of a builtin problem")
    a.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
    a.add_argument("--timings", action="store_true", help="include per-stage wall times")
    a.add_argument("--window", type=int, help="override the window for a builtin problem")

    v = sub.add_parser("verify", help="run the invariant suite over the builtin problems")
    v.add_argument("--filter", help="only invariants whose name or tag matches")
    v.add_argument("--adversarial", action="store_true",
                   help="add a corrupted-projector fixture (the suite must then fail)")
    v.add_argument("--seeds", type=int, default=10, help="perturbation seeds per problem")
    v.add_argument("--problem", action="append", help="restrict to these problems")

    pl = sub.add_parser("plot", help="export columns for plotting from a JSON report")
    pl.add_argument("report")
    pl.add_argument("--what", required=True, choices=harness.PLOT_KINDS)
    pl.add_argument("--problem", help="which problem, if the report holds several")
    pl.add_argument("--out", default=".", help="output directory")

    sub.add_parser("list-problems", help="list builtin problems and expected defect numbers")
    return p


def _specs(arg, window):
    path = Path(arg)
    if path.suffix in (".yaml", ".yml") or path.is_file():
        if window is not None:
            raise ConfigError("--window only applies to builtin problems")
        return harness.load_config(path)
    return [harness.spec_from_builtin(arg, window)]


def _analyze(args):
    specs = _specs(args.spec, args.window)
    reports = harness.run_many(specs, include_timings=args.timings)
    doc = harness.reports_document(reports, include_timings=args.timings)
    text = harness.dumps(doc)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for r in reports:
        print(f"{r.verdict.upper():4}  {r.problem}", file=sys.stderr)
    return EXIT_PASS if doc["verdict"] == "pass" else EXIT_FAIL


def _verify(args):
    if args.seeds < 1:
        raise ConfigError("--seeds must be positive")
    if args.problem:
        unknown = [n for n in args.problem if n not in REGISTRY]
        if unknown:
            raise ConfigError(f"unknown problems: {unknown}")
    res = harness.run_verify_suite(args.filter, args.adversarial, problems=args.problem,
                                   perturbation_seeds=args.seeds)
    if not res.checks:
        raise ConfigError(f"filter {args.filter!r} selects no invariants")
    print(res.matrix())
    return EXIT_PASS if res.passed else EXIT_FAIL


def _plot(args):
    try:
        doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    if doc.get("schema") != harness.SCHEMA:
        raise ConfigError(f"{args.report}: unsupported report schema")
    for path in harness.emit_plotdata(doc, args.what, args.out, args.problem):
        print(path)
    return EXIT_PASS


def _list(_args):
    for name, p in REGISTRY.items():
        print(f"{name:26} {str(p.expected):12} {p.description}")
    for name, p in REFUSALS.items():
        print(f"{name:26} {'refused':12} {p.description}")
    return EXIT_PASS


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_CONFIG
    handler = {"analyze": _analyze, "verify": _verify, "plot": _plot,
               "list-problems": _list}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingStage as exc:
        print(f"missing stage: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
