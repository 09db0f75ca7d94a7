"""Command-line entry point.

Exit codes: 0 success/all passed, 1 a test assertion failed, 2 usage, I/O or
parse error, 3 pipeline gap (clarification needed, unmapped signal, unbound
step).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

from sdvtest import cpds
from sdvtest.errors import SdvTestError
from sdvtest.generate import UnmappedSignal, emit_feature, emit_runner_script, load_requirements, plan_scenarios
from sdvtest.gherkin import parse_feature, render_feature
from sdvtest.mapping import (
    DEFAULT_THRESHOLD,
    Clarification,
    Mapping,
    PromptTemplate,
    make_backend,
    parse_overrides,
    render_overrides,
    render_prompt,
)
from sdvtest.runner import DEFAULT_ACK_DELAY, AliasTable, UnboundStep, run_feature, run_script
from sdvtest.statechart import extract_signals, parse_statechart
from sdvtest.vss import Catalog, leaves, load_catalog

log = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_USAGE, EXIT_GAP = 0, 1, 2, 3
ENDPOINT_ENV = "SDVTEST_ENDPOINT"
SHIPPED_CATALOGS = ("vss_core.catalog", "cpds_overlay.catalog", "cpds_extras.catalog")

ARTIFACTS = {
    "signals": "signals.txt",
    "mappings": "mappings.txt",
    "feature": "generated.feature",
    "script": "generated.script",
    "report": "report.json",
}


class UsageError(Exception):
    pass


def shipped(name: str) -> Path:
    return Path(str(resources.files("sdvtest.data").joinpath(name)))


def _read(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror or exc}") from None


def _catalog(args) -> Catalog:
    paths = args.catalog or [shipped(n) for n in SHIPPED_CATALOGS]
    return load_catalog([_read(p) for p in paths], [Path(p).name for p in paths])


def _aliases(args) -> AliasTable | None:
    if getattr(args, "no_aliases", False):
        return None
    if getattr(args, "aliases", None):
        return AliasTable.parse(_read(args.aliases))
    return AliasTable.shipped()


def _threshold(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("threshold must lie in (0, 1]")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text}") from None
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _sut_factory(name: str):
    if name == "none":
        return None
    return cpds.SUTS[name]


# --------------------------------------------------------------------------
# stages, shared by the subcommands and by `pipeline`


def _signals_text(chart_text: str) -> str:
    chart = parse_statechart(chart_text)
    return "".join(f"{r.name} {len(r.occurrences)}\n" for r in extract_signals(chart))


def _map(args, chart_text: str, catalog: Catalog):
    chart = parse_statechart(chart_text)
    overrides = parse_overrides(_read(args.overrides)) if args.overrides else {}
    endpoint = args.endpoint or os.environ.get(ENDPOINT_ENV)
    if args.backend == "external" and not endpoint:
        raise UsageError(f"--backend external needs --endpoint or ${ENDPOINT_ENV}")
    backend = make_backend(args.backend, endpoint)
    return backend.map_signals(extract_signals(chart), catalog, args.threshold, overrides)


def _print_mapping(results, out, err) -> None:
    for r in results:
        if isinstance(r, Mapping):
            print(f"{r.raw_name} -> {r.path} ({r.score}, {r.method})", file=out)
        else:
            cands = ", ".join(f"{p} ({s})" for p, s in r.candidates) or "none"
            print(f"CLARIFY {r.raw_name}: {r.reason}; candidates: {cands}", file=err)


def _mapping_table(results) -> dict[str, str]:
    return {r.raw_name: r.path for r in results if isinstance(r, Mapping)}


def _generate(chart_text: str, reqs_path, mappings: dict[str, str], aliases):
    chart = parse_statechart(chart_text)
    plan = plan_scenarios(chart, load_requirements(reqs_path) if reqs_path else [])
    feature = emit_feature(plan, chart, mappings, aliases)
    return feature, emit_runner_script(feature, mappings, aliases)


def _emit_report(report, args, out) -> None:
    if args.output == "structured":
        out.write(report.to_json())
    else:
        out.write(report.render_human())
    if args.out:
        _write(args.out, report.to_json())


# --------------------------------------------------------------------------
# subcommands


def cmd_extract(args, out, err) -> int:
    text = _signals_text(_read(args.chart))
    out.write(text)
    if args.out:
        _write(args.out, text)
    return EXIT_OK


def cmd_map(args, out, err) -> int:
    results = _map(args, _read(args.chart), _catalog(args))
    _print_mapping(results, out, err)
    if args.out:
        _write(args.out, render_overrides(_mapping_table(results)))
    return EXIT_GAP if any(isinstance(r, Clarification) for r in results) else EXIT_OK


def cmd_gen(args, out, err) -> int:
    chart_text = _read(args.chart)
    if args.mappings:
        mappings = parse_overrides(_read(args.mappings))
    else:
        mappings = _mapping_table(_map(args, chart_text, _catalog(args)))
    try:
        feature, script = _generate(chart_text, args.reqs, mappings, _aliases(args))
    except (UnmappedSignal, UnboundStep) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_GAP
    text = render_feature(feature)
    if args.out:
        _write(args.out, text)
    else:
        out.write(text)
    if args.script_out:
        _write(args.script_out, script)
    return EXIT_OK


def cmd_run(args, out, err) -> int:
    catalog = _catalog(args)
    sut = _sut_factory(args.sut)
    options = {"aliases": _aliases(args) or AliasTable(), "ack_delay": args.ack_delay, "jobs": args.jobs}
    reports = []
    for path in args.feature:
        text = _read(path)
        if args.script or str(path).endswith(".script"):
            reports.append(run_script(text, catalog, sut, **options))
        else:
            reports.append(run_feature(parse_feature(text), catalog, sut, **options))
    if len(reports) == 1:
        _emit_report(reports[0], args, out)
    else:
        for r in reports:
            out.write(r.to_json() if args.output == "structured" else r.render_human())
        if args.out:
            _write(args.out, json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    codes = [r.exit_code() for r in reports]
    return EXIT_GAP if EXIT_GAP in codes else max(codes, default=EXIT_OK)


def cmd_pipeline(args, out, err) -> int:
    outdir = Path(args.out_dir)
    chart_text = _read(args.chart)
    catalog = _catalog(args)

    signals = _signals_text(chart_text)
    _write(outdir / ARTIFACTS["signals"], signals)

    results = _map(args, chart_text, catalog)
    _print_mapping([r for r in results if isinstance(r, Clarification)], out, err)
    mappings = _mapping_table(results)
    _write(outdir / ARTIFACTS["mappings"], render_overrides(mappings))

    aliases = _aliases(args)
    try:
        feature, script = _generate(chart_text, args.reqs, mappings, aliases)
    except (UnmappedSignal, UnboundStep) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_GAP
    feature_path = outdir / ARTIFACTS["feature"]
    _write(feature_path, render_feature(feature))
    _write(outdir / ARTIFACTS["script"], script)

    report = run_feature(
        parse_feature(_read(feature_path)),
        catalog,
        _sut_factory(args.sut),
        aliases=aliases or AliasTable(),
        ack_delay=args.ack_delay,
        jobs=args.jobs,
    )
    args.out = str(outdir / ARTIFACTS["report"])
    _emit_report(report, args, out)
    return report.exit_code()


def cmd_prompt(args, out, err) -> int:
    template = PromptTemplate.shipped(args.task)
    catalog = _catalog(args)
    fills = {
        "[diagram]": _read(args.chart),
        "[VSS catalog]": "\n".join(f"{n.path} {n.kind} {n.datatype}" for n in leaves(catalog)),
        "[VSS signals]": "\n".join(n.path for n in leaves(catalog)),
        "[digital.auto test example]": _read(shipped("prompts/codegen_example.txt")),
    }
    chart = parse_statechart(fills["[diagram]"])
    fills["[signal list from diagram]"] = "\n".join(r.name for r in extract_signals(chart))
    if args.feature:
        fills["[Gherkin test case]"] = _read(args.feature)
    out.write(render_prompt(template, fills))
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdvtest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def catalogs(p):
        p.add_argument("--catalog", action="append", metavar="FILE",
                       help="catalog file (repeatable; default: shipped core + CPDS overlays)")

    def mapper(p):
        catalogs(p)
        p.add_argument("--overrides", metavar="FILE", help="two-column 'raw_name path' manual mappings")
        p.add_argument("--threshold", type=_threshold, default=DEFAULT_THRESHOLD)
        p.add_argument("--backend", choices=("offline", "external"), default="offline")
        p.add_argument("--endpoint", help=f"external backend URL (default: ${ENDPOINT_ENV})")

    def runner(p):
        p.add_argument("--sut", choices=("reference", "mutant-no-reset", "none"), default="reference")
        p.add_argument("--ack-delay", type=_positive_int, default=DEFAULT_ACK_DELAY)
        p.add_argument("--output", choices=("human", "structured"), default="human")
        p.add_argument("--jobs", type=_positive_int, default=1)

    def alias_opts(p):
        p.add_argument("--aliases", metavar="FILE", help="phrase alias table (default: shipped)")
        p.add_argument("--no-aliases", action="store_true", help="canonical step grammar only")

    p = sub.add_parser("extract", help="list raw signals of a chart")
    p.add_argument("chart")
    p.add_argument("--out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("map", help="map chart signals onto catalog paths")
    p.add_argument("chart")
    mapper(p)
    p.add_argument("--out", help="write the mapping table here")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("gen", help="generate a Gherkin feature")
    p.add_argument("chart")
    p.add_argument("reqs")
    p.add_argument("--mappings", metavar="FILE", help="mapping table from 'map --out'")
    mapper(p)
    alias_opts(p)
    p.add_argument("--out")
    p.add_argument("--script-out", metavar="FILE", help="also write the runner script")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="execute features or runner scripts")
    p.add_argument("feature", nargs="+")
    catalogs(p)
    runner(p)
    alias_opts(p)
    p.add_argument("--script", action="store_true", help="inputs are runner scripts")
    p.add_argument("--out", help="write the structured report here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("pipeline", help="extract -> map -> gen -> run")
    p.add_argument("--chart", default=str(shipped("cpds.chart")))
    p.add_argument("--reqs", default=str(shipped("cpds.reqs")))
    mapper(p)
    p.set_defaults(overrides=str(shipped("cpds.overrides")))
    runner(p)
    alias_opts(p)
    p.add_argument("--out-dir", default="sdvtest-out")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("prompt", help="render a prompt template for a live backend")
    p.add_argument("task", choices=("extract", "map", "codegen"))
    p.add_argument("--chart", default=str(shipped("cpds.chart")))
    p.add_argument("--feature")
    catalogs(p)
    p.set_defaults(func=cmd_prompt)
    return parser


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out, err)
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE
    except (UnboundStep, UnmappedSignal) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_GAP
    except (SdvTestError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
