"""``teststand`` command line: check, expand, run, validate, waveform.

Exit codes: 0 success, 1 test failures (or failed validation), 2 usage or
configuration errors, 3 parse or expansion errors in test sources.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import document_hash, load_dut_model, load_signal_map
from .dut import write_event_log
from .engine import DEFAULT_MAX_TICKS, Verdict, check_instance, run_instances
from .errors import (
    ConfigError, EngineError, ExpandError, MutationError, ParseError, ValidationError,
)
from .expand import format_instance, load_instances
from .report import ReportMetadata, render_report, render_validation_report
from .validate import dump_mutations, generate_mutations, load_mutations, run_baseline, run_validation
from .waveform import default_window, render_waveform

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_PARSE = 0, 1, 2, 3
REPORT_SUFFIX = {"json": "json", "markdown": "md"}


@dataclass
class RunConfig:
    sources: list[str]
    signals: str
    dut: str
    out: str | None = None
    format: str = "json"
    parallel: int = 1
    max_ticks: int = DEFAULT_MAX_TICKS
    fail_fast: bool = False
    extra: dict = field(default_factory=dict)


class _Abort(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _err(msg):
    print(msg, file=sys.stderr)


def _read(path, what):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Abort(EXIT_CONFIG, f"{path}: cannot read {what}: {exc.strerror or exc}") from None


def _load_tests(sources):
    for s in sources:
        if not Path(s).is_file():
            raise _Abort(EXIT_CONFIG, f"{s}: no such test file")
    try:
        return load_instances(*sources)
    except (ParseError, ExpandError) as exc:
        raise _Abort(EXIT_PARSE, str(exc)) from None
    except OSError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None


def _load_config(cfg: RunConfig):
    smap_text = _read(cfg.signals, "signal map")
    dut_text = _read(cfg.dut, "DUT model")
    try:
        smap = load_signal_map(smap_text, cfg.signals)
        dut = load_dut_model(dut_text, smap, cfg.dut)
    except ConfigError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None
    meta = ReportMetadata(sources=list(cfg.sources), signal_map_sha256=document_hash(smap_text),
                          dut_model_sha256=document_hash(dut_text), tool_version=__version__)
    return smap, dut, meta


def _config_from(args) -> RunConfig:
    if args.parallel < 1:
        raise _Abort(EXIT_CONFIG, "--parallel must be at least 1")
    if args.max_ticks < 1:
        raise _Abort(EXIT_CONFIG, "--max-ticks must be at least 1")
    return RunConfig(args.sources, args.signals, args.dut, args.out, getattr(args, "format", "json"),
                     args.parallel, args.max_ticks, getattr(args, "fail_fast", False))


def _plural(n, word):
    return f"{n} {word}{'' if n == 1 else 's'}"


# -- subcommands -------------------------------------------------------------

def cmd_check(args) -> int:
    instances = _load_tests(args.sources)
    n_tests = len({i.base_id.casefold() for i in instances})
    if args.signals and args.dut:
        cfg = RunConfig(args.sources, args.signals, args.dut, max_ticks=args.max_ticks)
        smap, dut, _ = _load_config(cfg)
        problems = 0
        for inst in instances:
            try:
                check_instance(inst, smap, dut, cfg.max_ticks)
            except EngineError as exc:
                problems += 1
                _err(str(exc))
        if problems:
            return EXIT_PARSE
    print(f"{_plural(n_tests, 'test')}, {_plural(len(instances), 'instance')}")
    return EXIT_OK


def cmd_expand(args) -> int:
    instances = _load_tests(args.sources)
    for inst in instances:
        if args.print:
            print(format_instance(inst))
        else:
            print(f"{inst.full_id}\t{inst.statement_count} statements")
    return EXIT_OK


def _summary_line(results):
    counts = {v: sum(1 for r in results if r.verdict is v) for v in Verdict}
    return (f"{_plural(len(results), 'test')}: {counts[Verdict.PASSED]} passed, "
            f"{counts[Verdict.FAILED]} failed, {counts[Verdict.ABORTED]} aborted")


def cmd_run(args) -> int:
    cfg = _config_from(args)
    smap, dut, meta = _load_config(cfg)
    instances = _load_tests(cfg.sources)
    results = run_instances(instances, smap, dut, max_ticks=cfg.max_ticks, parallel=cfg.parallel,
                            fail_fast=cfg.fail_fast)
    for r in results:
        line = f"{r.verdict.value.upper():8} {r.instance_id}"
        if r.error:
            line += f"  ({r.error})"
        print(line)
    print(_summary_line(results))
    if cfg.out:
        out = Path(cfg.out)
        (out / "events").mkdir(parents=True, exist_ok=True)
        report = out / f"report.{REPORT_SUFFIX[cfg.format]}"
        report.write_text(render_report(results, cfg.format, meta), encoding="utf-8")
        for r in results:
            write_event_log(r.events, out / "events" / f"{r.instance_id}.log")
        print(f"report written to {report}")
    return EXIT_OK if all(r.verdict is Verdict.PASSED for r in results) else EXIT_FAILED


def cmd_validate(args) -> int:
    cfg = _config_from(args)
    smap, dut, _ = _load_config(cfg)
    instances = _load_tests(cfg.sources)
    try:
        baseline = run_baseline(instances, smap, dut, cfg.max_ticks, cfg.parallel)
    except ValidationError as exc:
        _err(f"validation aborted: {exc}")
        return EXIT_FAILED
    try:
        if args.mutations:
            mutations = load_mutations(_read(args.mutations, "mutation file"), args.mutations)
        else:
            mutations = generate_mutations(instances, baseline, smap)
        if args.write_mutations:
            Path(args.write_mutations).write_text(dump_mutations(mutations), encoding="utf-8")
        report = run_validation(instances, mutations, smap, dut, cfg.max_ticks, cfg.parallel, baseline)
    except MutationError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None
    for row in report.rows:
        flag = "ok  " if row.matches_expectation else "MISS"
        tick = "none" if row.detection_tick is None else row.detection_tick
        print(f"{flag} {row.mutation.describe()}: {row.verdict}, detected at {tick}"
              + (f"  ({row.note})" if row.note else ""))
    ok = sum(r.matches_expectation for r in report.rows)
    print(f"validation {'passed' if report.passed else 'failed'}: {ok} of {len(report.rows)} "
          "mutants detected as expected")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"validation.{REPORT_SUFFIX[cfg.format]}"
        path.write_text(render_validation_report(report, cfg.format), encoding="utf-8")
        print(f"report written to {path}")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_waveform(args) -> int:
    cfg = _config_from(args)
    smap, dut, _ = _load_config(cfg)
    instances = _load_tests(cfg.sources)
    match = [i for i in instances if i.full_id.casefold() == args.test.casefold()]
    if not match:
        raise _Abort(EXIT_CONFIG, f"no test instance {args.test!r}; see `teststand expand`")
    result = run_instances(match, smap, dut, max_ticks=cfg.max_ticks)[0]
    if result.trace is None:
        _err(f"{result.instance_id}: {result.error}")
        return EXIT_FAILED
    signals = args.signal or list(result.trace.signals)
    window = tuple(args.window) if args.window else default_window(result)
    try:
        text = render_waveform(result.trace, signals, window, args.format,
                               compressed=True if args.compressed else None)
    except ValueError as exc:
        raise _Abort(EXIT_CONFIG, str(exc)) from None
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8")
        print(f"waveform written to {cfg.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _common_run_flags(p, formats, out_help):
    p.add_argument("sources", nargs="+", help="test description files")
    p.add_argument("--signals", required=True, help="signal map XML")
    p.add_argument("--dut", required=True, help="DUT model XML")
    p.add_argument("--out", help=out_help)
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--parallel", type=int, default=1, metavar="N")
    p.add_argument("--max-ticks", type=int, default=DEFAULT_MAX_TICKS, metavar="N")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="teststand", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="syntax-check and expand test files without running them")
    p.add_argument("sources", nargs="+")
    p.add_argument("--signals", help="also check signal references against this map")
    p.add_argument("--dut", help="DUT model (with --signals)")
    p.add_argument("--max-ticks", type=int, default=DEFAULT_MAX_TICKS, metavar="N")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("expand", help="list the unrolled test instances")
    p.add_argument("sources", nargs="+")
    p.add_argument("--print", action="store_true", help="print each instance as loop-free source")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("run", help="run all instances and write a report")
    _common_run_flags(p, ["json", "markdown"], "output directory for report and event logs")
    p.add_argument("--fail-fast", action="store_true", help="stop after the first non-passing instance")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="run fault-injected mutants of passing tests")
    _common_run_flags(p, ["json", "markdown"], "output directory for the validation report")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mutations", help="mutation set XML")
    g.add_argument("--generate", action="store_true", help="one mutation per assertion and measurement")
    p.add_argument("--write-mutations", metavar="PATH", help="save the mutation set used")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("waveform", help="render the time diagram of one instance")
    _common_run_flags(p, ["ascii", "svg"], "output file (default: stdout)")
    p.add_argument("--test", required=True, help="instance id (see `teststand expand`)")
    p.add_argument("--signal", action="append", help="signal to draw (repeatable; default all)")
    p.add_argument("--window", type=int, nargs=2, metavar=("START", "END"))
    p.add_argument("--compressed", action="store_true", help="force run-length ascii lanes")
    p.set_defaults(func=cmd_waveform)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Abort as exc:
        _err(str(exc))
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
