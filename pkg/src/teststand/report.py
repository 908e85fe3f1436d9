"""Suite reports as canonical JSON and as Markdown.

A JSON report is ``{"header": {"generated_at": ...}, "body": {...}}``. The
body depends only on the results and the metadata passed in, so two runs
over the same inputs produce byte-identical bodies; the wall-clock stamp
lives in the header and nowhere else.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field

from .engine import MeasurementStatus, TestRunResult, Verdict
from .waveform import default_window, render_ascii

TOOL_NAME = "teststand"


@dataclass
class ReportMetadata:
    """Provenance stored in the report body."""

    sources: list[str] = field(default_factory=list)
    signal_map_sha256: str = ""
    dut_model_sha256: str = ""
    tool_version: str = ""
    waveform_signals: list[str] | None = None  # None: signals touched by measurements


# -- body --------------------------------------------------------------------

def _waveform_signals(result, requested):
    if requested is not None:
        return [s for s in requested if _has(result.trace, s)]
    names = []
    for m in result.measurements:
        for s in (m.trigger, m.stopper):
            if s not in names:
                names.append(s)
    return names


def _has(trace, name):
    try:
        trace.index(name)
    except KeyError:
        return False
    return True


def _assertion_row(a):
    return {
        "tick": a.at,
        "signal": a.signal,
        "expected": a.expected.literal,
        "observed": a.observed.literal,
        "severity": a.severity.name,
        "message": a.message,
        "process": a.process,
    }


def _measurement_row(m):
    return {
        "name": m.name,
        "trigger": m.trigger_label,
        "stopper": m.stopper_label,
        "result_us": m.duration_us,
        "status": m.status.value,
        "armed_at": m.armed_at,
        "trigger_at": m.trigger_at,
        "stopper_at": m.stopper_at,
    }


def _section(result: TestRunResult, wave_signals):
    sec = {
        "id": result.instance_id,
        "base_id": result.base_id,
        "tags": list(result.variant_tags),
        "verdict": result.verdict.value,
        "end_tick": result.end_tick,
        "error": result.error,
        "assertions_evaluated": len(result.assertions),
        "violations": [_assertion_row(a) for a in result.violations],
        "measurements": [_measurement_row(m) for m in result.measurements],
        "watchdog_events": [e.to_line() for e in result.events if e.kind != "edge"],
        "waveform": None,
    }
    if result.trace is not None:
        sigs = _waveform_signals(result, wave_signals)
        if sigs:
            window = default_window(result)
            sec["waveform"] = {
                "window": list(window),
                "signals": sigs,
                "ascii": render_ascii(result.trace, sigs, window).splitlines(),
            }
    return sec


def report_body(results, metadata: ReportMetadata | None = None) -> dict:
    """Deterministic report content (everything but the timestamp)."""
    from . import __version__

    md = metadata or ReportMetadata()
    sections = [_section(r, md.waveform_signals) for r in results]
    counts = {v.value: 0 for v in Verdict}
    for r in results:
        counts[r.verdict.value] += 1
    return {
        "tool": {"name": TOOL_NAME, "version": md.tool_version or __version__},
        "sources": list(md.sources),
        "signal_map_sha256": md.signal_map_sha256,
        "dut_model_sha256": md.dut_model_sha256,
        "summary": {
            "total": len(results),
            **counts,
            "items": [{"id": r.instance_id, "verdict": r.verdict.value,
                       "success": r.verdict is Verdict.PASSED} for r in results],
        },
        "sections": sections,
    }


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def body_of(json_text: str) -> str:
    """Canonical text of the body of a rendered JSON report (drops the header)."""
    return canonical_json(json.loads(json_text)["body"])


# -- markdown ----------------------------------------------------------------

def _cell(text):
    return str(text).replace("|", "\\|").replace("\n", " ")


def _count(n, word):
    return f"{n} {word}{'' if n == 1 else 's'}"


def _md_measurement_result(row):
    if row["status"] == MeasurementStatus.COMPLETED.value:
        return str(row["result_us"])
    return f"n/a ({row['status']})"


def _markdown(body, generated_at):
    out = ["# Unit test report", ""]
    tool = body["tool"]
    out.append(f"- Tool: {tool['name']} {tool['version']}")
    if generated_at:
        out.append(f"- Generated: {generated_at}")
    if body["sources"]:
        out.append(f"- Sources: {', '.join(body['sources'])}")
    if body["signal_map_sha256"]:
        out.append(f"- Signal map sha256: `{body['signal_map_sha256']}`")
    if body["dut_model_sha256"]:
        out.append(f"- DUT model sha256: `{body['dut_model_sha256']}`")
    s = body["summary"]
    out += ["", "## Summary", "",
            f"{s['total']} tests: {s['passed']} passed, {s['failed']} failed, {s['aborted']} aborted", ""]
    if s["items"]:
        out += ["| # | Test | Result |", "|---|---|---|"]
        for k, item in enumerate(s["items"], 1):
            out.append(f"| {k} | {_cell(item['id'])} | {item['verdict'].upper()} |")
        out.append("")
    for k, sec in enumerate(body["sections"], 1):
        out += [f"## {k}. {sec['id']}", "", f"Verdict: **{sec['verdict'].upper()}** "
                f"(end tick {sec['end_tick']}, {_count(sec['assertions_evaluated'], 'assertion')} evaluated)", ""]
        if sec["error"]:
            out += [f"Error: {sec['error']}", ""]
        if sec["violations"]:
            out += ["### Failing assertions", "",
                    "| Tick | Signal | Expected | Observed | Severity | Message |",
                    "|---|---|---|---|---|---|"]
            for v in sec["violations"]:
                out.append(f"| {v['tick']} | {_cell(v['signal'])} | {v['expected']} | {v['observed']} "
                           f"| {v['severity']} | {_cell(v['message'])} |")
            out.append("")
        if sec["measurements"]:
            out += ["### Time measurements", "", "| Trigger | Stopper | Result (us) |", "|---|---|---|"]
            for m in sec["measurements"]:
                out.append(f"| {_cell(m['trigger'])} | {_cell(m['stopper'])} | {_md_measurement_result(m)} |")
            incomplete = [m["name"] for m in sec["measurements"] if m["status"] != "completed"]
            if incomplete:
                out += ["", "Incomplete measurements (review needed): " + ", ".join(incomplete)]
            out.append("")
        if sec["watchdog_events"]:
            out += ["### Watchdog events", "", "```text", *sec["watchdog_events"], "```", ""]
        if sec["waveform"]:
            w = sec["waveform"]
            out += [f"### Time diagram (ticks {w['window'][0]} to {w['window'][1]})", "",
                    "```text", *w["ascii"], "```", ""]
    return "\n".join(out).rstrip("\n") + "\n"


# -- entry points ------------------------------------------------------------

def _now():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def render_report(results, format: str = "json", metadata: ReportMetadata | None = None,
                  generated_at: str | None = None) -> str:
    """Render ``results`` as ``"json"`` or ``"markdown"``.

    ``generated_at`` defaults to the current UTC time; pass a fixed string
    (or ``""`` to omit it in Markdown) for fully reproducible output.
    """
    body = report_body(list(results), metadata)
    stamp = _now() if generated_at is None else generated_at
    if format == "json":
        return canonical_json({"header": {"generated_at": stamp}, "body": body})
    if format in ("markdown", "md"):
        return _markdown(body, stamp)
    raise ValueError(f"unknown report format {format!r}")


# -- validation report -------------------------------------------------------

def validation_body(vreport) -> dict:
    return {
        "overall": "pass" if vreport.passed else "fail",
        "baseline": list(vreport.baseline_ids),
        "rows": [row.to_dict() for row in vreport.rows],
    }


def render_validation_report(vreport, format: str = "json", generated_at: str | None = None) -> str:
    body = validation_body(vreport)
    stamp = _now() if generated_at is None else generated_at
    if format == "json":
        return canonical_json({"header": {"generated_at": stamp}, "body": body})
    if format not in ("markdown", "md"):
        raise ValueError(f"unknown report format {format!r}")
    n_ok = sum(1 for r in body["rows"] if r["matches_expectation"])
    out = ["# Validation report", ""]
    if stamp:
        out += [f"- Generated: {stamp}"]
    out += [f"- Overall: **{body['overall'].upper()}** ({n_ok} of {len(body['rows'])} mutants "
            "detected as expected)", "",
            "| # | Test | Mutation | Verdict | Detected | Tick | Expected tick | As expected | Note |",
            "|---|---|---|---|---|---|---|---|---|"]
    for k, r in enumerate(body["rows"], 1):
        m = r["mutation"]
        desc = f"{m['kind']} {m['process']}[{m['index']}]"
        if m["param"]:
            desc += f" {m['param']:+d}"
        tick = "none" if r["detection_tick"] is None else r["detection_tick"]
        exp = "" if r["expected_tick"] is None else r["expected_tick"]
        out.append(f"| {k} | {_cell(m['test'])} | {_cell(desc)} | {r['verdict']} | "
                   f"{'yes' if r['detected'] else 'no'} | {tick} | {exp} | "
                   f"{'yes' if r['matches_expectation'] else 'no'} | {_cell(r['note'])} |")
    return "\n".join(out) + "\n"


__all__ = [
    "ReportMetadata", "body_of", "canonical_json", "render_report", "render_validation_report",
    "report_body", "validation_body",
]
