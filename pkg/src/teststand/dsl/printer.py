"""Pretty-printer; its output reparses to an equal tree."""

from __future__ import annotations

from .ast import (
    Assert, Assign, CallMacro, LoopBlock, MacroDef, Measure, StopAfter, TestAst,
    TestSuiteAst, WaitFor,
)

INDENT = "  "


def _quote(text):
    return '"' + text.replace('"', '""') + '"'


def format_statements(statements, depth=1):
    lines = []
    pad = INDENT * depth
    for st in statements:
        if isinstance(st, Assign):
            lines.append(f"{pad}{st.signal} <= {st.level.literal};")
        elif isinstance(st, WaitFor):
            lines.append(f"{pad}wait for {st.duration};")
        elif isinstance(st, StopAfter):
            lines.append(f"{pad}Stop after {st.duration};")
        elif isinstance(st, Assert):
            lines.append(f"{pad}assert {st.signal} = {st.expected.literal} report {_quote(st.message)}"
                         f" severity {st.severity.name};")
        elif isinstance(st, Measure):
            lines.append(f"{pad}measure {st.trigger_edge.vhdl}({st.trigger}) to "
                         f"{st.stopper_edge.vhdl}({st.stopper}) name {_quote(st.name)};")
        elif isinstance(st, CallMacro):
            lines.append(f"{pad}callMacro {st.name}")
        elif isinstance(st, LoopBlock):
            lines.append(f"{pad}Loop")
            for arm in st.arms:
                lines.append(f"{pad}{INDENT}Tag {arm.tag}")
                lines.extend(format_statements(arm.body, depth + 2))
                lines.append(f"{pad}{INDENT}EndTag")
            lines.append(f"{pad}EndLoop")
        else:
            raise TypeError(f"cannot format {type(st).__name__}")
    return lines


def format_macro(m: MacroDef) -> str:
    lines = [f"DefineMacro {m.name}", *format_statements(m.body), "EndMacro"]
    return "\n".join(lines)


def format_test(t: TestAst) -> str:
    lines = [f"TestID {t.id}"]
    for c in t.constants:
        lines.append(f"constant {c.name} : time := {c.duration};")
    lines.append("Begin")
    for p in t.processes:
        lines.append(f"Process {p.name}")
        lines.extend(format_statements(p.body))
        lines.append("EndProcess")
    lines.append("EndTestID")
    return "\n".join(lines)


def format_suite(suite: TestSuiteAst) -> str:
    parts = [f"include {_quote(inc.path)};" for inc in suite.includes]
    parts.extend(format_macro(m) for m in suite.macros)
    parts.extend(format_test(t) for t in suite.tests)
    return "\n\n".join(parts) + "\n"
