"""Include resolution, macro splicing and loop unrolling.

The result of the pipeline is a list of :class:`TestInstance` objects: flat,
loop-free tests that the engine can execute directly.

Loops are unrolled by tag-name set. Loops whose arms carry the same set of
tag names (in any process of a test) are bound to one shared choice, so
selecting ``Therapy`` in the stimuli process also selects the ``Therapy`` arm
in the verification process. Loops with different tag sets multiply. Two
loops whose tag sets overlap without being equal are ambiguous and rejected.
"""

from __future__ import annotations

import itertools
import posixpath
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from .dsl.ast import (
    FLAT_STATEMENTS, CallMacro, ConstRef, Duration, LoopBlock, Measure, StopAfter, TagArm,
    TestAst, TestSuiteAst, WaitFor,
)
from .dsl.parser import parse_text
from .dsl.printer import format_statements
from .errors import ExpandError

ID_SEP = "__"


@dataclass(frozen=True)
class FlatProcess:
    name: str
    statements: tuple


@dataclass(frozen=True)
class TestInstance:
    """One executable variant of a test, with every duration in ticks."""

    __test__ = False

    base_id: str
    variant_tags: tuple[str, ...]
    processes: tuple[FlatProcess, ...]
    constants: tuple[tuple[str, int], ...] = ()

    @property
    def full_id(self) -> str:
        return ID_SEP.join((self.base_id, *self.variant_tags))

    @property
    def statement_count(self) -> int:
        return sum(len(p.statements) for p in self.processes)

    def process(self, name_or_index):
        if isinstance(name_or_index, int):
            return self.processes[name_or_index]
        for p in self.processes:
            if p.name.casefold() == str(name_or_index).casefold():
                return p
        raise KeyError(name_or_index)


# -- includes --------------------------------------------------------------

def default_loader(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _include_target(origin, inc_path):
    base = posixpath.dirname(origin) if origin else ""
    return posixpath.normpath(posixpath.join(base, inc_path))


def resolve_includes(suite: TestSuiteAst, loader: Callable[[str], str] = default_loader,
                     origin: str | None = None) -> TestSuiteAst:
    """Merge every included file into one suite.

    Included definitions come before the including file's own, in include
    order. Include paths are relative to the including file. A file reached
    twice through different include chains is merged once.
    """
    origin = origin or suite.source or "<main>"
    macros, tests = [], []
    macro_src, test_src = {}, {}
    merged_files = set()

    def add(s, path):
        for m in s.macros:
            key = m.name.casefold()
            if key in macro_src:
                raise ExpandError(f"macro {m.name!r} defined in both {macro_src[key]} and {path}",
                                  source=path, line=m.line, column=m.column)
            macro_src[key] = path
            macros.append(replace(m, source=path))
        for t in s.tests:
            key = t.id.casefold()
            if key in test_src:
                raise ExpandError(f"test {t.id!r} defined in both {test_src[key]} and {path}",
                                  source=path, line=t.line, column=t.column)
            test_src[key] = path
            tests.append(replace(t, source=path))

    def visit(s, path, stack):
        for inc in s.includes:
            target = _include_target(path, inc.path)
            if target in stack:
                chain = " -> ".join([*stack[stack.index(target):], target])
                raise ExpandError(f"include cycle: {chain}", source=path, line=inc.line, column=inc.column)
            if target in merged_files:
                continue
            try:
                text = loader(target)
            except (OSError, KeyError) as exc:
                raise ExpandError(f"cannot read included file {inc.path!r}: {exc}",
                                  source=path, line=inc.line, column=inc.column) from None
            sub = parse_text(text, target)
            visit(sub, target, stack + [target])
            merged_files.add(target)
        add(s, path)

    visit(suite, origin, [origin])
    return TestSuiteAst((), tuple(macros), tuple(tests), source=suite.source)


# -- macros ----------------------------------------------------------------

def _splice(statements, macros, stack):
    out = []
    for st in statements:
        if isinstance(st, CallMacro):
            key = st.name.casefold()
            macro = macros.get(key)
            if macro is None:
                raise ExpandError(f"call of undefined macro {st.name!r}", line=st.line, column=st.column)
            if key in (k for k, _ in stack):
                chain = " -> ".join([*(n for _, n in stack), macro.name])
                raise ExpandError(f"recursive macro expansion: {chain}", line=st.line, column=st.column)
            out.extend(_splice(macro.body, macros, stack + [(key, macro.name)]))
        elif isinstance(st, LoopBlock):
            arms = tuple(replace(a, body=tuple(_splice(a.body, macros, stack))) for a in st.arms)
            out.append(replace(st, arms=arms))
        else:
            out.append(st)
    return out


def expand_macros(suite: TestSuiteAst) -> TestSuiteAst:
    """Replace every ``callMacro`` with the macro's statements, recursively."""
    macros = {m.name.casefold(): m for m in suite.macros}
    new_macros = []
    for m in suite.macros:
        try:
            body = _splice(m.body, macros, [(m.name.casefold(), m.name)])
        except ExpandError as exc:
            raise ExpandError(exc.message, source=m.source or None, line=exc.line, column=exc.column) from None
        new_macros.append(replace(m, body=tuple(body)))
    tests = []
    for t in suite.tests:
        try:
            procs = tuple(replace(p, body=tuple(_splice(p.body, macros, []))) for p in t.processes)
        except ExpandError as exc:
            raise ExpandError(exc.message, source=t.source or None, line=exc.line, column=exc.column) from None
        tests.append(replace(t, processes=procs))
    return replace(suite, macros=tuple(new_macros), tests=tuple(tests))


# -- loops -----------------------------------------------------------------

def _top_loops(bodies):
    for body in bodies:
        for st in body:
            if isinstance(st, LoopBlock):
                yield st


def _tag_key(loop):
    return frozenset(t.casefold() for t in loop.tag_names)


def _choose_arm(loop: LoopBlock, tag_folded: str) -> TagArm:
    for arm in loop.arms:
        if arm.tag.casefold() == tag_folded:
            return arm
    raise AssertionError("bound loop lacks chosen tag")  # guarded by key equality


def _substitute(body, choice):
    out = []
    for st in body:
        if isinstance(st, LoopBlock):
            out.extend(_choose_arm(st, choice[_tag_key(st)]).body)
        else:
            out.append(st)
    return tuple(out)


def _unroll(bodies, bound, tags, test):
    loops = list(_top_loops(bodies))
    if not loops:
        yield bodies, tags
        return
    groups = []  # (key, names in first-seen arm order)
    known = {}
    for loop in loops:
        if not loop.arms:
            raise ExpandError("Loop without any Tag", source=test.source or None,
                              line=loop.line, column=loop.column)
        key = _tag_key(loop)
        if key in known or key in bound:
            continue
        for other in list(known) + list(bound):
            if key & other:
                raise ExpandError(
                    "ambiguous loops: tag sets {%s} and {%s} overlap without being equal"
                    % (", ".join(loop.tag_names), ", ".join(sorted(other))),
                    source=test.source or None, line=loop.line, column=loop.column)
        known[key] = loop.tag_names
        groups.append((key, loop.tag_names))

    for combo in itertools.product(*(names for _, names in groups)):
        choice = dict(bound)
        choice.update({key: name.casefold() for (key, _), name in zip(groups, combo)})
        new_bodies = tuple(_substitute(b, choice) for b in bodies)
        yield from _unroll(new_bodies, choice, tags + tuple(combo), test)


def _resolve_duration(expr, constants, test, st):
    if isinstance(expr, ConstRef):
        ticks = constants.get(expr.name.casefold())
        if ticks is None:
            raise ExpandError(f"undefined constant {expr.name!r}", source=test.source or None,
                              line=st.line, column=st.column)
        return Duration(ticks, "us")
    return Duration(expr.ticks, "us")


def _flatten(statements, constants, test):
    out = []
    for st in statements:
        if isinstance(st, (WaitFor, StopAfter)):
            out.append(replace(st, duration=_resolve_duration(st.duration, constants, test, st)))
        elif isinstance(st, FLAT_STATEMENTS):
            out.append(st)
        elif isinstance(st, CallMacro):
            raise ExpandError(f"unexpanded macro call {st.name!r}; expand macros first",
                              source=test.source or None, line=st.line, column=st.column)
        else:
            raise ExpandError(f"unexpected {type(st).__name__} after unrolling", source=test.source or None)
    return tuple(out)


def unroll_loops(test: TestAst) -> list[TestInstance]:
    """Unroll ``test`` into its variants, in loop-major, arm-declaration order."""
    constants = {c.name.casefold(): c.duration.ticks for c in test.constants}
    bodies = tuple(p.body for p in test.processes)
    instances = []
    for flat_bodies, tags in _unroll(bodies, {}, (), test):
        procs = tuple(FlatProcess(p.name, _flatten(b, constants, test))
                      for p, b in zip(test.processes, flat_bodies))
        inst = TestInstance(test.id, tags, procs, tuple((c.name, c.duration.ticks) for c in test.constants))
        seen = set()
        for p in procs:
            for st in p.statements:
                if isinstance(st, Measure):
                    if st.name.casefold() in seen:
                        raise ExpandError(f"duplicate measure name {st.name!r} in {inst.full_id}",
                                          source=test.source or None, line=st.line, column=st.column)
                    seen.add(st.name.casefold())
        instances.append(inst)
    return instances


# -- pipeline --------------------------------------------------------------

def expand_suite(suite: TestSuiteAst, loader: Callable[[str], str] = default_loader,
                 origin: str | None = None) -> list[TestInstance]:
    merged = resolve_includes(suite, loader, origin)
    expanded = expand_macros(merged)
    instances = []
    ids = {}
    for t in expanded.tests:
        for inst in unroll_loops(t):
            key = inst.full_id.casefold()
            if key in ids:
                raise ExpandError(f"instance id {inst.full_id!r} is not unique (also produced by {ids[key]})",
                                  source=t.source or None)
            ids[key] = t.id
            instances.append(inst)
    return instances


def load_instances(*paths, loader: Callable[[str], str] = default_loader) -> list[TestInstance]:
    """Parse and fully expand one or more test files.

    Each file is expanded on its own; ids must be unique across all files.
    """
    out = []
    ids = set()
    for path in paths:
        path = str(path)
        suite = parse_text(loader(path), path)
        for inst in expand_suite(suite, loader, path):
            if inst.full_id.casefold() in ids:
                raise ExpandError(f"instance id {inst.full_id!r} is not unique across files", source=path)
            ids.add(inst.full_id.casefold())
            out.append(inst)
    return out


def format_instance(inst: TestInstance) -> str:
    """Render an instance as a loop-free test whose id is the instance id."""
    lines = [f"TestID {inst.full_id}", "Begin"]
    for p in inst.processes:
        lines.append(f"Process {p.name}")
        lines.extend(format_statements(p.statements))
        lines.append("EndProcess")
    lines.append("EndTestID")
    return "\n".join(lines) + "\n"


__all__ = [
    "FlatProcess", "TestInstance", "default_loader", "resolve_includes", "expand_macros",
    "unroll_loops", "expand_suite", "load_instances", "format_instance",
]
