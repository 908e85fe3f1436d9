"""Syntax tree for parsed test descriptions.

Location fields (``line``, ``column``, ``source``) are carried for
diagnostics only and take no part in equality, so a pretty-printed and
reparsed tree compares equal to the original.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from ..logic import Edge, LogicLevel

TICKS_PER_UNIT = {"ns": None, "us": 1, "ms": 1_000, "s": 1_000_000}


class Severity(enum.IntEnum):
    NOTE = 0
    WARNING = 1
    ERROR = 2
    FAILURE = 3


def _loc():
    return field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Duration:
    value: int
    unit: str = "us"

    @property
    def ticks(self) -> int:
        """Length in 1 us ticks; callers have already checked divisibility."""
        if self.unit == "ns":
            return self.value // 1000
        return self.value * TICKS_PER_UNIT[self.unit]

    @property
    def is_whole_ticks(self) -> bool:
        return self.unit != "ns" or self.value % 1000 == 0

    def __str__(self):
        return f"{self.value} {self.unit}"


@dataclass(frozen=True)
class ConstRef:
    name: str

    def __str__(self):
        return self.name


DurationExpr = Union[Duration, ConstRef]


@dataclass(frozen=True)
class Assign:
    signal: str
    level: LogicLevel
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class WaitFor:
    duration: DurationExpr
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class Assert:
    signal: str
    expected: LogicLevel
    message: str = "Assertion violation."
    severity: Severity = Severity.ERROR
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class Measure:
    trigger_edge: Edge
    trigger: str
    stopper_edge: Edge
    stopper: str
    name: str
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class TagArm:
    tag: str
    body: tuple
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class LoopBlock:
    arms: tuple[TagArm, ...]
    line: int = _loc()
    column: int = _loc()

    @property
    def tag_names(self):
        return tuple(a.tag for a in self.arms)


@dataclass(frozen=True)
class CallMacro:
    name: str
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class StopAfter:
    duration: DurationExpr
    line: int = _loc()
    column: int = _loc()


Statement = Union[Assign, WaitFor, Assert, Measure, LoopBlock, CallMacro, StopAfter]
FLAT_STATEMENTS = (Assign, WaitFor, Assert, Measure, StopAfter)


@dataclass(frozen=True)
class ConstantDef:
    name: str
    duration: Duration
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class ProcessAst:
    name: str
    body: tuple
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class TestAst:
    __test__ = False

    id: str
    constants: tuple[ConstantDef, ...]
    processes: tuple[ProcessAst, ...]
    line: int = _loc()
    column: int = _loc()
    source: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True)
class MacroDef:
    name: str
    body: tuple
    line: int = _loc()
    column: int = _loc()
    source: str = field(default="", compare=False, repr=False)


@dataclass(frozen=True)
class Include:
    path: str
    line: int = _loc()
    column: int = _loc()


@dataclass(frozen=True)
class TestSuiteAst:
    __test__ = False

    includes: tuple[Include, ...] = ()
    macros: tuple[MacroDef, ...] = ()
    tests: tuple[TestAst, ...] = ()
    source: str = field(default="", compare=False, repr=False)


def walk(statements):
    """Yield every statement, descending into loop arms."""
    for st in statements:
        yield st
        if isinstance(st, LoopBlock):
            for arm in st.arms:
                yield from walk(arm.body)
