"""Deterministic 1 us execution of test instances against a simulated DUT.

Each tick runs the same four phases:

1. every process, in declaration order, executes the statements that are
   due now. Assignments are buffered (a later write to the same signal in
   the same tick replaces an earlier one), and so are assertions (the last
   assertion on a signal in a tick is the one evaluated). Assertions see the
   monitor levels sampled at the end of the previous tick, or the DUT's
   power-up outputs at tick 0;
2. buffered drives are committed; stimuli nobody assigned keep their level;
3. the DUT steps once;
4. the tick's sample is appended to the trace and its edges are fed to the
   armed measurements.

Stretches where no process is due and the DUT would only repeat its last
step are fast-forwarded: the trace repeats the last sample until the next
process wake-up, watchdog deadline or delayed value reaching a delay output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import Direction, DutModel, SignalMap
from .dsl.ast import Assert, Assign, Measure, Severity, StopAfter, WaitFor
from .dut import DutEvent, compile_model
from .errors import EngineError
from .expand import TestInstance
from .logic import Edge, LogicLevel

DEFAULT_MAX_TICKS = 100_000_000


class Verdict(str, enum.Enum):
    PASSED = "passed"
    FAILED = "failed"
    ABORTED = "aborted"


class MeasurementStatus(str, enum.Enum):
    COMPLETED = "completed"
    NO_TRIGGER = "no_trigger"
    NO_STOPPER = "no_stopper"


@dataclass(frozen=True)
class Trace:
    """Per-signal levels, one column per tick.

    ``samples[i, t]`` is the level of ``signals[i]`` at tick ``t``;
    ``initial[i]`` is its level before tick 0 (stimulus default or DUT
    power-up output), which is what an edge at tick 0 is measured against.
    """

    signals: tuple[str, ...]
    initial: np.ndarray
    samples: np.ndarray

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    def index(self, name: str) -> int:
        key = name.casefold()
        for i, s in enumerate(self.signals):
            if s.casefold() == key:
                return i
        raise KeyError(name)

    def row(self, name: str) -> np.ndarray:
        return self.samples[self.index(name)]

    def level(self, name: str, tick: int) -> LogicLevel:
        return LogicLevel(int(self.samples[self.index(name), tick]))

    def edges(self, name: str) -> list[tuple[int, Edge]]:
        i = self.index(name)
        row = np.concatenate(([self.initial[i]], self.samples[i])).astype(np.int8)
        ticks = np.flatnonzero(np.diff(row))
        return [(int(t), Edge.RISING if row[t + 1] else Edge.FALLING) for t in ticks]

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.signals == other.signals and np.array_equal(self.initial, other.initial)
                and np.array_equal(self.samples, other.samples))

    __hash__ = None


@dataclass(frozen=True)
class MeasurementResult:
    name: str
    trigger_edge: Edge
    trigger: str
    stopper_edge: Edge
    stopper: str
    armed_at: int
    trigger_at: Optional[int]
    stopper_at: Optional[int]

    @property
    def status(self) -> MeasurementStatus:
        if self.trigger_at is None:
            return MeasurementStatus.NO_TRIGGER
        if self.stopper_at is None:
            return MeasurementStatus.NO_STOPPER
        return MeasurementStatus.COMPLETED

    @property
    def duration_us(self) -> Optional[int]:
        if self.status is MeasurementStatus.COMPLETED:
            return self.stopper_at - self.trigger_at
        return None

    @property
    def trigger_label(self) -> str:
        return f"{self.trigger_edge.short} {self.trigger}"

    @property
    def stopper_label(self) -> str:
        return f"{self.stopper_edge.short} {self.stopper}"


@dataclass(frozen=True)
class AssertionResult:
    at: int
    signal: str
    expected: LogicLevel
    observed: LogicLevel
    severity: Severity
    message: str
    process: str = ""

    @property
    def violated(self) -> bool:
        return self.observed != self.expected

    @property
    def verdict(self) -> str:
        return "violated" if self.violated else "pass"


@dataclass(frozen=True)
class TestRunResult:
    __test__ = False

    instance_id: str
    verdict: Verdict
    assertions: tuple[AssertionResult, ...]
    measurements: tuple[MeasurementResult, ...]
    trace: Optional[Trace]
    end_tick: int
    events: tuple[DutEvent, ...] = ()
    base_id: str = ""
    variant_tags: tuple[str, ...] = ()
    error: Optional[str] = None

    @property
    def violations(self):
        return [a for a in self.assertions if a.violated]

    @classmethod
    def from_error(cls, instance: TestInstance, message: str) -> "TestRunResult":
        return cls(instance.full_id, Verdict.ABORTED, (), (), None, 0, (),
                   instance.base_id, instance.variant_tags, error=message)


def evaluate_severity(results) -> Verdict:
    """NOTE never fails; WARNING/ERROR fail; FAILURE aborts."""
    verdict = Verdict.PASSED
    for r in results:
        if not r.violated or r.severity is Severity.NOTE:
            continue
        if r.severity is Severity.FAILURE:
            return Verdict.ABORTED
        verdict = Verdict.FAILED
    return verdict


@dataclass
class Schedule:
    """Statically known timing of an instance (it has no control flow)."""

    timed: list  # per process: list of (tick, statement)
    finish: list  # per process: tick at which it has nothing left to do
    deadlines: list  # StopAfter deadlines
    end_tick: int = 0


def static_schedule(instance: TestInstance) -> Schedule:
    timed, finish, deadlines = [], [], []
    for p in instance.processes:
        t = 0
        rows = []
        for st in p.statements:
            rows.append((t, st))
            if isinstance(st, WaitFor):
                t += st.duration.ticks
            elif isinstance(st, StopAfter):
                deadlines.append(t + st.duration.ticks)
        timed.append(rows)
        finish.append(t)
    end = max([0, *finish, *deadlines])
    return Schedule(timed, finish, deadlines, end)


def check_instance(instance: TestInstance, smap: SignalMap, dut: DutModel, max_ticks=DEFAULT_MAX_TICKS):
    """Pre-run validation; raises :class:`EngineError` on the first problem."""
    where = instance.full_id
    for p in instance.processes:
        for st in p.statements:
            if isinstance(st, Assign):
                sig = smap.get(st.signal)
                if sig is None:
                    raise EngineError(f"{where}: line {st.line}: assignment to unknown signal {st.signal!r}")
                if sig.direction is not Direction.STIMULUS:
                    raise EngineError(f"{where}: line {st.line}: cannot assign monitor signal {sig.name!r}")
            elif isinstance(st, Assert):
                sig = smap.get(st.signal)
                if sig is None:
                    raise EngineError(f"{where}: line {st.line}: assertion on unknown signal {st.signal!r}")
                if sig.direction is not Direction.MONITOR:
                    raise EngineError(f"{where}: line {st.line}: assertion on stimulus signal {sig.name!r}")
            elif isinstance(st, Measure):
                for name in (st.trigger, st.stopper):
                    if name not in smap:
                        raise EngineError(f"{where}: line {st.line}: measurement {st.name!r} "
                                          f"references unknown signal {name!r}")
    for name in (*dut.inputs, *dut.outputs):
        if name not in smap:
            raise EngineError(f"DUT signal {name!r} is not in the signal map")
    sched = static_schedule(instance)
    if sched.end_tick > max_ticks:
        raise EngineError(f"{where}: run would last {sched.end_tick} ticks, above the limit of {max_ticks}")
    return sched


class _Meter:
    __slots__ = ("st", "ti", "si", "same", "armed_at", "trigger_at", "stopper_at", "trigger", "stopper")

    def __init__(self, st, ti, si, armed_at, trigger, stopper):
        self.st = st
        self.ti = ti
        self.si = si
        self.same = ti == si
        self.armed_at = armed_at
        self.trigger_at = None
        self.stopper_at = None
        self.trigger = trigger
        self.stopper = stopper

    def feed(self, tick, prev, cur):
        if self.trigger_at is None:
            if self.st.trigger_edge.matches(prev[self.ti], cur[self.ti]):
                self.trigger_at = tick
                if self.same:
                    return
            else:
                return
        if self.stopper_at is None and self.st.stopper_edge.matches(prev[self.si], cur[self.si]):
            self.stopper_at = tick

    def result(self):
        st = self.st
        return MeasurementResult(st.name, st.trigger_edge, self.trigger, st.stopper_edge, self.stopper,
                                 self.armed_at, self.trigger_at, self.stopper_at)


def run_instance(instance: TestInstance, smap: SignalMap, dut: DutModel,
                 max_ticks: int = DEFAULT_MAX_TICKS) -> TestRunResult:
    """Execute one instance. Deterministic: same inputs, same result."""
    check_instance(instance, smap, dut, max_ticks)

    sim = compile_model(dut)
    state = sim.reset()
    names = [s.name for s in smap.signals]
    index = {n.casefold(): i for i, n in enumerate(names)}
    n_sig = len(names)
    stim_ix = [i for i, s in enumerate(smap.signals) if s.direction is Direction.STIMULUS]
    dut_in_ix = [index[n.casefold()] for n in dut.inputs]
    dut_out_ix = [index[n.casefold()] for n in dut.outputs]
    initial_outputs = sim.initial_outputs(state)

    cur = [int(s.default_level) for s in smap.signals]
    for o, ix in zip(dut.outputs, dut_out_ix):
        cur[ix] = int(initial_outputs[o])
    initial = np.array(cur, dtype=np.uint8)
    prev = list(cur)
    visible = list(cur)  # what assertions read

    procs = instance.processes
    pc = [0] * len(procs)
    wake = [0] * len(procs)
    deadline = 0
    meters: list[_Meter] = []
    assertion_results: list[AssertionResult] = []
    events: list[DutEvent] = []
    rows: list[list[int]] = []
    counts: list[int] = []
    aborted = False
    t = 0

    while True:
        # phase 1
        drives = {}
        pending_asserts = {}
        for p_i, proc in enumerate(procs):
            stmts = proc.statements
            if pc[p_i] >= len(stmts) or wake[p_i] > t:
                continue
            while pc[p_i] < len(stmts):
                st = stmts[pc[p_i]]
                pc[p_i] += 1
                if isinstance(st, Assign):
                    drives[index[st.signal.casefold()]] = int(st.level)
                elif isinstance(st, WaitFor):
                    wake[p_i] = t + st.duration.ticks
                    break
                elif isinstance(st, Assert):
                    key = st.signal.casefold()
                    pending_asserts.pop(key, None)
                    pending_asserts[key] = (st, proc.name)
                elif isinstance(st, Measure):
                    meters.append(_Meter(st, index[st.trigger.casefold()], index[st.stopper.casefold()], t,
                                         names[index[st.trigger.casefold()]],
                                         names[index[st.stopper.casefold()]]))
                elif isinstance(st, StopAfter):
                    deadline = max(deadline, t + st.duration.ticks)
        for key, (st, pname) in pending_asserts.items():
            ix = index[key]
            res = AssertionResult(t, names[ix], st.expected, LogicLevel(visible[ix]), st.severity,
                                  st.message, pname)
            assertion_results.append(res)
            if res.violated and st.severity is Severity.FAILURE:
                aborted = True

        # phases 2 and 3
        for ix, lvl in drives.items():
            cur[ix] = lvl
        outs, evs = sim.step(state, [cur[i] for i in dut_in_ix], t)
        for ix, lvl in zip(dut_out_ix, outs):
            cur[ix] = lvl
        if evs:
            events.extend(evs)

        # phase 4
        if cur != prev:
            for m in meters:
                if m.stopper_at is None:
                    m.feed(t, prev, cur)
        if rows and cur == rows[-1]:
            counts[-1] += 1
        else:
            rows.append(list(cur))
            counts.append(1)
        prev = list(cur)
        visible = prev

        if aborted:
            break
        # a process whose last statement is a wait is busy until that wait ends
        running = [wake[i] for i in range(len(procs)) if pc[i] < len(procs[i].statements) or wake[i] > t]
        if not running and t >= deadline:
            break

        # fast-forward through quiet stretches
        target = min(running) if running else deadline
        dl = sim.next_deadline(state)
        if dl is not None:
            target = min(target, dl)
        gap = min(target - t - 1, sim.quiet_ticks(state))
        if gap > 0:
            counts[-1] += gap
            sim.advance(state, gap)
            t += gap
        t += 1

    samples = np.repeat(np.array(rows, dtype=np.uint8), counts, axis=0).T.copy()
    trace = Trace(tuple(names), initial, samples)
    verdict = evaluate_severity(assertion_results)
    return TestRunResult(
        instance_id=instance.full_id,
        verdict=verdict,
        assertions=tuple(assertion_results),
        measurements=tuple(m.result() for m in meters),
        trace=trace,
        end_tick=t,
        events=tuple(events),
        base_id=instance.base_id,
        variant_tags=instance.variant_tags,
    )


def run_instances(instances, smap, dut, max_ticks=DEFAULT_MAX_TICKS, parallel=1, fail_fast=False):
    """Run many instances, keeping input order in the output.

    Pre-run validation errors become ``aborted`` results carrying the error
    message; other instances still run.
    """
    if parallel > 1 and len(instances) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_run_safe, instances, [smap] * len(instances),
                                    [dut] * len(instances), [max_ticks] * len(instances),
                                    chunksize=max(1, len(instances) // (parallel * 4))))
        if fail_fast:
            results = _cut_after_failure(results)
        return results
    results = []
    for inst in instances:
        r = _run_safe(inst, smap, dut, max_ticks)
        results.append(r)
        if fail_fast and r.verdict is not Verdict.PASSED:
            break
    return results


def _cut_after_failure(results):
    for i, r in enumerate(results):
        if r.verdict is not Verdict.PASSED:
            return results[: i + 1]
    return results


def _run_safe(instance, smap, dut, max_ticks):
    try:
        return run_instance(instance, smap, dut, max_ticks)
    except EngineError as exc:
        return TestRunResult.from_error(instance, str(exc))


__all__ = [
    "AssertionResult", "MeasurementResult", "MeasurementStatus", "Schedule", "TestRunResult",
    "Trace", "Verdict", "check_instance", "evaluate_severity", "run_instance", "run_instances",
    "static_schedule", "DEFAULT_MAX_TICKS",
]
