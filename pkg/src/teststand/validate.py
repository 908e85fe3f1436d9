"""Calibration of the stand itself by fault injection.

Each :class:`Mutation` corrupts exactly one statement of a passing test
instance. The mutant is run and compared with the unmutated baseline; the
stand is considered valid when every mutant is caught, and caught at the
tick the mutation author expected.

A mutant counts as *failing* when its engine verdict is not ``passed``, or
when one of its measurements deviates from the baseline's golden value
(different status or different duration). Measurements never fail a test
in a normal run, so this second rule is what lets measurement mutants be
detected at all.
"""

from __future__ import annotations

import enum
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Optional

from .dsl.ast import Assert, Assign, Duration, Measure, Severity, WaitFor
from .engine import (
    DEFAULT_MAX_TICKS, MeasurementStatus, TestRunResult, Verdict, run_instances, static_schedule,
)
from .errors import MutationError, ValidationError
from .expand import FlatProcess, TestInstance
from .logic import LogicLevel


class MutationKind(str, enum.Enum):
    FLIP_ASSERT_EXPECTED = "flip_assert_expected"
    SHIFT_WAIT = "shift_wait"
    FLIP_STIMULUS_LEVEL = "flip_stimulus_level"
    RENAME_MEASURE_STOPPER_EDGE = "rename_measure_stopper_edge"


_TARGET_TYPE = {
    MutationKind.FLIP_ASSERT_EXPECTED: Assert,
    MutationKind.SHIFT_WAIT: WaitFor,
    MutationKind.FLIP_STIMULUS_LEVEL: Assign,
    MutationKind.RENAME_MEASURE_STOPPER_EDGE: Measure,
}


@dataclass(frozen=True)
class ExpectedDetection:
    """What the mutation author predicts.

    ``target`` names an assertion message or a measurement; when set, the
    detection tick is taken from that item only. ``verdict`` is the mutant
    verdict (``"passed"`` declares a mutation that must *not* be detected).
    """

    target: str = ""
    verdict: str = "failed"
    tick: Optional[int] = None
    duration_delta: Optional[int] = None


@dataclass(frozen=True)
class Mutation:
    kind: MutationKind
    test: str  # instance full id
    process: str
    index: int
    param: int = 0
    expect: ExpectedDetection = field(default_factory=ExpectedDetection)

    def describe(self) -> str:
        extra = f" {self.param:+d}" if self.kind is MutationKind.SHIFT_WAIT else ""
        return f"{self.kind.value}{extra} at {self.test}/{self.process}[{self.index}]"


# -- applying ----------------------------------------------------------------

def _locate(instance: TestInstance, m: Mutation):
    if instance.full_id.casefold() != m.test.casefold():
        raise MutationError(f"mutation targets {m.test!r}, not {instance.full_id!r}")
    try:
        p_index = next(i for i, p in enumerate(instance.processes)
                       if p.name.casefold() == m.process.casefold())
    except StopIteration:
        raise MutationError(f"{m.describe()}: no process {m.process!r}") from None
    stmts = instance.processes[p_index].statements
    if not 0 <= m.index < len(stmts):
        raise MutationError(f"{m.describe()}: statement index out of range (process has {len(stmts)})")
    st = stmts[m.index]
    want = _TARGET_TYPE[m.kind]
    if not isinstance(st, want):
        raise MutationError(f"{m.describe()}: statement is {type(st).__name__}, expected {want.__name__}")
    return p_index, st


def apply_mutation(instance: TestInstance, m: Mutation) -> TestInstance:
    """Return ``instance`` with the single located statement corrupted."""
    p_index, st = _locate(instance, m)
    if m.kind is MutationKind.FLIP_ASSERT_EXPECTED:
        new = replace(st, expected=~st.expected)
    elif m.kind is MutationKind.FLIP_STIMULUS_LEVEL:
        new = replace(st, level=~st.level)
    elif m.kind is MutationKind.RENAME_MEASURE_STOPPER_EDGE:
        new = replace(st, stopper_edge=~st.stopper_edge)
    else:
        ticks = st.duration.ticks + m.param
        if ticks < 1:
            raise MutationError(f"{m.describe()}: shifted wait would last {ticks} ticks")
        new = replace(st, duration=Duration(ticks, "us"))
    proc = instance.processes[p_index]
    stmts = list(proc.statements)
    stmts[m.index] = new
    procs = list(instance.processes)
    procs[p_index] = FlatProcess(proc.name, tuple(stmts))
    return replace(instance, processes=tuple(procs))


# -- running -----------------------------------------------------------------

@dataclass(frozen=True)
class ValidationRow:
    mutation: Mutation
    verdict: str  # effective verdict (engine verdict, or "failed" on measurement deviation)
    engine_verdict: str
    detected: bool
    detection_tick: Optional[int]
    matches_expectation: bool
    note: str = ""

    def to_dict(self) -> dict:
        m = self.mutation
        return {
            "mutation": {"kind": m.kind.value, "test": m.test, "process": m.process, "index": m.index,
                         "param": m.param},
            "expected": {"target": m.expect.target, "verdict": m.expect.verdict, "tick": m.expect.tick,
                         "duration_delta": m.expect.duration_delta},
            "expected_tick": m.expect.tick,
            "verdict": self.verdict,
            "engine_verdict": self.engine_verdict,
            "detected": self.detected,
            "detection_tick": self.detection_tick,
            "matches_expectation": self.matches_expectation,
            "note": self.note,
        }


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ValidationRow, ...]
    baseline_ids: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.matches_expectation for r in self.rows)

    @property
    def undetected(self):
        return [r for r in self.rows if not r.detected]


def _first_diff(a, b):
    if a == b:
        return None
    ticks = [x for x in (a, b) if x is not None]
    return min(ticks)


def measurement_deviations(base: TestRunResult, mutant: TestRunResult) -> dict:
    """Measurement name (casefolded) -> first tick at which mutant and baseline disagree."""
    out = {}
    base_m = {m.name.casefold(): m for m in base.measurements}
    mut_m = {m.name.casefold(): m for m in mutant.measurements}
    for key in base_m.keys() | mut_m.keys():
        b, m = base_m.get(key), mut_m.get(key)
        if b is None or m is None:
            out[key] = (b or m).armed_at
            continue
        if (b.status, b.duration_us) == (m.status, m.duration_us):
            continue
        ticks = [t for t in (_first_diff(b.trigger_at, m.trigger_at), _first_diff(b.stopper_at, m.stopper_at))
                 if t is not None]
        out[key] = min(ticks) if ticks else m.armed_at
    return out


def _judge(m: Mutation, base: TestRunResult, mutant: TestRunResult) -> ValidationRow:
    if mutant.error:
        return ValidationRow(m, Verdict.ABORTED.value, Verdict.ABORTED.value, True, None,
                             m.expect.verdict == Verdict.ABORTED.value and m.expect.tick is None,
                             f"mutant did not run: {mutant.error}")
    deviations = measurement_deviations(base, mutant)
    failing = [a for a in mutant.violations if a.severity >= Severity.WARNING]
    verdict = mutant.verdict.value
    if verdict == Verdict.PASSED.value and deviations:
        verdict = Verdict.FAILED.value
    detected = verdict != base.verdict.value

    target = m.expect.target.casefold()
    notes = []
    if target:
        hits = [a.at for a in failing if a.message.casefold() == target]
        if hits:
            tick = min(hits)
        elif target in deviations:
            tick = deviations[target]
        else:
            tick = None
            if detected:
                notes.append(f"detected, but not through {m.expect.target!r}")
    else:
        ticks = [a.at for a in failing] + list(deviations.values())
        tick = min(ticks) if ticks and detected else None
    if not detected:
        tick = None
        notes.append("undetected: mutant verdict equals baseline, detection tick none")

    ok = verdict == m.expect.verdict
    if not ok:
        notes.append(f"expected verdict {m.expect.verdict}, got {verdict}")
    if m.expect.tick is not None and tick != m.expect.tick:
        ok = False
        notes.append(f"expected detection at tick {m.expect.tick}, got {tick}")
    if m.expect.duration_delta is not None:
        key = target
        b = next((x for x in base.measurements if x.name.casefold() == key), None)
        x = next((x for x in mutant.measurements if x.name.casefold() == key), None)
        delta = (x.duration_us - b.duration_us
                 if b is not None and x is not None and b.duration_us is not None
                 and x.duration_us is not None else None)
        if delta != m.expect.duration_delta:
            ok = False
            notes.append(f"expected duration delta {m.expect.duration_delta}, got {delta}")
    return ValidationRow(m, verdict, mutant.verdict.value, detected, tick, ok, "; ".join(notes))


def run_baseline(instances, smap, dut, max_ticks=DEFAULT_MAX_TICKS, parallel=1):
    """Run the unmutated instances; raise :class:`ValidationError` unless all pass."""
    results = run_instances(instances, smap, dut, max_ticks=max_ticks, parallel=parallel)
    bad = [r for r in results if r.verdict is not Verdict.PASSED]
    if bad:
        lines = []
        for r in bad:
            why = r.error or "; ".join(f"tick {a.at}: {a.signal} is {a.observed.literal}, "
                                       f"expected {a.expected.literal} ({a.message})"
                                       for a in r.violations)
            lines.append(f"{r.instance_id}: {r.verdict.value}: {why}")
        raise ValidationError("cannot validate against a failing baseline:\n  " + "\n  ".join(lines))
    return results


def run_validation(instances, mutations, smap, dut, max_ticks=DEFAULT_MAX_TICKS, parallel=1,
                   baseline=None) -> ValidationReport:
    """Run every mutation against its instance and compare with the baseline."""
    instances = list(instances)
    if baseline is None:
        baseline = run_baseline(instances, smap, dut, max_ticks, parallel)
    by_id = {i.full_id.casefold(): (i, r) for i, r in zip(instances, baseline)}
    mutants = []
    for m in mutations:
        found = by_id.get(m.test.casefold())
        if found is None:
            raise MutationError(f"{m.describe()}: no such test instance")
        mutants.append(apply_mutation(found[0], m))
    results = run_instances(mutants, smap, dut, max_ticks=max_ticks, parallel=parallel)
    rows = tuple(_judge(m, by_id[m.test.casefold()][1], r) for m, r in zip(mutations, results))
    return ValidationReport(rows, tuple(i.full_id for i in instances))


# -- generating --------------------------------------------------------------

def stimulus_row(instance: TestInstance, signal: str, default: LogicLevel, end_tick: int):
    """Committed levels of one stimulus for ticks 0..end_tick, from the schedule alone.

    Stimuli do not depend on the DUT, so this needs no simulation: at each
    tick the last assignment in (process, statement) order wins, and the
    level holds until the next assignment.
    """
    sched = static_schedule(instance)
    writes = {}
    key = signal.casefold()
    for rows in sched.timed:
        for tick, st in rows:
            if isinstance(st, Assign) and st.signal.casefold() == key:
                writes[tick] = int(st.level)
    row, lvl = [], int(default)
    for t in range(end_tick + 1):
        lvl = writes.get(t, lvl)
        row.append(lvl)
    return row


def _scan(levels, initial, edge, start):
    prev = initial if start == 0 else levels[start - 1]
    for t in range(start, len(levels)):
        if edge.matches(prev, levels[t]):
            return t
        prev = levels[t]
    return None


def _stopper_flip_tick(result, meas):
    """Expected detection tick of flipping ``meas``'s stopper edge, by scanning the baseline trace."""
    if meas.trigger_at is None:
        return None
    tr = result.trace
    i = tr.index(meas.stopper)
    levels = [int(v) for v in tr.samples[i]]
    same = meas.stopper.casefold() == meas.trigger.casefold()
    start = meas.trigger_at + 1 if same else meas.trigger_at
    flipped = _scan(levels, int(tr.initial[i]), ~meas.stopper_edge, start)
    return _first_diff(meas.stopper_at, flipped)


def _timed_index(sched, p_index, s_index):
    return sched.timed[p_index][s_index][0]


def generate_mutations(instances, results, smap) -> list[Mutation]:
    """One mutation per assertion and per measurement of every instance.

    Assertions get ``flip_assert_expected``, expected at the assert's
    scheduled tick. Measurements get ``rename_measure_stopper_edge`` with
    the tick predicted from the baseline trace; if that flip cannot change
    the result (no edge either way), the assignment that produced the
    trigger edge is flipped instead, predicted from the schedule.
    NOTE-severity assertions are skipped: a NOTE never fails a test.
    """
    out = []
    for inst, res in zip(instances, results):
        sched = static_schedule(inst)
        meas_by_name = {m.name.casefold(): m for m in res.measurements}
        for p_i, proc in enumerate(inst.processes):
            for s_i, st in enumerate(proc.statements):
                if isinstance(st, Assert) and st.severity >= Severity.WARNING:
                    verdict = "aborted" if st.severity is Severity.FAILURE else "failed"
                    out.append(Mutation(MutationKind.FLIP_ASSERT_EXPECTED, inst.full_id, proc.name, s_i,
                                        expect=ExpectedDetection(st.message, verdict,
                                                                 _timed_index(sched, p_i, s_i))))
                elif isinstance(st, Measure):
                    meas = meas_by_name[st.name.casefold()]
                    tick = _stopper_flip_tick(res, meas)
                    if tick is not None:
                        out.append(Mutation(MutationKind.RENAME_MEASURE_STOPPER_EDGE, inst.full_id,
                                            proc.name, s_i, expect=ExpectedDetection(st.name, "failed", tick)))
                        continue
                    alt = _trigger_flip(inst, sched, meas, smap, res)
                    out.append(alt or Mutation(MutationKind.RENAME_MEASURE_STOPPER_EDGE, inst.full_id,
                                               proc.name, s_i, expect=ExpectedDetection(st.name, "failed")))
    return out


def _trigger_flip(inst, sched, meas, smap, res):
    sig = smap.get(meas.trigger)
    if sig is None or sig.direction.value != "stimulus" or meas.trigger_at is None:
        return None
    key = meas.trigger.casefold()
    chosen = None
    for p_i, rows in enumerate(sched.timed):
        for s_i, (tick, st) in enumerate(rows):
            if isinstance(st, Assign) and st.signal.casefold() == key and tick == meas.trigger_at:
                chosen = (p_i, s_i)  # last writer at that tick wins
    if chosen is None:
        return None
    p_i, s_i = chosen
    m = Mutation(MutationKind.FLIP_STIMULUS_LEVEL, inst.full_id, inst.processes[p_i].name, s_i)
    mutant = apply_mutation(inst, m)
    end = res.end_tick
    base_row = stimulus_row(inst, meas.trigger, sig.default_level, end)
    mut_row = stimulus_row(mutant, meas.trigger, sig.default_level, end)
    init = int(sig.default_level)
    t_base = _scan(base_row, init, meas.trigger_edge, meas.armed_at)
    t_mut = _scan(mut_row, init, meas.trigger_edge, meas.armed_at)
    if t_base == t_mut:
        return None
    return replace(m, expect=ExpectedDetection(meas.name, "failed", _first_diff(t_base, t_mut)))


# -- file format -------------------------------------------------------------

def load_mutations(text: str, source: str = "<mutations>") -> list[Mutation]:
    """Parse ``<mutations><mutation .../></mutations>``; see the format docs."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = exc.position
        raise MutationError(f"{source}:{line}:{col}: malformed mutation file: {exc}") from None
    if root.tag != "mutations":
        raise MutationError(f"{source}: root element must be <mutations>, found <{root.tag}>")
    out = []
    for k, el in enumerate(root, 1):
        if el.tag != "mutation":
            raise MutationError(f"{source}: unexpected element <{el.tag}>")
        where = f"{source}: mutation {k}"
        try:
            kind = MutationKind(el.get("kind", ""))
        except ValueError:
            raise MutationError(f"{where}: unknown kind {el.get('kind')!r}") from None
        for attr in ("test", "process", "index"):
            if el.get(attr) is None:
                raise MutationError(f"{where}: missing attribute {attr!r}")
        exp = el.find("expect")
        expect = ExpectedDetection()
        if exp is not None:
            expect = ExpectedDetection(
                target=exp.get("target", ""),
                verdict=exp.get("verdict", "failed"),
                tick=_opt_int(exp.get("tick"), where),
                duration_delta=_opt_int(exp.get("duration-delta"), where),
            )
        out.append(Mutation(kind, el.get("test"), el.get("process"), _opt_int(el.get("index"), where),
                            _opt_int(el.get("param"), where) or 0, expect))
    return out


def _opt_int(value, where):
    if value is None or value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise MutationError(f"{where}: {value!r} is not an integer") from None


def dump_mutations(mutations) -> str:
    root = ET.Element("mutations")
    for m in mutations:
        el = ET.SubElement(root, "mutation", kind=m.kind.value, test=m.test, process=m.process,
                           index=str(m.index))
        if m.param:
            el.set("param", str(m.param))
        e = m.expect
        attrs = {"verdict": e.verdict}
        if e.target:
            attrs["target"] = e.target
        if e.tick is not None:
            attrs["tick"] = str(e.tick)
        if e.duration_delta is not None:
            attrs["duration-delta"] = str(e.duration_delta)
        ET.SubElement(el, "expect", attrs)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


__all__ = [
    "ExpectedDetection", "Mutation", "MutationKind", "ValidationReport", "ValidationRow",
    "apply_mutation", "dump_mutations", "generate_mutations", "load_mutations",
    "measurement_deviations", "run_baseline", "run_validation", "stimulus_row",
]
