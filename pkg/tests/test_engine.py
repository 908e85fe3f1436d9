from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teststand import EngineError, LogicLevel, Verdict, load_dut_model, load_signal_map, run_instance, run_instances
from teststand.dsl.ast import Assert, Assign, Duration, Measure, Severity, StopAfter, WaitFor
from teststand.engine import AssertionResult, MeasurementStatus, evaluate_severity, static_schedule
from teststand.expand import FlatProcess, TestInstance, format_instance, load_instances
from teststand.logic import Edge

from oracles import (
    random_dut, random_instance, random_signal_map, reference_outputs, scan_measurement, seeded,
    stimulus_rows,
)

REACTION_TABLE = [
    ("fall vms_atot_2_a", "rise atot_sta_1", 100),
    ("fall vms_atot_2_a", "rise atot_sta_2", 100),
    ("fall vms_atot_2_a", "rise mmcdc3a_no_beam", 100),
    ("fall vms_atot_2_a", "rise mmcdc4a_no_beam", 2300),
    ("fall vms_atot_2_a", "fall atot_1", 6),
    ("fall vms_atot_2_a", "fall etot_1", 2006),
    ("fall vms_atot_2_a", "fall etot_2", 2006),
]

WIRE_SIGNALS = """<signals>
  <signal name="A" direction="stimulus"/>
  <signal name="B" direction="stimulus"/>
  <signal name="Y" direction="monitor"/>
</signals>"""


@pytest.fixture(scope="module")
def wire():
    """A drives Y through a zero-tick wire; B is unused."""
    smap = load_signal_map(WIRE_SIGNALS)
    return smap, load_dut_model('<dut><input name="A"/><input name="B"/><output name="Y"/>'
                                '<delay from="A" to="Y" ticks="0"/></dut>', smap)


def inst(*procs):
    return TestInstance("T", (), tuple(FlatProcess(f"P{i}", tuple(p)) for i, p in enumerate(procs)))


def w(n):
    return WaitFor(Duration(n, "us"))


def a(sig, lvl):
    return Assign(sig, LogicLevel(lvl))


class TestReactionTable:
    def test_rows(self, reaction, smap, dut):
        res = run_instance(reaction, smap, dut)
        rows = [(m.trigger_label, m.stopper_label, m.duration_us) for m in res.measurements]
        assert rows == REACTION_TABLE
        assert all(m.status is MeasurementStatus.COMPLETED for m in res.measurements)
        assert res.verdict is Verdict.PASSED
        assert res.end_tick == 3100

    def test_matches_trace_scan(self, reaction, smap, dut):
        res = run_instance(reaction, smap, dut)
        for m in res.measurements:
            got = scan_measurement(res.trace, m.trigger, m.trigger_edge, m.stopper, m.stopper_edge, m.armed_at)
            assert got == (m.trigger_at, m.stopper_at)


class TestInterlockSample:
    def test_all_pass_on_sample_dut(self, interlock_suite, smap, dut):
        results = [run_instance(i, smap, dut) for i in interlock_suite]
        assert [r.verdict for r in results] == [Verdict.PASSED] * 4
        assert all(not r.violations for r in results)

    def test_broken_dut_fails_experiment_only(self, interlock_suite, smap, broken_dut):
        results = {r.instance_id.split("__", 1)[1]: r for r in (run_instance(i, smap, broken_dut) for i in interlock_suite)}
        assert results["Experiment__Master"].verdict is Verdict.FAILED
        assert results["Experiment__NotMaster"].verdict is Verdict.FAILED
        assert results["Therapy__Master"].verdict is Verdict.PASSED
        assert results["Therapy__NotMaster"].verdict is Verdict.PASSED
        (v,) = results["Experiment__Master"].violations
        assert (v.at, v.signal, v.expected, v.observed) == (200, "OUTPUT_ILK", LogicLevel.LOW, LogicLevel.HIGH)
        assert v.message == "No treatment allowed in experiment"

    def test_interlock_reaction_measured(self, interlock_suite, smap, dut):
        res = run_instance(interlock_suite[0], smap, dut)
        got = {m.name: (m.armed_at, m.trigger_at, m.stopper_at, m.duration_us) for m in res.measurements}
        assert got == {"time to clear interlocks": (5, 10, 121, 111), "interlock reaction": (5, 120, 121, 1)}

    def test_therapy_measurements_incomplete_but_pass(self, interlock_suite, smap, dut):
        res = run_instance(interlock_suite[2], smap, dut)
        assert {m.status for m in res.measurements} == {MeasurementStatus.NO_STOPPER}
        assert res.verdict is Verdict.PASSED

    def test_end_tick_covers_stop_after(self, interlock_suite, smap, dut):
        assert run_instance(interlock_suite[0], smap, dut).end_tick == 300

    def test_expanded_source_runs_the_same(self, interlock_suite, smap, dut, tmp_path):
        # expansion is syntactic: print, reparse, run gives the same result
        for i in interlock_suite:
            path = tmp_path / "x.pst"
            path.write_text(format_instance(i))
            (again,) = load_instances(path)
            got, want = run_instance(again, smap, dut), run_instance(i, smap, dut)
            # the flat text carries the full id as its own base id
            assert replace(got, base_id=want.base_id, variant_tags=want.variant_tags) == want


class TestMeasurements:
    def test_no_trigger(self, wire):
        smap, dut = wire
        res = run_instance(inst([Measure(Edge.RISING, "B", Edge.RISING, "Y", "m"), w(10)]), smap, dut)
        (m,) = res.measurements
        assert m.status is MeasurementStatus.NO_TRIGGER and m.duration_us is None
        assert res.verdict is Verdict.PASSED

    def test_same_tick_different_signal_is_zero(self, wire):
        smap, dut = wire
        res = run_instance(inst([Measure(Edge.RISING, "A", Edge.RISING, "Y", "m"), w(3), a("A", 1), w(3)]), smap, dut)
        (m,) = res.measurements
        assert (m.trigger_at, m.stopper_at, m.duration_us) == (3, 3, 0)

    def test_same_signal_needs_later_edge(self, wire):
        smap, dut = wire
        res = run_instance(inst([Measure(Edge.RISING, "A", Edge.RISING, "A", "m"), w(2), a("A", 1), w(2), a("A", 0),
                                 w(2), a("A", 1), w(2)]), smap, dut)
        (m,) = res.measurements
        assert (m.trigger_at, m.stopper_at) == (2, 6)

    def test_edges_before_arming_ignored(self, wire):
        smap, dut = wire
        res = run_instance(inst([a("A", 1), w(5), Measure(Edge.RISING, "A", Edge.FALLING, "A", "m"), w(5)]), smap, dut)
        assert res.measurements[0].status is MeasurementStatus.NO_TRIGGER


class TestAssertions:
    def test_reads_previous_sample(self, wire):
        smap, dut = wire
        res = run_instance(inst([w(5), a("A", 1), w(1)],
                                [w(5), Assert("Y", LogicLevel.LOW), w(1), Assert("Y", LogicLevel.HIGH)]), smap, dut)
        assert [(r.at, r.violated) for r in res.assertions] == [(5, False), (6, False)]

    def test_tick_zero_sees_power_up(self, smap, dut):
        res = run_instance(inst([Assert("OUTPUT_ILK", LogicLevel.LOW), Assert("atot_1", LogicLevel.HIGH)]), smap, dut)
        assert not res.violations

    def test_last_assert_per_signal_per_tick_wins(self, wire):
        smap, dut = wire
        res = run_instance(inst([Assert("Y", LogicLevel.HIGH, "first")], [Assert("Y", LogicLevel.LOW, "second")]),
                           smap, dut)
        assert [r.message for r in res.assertions] == ["second"]
        assert res.verdict is Verdict.PASSED

    @pytest.mark.parametrize("severity, verdict", [
        (Severity.NOTE, Verdict.PASSED), (Severity.WARNING, Verdict.FAILED),
        (Severity.ERROR, Verdict.FAILED), (Severity.FAILURE, Verdict.ABORTED),
    ])
    def test_severity(self, wire, severity, verdict):
        smap, dut = wire
        res = run_instance(inst([w(3), Assert("Y", LogicLevel.HIGH, "m", severity), w(3)]), smap, dut)
        assert res.verdict is verdict
        assert len(res.violations) == 1

    def test_failure_aborts_and_truncates(self, wire):
        smap, dut = wire
        res = run_instance(inst([w(50), Assert("Y", LogicLevel.HIGH, "stop", Severity.FAILURE), w(150)],
                                [w(60), Assert("Y", LogicLevel.HIGH, "never reached")]), smap, dut)
        assert res.verdict is Verdict.ABORTED
        assert res.end_tick == 50
        assert res.trace.length == 51
        assert [r.message for r in res.assertions] == ["stop"]

    def test_evaluate_severity_directly(self):
        def r(sev, ok):
            return AssertionResult(0, "Y", LogicLevel.HIGH, LogicLevel.HIGH if ok else LogicLevel.LOW, sev, "")
        assert evaluate_severity([]) is Verdict.PASSED
        assert evaluate_severity([r(Severity.NOTE, False)]) is Verdict.PASSED
        assert evaluate_severity([r(Severity.WARNING, False)]) is Verdict.FAILED
        assert evaluate_severity([r(Severity.ERROR, False), r(Severity.FAILURE, False)]) is Verdict.ABORTED
        assert evaluate_severity([r(Severity.FAILURE, True)]) is Verdict.PASSED


class TestOverwrite:
    def test_later_assign_wins(self, wire):
        smap, dut = wire
        res = run_instance(inst([w(2), a("A", 1), a("A", 0), a("A", 1), w(2)]), smap, dut)
        assert list(res.trace.row("A")) == [0, 0, 1, 1, 1]

    def test_across_processes_declaration_order(self, wire):
        smap, dut = wire
        res = run_instance(inst([w(2), a("A", 1), w(2)], [w(2), a("A", 0), w(2)]), smap, dut)
        assert res.trace.row("A")[2] == 0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_prefix_write_is_invisible(self, seed):
        """Inserting an earlier, different write at the same tick changes nothing."""
        rng = seeded(seed)
        smap = random_signal_map(rng, 3, 2)
        dut = random_dut(rng, smap)
        base = random_instance(rng, smap, n_measures=2)
        p = base.processes[0]
        idx = [k for k, s in enumerate(p.statements) if isinstance(s, Assign)]
        if not idx:
            return
        k = rng.choice(idx)
        target = p.statements[k]
        noise = Assign(target.signal, ~target.level)
        mutated = p.statements[:k] + (noise,) + p.statements[k:]
        other = TestInstance("RANDOM", (), (FlatProcess(p.name, mutated),) + base.processes[1:])
        r0, r1 = run_instance(base, smap, dut), run_instance(other, smap, dut)
        assert r0.trace == r1.trace and r0.measurements == r1.measurements

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**9))
    def test_hold_between_commits(self, seed):
        rng = seeded(seed)
        smap = random_signal_map(rng, 3, 2)
        dut = random_dut(rng, smap)
        i = random_instance(rng, smap)
        res = run_instance(i, smap, dut)
        stim = [s for s in smap.signals if s.direction.value == "stimulus"]
        rows = stimulus_rows(i, [s.name for s in stim], [s.default_level for s in stim], res.trace.length)
        for s in stim:
            assert list(res.trace.row(s.name)) == rows[s.name]


class TestReferenceSimulation:
    @settings(max_examples=80, deadline=None)
    @given(st.integers(0, 10**9))
    def test_trace_matches_naive_netlist(self, seed):
        rng = seeded(seed)
        smap = random_signal_map(rng, rng.randint(2, 4), rng.randint(1, 4))
        dut = random_dut(rng, smap)
        i = random_instance(rng, smap)
        res = run_instance(i, smap, dut)
        stim = [s for s in smap.signals if s.direction.value == "stimulus"]
        rows = stimulus_rows(i, [s.name for s in stim], [s.default_level for s in stim], res.trace.length)
        outs, power = reference_outputs(dut, rows, res.trace.length)
        for o in dut.outputs:
            assert list(res.trace.row(o)) == outs[o]
            assert int(res.trace.initial[res.trace.index(o)]) == power[o]
        for m in res.measurements:
            assert scan_measurement(res.trace, m.trigger, m.trigger_edge, m.stopper, m.stopper_edge,
                                    m.armed_at) == (m.trigger_at, m.stopper_at)
            if m.duration_us is not None:
                assert m.duration_us >= 0


class TestSchedule:
    def test_end_tick_bounds(self, wire):
        smap, dut = wire
        i = inst([w(7), a("A", 1), w(3)], [StopAfter(Duration(20, "us")), w(2)])
        sched = static_schedule(i)
        assert sched.finish == [10, 2] and sched.deadlines == [20] and sched.end_tick == 20
        assert run_instance(i, smap, dut).end_tick == 20

    def test_trailing_wait_counts(self, wire):
        smap, dut = wire
        assert run_instance(inst([a("A", 1), w(40)]), smap, dut).end_tick == 40


class TestPreRunChecks:
    @pytest.mark.parametrize("stmt, fragment", [
        (a("NOPE", 1), "unknown signal"),
        (a("Y", 1), "cannot assign monitor"),
        (Assert("A", LogicLevel.HIGH), "assertion on stimulus"),
        (Assert("NOPE", LogicLevel.HIGH), "unknown signal"),
        (Measure(Edge.RISING, "A", Edge.RISING, "NOPE", "m"), "unknown signal"),
    ])
    def test_rejected(self, wire, stmt, fragment):
        smap, dut = wire
        with pytest.raises(EngineError, match=fragment):
            run_instance(inst([stmt]), smap, dut)

    def test_max_ticks(self, wire):
        smap, dut = wire
        with pytest.raises(EngineError, match="above the limit"):
            run_instance(inst([w(1000)]), smap, dut, max_ticks=999)

    def test_errors_become_aborted_results(self, wire):
        smap, dut = wire
        good, bad = inst([w(2)]), inst([a("Y", 1)])
        results = run_instances([bad, good], smap, dut)
        assert [r.verdict for r in results] == [Verdict.ABORTED, Verdict.PASSED]
        assert "cannot assign monitor" in results[0].error


class TestSuiteRunner:
    def test_deterministic(self, interlock_suite, smap, dut):
        assert run_instance(interlock_suite[0], smap, dut) == run_instance(interlock_suite[0], smap, dut)

    def test_parallel_preserves_order(self, interlock_suite, reaction, smap, dut):
        items = [reaction, *interlock_suite] * 2
        serial = run_instances(items, smap, dut)
        parallel = run_instances(items, smap, dut, parallel=3)
        assert serial == parallel

    def test_fail_fast(self, interlock_suite, smap, broken_dut):
        results = run_instances(interlock_suite, smap, broken_dut, fail_fast=True)
        assert len(results) == 1 and results[0].verdict is Verdict.FAILED
        assert len(run_instances(interlock_suite, smap, broken_dut, fail_fast=True, parallel=2)) == 1
