import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teststand import ExpandError, ParseError, expand_macros, load_instances, resolve_includes, unroll_loops
from teststand.dsl import Assign, Duration, WaitFor, parse_text
from teststand.expand import expand_suite, format_instance
from teststand.logic import LogicLevel

from oracles import brute_force_instance_count, random_loop_structure, render_loop_test, seeded


def files(mapping):
    def loader(path):
        try:
            return mapping[path]
        except KeyError:
            raise OSError(f"no such file {path}") from None
    return loader


def instances_of(text, **more):
    return load_instances("main.pst", loader=files({"main.pst": text, **more}))


class TestIncludes:
    def test_included_macro_available(self):
        lib = "DefineMacro SET_INITIAL_CONDITIONS\n A <= OK;\nEndMacro\n"
        main = 'include "lib/defs.pst";\nTestID T\nBegin\nProcess P\ncallMacro SET_INITIAL_CONDITIONS\nEndProcess\nEndTestID'
        suite = parse_text(main, "main.pst")
        merged = resolve_includes(suite, files({"lib/defs.pst": lib}))
        assert [m.name for m in merged.macros] == ["SET_INITIAL_CONDITIONS"]
        assert merged.includes == ()

    def test_relative_to_including_file(self):
        got = instances_of('include "lib/a.pst";\nTestID T\nBegin\nProcess P\ncallMacro B\nEndProcess\nEndTestID',
                           **{"lib/a.pst": 'include "b.pst";', "lib/b.pst": "DefineMacro B\nx <= OK;\nEndMacro"})
        assert got[0].processes[0].statements == (Assign("x", LogicLevel.HIGH),)

    def test_self_include_is_cycle(self):
        with pytest.raises(ExpandError, match="include cycle: main.pst -> main.pst"):
            instances_of('include "main.pst";')

    def test_two_file_cycle(self):
        with pytest.raises(ExpandError, match="include cycle: a.pst -> main.pst -> a.pst|"
                                              "include cycle: main.pst -> a.pst -> main.pst"):
            instances_of('include "a.pst";', **{"a.pst": 'include "main.pst";'})

    def test_duplicate_macro_names_both_sources(self):
        with pytest.raises(ExpandError) as info:
            instances_of('include "a.pst";\nDefineMacro X\nEndMacro', **{"a.pst": "DefineMacro X\nEndMacro"})
        assert "a.pst" in str(info.value) and "main.pst" in str(info.value)

    def test_diamond_merged_once(self):
        common = "DefineMacro C\nEndMacro"
        got = instances_of('include "a.pst"; include "b.pst";\nTestID T\nProcess P\ncallMacro C\nEndProcess\nEndTestID',
                           **{"a.pst": 'include "c.pst";', "b.pst": 'include "c.pst";', "c.pst": common})
        assert len(got) == 1

    def test_missing_file(self):
        with pytest.raises(ExpandError, match="cannot read"):
            instances_of('include "nope.pst";')

    def test_parse_error_in_include_is_located(self):
        with pytest.raises(ParseError) as info:
            instances_of('include "a.pst";', **{"a.pst": "\n\nEndLoop"})
        assert info.value.source == "a.pst" and info.value.line == 3


def _macro_test(macros, body):
    return parse_text(f"{macros}\nTestID T\nBegin\nProcess P\n{body}\nEndProcess\nEndTestID")


class TestMacros:
    def test_splice_in_tag_arm(self):
        suite = _macro_test("DefineMacro M\n a <= OK;\n b <= NOK;\nEndMacro",
                            "Loop Tag X callMacro M\n c <= OK; EndTag EndLoop")
        arm = expand_macros(suite).tests[0].processes[0].body[0].arms[0]
        assert arm.body[:2] == (Assign("a", LogicLevel.HIGH), Assign("b", LogicLevel.LOW))

    def test_empty_macro(self):
        suite = _macro_test("DefineMacro E\nEndMacro", "callMacro E\na <= OK;")
        assert expand_macros(suite).tests[0].processes[0].body == (Assign("a", LogicLevel.HIGH),)

    def test_nested_macros(self):
        suite = _macro_test("DefineMacro A\n callMacro B\nEndMacro\nDefineMacro B\n x <= OK;\nEndMacro",
                            "callMacro A")
        assert expand_macros(suite).tests[0].processes[0].body == (Assign("x", LogicLevel.HIGH),)

    def test_macro_may_contain_loop(self):
        got = instances_of("DefineMacro L\nLoop Tag A EndTag Tag B EndTag EndLoop\nEndMacro\n"
                           "TestID T\nProcess P\ncallMacro L\nEndProcess\nEndTestID")
        assert [i.full_id for i in got] == ["T__A", "T__B"]

    @pytest.mark.parametrize("macros, fragment", [
        ("DefineMacro A\n callMacro A\nEndMacro", "recursive macro expansion: A -> A"),
        ("DefineMacro A\n callMacro B\nEndMacro\nDefineMacro B\n callMacro A\nEndMacro",
         "recursive macro expansion: A -> B -> A"),
    ])
    def test_recursion_rejected(self, macros, fragment):
        with pytest.raises(ExpandError, match=fragment):
            expand_macros(_macro_test(macros, "callMacro A"))

    def test_undefined(self):
        with pytest.raises(ExpandError, match="undefined macro 'NOPE'"):
            expand_macros(_macro_test("", "callMacro NOPE"))


class TestUnroll:
    def test_interlock_suite_four_instances(self, interlock_suite):
        ids = [i.full_id for i in interlock_suite]
        assert ids == [
            "1_1_CHECK_BASIC_INTERLOCK__Experiment__Master",
            "1_1_CHECK_BASIC_INTERLOCK__Experiment__NotMaster",
            "1_1_CHECK_BASIC_INTERLOCK__Therapy__Master",
            "1_1_CHECK_BASIC_INTERLOCK__Therapy__NotMaster",
        ]

    def test_verification_arm_tracks_stimuli(self, interlock_suite):
        for inst in interlock_suite:
            (check,) = [s for s in inst.process("Verification_BASIC_INTERLOCK").statements
                        if type(s).__name__ == "Assert"]
            if "Experiment" in inst.variant_tags:
                assert check.expected is LogicLevel.LOW and check.message == "No treatment allowed in experiment"
            else:
                assert check.expected is LogicLevel.HIGH and check.message == "Unexpected interlock"

    def test_experiment_overrides_macro_default(self, interlock_suite):
        stim = interlock_suite[0].process("Stimuli").statements
        modes = [s.level for s in stim if isinstance(s, Assign) and s.signal == "MODE"]
        assert modes == [LogicLevel.LOW, LogicLevel.HIGH]

    def test_constants_resolved(self, interlock_suite):
        waits = [s.duration for s in interlock_suite[0].process("Verification_BASIC_INTERLOCK").statements
                 if isinstance(s, WaitFor)]
        assert waits == [Duration(200, "us")]

    def test_no_loops_single_instance(self):
        (inst,) = instances_of("TestID T\nProcess P\na <= OK;\nwait for 1 ms;\nEndProcess\nEndTestID")
        assert inst.full_id == "T" and inst.variant_tags == ()
        assert inst.processes[0].statements == (Assign("a", LogicLevel.HIGH), WaitFor(Duration(1000, "us")))

    def test_singleton_loop(self):
        (inst,) = instances_of("TestID T\nProcess P\nLoop Tag Only a <= OK; EndTag EndLoop\nEndProcess\nEndTestID")
        assert inst.full_id == "T__Only"
        assert inst.processes[0].statements == (Assign("a", LogicLevel.HIGH),)

    def test_independent_loops_product_order(self):
        got = instances_of("TestID T\nProcess P\n"
                           "Loop Tag A EndTag Tag B EndTag EndLoop\n"
                           "Loop Tag C EndTag Tag D EndTag Tag E EndTag EndLoop\n"
                           "EndProcess\nEndTestID")
        expected = [f"T__{x}__{y}" for x, y in itertools.product("AB", "CDE")]
        assert [i.full_id for i in got] == expected

    def test_same_set_any_order_binds(self):
        got = instances_of("TestID T\nProcess P\nLoop Tag A a <= OK; EndTag Tag B a <= NOK; EndTag EndLoop\nEndProcess\n"
                           "Process Q\nLoop Tag b x <= NOK; EndTag Tag a x <= OK; EndTag EndLoop\nEndProcess\nEndTestID")
        assert len(got) == 2
        for inst in got:
            a, x = inst.processes[0].statements[0], inst.processes[1].statements[0]
            assert a.level == x.level

    def test_partial_overlap_ambiguous(self):
        with pytest.raises(ExpandError, match="ambiguous"):
            instances_of("TestID T\nProcess P\nLoop Tag A EndTag Tag B EndTag EndLoop\n"
                         "Loop Tag B EndTag Tag C EndTag EndLoop\nEndProcess\nEndTestID")

    def test_nested_loops(self):
        got = instances_of("TestID T\nProcess P\nLoop Tag A Loop Tag X EndTag Tag Y EndTag EndLoop EndTag "
                           "Tag B EndTag EndLoop\nEndProcess\nEndTestID")
        assert [i.full_id for i in got] == ["T__A__X", "T__A__Y", "T__B"]

    def test_duplicate_measure_after_unroll(self):
        # only visible once the macro has been spliced twice
        with pytest.raises(ExpandError, match="duplicate measure name 'm'"):
            instances_of('DefineMacro M\nmeasure rising_edge(a) to rising_edge(b) name "m";\nEndMacro\n'
                         'TestID T\nProcess P\ncallMacro M\ncallMacro M\nEndProcess\nEndTestID')

    def test_format_instance_reparses(self, interlock_suite):
        for inst in interlock_suite:
            (again,) = instances_of(format_instance(inst))
            assert again.full_id == inst.full_id
            assert again.processes == inst.processes


class TestCountLaw:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 10**9))
    def test_matches_brute_force(self, seed):
        rng = seeded(seed)
        sets, placements = random_loop_structure(rng)
        text = render_loop_test(sets, placements)
        got = instances_of(text)
        loops = [order for _, _, order in placements]
        assert len(got) == brute_force_instance_count(loops)
        expected = 1
        for s in sets:
            expected *= len(s)
        assert len(got) == expected
        assert len({i.full_id for i in got}) == len(got)


def test_expand_suite_rejects_duplicate_ids():
    suite = parse_text("TestID T__A\nProcess P\nEndProcess\nEndTestID\n"
                       "TestID T\nProcess P\nLoop Tag A EndTag EndLoop\nEndProcess\nEndTestID")
    with pytest.raises(ExpandError, match="not unique"):
        expand_suite(suite, files({}), "main.pst")


def test_unroll_loops_directly():
    test = parse_text("TestID T\nProcess P\nLoop Tag A EndTag Tag B EndTag EndLoop\nEndProcess\nEndTestID").tests[0]
    assert [i.variant_tags for i in unroll_loops(test)] == [("A",), ("B",)]
