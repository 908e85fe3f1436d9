"""Formal-language driven unit-test stand for safety interlock logic.

Typical use::

    from teststand import load_signal_map, load_dut_model, load_instances, run_instance

    smap = load_signal_map(open("signals.xml").read())
    dut = load_dut_model(open("dut.xml").read(), smap)
    for inst in load_instances("tests.pst"):
        print(inst.full_id, run_instance(inst, smap, dut).verdict)
"""

from importlib import resources

from .config import (
    Direction, DutModel, SignalDef, SignalKind, SignalMap, dump_signal_map, load_dut_model,
    load_signal_map,
)
from .dut import DutEvent, DutState, dut_reset, dut_step, write_event_log
from .engine import (
    AssertionResult, MeasurementResult, MeasurementStatus, TestRunResult, Trace, Verdict,
    evaluate_severity, run_instance, run_instances,
)
from .errors import (
    ConfigError, EngineError, ExpandError, MutationError, ParseError, TestStandError,
    ValidationError,
)
from .expand import TestInstance, expand_macros, expand_suite, load_instances, resolve_includes, unroll_loops
from .logic import Edge, LogicLevel

__version__ = "0.1.0"


def data_path(name: str) -> str:
    """Filesystem path of a bundled sample file (see ``teststand/data``)."""
    return str(resources.files(__package__).joinpath("data", name))


__all__ = [
    "AssertionResult", "ConfigError", "Direction", "DutEvent", "DutModel", "DutState", "Edge",
    "EngineError", "ExpandError", "LogicLevel", "MeasurementResult", "MeasurementStatus",
    "MutationError", "ParseError", "SignalDef", "SignalKind", "SignalMap", "TestInstance",
    "TestRunResult", "TestStandError", "Trace", "ValidationError", "Verdict", "data_path",
    "dump_signal_map", "dut_reset", "dut_step", "evaluate_severity", "expand_macros",
    "expand_suite", "load_dut_model", "load_instances", "load_signal_map", "resolve_includes",
    "run_instance", "run_instances", "unroll_loops", "write_event_log",
]
