import sys
from pathlib import Path

import pytest

import teststand as ts


def _read(name):
    return Path(ts.data_path(name)).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def smap():
    return ts.load_signal_map(_read("sample_signals.xml"), "sample_signals.xml")


@pytest.fixture(scope="session")
def dut(smap):
    return ts.load_dut_model(_read("sample_dut.xml"), smap, "sample_dut.xml")


@pytest.fixture(scope="session")
def broken_dut(smap):
    """Same interlock, but starting a treatment in experiment mode no longer trips it."""
    return ts.load_dut_model(_read("sample_dut_no_experiment_ilk.xml"), smap)


@pytest.fixture(scope="session")
def interlock_suite():
    return ts.load_instances(ts.data_path("basic_interlock.pst"))


@pytest.fixture(scope="session")
def reaction():
    return ts.load_instances(ts.data_path("reaction_times.pst"))[0]


@pytest.fixture
def data_file():
    return ts.data_path


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines (one per criterion) after the run."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
