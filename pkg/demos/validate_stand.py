"""Walk-through: does the stand notice broken tests?

Each mutation corrupts one statement of a passing test. A useful stand
flags every mutant, at the tick where the corruption first shows.

    python3 demos/validate_stand.py
"""

from pathlib import Path

import teststand as ts
from teststand.validate import (
    ExpectedDetection, Mutation, MutationKind, generate_mutations, run_baseline, run_validation,
)

smap = ts.load_signal_map(Path(ts.data_path("sample_signals.xml")).read_text(), "sample_signals.xml")
dut = ts.load_dut_model(Path(ts.data_path("sample_dut.xml")).read_text(), smap)
tests = ts.load_instances(ts.data_path("basic_interlock.pst"))

baseline = run_baseline(tests, smap, dut)  # raises if any test fails as written
mutations = generate_mutations(tests, baseline, smap)

# a hand-written one: start the treatment 50 us later. The reaction itself
# keeps its 1 us, but the reset-to-clear span grows by exactly 50 us and its
# stopper moves away from tick 121, which is where the deviation shows.
mutations.append(Mutation(MutationKind.SHIFT_WAIT, tests[0].full_id, "Stimuli", 10, 50,
                          ExpectedDetection("time to clear interlocks", "failed", 121, duration_delta=50)))

report = run_validation(tests, mutations, smap, dut, baseline=baseline)
for row in report.rows:
    mark = "ok  " if row.matches_expectation else "MISS"
    print(f"{mark} tick {str(row.detection_tick):>4}  {row.mutation.describe()}")
print("overall:", "pass" if report.passed else "fail")
