"""Walk-through: reaction times of the sample interlock DUT.

Drops vms_atot_2_a at 100 us and measures how long each downstream output
takes to follow. Prints the measurement table and a time diagram.

    python3 demos/reaction_times.py
"""

from pathlib import Path

import teststand as ts
from teststand.waveform import default_window, render_waveform

# the signal map says which lines we drive and which we watch
smap = ts.load_signal_map(Path(ts.data_path("sample_signals.xml")).read_text(), "sample_signals.xml")
dut = ts.load_dut_model(Path(ts.data_path("sample_dut.xml")).read_text(), smap)

(test,) = ts.load_instances(ts.data_path("reaction_times.pst"))
print("running", test.full_id)
result = ts.run_instance(test, smap, dut)
print("verdict:", result.verdict.value, "| ended at tick", result.end_tick)

print()
print(f"{'trigger':<20}{'stopper':<26}{'us':>6}")
for m in result.measurements:
    print(f"{m.trigger_label:<20}{m.stopper_label:<26}{m.duration_us:>6}")

# the delayed outputs all move after the trigger; the slow ones need the compressed lanes
print()
window = default_window(result)
print(render_waveform(result.trace, ["vms_atot_2_a", "atot_1", "atot_sta_1", "etot_1", "mmcdc4a_no_beam"],
                      window))

# the DUT's own watchdog saw the beam-off response in time
for ev in result.events:
    if ev.kind != "edge":
        print(ev.to_line())
