"""Walk-through: one test source, four variants, two DUT builds.

The basic interlock test loops over operating mode and master area. On
the sample DUT all four variants pass. On a build where experiment mode
no longer blocks a treatment start, the experiment variants fail at the
tick of the check.

    python3 demos/interlock_variants.py
"""

from pathlib import Path

import teststand as ts
from teststand.expand import format_instance
from teststand.report import render_report

smap = ts.load_signal_map(Path(ts.data_path("sample_signals.xml")).read_text(), "sample_signals.xml")
good = ts.load_dut_model(Path(ts.data_path("sample_dut.xml")).read_text(), smap)
broken = ts.load_dut_model(Path(ts.data_path("sample_dut_no_experiment_ilk.xml")).read_text(), smap)

variants = ts.load_instances(ts.data_path("basic_interlock.pst"))
for v in variants:
    print(f"{v.full_id:<50} {v.statement_count} statements")

# what the engine actually runs for the first variant: no loops, no macros
print()
print(format_instance(variants[0]))

for label, dut in [("sample DUT", good), ("broken DUT", broken)]:
    results = ts.run_instances(variants, smap, dut)
    print(f"-- {label}")
    for r in results:
        line = f"   {r.verdict.value:<8}{r.instance_id}"
        for a in r.violations:
            line += f"  [tick {a.at}: {a.signal}={a.observed.literal}, {a.message}]"
        print(line)

# a markdown report, with the stamp left out so reruns diff cleanly
md = render_report(ts.run_instances(variants, smap, broken), "markdown", generated_at="")
print()
print("\n".join(md.splitlines()[:14]))
