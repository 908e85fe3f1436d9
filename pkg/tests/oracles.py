"""Independent reference implementations used to cross-check the package.

Nothing here calls into the engine or simulator; these are slow, obvious
re-statements of the rules, written against plain Python lists.
"""

from __future__ import annotations

import itertools
import random

from teststand.config import Delay, GateOp, Latch, Node, build_dut_model, load_signal_map
from teststand.dsl.ast import Assert, Assign, Duration, Measure, WaitFor
from teststand.expand import FlatProcess, TestInstance
from teststand.logic import Edge, LogicLevel


# -- measurement scan --------------------------------------------------------

def _is_edge(edge, before, after):
    if edge is Edge.RISING:
        return before == 0 and after == 1
    return before == 1 and after == 0


def scan_measurement(trace, trigger, trigger_edge, stopper, stopper_edge, armed_at):
    """First trigger edge at or after ``armed_at``, then first stopper edge at or after it."""
    ti, si = trace.index(trigger), trace.index(stopper)
    n = trace.samples.shape[1]

    def level(i, t):
        return int(trace.initial[i]) if t < 0 else int(trace.samples[i][t])

    trig = next((t for t in range(armed_at, n) if _is_edge(trigger_edge, level(ti, t - 1), level(ti, t))), None)
    if trig is None:
        return None, None
    first = trig + 1 if ti == si else trig
    stop = next((t for t in range(first, n) if _is_edge(stopper_edge, level(si, t - 1), level(si, t))), None)
    return trig, stop


# -- stimulus schedule -------------------------------------------------------

def stimulus_rows(instance, names, defaults, n_ticks):
    """{signal: [level per tick]} by walking each process's waits by hand."""
    writes = {}  # (tick) -> list of (order, signal, level)
    order = 0
    for proc in instance.processes:
        t = 0
        for st in proc.statements:
            if isinstance(st, Assign):
                writes.setdefault(t, []).append((order, st.signal.casefold(), int(st.level)))
                order += 1
            elif isinstance(st, WaitFor):
                t += st.duration.ticks
    rows = {}
    for name, d in zip(names, defaults):
        lvl, row = int(d), []
        for t in range(n_ticks):
            for _, sig, v in sorted(writes.get(t, [])):
                if sig == name.casefold():
                    lvl = v
            row.append(lvl)
        rows[name] = row
    return rows


# -- reference netlist -------------------------------------------------------

def _eval(op, vals):
    if op is GateOp.AND:
        return int(all(vals))
    if op is GateOp.OR:
        return int(any(vals))
    if op is GateOp.NOT:
        return 1 - vals[0]
    return vals[0]


def _fixpoint(model, base):
    """Settle combinational nodes and zero-tick delays by repeated sweeps."""
    v = dict(base)
    for _ in range(len(model.nodes) + len(model.delays) + 2):
        changed = False
        for n in model.nodes:
            x = _eval(n.op, [v[o] for o in n.operands])
            if v.get(n.id) != x:
                v[n.id], changed = x, True
        for d in model.delays:
            if d.ticks == 0 and v.get(d.target) != v[d.source]:
                v[d.target], changed = v[d.source], True
        if not changed:
            break
    return v


def reference_outputs(model, input_rows, n_ticks):
    """Output levels per tick for a watchdog-free model, from first principles."""
    latch = {la.id: int(la.initial) for la in model.latches}
    base = {name: int(d) for name, d in zip(model.inputs, model.input_defaults)}
    base.update(latch)
    # power-up: delay outputs equal their settled sources
    for d in model.delays:
        base.setdefault(d.target, 0)
    for _ in range(len(model.delays) + 3):
        v = _fixpoint(model, base)
        for d in model.delays:
            base[d.target] = v[d.source]
    power = _fixpoint(model, base)
    history = []  # settled nets per tick
    outs = {o: [] for o in model.outputs}
    for t in range(n_ticks):
        cur = {name: input_rows[name][t] for name in model.inputs}
        cur.update(latch)
        for d in model.delays:
            if d.ticks > 0:
                cur[d.target] = history[t - d.ticks][d.source] if t - d.ticks >= 0 else power[d.source]
        v = _fixpoint(model, cur)
        history.append(v)
        for o in model.outputs:
            outs[o].append(v.get(o, 1))
        for la in model.latches:
            latch[la.id] = 1 if v[la.set] else (0 if v[la.reset] else latch[la.id])
    return outs, {o: power.get(o, 1) for o in model.outputs}


# -- random cases ------------------------------------------------------------

def random_signal_map(rng, n_in, n_out):
    parts = ["<signals>"]
    for i in range(n_in):
        parts.append(f'<signal name="S{i}" direction="stimulus" default="{rng.choice(["low", "high"])}"/>')
    for i in range(n_out):
        parts.append(f'<signal name="M{i}" direction="monitor"/>')
    parts.append("</signals>")
    return load_signal_map("\n".join(parts))


def random_dut(rng, smap, max_delay=30):
    inputs = [s.name for s in smap.signals if s.direction.value == "stimulus"]
    outputs = [s.name for s in smap.signals if s.direction.value == "monitor"]
    latches = []
    for k in range(rng.randint(0, 2)):
        a, b = rng.sample(inputs, 2) if len(inputs) > 1 else (inputs[0], inputs[0])
        latches.append(Latch(f"L{k}", a, b, LogicLevel(rng.randint(0, 1))))
    nets = inputs + [la.id for la in latches]
    nodes = []
    for k in range(rng.randint(1, 6)):
        op = rng.choice(list(GateOp))
        arity = 1 if op in (GateOp.NOT, GateOp.BUF) else rng.randint(2, 3)
        nodes.append(Node(f"N{k}", op, tuple(rng.choice(nets) for _ in range(arity))))
        nets.append(f"N{k}")
    delays = [Delay(rng.choice(nets), o, rng.choice([0, rng.randint(1, max_delay)])) for o in outputs]
    return build_dut_model(smap, inputs, outputs, nodes, delays, latches)


def random_instance(rng, smap, n_proc=2, max_wait=40, n_measures=3, max_steps=10, tail=0):
    """Random stimulus processes plus one process arming ``n_measures`` measurements.

    ``tail`` adds a final wait so late stopper edges still fall inside the run.
    """
    stim = [s.name for s in smap.signals if s.direction.value == "stimulus"]
    every = [s.name for s in smap.signals]
    procs = []
    for p in range(n_proc):
        body = []
        for _ in range(rng.randint(2, max_steps)):
            r = rng.random()
            if r < 0.5:
                body.append(Assign(rng.choice(stim), LogicLevel(rng.randint(0, 1))))
            else:
                body.append(WaitFor(Duration(rng.randint(1, max_wait), "us")))
        procs.append(FlatProcess(f"P{p}", tuple(body)))
    meas = []
    for k in range(n_measures):
        meas.append(WaitFor(Duration(rng.randint(1, max_wait), "us")) if rng.random() < 0.3 else None)
        meas.append(Measure(rng.choice(list(Edge)), rng.choice(every), rng.choice(list(Edge)),
                            rng.choice(every), f"m{k}"))
    if tail:
        meas.append(WaitFor(Duration(tail, "us")))
    procs.append(FlatProcess("Meas", tuple(m for m in meas if m is not None)))
    return TestInstance("RANDOM", (), tuple(procs))


# -- loop structures ---------------------------------------------------------

def brute_force_instance_count(loop_tag_sets):
    """Enumerate every assignment of one tag per loop, keep the consistent ones.

    An assignment is consistent when loops with the same (case-insensitive)
    tag set picked the same tag. Returns the number of distinct consistent
    choices, the quantity unrolling must produce.
    """
    seen = set()
    for combo in itertools.product(*loop_tag_sets):
        picks = {}
        ok = True
        for tags, pick in zip(loop_tag_sets, combo):
            key = frozenset(t.casefold() for t in tags)
            if picks.setdefault(key, pick) != pick:
                ok = False
                break
        if ok:
            seen.add(tuple(sorted((tuple(sorted(k)), v) for k, v in picks.items())))
    return len(seen)


def random_loop_structure(rng, max_sets=4, max_arms=4, max_procs=3):
    """Tag-name sets (pairwise equal or disjoint) and their placement across processes."""
    n_sets = rng.randint(1, max_sets)
    sets = []
    for s in range(n_sets):
        arms = rng.randint(1, max_arms)
        sets.append([f"T{s}_{a}" for a in range(arms)])
    placements = []  # (process index, set index, arm order permutation)
    for s in range(n_sets):
        for _ in range(rng.randint(1, 3)):
            order = sets[s][:]
            rng.shuffle(order)
            placements.append((rng.randrange(max_procs), s, order))
    return sets, placements


def render_loop_test(sets, placements, test_id="LOOPS", max_procs=3):
    lines = [f"TestID {test_id}", "Begin"]
    for p in range(max_procs):
        lines.append(f"Process P{p}")
        lines.append("  wait for 1 us;")
        for pi, s, order in placements:
            if pi != p:
                continue
            lines.append("  Loop")
            for tag in order:
                lines += [f"    Tag {tag}", "      wait for 1 us;", "    EndTag"]
            lines.append("  EndLoop")
        lines.append("EndProcess")
    lines.append("EndTestID")
    return "\n".join(lines) + "\n"


# -- watchdog ----------------------------------------------------------------

def watchdog_by_hand(trigger_tick, response_tick, timeout, horizon):
    """Hand-stepped watchdog for one trigger and an optional response.

    Returns ``(last_measurement, trip_tick)``; the interlock output is LOW
    from ``trip_tick`` on.
    """
    armed = None
    for t in range(horizon):
        if armed is not None and t - armed > timeout:
            return None, t
        if armed is None and t == trigger_tick:
            armed = t
        if armed is not None and response_tick is not None and t == response_tick:
            return t - armed, None
    return None, None


def seeded(seed):
    return random.Random(seed)
