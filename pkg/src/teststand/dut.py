"""Tick-by-tick simulation of a :class:`~teststand.config.DutModel`.

One call to :meth:`DutSimulator.step` advances the device by one 1 us tick:

1. inputs are applied, latch outputs and delay-line heads are presented;
2. combinational nodes settle in topological order (zero-tick delays are
   plain wires here);
3. outputs are sampled, with tripped watchdogs forcing their interlock LOW;
4. watchdogs observe this tick's edges;
5. latches load their next state from the settled set/reset nets
   (set dominates) and delay lines shift by one.

A latch therefore shows a new state one tick after its set or reset input
changes, and a ``D``-tick delay line reproduces its source exactly ``D``
ticks later.

Every edge on a DUT input or output is time-stamped into the state's edge
log. Watchdog measurements and timeouts are emitted as events as well; the
event stream is what :func:`write_event_log` archives.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import repeat
from typing import Mapping, Optional, Sequence

from .config import DutModel, GateOp
from .logic import Edge, LogicLevel


@dataclass(frozen=True)
class EdgeRecord:
    signal: str
    edge: Edge
    tick: int


@dataclass(frozen=True)
class DutEvent:
    tick: int
    kind: str  # "edge" | "watchdog_measurement" | "watchdog_timeout"
    signal: Optional[str] = None
    edge: Optional[Edge] = None
    watchdog: Optional[str] = None
    duration_us: Optional[int] = None

    def to_line(self) -> str:
        if self.kind == "edge":
            return f"{self.tick} edge {self.signal} {self.edge.value}"
        return f"{self.tick} {self.kind} {self.watchdog} {self.duration_us}"

    @classmethod
    def from_line(cls, line: str) -> "DutEvent":
        tick, kind, a, b = line.split()
        if kind == "edge":
            return cls(int(tick), kind, signal=a, edge=Edge(b))
        return cls(int(tick), kind, watchdog=a, duration_us=int(b))


@dataclass
class WatchdogState:
    armed_at: Optional[int] = None
    last_measurement_us: Optional[int] = None
    tripped: bool = False


@dataclass
class DutState:
    model: DutModel
    net_names: tuple
    values: list  # settled net levels of the last step, aligned with net_names
    pipelines: list  # one deque per delay element, empty for zero-tick delays
    latches: list  # latch states, aligned with model.latches
    watchdogs: list
    io_names: tuple
    io_values: list  # last sampled DUT inputs then outputs, aligned with io_names
    edge_log: list = field(default_factory=list)
    tick: Optional[int] = None

    @property
    def nets(self) -> dict:
        return {n: LogicLevel(x) for n, x in zip(self.net_names, self.values)}

    @property
    def io(self) -> dict:
        return {n: LogicLevel(x) for n, x in zip(self.io_names, self.io_values)}

    def latch_state(self, latch_id) -> LogicLevel:
        ids = [la.id for la in self.model.latches]
        return LogicLevel(self.latches[ids.index(latch_id)])

    def copy(self) -> "DutState":
        """Independent copy; the immutable model is shared."""
        return replace(
            self,
            values=list(self.values),
            pipelines=[deque(p, maxlen=p.maxlen) for p in self.pipelines],
            latches=list(self.latches),
            watchdogs=[replace(w) for w in self.watchdogs],
            io_values=list(self.io_values),
            edge_log=list(self.edge_log),
        )

    def structure(self):
        """Plain-data view for equality checks."""
        return (
            list(self.values), [list(p) for p in self.pipelines], list(self.latches),
            [(w.armed_at, w.last_measurement_us, w.tripped) for w in self.watchdogs],
            list(self.edge_log), list(self.io_values), self.tick,
        )


def _gen_settle(plan):
    """Straight-line Python for one settle pass over the combinational plan."""
    lines = ["def settle(v):"]
    for op, out, ins in plan:
        if op is GateOp.AND:
            expr = " & ".join(f"v[{i}]" for i in ins)
        elif op is GateOp.OR:
            expr = " | ".join(f"v[{i}]" for i in ins)
        elif op is GateOp.NOT:
            expr = f"1 - v[{ins[0]}]"
        else:
            expr = f"v[{ins[0]}]"
        lines.append(f"    v[{out}] = {expr}")
    lines.append("    return v")
    ns = {}
    exec(compile("\n".join(lines), "<dut-settle>", "exec"), ns)
    return ns["settle"]


class DutSimulator:
    """Compiled evaluation plan for one model."""

    def __init__(self, model: DutModel):
        self.model = model
        names = list(model.inputs) + [la.id for la in model.latches] + [n.id for n in model.nodes]
        names += [d.target for d in model.delays]
        names += [o for o in model.outputs if o not in names]
        self.names = tuple(dict.fromkeys(names))
        self.index = {n: i for i, n in enumerate(self.names)}
        ix = self.index
        nodes = {n.id: n for n in model.nodes}
        zero = {d.target: d for d in model.delays if d.ticks == 0}
        plan = []
        for name in model.eval_order:
            if name in nodes:
                n = nodes[name]
                plan.append((n.op, ix[name], tuple(ix[o] for o in n.operands)))
            elif name in zero:
                plan.append((GateOp.BUF, ix[name], (ix[zero[name].source],)))
        self.plan = plan
        self._settle = _gen_settle(plan)
        self.input_ix = [ix[n] for n in model.inputs]
        self.latch_ix = [(k, ix[la.id], ix[la.set], ix[la.reset]) for k, la in enumerate(model.latches)]
        self.delay_ix = [(i, ix[d.source], ix[d.target], d.ticks) for i, d in enumerate(model.delays)
                         if d.ticks > 0]
        driven = {d.target for d in model.delays}
        self.output_ix = [ix[o] if o in driven else None for o in model.outputs]
        self.io_names = tuple(model.inputs) + tuple(model.outputs)
        self.n_in = len(model.inputs)
        io_pos = {n: i for i, n in enumerate(self.io_names)}
        self.wd = [(w, io_pos[w.trigger], io_pos[w.response], model.outputs.index(w.interlock_output))
                   for w in model.watchdogs]

    def reset(self) -> DutState:
        m = self.model
        v = [0] * len(self.names)
        for i, lvl in zip(self.input_ix, m.input_defaults):
            v[i] = int(lvl)
        for (_, li, _, _), la in zip(self.latch_ix, m.latches):
            v[li] = int(la.initial)
        # iterate until delay-line outputs agree with their sources
        for _ in range(len(self.delay_ix) + 2):
            self._settle(v)
            changed = False
            for _, src, dst, _ in self.delay_ix:
                if v[dst] != v[src]:
                    v[dst] = v[src]
                    changed = True
            if not changed:
                break
        self._settle(v)
        pipelines = [deque() for _ in m.delays]
        for k, src, _, ticks in self.delay_ix:
            pipelines[k] = deque([v[src]] * ticks, maxlen=ticks)
        outputs = self._outputs(v, ())
        return DutState(
            model=m,
            net_names=self.names,
            values=v,
            pipelines=pipelines,
            latches=[int(la.initial) for la in m.latches],
            watchdogs=[WatchdogState() for _ in m.watchdogs],
            io_names=self.io_names,
            io_values=[v[i] for i in self.input_ix] + outputs,
        )

    def _outputs(self, v, watchdogs):
        outs = [v[i] if i is not None else 1 for i in self.output_ix]
        for (w, _, _, oi), ws in zip(self.wd, watchdogs):
            if ws.tripped:
                outs[oi] = 0
        return outs

    def initial_outputs(self, state: DutState) -> dict:
        return {o: LogicLevel(x) for o, x in zip(self.model.outputs, state.io_values[self.n_in:])}

    def step(self, state: DutState, inputs: Sequence[int], tick: int):
        """Advance ``state`` in place by one tick.

        ``inputs`` holds one level per DUT input, in ``model.inputs`` order.
        Returns ``(outputs, events)``: output levels as ints in
        ``model.outputs`` order, and this tick's :class:`DutEvent` list.
        """
        v = [0] * len(self.names)
        for i, x in zip(self.input_ix, inputs):
            v[i] = int(x)
        latches = state.latches
        for k, li, _, _ in self.latch_ix:
            v[li] = latches[k]
        pipes = state.pipelines
        for k, _, dst, _ in self.delay_ix:
            v[dst] = pipes[k][0]
        self._settle(v)

        outputs = self._outputs(v, state.watchdogs)
        io_now = [v[i] for i in self.input_ix] + outputs
        prev = state.io_values
        changed = io_now != prev

        events = []
        if self.wd:
            edges = _edges(self.io_names, prev, io_now) if changed else {}
            newly_tripped = False
            for (w, _, _, _), ws in zip(self.wd, state.watchdogs):
                if ws.tripped:
                    continue
                if ws.armed_at is not None and tick - ws.armed_at > w.timeout_ticks:
                    ws.tripped = True
                    events.append(DutEvent(tick, "watchdog_timeout", watchdog=w.name,
                                           duration_us=tick - ws.armed_at))
                    ws.armed_at = None
                    newly_tripped = True
                    continue
                if ws.armed_at is None and edges.get(w.trigger) is w.trigger_edge:
                    ws.armed_at = tick
                if ws.armed_at is not None and edges.get(w.response) is w.response_edge:
                    if not (w.response == w.trigger and ws.armed_at == tick):
                        ws.last_measurement_us = tick - ws.armed_at
                        ws.armed_at = None
                        events.append(DutEvent(tick, "watchdog_measurement", watchdog=w.name,
                                               duration_us=ws.last_measurement_us))
            if newly_tripped:
                outputs = self._outputs(v, state.watchdogs)
                io_now = [v[i] for i in self.input_ix] + outputs
                changed = io_now != prev

        if changed:
            edge_events = []
            for name, a, b in zip(self.io_names, prev, io_now):
                if a != b:
                    e = Edge.RISING if b else Edge.FALLING
                    state.edge_log.append(EdgeRecord(name, e, tick))
                    edge_events.append(DutEvent(tick, "edge", signal=name, edge=e))
            events = edge_events + events

        for k, _, si, ri in self.latch_ix:
            if v[si]:
                latches[k] = 1
            elif v[ri]:
                latches[k] = 0
        for k, src, _, _ in self.delay_ix:
            pipes[k].append(v[src])

        state.values = v
        state.io_values = io_now
        state.tick = tick
        return outputs, events

    def quiet_ticks(self, state: DutState) -> float:
        """How many coming ticks repeat the last step exactly if the inputs stay put.

        A step is a function of the inputs, the latch states and the delay
        line heads. With fixed inputs the last step's nets recur as long as
        no latch is about to change and every head still equals the net it
        drives; the count ends at the first queued value that differs.
        Armed watchdogs are handled separately through :meth:`next_deadline`.
        """
        v = state.values
        for k, li, _, _ in self.latch_ix:
            if state.latches[k] != v[li]:
                return 0
        quiet = float("inf")
        for k, src, dst, _ in self.delay_ix:
            want = v[dst]
            pipe = state.pipelines[k]
            try:
                quiet = pipe.index(1 - want, 0, min(quiet, len(pipe)))
            except ValueError:
                # the line's tail is the source level, already appended
                pass
        return quiet

    def next_deadline(self, state: DutState) -> Optional[int]:
        """Earliest tick at which an armed watchdog would time out."""
        best = None
        for (w, _, _, _), ws in zip(self.wd, state.watchdogs):
            if ws.armed_at is not None and not ws.tripped:
                t = ws.armed_at + w.timeout_ticks + 1
                best = t if best is None else min(best, t)
        return best

    def advance(self, state: DutState, n: int):
        """Apply ``n`` quiet ticks (see :meth:`quiet_ticks`) without evaluating them."""
        v = state.values
        for k, src, _, ticks in self.delay_ix:
            state.pipelines[k].extend(repeat(v[src], min(n, ticks)))
        state.tick += n


def _edges(names, prev, cur):
    return {n: (Edge.RISING if b else Edge.FALLING) for n, a, b in zip(names, prev, cur) if a != b}


@lru_cache(maxsize=64)
def compile_model(model: DutModel) -> DutSimulator:
    return DutSimulator(model)


def dut_reset(model: DutModel) -> DutState:
    return compile_model(model).reset()


def dut_step(state: DutState, inputs, tick: int):
    """Pure stepping: returns ``(new_state, outputs, events)`` and leaves ``state`` untouched.

    ``inputs`` is either a mapping from DUT input name to level or a sequence
    in ``model.inputs`` order. ``outputs`` maps DUT output name to level.
    """
    sim = compile_model(state.model)
    new = state.copy()
    if isinstance(inputs, Mapping):
        folded = {k.casefold(): v for k, v in inputs.items()}
        inputs = [folded[n.casefold()] for n in state.model.inputs]
    outs, events = sim.step(new, inputs, tick)
    return new, {o: LogicLevel(x) for o, x in zip(state.model.outputs, outs)}, events


def write_event_log(events, path) -> None:
    """Write one ``tick kind payload...`` record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_line() + "\n")


def read_event_log(path) -> list[DutEvent]:
    with open(path, encoding="utf-8") as fh:
        return [DutEvent.from_line(line) for line in fh if line.strip()]
