"""Signal-map and DUT-model loading.

Both documents are small XML files. The signal map declares every line that
connects the test stand to the device under test; the DUT model describes the
simulated safety logic as a netlist of gates, delay lines, latches and
reaction-time watchdogs.
"""

from __future__ import annotations

import enum
import graphlib
import hashlib
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .logic import Edge, LogicLevel


class SignalKind(enum.Enum):
    OPTICAL = "optical"
    DIGITAL24 = "digital24"
    CURRENT_LOOP_3W = "current_loop_3w"
    GENERIC = "generic"


class Direction(enum.Enum):
    STIMULUS = "stimulus"
    MONITOR = "monitor"


@dataclass(frozen=True)
class SignalDef:
    name: str
    kind: SignalKind = SignalKind.GENERIC
    direction: Direction = Direction.STIMULUS
    default_level: LogicLevel = LogicLevel.LOW


@dataclass(frozen=True)
class SignalMap:
    signals: tuple[SignalDef, ...]
    source_path: str = ""

    def __post_init__(self):
        if not self.signals:
            raise ConfigError("no signals declared", source=self.source_path or None)
        seen = {}
        for s in self.signals:
            key = s.name.casefold()
            if key in seen:
                raise ConfigError(
                    f"duplicate signal name {s.name!r} (already declared as {seen[key]!r})",
                    source=self.source_path or None,
                )
            seen[key] = s.name
        object.__setattr__(self, "_index", {s.name.casefold(): s for s in self.signals})

    def __contains__(self, name):
        return name.casefold() in self._index

    def get(self, name) -> Optional[SignalDef]:
        return self._index.get(name.casefold())

    def __getitem__(self, name) -> SignalDef:
        sig = self.get(name)
        if sig is None:
            raise KeyError(name)
        return sig

    def canonical(self, name) -> str:
        """Declared spelling of ``name``."""
        return self[name].name

    @property
    def names(self):
        return [s.name for s in self.signals]

    def stimuli(self):
        return [s for s in self.signals if s.direction is Direction.STIMULUS]

    def monitors(self):
        return [s for s in self.signals if s.direction is Direction.MONITOR]

    def __eq__(self, other):
        # source_path is provenance, not structure
        if not isinstance(other, SignalMap):
            return NotImplemented
        return self.signals == other.signals

    def __hash__(self):
        return hash(self.signals)


def _xml_root(text, expected_tag, source):
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, column = exc.position
        raise ConfigError(f"malformed document: {exc.msg if hasattr(exc, 'msg') else exc}",
                          line=line, column=column, source=source) from None
    if root.tag != expected_tag:
        raise ConfigError(f"root element must be <{expected_tag}>, got <{root.tag}>", source=source)
    return root


def _enum_attr(elem, attr, enum_cls, source, default=None):
    raw = elem.get(attr)
    if raw is None:
        if default is not None:
            return default
        raise ConfigError(f"<{elem.tag}> is missing attribute {attr!r}", source=source)
    try:
        return enum_cls(raw.strip().lower())
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"unknown {attr} {raw!r} (expected one of: {allowed})", source=source) from None


def _level_attr(elem, attr, source, default=LogicLevel.LOW):
    raw = elem.get(attr)
    if raw is None:
        return default
    value = raw.strip().lower()
    if value == "high":
        return LogicLevel.HIGH
    if value == "low":
        return LogicLevel.LOW
    raise ConfigError(f"unknown level {raw!r} for {attr!r} (expected high or low)", source=source)


def load_signal_map(text: str, source_path: str = "") -> SignalMap:
    """Parse a ``<signals>`` document into a :class:`SignalMap`.

    Declaration order is preserved; reports list signals in that order.
    """
    source = source_path or None
    root = _xml_root(text, "signals", source)
    signals = []
    for elem in root:
        if elem.tag != "signal":
            raise ConfigError(f"unexpected element <{elem.tag}> in <signals>", source=source)
        name = (elem.get("name") or "").strip()
        if not name:
            raise ConfigError("<signal> without a name", source=source)
        signals.append(SignalDef(
            name=name,
            kind=_enum_attr(elem, "kind", SignalKind, source, default=SignalKind.GENERIC),
            direction=_enum_attr(elem, "direction", Direction, source),
            default_level=_level_attr(elem, "default", source),
        ))
    return SignalMap(tuple(signals), source_path)


def dump_signal_map(smap: SignalMap) -> str:
    lines = ["<signals>"]
    for s in smap.signals:
        lines.append(
            f'  <signal name="{s.name}" kind="{s.kind.value}" direction="{s.direction.value}"'
            f' default="{"high" if s.default_level else "low"}"/>'
        )
    lines.append("</signals>")
    return "\n".join(lines) + "\n"


class GateOp(enum.Enum):
    AND = "AND"
    OR = "OR"
    NOT = "NOT"
    BUF = "BUF"


@dataclass(frozen=True)
class Node:
    id: str
    op: GateOp
    operands: tuple[str, ...]


@dataclass(frozen=True)
class Delay:
    source: str
    target: str
    ticks: int


@dataclass(frozen=True)
class Latch:
    id: str
    set: str
    reset: str
    initial: LogicLevel = LogicLevel.LOW


@dataclass(frozen=True)
class Watchdog:
    name: str
    trigger: str
    trigger_edge: Edge
    response: str
    response_edge: Edge
    timeout_ticks: int
    interlock_output: str


@dataclass(frozen=True)
class DutModel:
    """Validated netlist standing in for the safety logic.

    Net names are the DUT's inputs, outputs, node ids, latch ids and the
    targets of delay lines. ``input_defaults`` holds the power-up level of each
    input, taken from the signal map, so that :func:`teststand.dut.dut_reset`
    can fill the delay lines without consulting the map again.
    """

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    nodes: tuple[Node, ...] = ()
    delays: tuple[Delay, ...] = ()
    latches: tuple[Latch, ...] = ()
    watchdogs: tuple[Watchdog, ...] = ()
    input_defaults: tuple[LogicLevel, ...] = ()
    eval_order: tuple[str, ...] = field(default=(), compare=False)


def _split_ids(raw):
    return tuple(p for p in raw.replace(",", " ").split() if p)


def _int_attr(elem, attr, source):
    raw = elem.get(attr)
    if raw is None:
        raise ConfigError(f"<{elem.tag}> is missing attribute {attr!r}", source=source)
    try:
        return int(raw.strip())
    except ValueError:
        raise ConfigError(f"attribute {attr!r} must be an integer, got {raw!r}", source=source) from None


def _required(elem, attr, source):
    raw = (elem.get(attr) or "").strip()
    if not raw:
        raise ConfigError(f"<{elem.tag}> is missing attribute {attr!r}", source=source)
    return raw


def load_dut_model(text: str, smap: SignalMap, source_path: str = "") -> DutModel:
    """Parse a ``<dut>`` document and cross-check it against ``smap``."""
    source = source_path or None
    root = _xml_root(text, "dut", source)
    inputs, outputs, nodes, delays, latches, watchdogs = [], [], [], [], [], []
    for elem in root:
        tag = elem.tag
        if tag == "input":
            inputs.append(_required(elem, "name", source))
        elif tag == "output":
            outputs.append(_required(elem, "name", source))
        elif tag == "node":
            op_raw = _required(elem, "op", source).upper()
            try:
                op = GateOp(op_raw)
            except ValueError:
                raise ConfigError(f"unknown gate op {op_raw!r}", source=source) from None
            nodes.append(Node(_required(elem, "id", source), op,
                              _split_ids(_required(elem, "operands", source))))
        elif tag == "delay":
            delays.append(Delay(_required(elem, "from", source), _required(elem, "to", source),
                                _int_attr(elem, "ticks", source)))
        elif tag == "latch":
            latches.append(Latch(_required(elem, "id", source), _required(elem, "set", source),
                                 _required(elem, "reset", source), _level_attr(elem, "initial", source)))
        elif tag == "watchdog":
            watchdogs.append(Watchdog(
                name=elem.get("name") or f"wd{len(watchdogs)}",
                trigger=_required(elem, "trigger", source),
                trigger_edge=_enum_attr(elem, "trigger-edge", Edge, source),
                response=_required(elem, "response", source),
                response_edge=_enum_attr(elem, "response-edge", Edge, source),
                timeout_ticks=_int_attr(elem, "timeout", source),
                interlock_output=_required(elem, "interlock", source),
            ))
        else:
            raise ConfigError(f"unexpected element <{tag}> in <dut>", source=source)
    return build_dut_model(smap, inputs, outputs, nodes, delays, latches, watchdogs, source=source)


def build_dut_model(smap, inputs, outputs, nodes=(), delays=(), latches=(), watchdogs=(), source=None):
    """Validate netlist pieces and assemble a :class:`DutModel`.

    Signal names are normalised to their spelling in ``smap``.
    """

    def err(msg):
        return ConfigError(msg, source=source)

    canon_inputs = []
    for name in inputs:
        sig = smap.get(name)
        if sig is None:
            raise err(f"DUT input {name!r} is not declared in the signal map")
        if sig.direction is not Direction.STIMULUS:
            raise err(f"DUT input {name!r} must be a stimulus signal")
        canon_inputs.append(sig.name)
    canon_outputs = []
    for name in outputs:
        sig = smap.get(name)
        if sig is None:
            raise err(f"DUT output {name!r} is not declared in the signal map")
        if sig.direction is not Direction.MONITOR:
            raise err(f"DUT output {name!r} must be a monitor signal")
        canon_outputs.append(sig.name)

    nets = {}

    def declare(name, what):
        key = name.casefold()
        if key in nets:
            raise err(f"net {name!r} declared twice ({nets[key][1]} and {what})")
        nets[key] = (name, what)

    for n in canon_inputs:
        declare(n, "input")
    for n in nodes:
        declare(n.id, "node")
    for la in latches:
        declare(la.id, "latch")
    output_keys = {o.casefold() for o in canon_outputs}
    driven = set()
    for d in delays:
        if d.ticks < 0:
            raise err(f"negative delay of {d.ticks} ticks from {d.source!r} to {d.target!r}")
        key = d.target.casefold()
        if key in driven:
            raise err(f"net {d.target!r} is driven by more than one delay")
        driven.add(key)
        if key not in output_keys:
            declare(d.target, "delay")
    for o in canon_outputs:
        if o.casefold() not in nets:
            nets[o.casefold()] = (o, "output")

    def ref(name, context):
        hit = nets.get(name.casefold())
        if hit is None:
            raise err(f"{context} references undeclared signal or net {name!r}")
        return hit[0]

    canon_nodes = []
    for n in nodes:
        if n.op in (GateOp.NOT, GateOp.BUF) and len(n.operands) != 1:
            raise err(f"{n.op.value} node {n.id!r} takes exactly one operand")
        if not n.operands:
            raise err(f"node {n.id!r} has no operands")
        canon_nodes.append(Node(n.id, n.op, tuple(ref(o, f"node {n.id!r}") for o in n.operands)))
    canon_delays = [Delay(ref(d.source, "delay"), ref(d.target, "delay"), d.ticks) for d in delays]
    canon_latches = [Latch(la.id, ref(la.set, f"latch {la.id!r}"), ref(la.reset, f"latch {la.id!r}"),
                           LogicLevel(la.initial)) for la in latches]

    io_keys = {n.casefold() for n in canon_inputs} | output_keys
    canon_wds = []
    for w in watchdogs:
        if w.timeout_ticks < 1:
            raise err(f"watchdog {w.name!r}: timeout must be at least 1 tick")
        for name in (w.trigger, w.response):
            if name.casefold() not in io_keys:
                raise err(f"watchdog {w.name!r} references {name!r}, which is not a DUT input or output")
        if w.interlock_output.casefold() not in output_keys:
            raise err(f"watchdog {w.name!r}: interlock output {w.interlock_output!r} is not a DUT output")
        canon_wds.append(Watchdog(w.name, ref(w.trigger, "watchdog"), w.trigger_edge,
                                  ref(w.response, "watchdog"), w.response_edge, w.timeout_ticks,
                                  ref(w.interlock_output, "watchdog")))

    interlock_keys = {w.interlock_output.casefold() for w in canon_wds}
    for o in canon_outputs:
        if o.casefold() not in driven and o.casefold() not in interlock_keys:
            raise err(f"DUT output {o!r} has no driver")

    # combinational dependencies; latches and delays >= 1 tick break cycles
    graph = {n.id: set(n.operands) for n in canon_nodes}
    for d in canon_delays:
        graph.setdefault(d.target, set())
        if d.ticks == 0:
            graph[d.target].add(d.source)
    try:
        order = tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        cycle = " -> ".join(exc.args[1])
        raise err(f"combinational cycle: {cycle}") from None

    return DutModel(
        inputs=tuple(canon_inputs),
        outputs=tuple(canon_outputs),
        nodes=tuple(canon_nodes),
        delays=tuple(canon_delays),
        latches=tuple(canon_latches),
        watchdogs=tuple(canon_wds),
        input_defaults=tuple(smap[n].default_level for n in canon_inputs),
        eval_order=order,
    )


def document_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
