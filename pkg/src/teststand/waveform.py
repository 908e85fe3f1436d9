"""Time-diagram rendering of a :class:`~teststand.engine.Trace`.

ASCII lanes use two characters per tick. A tick without an edge is drawn
as its level twice (``‾‾`` high, ``__`` low); a tick where the level changed
is drawn as the edge glyph followed by the new level (``/‾`` rising,
``\\_`` falling). Wide windows can be drawn run-length compressed instead:
each run of equal level becomes ``<first><level>{<ticks>}``, where
``<first>`` is the edge glyph if the run starts with an edge.
"""

from __future__ import annotations

import re

HIGH, LOW, RISE, FALL = "‾", "_", "/", "\\"
EXACT_LIMIT = 60  # widest window (in ticks) drawn tick-by-tick in "auto" mode

_RUN = re.compile(r"([/\\‾_])([‾_])\{(\d+)\}")


def _window(trace, window):
    n = trace.length
    if window is None:
        return 0, n - 1
    start, end = window
    if start < 0 or end >= n or start > end:
        raise ValueError(f"window [{start}, {end}] outside trace bounds [0, {n - 1}]")
    return int(start), int(end)


def _rows(trace, signals):
    if signals is None:
        signals = list(trace.signals)
    out = []
    for name in signals:
        try:
            i = trace.index(name)
        except KeyError:
            raise ValueError(f"unknown signal {name!r}") from None
        out.append((trace.signals[i], i))
    return out


def _prev_level(trace, i, t):
    return int(trace.initial[i]) if t == 0 else int(trace.samples[i, t - 1])


def _runs(trace, i, start, end):
    """(start_tick, length, level, starts_with_edge) for each run in the window."""
    row = trace.samples[i]
    runs = []
    t = start
    while t <= end:
        lvl = int(row[t])
        u = t
        while u + 1 <= end and int(row[u + 1]) == lvl:
            u += 1
        runs.append((t, u - t + 1, lvl, _prev_level(trace, i, t) != lvl))
        t = u + 1
    return runs


def lane_exact(trace, i, start, end):
    chars = []
    for t in range(start, end + 1):
        lvl = int(trace.samples[i, t])
        c = HIGH if lvl else LOW
        if _prev_level(trace, i, t) != lvl:
            chars.append((RISE if lvl else FALL) + c)
        else:
            chars.append(c + c)
    return "".join(chars)


def lane_compressed(trace, i, start, end):
    parts = []
    for t, n, lvl, edge in _runs(trace, i, start, end):
        c = HIGH if lvl else LOW
        first = (RISE if lvl else FALL) if edge else c
        parts.append(f"{first}{c}{{{n}}}")
    return "".join(parts)


def render_ascii(trace, signals=None, window=None, compressed=None) -> str:
    start, end = _window(trace, window)
    rows = _rows(trace, signals)
    if compressed is None:
        compressed = end - start + 1 > EXACT_LIMIT
    width = max([len(n) for n, _ in rows] + [4])
    mode = "compressed" if compressed else "exact"
    lines = [f"# ticks {start}-{end} {mode}"]
    for name, i in rows:
        lane = lane_compressed(trace, i, start, end) if compressed else lane_exact(trace, i, start, end)
        lines.append(f"{name:<{width}} |{lane}|")
    return "\n".join(lines) + "\n"


def parse_ascii(text: str):
    """Read an ASCII rendering back into ``(window, {signal: [(tick, edge_glyph), ...]})``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    m = re.match(r"# ticks (\d+)-(\d+) (exact|compressed)$", lines[0])
    if not m:
        raise ValueError("missing waveform header")
    start, end, mode = int(m.group(1)), int(m.group(2)), m.group(3)
    lanes = {}
    for ln in lines[1:]:
        name, _, rest = ln.partition(" |")
        lane = rest[:-1]
        edges = []
        if mode == "exact":
            for k in range(0, len(lane), 2):
                if lane[k] in (RISE, FALL):
                    edges.append((start + k // 2, "rising" if lane[k] == RISE else "falling"))
        else:
            t = start
            for first, lvl, n in _RUN.findall(lane):
                if first in (RISE, FALL):
                    edges.append((t, "rising" if first == RISE else "falling"))
                t += int(n)
        lanes[name.rstrip()] = edges
    return (start, end), lanes


def render_svg(trace, signals=None, window=None, lane_width=800, lane_height=30) -> str:
    """Deterministic SVG with one stepped polyline per signal."""
    start, end = _window(trace, window)
    rows = _rows(trace, signals)
    label_w = 10 + 8 * max([len(n) for n, _ in rows] + [4])
    n_ticks = end - start + 1
    scale = lane_width / n_ticks
    height = lane_height * len(rows) + 30
    width = label_w + lane_width + 10

    def x(t):
        return f"{label_w + (t - start) * scale:.2f}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<g font-family="monospace" font-size="12">',
    ]
    for k, (name, i) in enumerate(rows):
        top = 10 + k * lane_height
        y_hi, y_lo = top + 4, top + lane_height - 8
        pts = []
        for t, n, lvl, edge in _runs(trace, i, start, end):
            y = y_hi if lvl else y_lo
            pts.append(f"{x(t)},{y}")
            pts.append(f"{x(t + n)},{y}")
        out.append(f'<text x="4" y="{y_lo}">{_esc(name)}</text>')
        out.append(f'<polyline fill="none" stroke="black" stroke-width="1" points="{" ".join(pts)}"/>')
    axis_y = 10 + len(rows) * lane_height + 12
    out.append(f'<text x="{label_w}" y="{axis_y}">{start} us</text>')
    out.append(f'<text x="{label_w + lane_width}" y="{axis_y}" text-anchor="end">{end} us</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_waveform(trace, signals=None, window=None, format="ascii", compressed=None) -> str:
    """Render ``signals`` of ``trace`` over the inclusive tick ``window``.

    ``window`` defaults to the whole trace; ``format`` is ``"ascii"`` or
    ``"svg"``. Raises ``ValueError`` for an out-of-bounds window or a signal
    the trace does not contain.
    """
    if format == "ascii":
        return render_ascii(trace, signals, window, compressed)
    if format == "svg":
        return render_svg(trace, signals, window)
    raise ValueError(f"unknown waveform format {format!r}")


def default_window(result, margin=10):
    """Measured region plus ``margin`` ticks each side, clamped to the trace."""
    last = result.trace.length - 1
    done = [m for m in result.measurements if m.stopper_at is not None and m.trigger_at is not None]
    if not done:
        return 0, last
    lo = min(m.trigger_at for m in done) - margin
    hi = max(m.stopper_at for m in done) + margin
    return max(0, lo), min(last, hi)
