"""Allocation-trace replay for RAM overhead estimation.

Trace grammar, bit exact so corpora can be diffed:

    a <id> <size>      allocation, decimal integers, single spaces
    f <id>             free of a previously allocated, still-live id
    # ...              comment line, ignored

Replaying a trace under several granule alignments answers "what does
raising the allocation granularity cost in RAM": each live allocation
contributes its size rounded up to the alignment (minimum one unit),
and the report compares the peak of that sum against the 8-byte base
alignment, plus the tag-storage bytes needed at that granularity
(ts bits per granule of peak footprint).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import TraceError, UsageError

BASE_ALIGNMENT = 8

_ALLOC_RE = re.compile(r"^a (\d+) (\d+)$")
_FREE_RE = re.compile(r"^f (\d+)$")


@dataclass(frozen=True)
class Alloc:
    id: int
    size: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Free:
    id: int
    line: int = field(default=0, compare=False)


TraceEvent = Alloc | Free


@dataclass(frozen=True)
class OverheadRow:
    alignment: int
    peak_bytes: int
    overhead_pct: float
    tag_storage_bytes: float

    def to_json_dict(self) -> dict:
        return {
            "alignment": self.alignment,
            "peak_bytes": self.peak_bytes,
            "overhead_pct": self.overhead_pct,
            "tag_storage_bytes": self.tag_storage_bytes,
        }


@dataclass(frozen=True)
class OverheadReport:
    base_alignment: int
    base_peak_bytes: int
    rows: tuple[OverheadRow, ...]

    def to_json_dict(self) -> dict:
        return {
            "base_alignment": self.base_alignment,
            "base_peak_bytes": self.base_peak_bytes,
            "rows": [row.to_json_dict() for row in self.rows],
        }

    def render(self) -> str:
        lines = [f"base alignment {self.base_alignment}: peak {self.base_peak_bytes} bytes"]
        for row in self.rows:
            lines.append(f"alignment={row.alignment} peak_bytes={row.peak_bytes}"
                         f" overhead_pct={row.overhead_pct:.4f}"
                         f" tag_storage_bytes={row.tag_storage_bytes:.2f}")
        return "\n".join(lines)


def parse_trace(text: str) -> list[TraceEvent]:
    """Parse trace text; malformed lines and free/alloc misuse raise
    TraceError naming the offending line."""
    events: list[TraceEvent] = []
    live: set[int] = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        m = _ALLOC_RE.match(line)
        if m:
            aid, size = int(m.group(1)), int(m.group(2))
            if aid in live:
                raise TraceError(f"allocation id {aid} is already live", line=line_no)
            live.add(aid)
            events.append(Alloc(id=aid, size=size, line=line_no))
            continue
        m = _FREE_RE.match(line)
        if m:
            aid = int(m.group(1))
            if aid not in live:
                raise TraceError(f"free of unknown id {aid}", line=line_no)
            live.remove(aid)
            events.append(Free(id=aid, line=line_no))
            continue
        raise TraceError(f"unrecognized trace line {line!r}", line=line_no)
    return events


def load_trace(path) -> list[TraceEvent]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_trace(fh.read())


def _round_up(size: int, alignment: int) -> int:
    # every live allocation costs at least one alignment unit
    if size == 0:
        return alignment
    return -(-size // alignment) * alignment


def analyze_trace(events, alignments, ts: int) -> OverheadReport:
    """Replay ``events`` and report peak footprint per alignment.

    ``ts`` is the tag width used for the tag-storage column, charged at
    ts bits per alignment-sized granule of the peak footprint.  The
    8-byte base peak is always computed for the overhead comparison,
    whether or not 8 appears in ``alignments``.
    """
    alignments = list(alignments)
    if not alignments:
        raise UsageError("need at least one alignment")
    for a in alignments:
        if a < 1:
            raise UsageError(f"alignment must be >= 1, got {a}")
    if ts < 1:
        raise UsageError(f"tag width must be >= 1, got {ts}")

    tracked = sorted(set(alignments) | {BASE_ALIGNMENT})
    live_sizes: dict[int, int] = {}
    current = {a: 0 for a in tracked}
    peak = {a: 0 for a in tracked}
    for position, event in enumerate(events, start=1):
        where = event.line if event.line else position
        if isinstance(event, Alloc):
            if event.id in live_sizes:
                raise TraceError(f"allocation id {event.id} is already live", line=where)
            live_sizes[event.id] = event.size
            for a in tracked:
                grown = current[a] + _round_up(event.size, a)
                current[a] = grown
                if grown > peak[a]:
                    peak[a] = grown
        elif isinstance(event, Free):
            size = live_sizes.pop(event.id, None)
            if size is None:
                raise TraceError(f"free of unknown id {event.id}", line=where)
            for a in tracked:
                current[a] -= _round_up(size, a)
        else:
            raise TraceError(f"unknown trace event {event!r}", line=where)

    base_peak = peak[BASE_ALIGNMENT]
    rows = []
    for a in alignments:
        if base_peak:
            pct = (peak[a] - base_peak) / base_peak * 100.0
        else:
            pct = 0.0
        rows.append(OverheadRow(
            alignment=a,
            peak_bytes=peak[a],
            overhead_pct=pct,
            tag_storage_bytes=peak[a] * ts / (8 * a),
        ))
    return OverheadReport(base_alignment=BASE_ALIGNMENT, base_peak_bytes=base_peak,
                          rows=tuple(rows))
