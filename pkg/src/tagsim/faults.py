"""Fault descriptions and their stable wire format.

Every simulated trap is described by a FaultReport.  The plain-text
rendering and the JSON rendering are part of the package's contract:
tools diff them, so the key set and ordering below must not drift.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass


class FaultKind(enum.Enum):
    TAG_MISMATCH = "tag-mismatch"
    INVALID_FREE = "invalid-free"
    DOUBLE_FREE = "double-free"
    USAGE_ERROR = "usage-error"


class AccessKind(enum.Enum):
    LOAD = "load"
    STORE = "store"
    RANGE_CHECK = "range-check"
    FREE = "free"


@dataclass(slots=True)
class FaultReport:
    """One simulated trap.

    word is the full 64-bit pointer involved; granule_base is the base
    address of the first granule whose check failed.  chunk_id and
    chunk_state carry heap provenance when the faulting address lies in
    a chunk the allocator still knows about (live, quarantined, or
    freed but not yet recycled); both are None otherwise.  deferred is
    True for mismatched stores queued under IMPRECISE_STORES.  partial
    marks mismatches decided by the partial-granule precision rule.
    """

    kind: FaultKind
    access: AccessKind
    word: int
    ptr_tag: int
    mem_tag: int
    granule_base: int
    chunk_id: int | None = None
    chunk_state: str | None = None
    deferred: bool = False
    partial: bool = False

    def render(self) -> str:
        chunk = "-" if self.chunk_id is None else str(self.chunk_id)
        state = self.chunk_state if self.chunk_state else "-"
        return (
            f"FAULT kind={self.kind.value} access={self.access.value}"
            f" ptr=0x{self.word:016x} ptag=0x{self.ptr_tag:x} mtag=0x{self.mem_tag:x}"
            f" chunk={chunk} state={state} deferred={1 if self.deferred else 0}"
        )

    def to_json_dict(self) -> dict:
        # Same keys as the plain rendering.
        return {
            "kind": self.kind.value,
            "access": self.access.value,
            "ptr": f"0x{self.word:016x}",
            "ptag": f"0x{self.ptr_tag:x}",
            "mtag": f"0x{self.mem_tag:x}",
            "chunk": self.chunk_id if self.chunk_id is not None else "-",
            "state": self.chunk_state if self.chunk_state else "-",
            "deferred": 1 if self.deferred else 0,
        }
