"""Tagging heap allocator over the simulated address space.

The allocation recipe is the classic one for tagged memory: round the
size up to whole granules, pick a tag under the configured policy, tag
(and optionally zero) the granules, and return a pointer carrying the
tag.  On free the chunk is immediately retagged with a fresh random tag
distinct from its live tag, which makes a dangling access deterministic
to catch until the memory is reused, and optionally parked in a FIFO
byte-budget quarantine that delays reuse further.

Placement is deliberately boring so runs are reproducible: first fit by
address among reusable extents, else bump allocation.  Chunk metadata
lives out of band (in Python objects), so consecutive bump allocations
are exactly address-adjacent, which is what the AdjacentDistinct policy
needs to guarantee overflow detection into a neighbor.

Tag policies:

* Random: uniform over the non-reserved tags.
* AdjacentDistinct: uniform, but never equal to the effective tag on
  either side of the new chunk, so linear overflow and underflow into a
  neighbor always mismatch.
* Sampled(rate): tag with probability ``rate``; a sampled-out chunk is
  left untagged and gets a tag-0 pointer, costing zero shadow writes on
  fresh memory.

Untagged chunks are not retagged on free: they were never protected,
and retagging them would plant false positives for a later untagged
reuse.  For the same reason an untagged allocation placed over
previously retagged memory clears those granules back to 0.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .errors import AllocationError, DoubleFreeError, InvalidFreeError, UsageError
from .faults import AccessKind, FaultKind, FaultReport
from .precision import mark_partial, read_partial_meta
from .tagspace import MtConfig, pack, unpack

DEFAULT_HEAP_BASE = 0x1000_0000
DEFAULT_HEAP_CAPACITY = 1 << 30

_SENTINEL = 0xAA  # fill for uninitialized bytes when zero_on_tag is off


class PolicyKind(enum.Enum):
    RANDOM = "random"
    ADJACENT_DISTINCT = "adjacent-distinct"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class TagPolicy:
    """How malloc picks a tag.  ``rate`` only matters for SAMPLED."""

    kind: PolicyKind = PolicyKind.RANDOM
    rate: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise UsageError(f"sampling rate must be in [0, 1], got {self.rate!r}")

    @classmethod
    def random(cls) -> "TagPolicy":
        return cls(PolicyKind.RANDOM)

    @classmethod
    def adjacent_distinct(cls) -> "TagPolicy":
        return cls(PolicyKind.ADJACENT_DISTINCT)

    @classmethod
    def sampled(cls, rate: float) -> "TagPolicy":
        return cls(PolicyKind.SAMPLED, rate)


class ChunkState(enum.Enum):
    LIVE = "live"
    QUARANTINED = "quarantined"
    FREED = "freed"


class Chunk:
    """One heap allocation.

    base/aligned describe the granule span; user_off is nonzero only
    for right-aligned chunks, where the usable bytes end exactly at the
    last granule's end.  tag 0 means the chunk was sampled out and is
    unprotected.  retag is the tag applied when the chunk was freed.
    """

    # plain __slots__ class: one Chunk is built per malloc and the
    # constructor sits on the Monte-Carlo hot path
    __slots__ = ("id", "base", "requested", "aligned", "tag", "state",
                 "user_off", "partial", "retag", "alloc_site", "free_site")

    def __init__(self, id: int, base: int, requested: int, aligned: int, tag: int,
                 state: "ChunkState", user_off: int = 0, partial: bool = False,
                 alloc_site: str | None = None):
        self.id = id
        self.base = base
        self.requested = requested
        self.aligned = aligned
        self.tag = tag
        self.state = state
        self.user_off = user_off
        self.partial = partial
        self.retag: int | None = None
        self.alloc_site = alloc_site
        self.free_site: str | None = None

    @property
    def user_addr(self) -> int:
        return self.base + self.user_off

    @property
    def end(self) -> int:
        return self.base + self.aligned

    def __repr__(self) -> str:
        return (f"Chunk(id={self.id}, base=0x{self.base:x}, requested={self.requested},"
                f" aligned={self.aligned}, tag={self.tag}, state={self.state.value})")


_STAT_FIELDS = ("allocations", "frees", "tagged_allocations",
                "live_requested_bytes", "live_aligned_bytes",
                "peak_requested_bytes", "peak_aligned_bytes",
                "quarantine_bytes", "quarantine_chunks", "partial_fallbacks")


class AllocatorStats:
    __slots__ = _STAT_FIELDS

    def __init__(self):
        self.allocations = 0
        self.frees = 0
        self.tagged_allocations = 0
        self.live_requested_bytes = 0
        self.live_aligned_bytes = 0
        self.peak_requested_bytes = 0
        self.peak_aligned_bytes = 0
        self.quarantine_bytes = 0
        self.quarantine_chunks = 0
        self.partial_fallbacks = 0

    def snapshot(self) -> "AllocatorStats":
        copy = AllocatorStats()
        for name in _STAT_FIELDS:
            setattr(copy, name, getattr(self, name))
        return copy

    def __repr__(self) -> str:
        body = ", ".join(f"{name}={getattr(self, name)}" for name in _STAT_FIELDS)
        return f"AllocatorStats({body})"


_DEFAULT_POLICY = TagPolicy()


class ArenaAllocator:
    def __init__(self, memory, shadow, cfg: MtConfig, rng, policy: TagPolicy | None = None,
                 base: int = DEFAULT_HEAP_BASE, capacity: int = DEFAULT_HEAP_CAPACITY):
        if base & (cfg.tg - 1):
            raise UsageError("arena base must be granule aligned")
        self.memory = memory
        self.shadow = shadow
        self.cfg = cfg
        self.rng = rng
        self.policy = policy if policy is not None else _DEFAULT_POLICY
        self.base = base
        self.limit = base + capacity
        self._brk = base
        self._free: list[list[int]] = []  # [base, size] extents sorted by base
        self._live: dict[int, Chunk] = {}  # user address -> chunk
        self._chunks: list[Chunk] = []  # live + quarantined + freed-not-recycled
        self._quarantine: deque[Chunk] = deque()
        self._qbytes = 0
        self._freed_count = 0
        self._next_id = 1
        self._stats = AllocatorStats()

    # ------------------------------------------------------------------
    # allocation

    def malloc(self, size: int, policy: TagPolicy | None = None, site: str | None = None) -> int:
        """Allocate ``size`` bytes and return a tagged pointer word.

        size 0 is served as a single byte, so every allocation owns at
        least one granule.
        """
        if size < 0:
            raise UsageError(f"allocation size must be >= 0, got {size}")
        cfg = self.cfg
        tg = cfg.tg
        eff = size if size > 0 else 1
        aligned = (eff + tg - 1) & ~(tg - 1)
        base = self._place(aligned)
        tag = self._choose_tag(policy or self.policy, base, aligned)

        if cfg.zero_on_tag and tag:
            self.memory.fill(base, aligned, 0x00)
        else:
            self.memory.fill(base, aligned, _SENTINEL)

        partial = False
        remainder = eff & (tg - 1)
        if tag:
            if cfg.precision_ext and remainder:
                if remainder <= tg - 2:
                    if aligned > tg:
                        self.shadow.set_range(base, aligned - tg, tag)
                    mark_partial(self.memory, self.shadow, cfg, base + aligned - tg, remainder, tag)
                    partial = True
                else:
                    # remainder tg-1 leaves no room for the in-granule
                    # metadata; fall back to whole-granule tagging
                    self.shadow.set_range(base, aligned, tag)
                    self._stats.partial_fallbacks += 1
            else:
                self.shadow.set_range(base, aligned, tag)
        else:
            self._clear_shadow(base, aligned)

        user_off = 0
        if cfg.right_align and remainder:
            user_off = aligned - eff

        chunk = Chunk(id=self._next_id, base=base, requested=size, aligned=aligned,
                      tag=tag, state=ChunkState.LIVE, user_off=user_off,
                      partial=partial, alloc_site=site)
        self._next_id += 1
        self._live[chunk.user_addr] = chunk
        self._chunks.append(chunk)

        st = self._stats
        st.allocations += 1
        if tag:
            st.tagged_allocations += 1
        st.live_requested_bytes += size
        st.live_aligned_bytes += aligned
        if st.live_requested_bytes > st.peak_requested_bytes:
            st.peak_requested_bytes = st.live_requested_bytes
        if st.live_aligned_bytes > st.peak_aligned_bytes:
            st.peak_aligned_bytes = st.live_aligned_bytes

        # pack() inlined: tag and user address are in range by construction
        return (tag << cfg.tag_shift) | chunk.user_addr

    def free(self, word: int, site: str | None = None) -> None:
        """Release the allocation that returned ``word``.

        The pointer must carry the exact address malloc returned and a
        tag equal to the chunk's tag; anything else faults instead of
        corrupting allocator state.
        """
        addr, ptag = unpack(word, self.cfg)
        chunk = self._live.get(addr)
        if chunk is None:
            prior = next((c for c in reversed(self._chunks)
                          if c.user_addr == addr and c.state is not ChunkState.LIVE), None)
            if prior is not None:
                raise DoubleFreeError(self._free_report(FaultKind.DOUBLE_FREE, word, ptag, addr, prior))
            raise InvalidFreeError(self._free_report(FaultKind.INVALID_FREE, word, ptag, addr,
                                                     self.find_owner(addr)))
        if ptag != chunk.tag:
            raise InvalidFreeError(self._free_report(FaultKind.INVALID_FREE, word, ptag, addr, chunk))

        del self._live[addr]
        chunk.free_site = site
        if chunk.tag:
            retag = self._fresh_tag_excluding(chunk.tag)
            self.shadow.set_range(chunk.base, chunk.aligned, retag)
            chunk.retag = retag
            chunk.partial = False

        st = self._stats
        st.frees += 1
        st.live_requested_bytes -= chunk.requested
        st.live_aligned_bytes -= chunk.aligned

        if self.cfg.quarantine_capacity > 0:
            chunk.state = ChunkState.QUARANTINED
            self._quarantine.append(chunk)
            self._qbytes += chunk.aligned
            while self._qbytes > self.cfg.quarantine_capacity:
                self._evict_oldest()
        else:
            self._retire(chunk)
        st.quarantine_bytes = self._qbytes
        st.quarantine_chunks = len(self._quarantine)

    def quarantine_flush(self) -> int:
        """Evict every quarantined chunk (FIFO order); returns the count."""
        n = len(self._quarantine)
        while self._quarantine:
            self._evict_oldest()
        st = self._stats
        st.quarantine_bytes = self._qbytes
        st.quarantine_chunks = 0
        return n

    def stats(self) -> AllocatorStats:
        return self._stats.snapshot()

    def find_owner(self, addr: int) -> Chunk | None:
        """Most recent chunk whose granule span covers addr, if any."""
        for chunk in reversed(self._chunks):
            if chunk.base <= addr < chunk.end:
                return chunk
        return None

    def live_chunks(self) -> list[Chunk]:
        return [c for c in self._chunks if c.state is ChunkState.LIVE]

    # ------------------------------------------------------------------
    # internals

    def _place(self, aligned: int) -> int:
        free = self._free
        for i, ext in enumerate(free):
            if ext[1] >= aligned:
                base = ext[0]
                if ext[1] == aligned:
                    del free[i]
                else:
                    ext[0] += aligned
                    ext[1] -= aligned
                if self._freed_count:
                    self._recycle_overlaps(base, base + aligned)
                return base
        if self._brk + aligned <= self.limit:
            base = self._brk
            self._brk += aligned
            return base
        raise AllocationError(f"arena exhausted: need {aligned} bytes")

    def _choose_tag(self, policy: TagPolicy, base: int, aligned: int) -> int:
        rng = self.rng
        usable = self.cfg.usable_tags
        if policy.kind is PolicyKind.RANDOM:
            return rng.choice(usable)
        if policy.kind is PolicyKind.ADJACENT_DISTINCT:
            left = self._effective_tag(base - 1) if base > self.base else 0
            right = self._effective_tag(base + aligned)
            while True:
                tag = rng.choice(usable)
                if tag != left and tag != right:
                    return tag
        if policy.kind is PolicyKind.SAMPLED:
            if rng.random() < policy.rate:
                return rng.choice(usable)
            return 0
        raise UsageError(f"unknown tag policy {policy.kind!r}")

    def _effective_tag(self, addr: int) -> int:
        """Shadow tag at addr, resolving a PARTIAL marker to the real tag."""
        tag = self.shadow.get(addr)
        if tag and tag == self.cfg.partial_tag:
            gbase = (addr >> self.cfg.tg_shift) << self.cfg.tg_shift
            return read_partial_meta(self.memory, self.cfg, gbase).real_tag
        return tag

    def _fresh_tag_excluding(self, avoid: int) -> int:
        usable = self.cfg.usable_tags
        rng = self.rng
        while True:
            tag = rng.choice(usable)
            if tag != avoid:
                return tag

    def _clear_shadow(self, base: int, aligned: int) -> None:
        # Untagged allocation over previously tagged memory: reset the
        # granules so a tag-0 pointer can use them.  Fresh memory needs
        # no writes at all.
        tags = self.shadow.tags
        shift = self.cfg.tg_shift
        for g in range(base >> shift, (base + aligned) >> shift):
            if g in tags:
                del tags[g]
                self.shadow.writes += 1

    def _evict_oldest(self) -> None:
        chunk = self._quarantine.popleft()
        self._qbytes -= chunk.aligned
        self._retire(chunk)

    def _retire(self, chunk: Chunk) -> None:
        chunk.state = ChunkState.FREED
        self._freed_count += 1
        self._free_insert(chunk.base, chunk.aligned)

    def _free_insert(self, base: int, size: int) -> None:
        free = self._free
        lo, hi = 0, len(free)
        while lo < hi:
            mid = (lo + hi) // 2
            if free[mid][0] < base:
                lo = mid + 1
            else:
                hi = mid
        # coalesce with the neighbors when the extents touch
        if lo > 0 and free[lo - 1][0] + free[lo - 1][1] == base:
            free[lo - 1][1] += size
            if lo < len(free) and free[lo - 1][0] + free[lo - 1][1] == free[lo][0]:
                free[lo - 1][1] += free[lo][1]
                del free[lo]
            return
        if lo < len(free) and base + size == free[lo][0]:
            free[lo][0] = base
            free[lo][1] += size
            return
        free.insert(lo, [base, size])

    def _recycle_overlaps(self, lo: int, hi: int) -> None:
        # Memory handed to a new chunk: forget freed chunks that lived
        # there so provenance never points at recycled ghosts.
        kept = []
        dropped = 0
        for c in self._chunks:
            if c.state is ChunkState.FREED and c.base < hi and lo < c.end:
                dropped += 1
            else:
                kept.append(c)
        if dropped:
            self._chunks = kept
            self._freed_count -= dropped

    def _free_report(self, kind: FaultKind, word: int, ptag: int, addr: int,
                     chunk: Chunk | None) -> FaultReport:
        gbase = (addr >> self.cfg.tg_shift) << self.cfg.tg_shift
        return FaultReport(
            kind=kind,
            access=AccessKind.FREE,
            word=word,
            ptr_tag=ptag,
            mem_tag=self.shadow.get(addr),
            granule_base=gbase,
            chunk_id=chunk.id if chunk else None,
            chunk_state=chunk.state.value if chunk else None,
        )
