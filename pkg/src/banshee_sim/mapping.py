"""Content tracking: PTE/TLB mapping bits, per-MC tag buffers and lazy coherence.

Pages are keyed by a single integer, ``raw << 1 | large``, so regular and
large pages with the same number never collide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .geometry import PageId


class MappingInfo(NamedTuple):
    cached: bool = False
    way: int = 0


UNCACHED = MappingInfo(False, 0)


def page_key(page: PageId) -> int:
    return page.raw << 1 | int(page.large)


def key_page(key: int) -> PageId:
    return PageId(key >> 1, bool(key & 1))


def propagate_to_prefetch(trigger: MappingInfo) -> MappingInfo:
    """Prefetches travel with the mapping of the access that triggered them."""
    return trigger


@dataclass(frozen=True)
class CoherenceCosts:
    flush_routine_us: float = 20.0
    shootdown_initiator_us: float = 4.0
    shootdown_slave_us: float = 1.0
    num_cores: int = 16

    def __post_init__(self) -> None:
        if min(self.flush_routine_us, self.shootdown_initiator_us, self.shootdown_slave_us) < 0:
            raise ValueError("coherence costs must be >= 0")
        if self.num_cores < 1:
            raise ValueError("num_cores must be >= 1")

    @property
    def per_flush_us(self) -> float:
        return self.flush_routine_us + self.shootdown_initiator_us + (self.num_cores - 1) * self.shootdown_slave_us


class TagBufferFull(RuntimeError):
    """A set holds only remap=1 entries; the caller must flush before inserting."""


class TagBuffer:
    """Set-associative buffer of recent mappings for one memory controller.

    Each set is a dict in LRU order (first key = least recent). Values are
    ``[remap, info]`` lists.
    """

    def __init__(self, entries: int = 1024, ways: int = 8, threshold: float = 0.7, num_mcs: int = 1) -> None:
        if entries < 1 or ways < 1 or entries % ways:
            raise ValueError("tag buffer entries must be a positive multiple of ways")
        if not 0 < threshold <= 1:
            raise ValueError("flush threshold must lie in (0, 1]")
        self.entries = entries
        self.ways = ways
        self.nsets = entries // ways
        self.threshold = threshold
        self.num_mcs = num_mcs
        self.flush_at = math.ceil(round(threshold * entries, 9))
        self.sets: list[dict[int, list]] = [{} for _ in range(self.nsets)]
        self.remap_count = 0

    def index(self, key: int) -> int:
        # Low page-number bits above the MC-select bits; every page here shares those.
        return (key >> 1) // self.num_mcs % self.nsets

    def lookup(self, key: int) -> MappingInfo | None:
        s = self.sets[(key >> 1) // self.num_mcs % self.nsets]
        e = s.pop(key, None)
        if e is None:
            return None
        s[key] = e
        return e[1]

    def peek(self, key: int) -> list | None:
        return self.sets[self.index(key)].get(key)

    def _clean_victim(self, s: dict[int, list]) -> int | None:
        for k, e in s.items():
            if not e[0]:
                return k
        return None

    def insert_clean(self, key: int, info: MappingInfo) -> bool:
        """Insert a remap=0 entry; skipped when the set holds only remap=1 entries."""
        s = self.sets[(key >> 1) // self.num_mcs % self.nsets]
        e = s.pop(key, None)
        if e is not None:
            s[key] = e
            return True
        if len(s) >= self.ways:
            victim = self._clean_victim(s)
            if victim is None:
                return False
            del s[victim]
        s[key] = [False, info]
        return True

    def record_remap(self, key: int, info: MappingInfo) -> bool:
        """Write a remap=1 entry; returns True once the remap count reaches the flush mark."""
        s = self.sets[(key >> 1) // self.num_mcs % self.nsets]
        e = s.pop(key, None)
        if e is not None:
            if not e[0]:
                self.remap_count += 1
            e[0] = True
            e[1] = info
            s[key] = e
        else:
            if len(s) >= self.ways:
                victim = self._clean_victim(s)
                if victim is None:
                    raise TagBufferFull(key)
                del s[victim]
            s[key] = [True, info]
            self.remap_count += 1
        return self.remap_count >= self.flush_at

    def drain(self) -> list[tuple[int, MappingInfo]]:
        """Clear every remap bit, returning the mappings that were outstanding."""
        out = []
        for s in self.sets:
            for k, e in s.items():
                if e[0]:
                    out.append((k, e[1]))
                    e[0] = False
        self.remap_count = 0
        return out

    @property
    def valid_count(self) -> int:
        return sum(len(s) for s in self.sets)

    @property
    def occupancy(self) -> float:
        return self.remap_count / self.entries

    def entries_view(self) -> dict[int, tuple[bool, MappingInfo]]:
        return {k: (e[0], e[1]) for s in self.sets for k, e in s.items()}


class PageTable:
    """Authoritative PTE mapping bits; pages absent from the dict are uncached."""

    def __init__(self) -> None:
        self.map: dict[int, MappingInfo] = {}

    def get(self, key: int) -> MappingInfo:
        return self.map.get(key, UNCACHED)

    def set(self, key: int, info: MappingInfo) -> None:
        if info.cached:
            self.map[key] = info
        else:
            self.map.pop(key, None)


class MappingPlane:
    """All MCs' tag buffers, the page table and per-core TLB mirrors."""

    def __init__(
        self,
        num_mcs: int,
        entries: int = 1024,
        ways: int = 8,
        threshold: float = 0.7,
        costs: CoherenceCosts = CoherenceCosts(),
    ) -> None:
        self.buffers = [TagBuffer(entries, ways, threshold, num_mcs) for _ in range(num_mcs)]
        self.page_table = PageTable()
        self.costs = costs
        self.flushes = 0
        self.forced_flushes = 0
        self.coherence_us = 0.0
        self.remaps = 0
        # TLB mirrors are refreshed wholesale at each shootdown; the epoch counts refreshes.
        self.tlb_epoch = 0

    def carried(self, key: int) -> MappingInfo:
        """Mapping bits a request picks up from its core's TLB."""
        return self.page_table.map.get(key, UNCACHED)

    def lookup(self, mc: int, key: int, carried: MappingInfo | None) -> MappingInfo | None:
        """Mapping used for this request; None means the DRAM-cache tags must be probed."""
        info = self.buffers[mc].lookup(key)
        if info is not None:
            return info
        return carried

    def cache_clean_mapping(self, mc: int, key: int, info: MappingInfo) -> bool:
        return self.buffers[mc].insert_clean(key, info)

    def record_remap(self, mc: int, key: int, info: MappingInfo) -> bool:
        self.remaps += 1
        buf = self.buffers[mc]
        try:
            return buf.record_remap(key, info)
        except TagBufferFull:
            self.forced_flushes += 1
            self.flush()
            return buf.record_remap(key, info)

    def flush(self) -> float:
        """Write outstanding remaps to the page table, shoot down TLBs, clear remap bits."""
        pt = self.page_table
        for buf in self.buffers:
            for key, info in buf.drain():
                pt.set(key, info)
        self.tlb_epoch += 1
        self.flushes += 1
        cost = self.costs.per_flush_us
        self.coherence_us += cost
        return cost

    def effective(self, key: int) -> MappingInfo:
        mc_buf = self.buffers[(key >> 1) % len(self.buffers)]
        e = mc_buf.peek(key)
        return e[1] if e is not None else self.page_table.get(key)

    def outstanding(self) -> int:
        return sum(b.remap_count for b in self.buffers)
