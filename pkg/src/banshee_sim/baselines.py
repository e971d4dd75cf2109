"""Comparison designs with their fixed per-access byte charges.

Writebacks never allocate in any baseline: a dirty LLC eviction to an
uncached page or line goes straight to off-package DRAM.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .base import Design
from .geometry import Geometry
from .metrics import EXT_DRAM, HIT_DATA, IN, MISS_DATA, OFF, REPLACEMENT, TAG
from .rng import Streams
from .trace import WRITE, Trace

FOOTPRINT_GROUP_LINES = 4


def _popcount(x: int) -> int:
    return bin(x).count("1")


@dataclass
class FootprintOracle:
    """Touched 4-line groups per fill, indexed by the design's fill ordinal."""

    masks: list[int]
    group_bytes: int = FOOTPRINT_GROUP_LINES * 64

    def fill_bytes(self, ordinal: int) -> int:
        return _popcount(self.masks[ordinal]) * self.group_bytes

    @property
    def fills(self) -> int:
        return len(self.masks)

    def mean_bytes(self) -> float:
        if not self.masks:
            return 0.0
        return sum(_popcount(m) for m in self.masks) * self.group_bytes / len(self.masks)


class _PageCache(Design):
    """Shared footprint bookkeeping for the page-granularity baselines."""

    def __init__(self, geo: Geometry, footprint: bool | FootprintOracle = True) -> None:
        super().__init__(geo)
        self._ps = geo.page_shift
        self._lpp_mask = geo.lines_per_page - 1
        self._group_bytes = FOOTPRINT_GROUP_LINES * geo.line_bytes
        self.oracle: FootprintOracle | None = footprint if isinstance(footprint, FootprintOracle) else None
        self.use_footprint = bool(footprint)
        # Profiling mode: footprint requested but no oracle yet; record touches per fill.
        self.profiling = self.use_footprint and self.oracle is None
        self.recorded: list[int] = []
        self.fills = 0
        self.log: list[tuple[str, int]] | None = None

    def _group(self, line_addr: int) -> int:
        return 1 << ((line_addr & self._lpp_mask) // FOOTPRINT_GROUP_LINES)

    def _fill_bytes(self, ordinal: int) -> int:
        if self.oracle is not None:
            return self.oracle.fill_bytes(ordinal)
        return self.geo.page_bytes

    def _new_fill(self) -> int:
        k = self.fills
        self.fills += 1
        if self.profiling:
            self.recorded.append(0)
        return k

    def _touch(self, ordinal: int, group: int) -> None:
        if self.profiling:
            self.recorded[ordinal] |= group

    def footprint_oracle(self) -> FootprintOracle:
        return FootprintOracle(list(self.recorded), self._group_bytes)


class UnisonCache(_PageCache):
    """Page-granularity set-associative with LRU, perfect way prediction and footprints."""

    name = "unison"

    def __init__(self, geo: Geometry, footprint: bool | FootprintOracle = True) -> None:
        super().__init__(geo, footprint)
        self.ways = geo.ways
        n = geo.sets * geo.ways
        self.tags = [-1] * n
        self.stamp = [0] * n
        self.dirty = [0] * n
        self.ordinal = [0] * n
        self.clock = 0
        self._setmask = geo.sets - 1

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        ledger = self.ledger
        st = self.stats
        if large:
            ledger.charge(OFF, EXT_DRAM, self.geo.line_bytes)
            st.misses += 1
            st.read_misses += kind != WRITE
            return False
        page = line_addr >> self._ps
        base = (page & self._setmask) * self.ways
        W = self.ways
        tags = self.tags
        slot = -1
        for i in range(base, base + W):
            if tags[i] == page:
                slot = i
                break
        group = self._group(line_addr)
        tag_b = self.geo.tag_row_entry
        ledger.charge(IN, TAG, tag_b)
        if kind == WRITE:
            if slot >= 0:
                ledger.charge(IN, HIT_DATA, self.geo.line_bytes)
                self.dirty[slot] |= group
                st.hits += 1
                return True
            ledger.charge(OFF, EXT_DRAM, self.geo.line_bytes)
            st.misses += 1
            return False
        self.clock += 1
        if slot >= 0:
            ledger.charge(IN, HIT_DATA, self.geo.line_bytes)
            ledger.charge(IN, TAG, tag_b)
            self.stamp[slot] = self.clock
            self._touch(self.ordinal[slot], group)
            st.hits += 1
            return True
        ledger.charge(IN, MISS_DATA, self.geo.line_bytes)
        ledger.charge(OFF, EXT_DRAM, self.geo.line_bytes)
        st.misses += 1
        st.read_misses += 1
        victim = -1
        for i in range(base, base + W):
            if tags[i] < 0:
                victim = i
                break
        if victim < 0:
            victim = min(range(base, base + W), key=self.stamp.__getitem__)
            if self.log is not None:
                self.log.append(("evict", tags[victim]))
            wb = _popcount(self.dirty[victim]) * self._group_bytes
            if wb:
                ledger.charge(IN, REPLACEMENT, wb)
                ledger.charge(OFF, REPLACEMENT, wb)
        k = self._new_fill()
        fill = self._fill_bytes(k)
        ledger.charge(OFF, EXT_DRAM, fill)
        ledger.charge(IN, REPLACEMENT, fill)
        ledger.charge(IN, REPLACEMENT, tag_b)
        st.replacements += 1
        tags[victim] = page
        self.stamp[victim] = self.clock
        self.dirty[victim] = 0
        self.ordinal[victim] = k
        self._touch(k, group)
        return False

    def contents(self) -> dict:
        return {
            t: ((i % self.ways), self.dirty[i]) for i, t in enumerate(self.tags) if t >= 0
        }


class TaglessCache(_PageCache):
    """Idealised TDC: fully associative FIFO, mapping known for free, footprint fills."""

    name = "tdc"

    def __init__(self, geo: Geometry, footprint: bool | FootprintOracle = True) -> None:
        super().__init__(geo, footprint)
        self.capacity = geo.cache_pages
        self.resident: dict[int, list[int]] = {}
        self.fifo: deque[int] = deque()

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        ledger = self.ledger
        st = self.stats
        line_b = self.geo.line_bytes
        if large:
            ledger.charge(OFF, EXT_DRAM, line_b)
            st.misses += 1
            st.read_misses += kind != WRITE
            return False
        page = line_addr >> self._ps
        group = self._group(line_addr)
        ent = self.resident.get(page)
        if ent is not None:
            ledger.charge(IN, HIT_DATA, line_b)
            if kind == WRITE:
                ent[0] |= group
            else:
                self._touch(ent[1], group)
            st.hits += 1
            return True
        ledger.charge(OFF, EXT_DRAM, line_b)
        st.misses += 1
        if kind == WRITE:
            return False
        st.read_misses += 1
        if len(self.fifo) >= self.capacity:
            old = self.fifo.popleft()
            if self.log is not None:
                self.log.append(("evict", old))
            wb = _popcount(self.resident.pop(old)[0]) * self._group_bytes
            if wb:
                ledger.charge(IN, REPLACEMENT, wb)
                ledger.charge(OFF, REPLACEMENT, wb)
        k = self._new_fill()
        fill = self._fill_bytes(k)
        ledger.charge(OFF, EXT_DRAM, fill)
        ledger.charge(IN, REPLACEMENT, fill)
        st.replacements += 1
        self.resident[page] = [0, k]
        self.fifo.append(page)
        self._touch(k, group)
        return False

    def contents(self) -> dict:
        return {p: (i, self.resident[p][0]) for i, p in enumerate(self.fifo)}


class AlloyCache(Design):
    """Direct-mapped line cache with tag-and-data bursts and stochastic fills."""

    name = "alloy"

    def __init__(self, geo: Geometry, replace_prob: float = 0.1, seed: int = 1) -> None:
        super().__init__(geo)
        if not 0.0 <= replace_prob <= 1.0:
            raise ValueError("replace_prob must lie in [0, 1]")
        self.replace_prob = replace_prob
        self.nsets = geo.cache_capacity // geo.line_bytes
        self.tags = [-1] * self.nsets
        self.dirty = bytearray(self.nsets)
        self.streams = Streams(seed)
        self.rngs = [self.streams.get(mc, "fill") for mc in range(geo.num_mcs)]
        self._ps = geo.page_shift
        self._nmc = geo.num_mcs

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        ledger = self.ledger
        st = self.stats
        line_b = self.geo.line_bytes
        tag_b = self.geo.tag_row_entry
        s = line_addr % self.nsets
        if self.tags[s] == line_addr:
            # Tag and data travel in one burst, for reads and writebacks alike.
            ledger.charge(IN, HIT_DATA, line_b)
            ledger.charge(IN, TAG, tag_b)
            if kind == WRITE:
                self.dirty[s] = 1
            st.hits += 1
            return True
        st.misses += 1
        if kind == WRITE:
            # Presence is known without a probe, so the line bypasses the cache.
            ledger.charge(OFF, EXT_DRAM, line_b)
            return False
        st.read_misses += 1
        ledger.charge(IN, MISS_DATA, line_b)
        ledger.charge(IN, TAG, tag_b)
        ledger.charge(OFF, EXT_DRAM, line_b)
        p = self.replace_prob
        if p >= 1.0 or (p > 0.0 and self.rngs[(line_addr >> self._ps) % self._nmc].random() < p):
            ledger.charge(IN, REPLACEMENT, line_b + tag_b)
            if self.tags[s] >= 0 and self.dirty[s]:
                ledger.charge(OFF, REPLACEMENT, line_b)
            self.tags[s] = line_addr
            self.dirty[s] = 0
            st.replacements += 1
        return False

    def contents(self) -> dict:
        return {s: (t, bool(self.dirty[s])) for s, t in enumerate(self.tags) if t >= 0}


class NoCache(Design):
    name = "nocache"

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        self.ledger.charge(OFF, EXT_DRAM, self.geo.line_bytes)
        self.stats.misses += 1
        self.stats.read_misses += kind != WRITE
        return False


class CacheOnly(Design):
    name = "cacheonly"

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        self.ledger.charge(IN, HIT_DATA, self.geo.line_bytes)
        self.stats.hits += 1
        return True


def profile_footprints(trace: Trace, geo: Geometry, design: str = "unison") -> FootprintOracle:
    """Replay the policy's own eviction schedule and record each fill's touched groups."""
    from .base import simulate

    cls = {"unison": UnisonCache, "tdc": TaglessCache}[design]
    d = cls(geo, footprint=True)
    simulate(d, trace)
    return d.footprint_oracle()
