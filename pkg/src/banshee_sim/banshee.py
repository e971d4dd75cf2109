"""Banshee DRAM cache: tag-row metadata, sampled frequency counters and
bandwidth-aware replacement, with the mapping plane deciding hit or miss."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .base import ConfigError, Design
from .geometry import Geometry, transfer_bytes
from .mapping import UNCACHED, CoherenceCosts, MappingInfo, MappingPlane
from .metrics import EXT_DRAM, HIT_DATA, IN, OFF, REPLACEMENT, TAG, BandwidthBalancer
from .rng import Streams
from .trace import WRITE


@dataclass(frozen=True)
class BansheeParams:
    sampling_coeff: float = 0.1
    large_sampling_coeff: float = 0.001
    threshold: int | None = None
    large_threshold: int | None = None
    candidates: int | None = None
    counter_bits: int = 5
    miss_rate_window: int = 16384
    initial_miss_rate: float = 1.0
    fixed_sample_rate: float | None = None
    deterministic_sampling: bool = False
    ways_large: int = 0
    # "on_change": store metadata back only when a sample modified it; "always": every sample.
    store_policy: str = "on_change"

    def __post_init__(self) -> None:
        for name in ("sampling_coeff", "large_sampling_coeff", "initial_miss_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.fixed_sample_rate is not None and not 0.0 <= self.fixed_sample_rate <= 1.0:
            raise ConfigError("fixed_sample_rate must lie in [0, 1]")
        if self.counter_bits < 2 or self.miss_rate_window < 1:
            raise ConfigError("counter_bits must be >= 2 and miss_rate_window >= 1")
        if self.store_policy not in ("on_change", "always"):
            raise ConfigError(f"unknown store_policy {self.store_policy!r}")

    @property
    def max_count(self) -> int:
        return (1 << self.counter_bits) - 1


def default_candidates(ways: int) -> int:
    # Five candidates alongside four cached pages; scaled with associativity.
    return max(1, math.ceil(5 * ways / 4))


def replacement_threshold(lines_per_page: int, sampling_coeff: float, max_count: int = 31) -> int:
    """Half the page's line count times the sampling coefficient, rounded and clamped.

    The clamp keeps the threshold inside the counter range so a candidate can
    still overtake an empty or cold way.
    """
    t = math.floor(lines_per_page * sampling_coeff / 2 + 0.5)
    return min(max(t, 1), max_count - 1)


def re_entry_bound(threshold: float, sample_rate: float) -> float:
    """Minimum touches an evicted page needs before it can re-enter the cache."""
    if threshold <= 0 or sample_rate <= 0:
        raise ValueError("threshold and sample_rate must be positive")
    return 2 * threshold / sample_rate


def slot_bits(tag_bits: int, counter_bits: int = 5) -> tuple[int, int]:
    """(cached-slot bits, candidate-slot bits): cached adds valid and dirty."""
    return tag_bits + counter_bits + 2, tag_bits + counter_bits


def metadata_bits(ways: int, candidates: int, tag_bits: int, counter_bits: int = 5) -> int:
    c, k = slot_bits(tag_bits, counter_bits)
    return ways * c + candidates * k


def metadata_overhead(geo: Geometry) -> float:
    """Tag-row bytes per set over data bytes per set."""
    return geo.tag_row_entry / (geo.page_bytes * geo.ways)


# --------------------------------------------------------------------------- set metadata


@dataclass
class CachedSlot:
    tag: int
    count: int
    valid: bool
    dirty: bool


@dataclass
class CandidateSlot:
    tag: int
    count: int


class SetMetadata:
    """One set's tag-row entry. A tag of None marks an empty slot (count 0)."""

    __slots__ = ("tags", "counts", "dirty", "ctags", "ccounts")

    def __init__(self, ways: int, candidates: int) -> None:
        self.tags: list[int | None] = [None] * ways
        self.counts = [0] * ways
        self.dirty = [False] * ways
        self.ctags: list[int | None] = [None] * candidates
        self.ccounts = [0] * candidates

    @property
    def ways(self) -> int:
        return len(self.tags)

    def cached_slots(self) -> list[CachedSlot]:
        return [
            CachedSlot(t if t is not None else 0, c, t is not None, d)
            for t, c, d in zip(self.tags, self.counts, self.dirty)
        ]

    def candidate_slots(self) -> list[CandidateSlot]:
        return [CandidateSlot(t if t is not None else 0, c) for t, c in zip(self.ctags, self.ccounts)]

    def way_of(self, tag: int) -> int | None:
        try:
            return self.tags.index(tag)
        except ValueError:
            return None

    def min_way(self) -> int:
        """Victim way: minimal counter, empty ways first, then lowest index."""
        best, key = 0, None
        for w, (t, c) in enumerate(zip(self.tags, self.counts)):
            k = (c, t is not None)
            if key is None or k < key:
                best, key = w, k
        return best

    def halve(self) -> None:
        self.counts = [c >> 1 for c in self.counts]
        self.ccounts = [c >> 1 for c in self.ccounts]

    def all_counts(self) -> list[int]:
        return self.counts + self.ccounts

    def copy(self) -> "SetMetadata":
        m = SetMetadata.__new__(SetMetadata)
        m.tags, m.counts, m.dirty = list(self.tags), list(self.counts), list(self.dirty)
        m.ctags, m.ccounts = list(self.ctags), list(self.ccounts)
        return m

    def state(self) -> tuple:
        return (tuple(self.tags), tuple(self.counts), tuple(self.dirty), tuple(self.ctags), tuple(self.ccounts))

    def pack(self, tag_bits: int, counter_bits: int = 5) -> int:
        """Bit-pack as stored in the tag row: cached slots first, then candidates."""
        word, pos = 0, 0

        def put(v: int, n: int) -> None:
            nonlocal word, pos
            if v >> n:
                raise OverflowError(f"value {v} does not fit in {n} bits")
            word |= v << pos
            pos += n

        for t, c, d in zip(self.tags, self.counts, self.dirty):
            put(t or 0, tag_bits)
            put(c, counter_bits)
            put(int(t is not None), 1)
            put(int(d), 1)
        for t, c in zip(self.ctags, self.ccounts):
            put(t or 0, tag_bits)
            put(c, counter_bits)
        return word

    @classmethod
    def unpack(cls, word: int, ways: int, candidates: int, tag_bits: int, counter_bits: int = 5) -> "SetMetadata":
        m = cls(ways, candidates)
        pos = 0

        def get(n: int) -> int:
            nonlocal pos
            v = (word >> pos) & ((1 << n) - 1)
            pos += n
            return v

        for w in range(ways):
            t, c, valid, d = get(tag_bits), get(counter_bits), get(1), get(1)
            m.tags[w] = t if valid else None
            m.counts[w], m.dirty[w] = c, bool(d)
        for i in range(candidates):
            t, c = get(tag_bits), get(counter_bits)
            # An empty candidate packs as tag 0, count 0; restore it as empty.
            m.ctags[i] = None if (t == 0 and c == 0) else t
            m.ccounts[i] = c
        return m

    def __repr__(self) -> str:
        cached = " ".join(
            f"[{'-' if t is None else hex(t)}:{c}{'*' if d else ''}]" for t, c, d in zip(self.tags, self.counts, self.dirty)
        )
        cands = " ".join(f"({'-' if t is None else hex(t)}:{c})" for t, c in zip(self.ctags, self.ccounts))
        return f"cached {cached} | candidates {cands}"


class ReplacementAction(NamedTuple):
    way: int
    evicted_tag: int | None
    evicted_dirty: bool
    candidate: int


def on_sampled_hit_in_metadata(meta: SetMetadata, tag: int, threshold: int, max_count: int = 31) -> ReplacementAction | None:
    """Counter bump for a tag present in the metadata, with promotion and overflow halving."""
    action = None
    w = meta.way_of(tag)
    if w is not None:
        meta.counts[w] += 1
        count = meta.counts[w]
    else:
        i = meta.ctags.index(tag)
        meta.ccounts[i] += 1
        count = meta.ccounts[i]
        v = meta.min_way()
        if count > meta.counts[v] + threshold:
            old_tag, old_count, old_dirty = meta.tags[v], meta.counts[v], meta.dirty[v]
            meta.tags[v], meta.counts[v], meta.dirty[v] = tag, count, False
            if old_tag is None:
                meta.ctags[i], meta.ccounts[i] = None, 0
            else:
                meta.ctags[i], meta.ccounts[i] = old_tag, old_count
            action = ReplacementAction(v, old_tag, old_dirty, i)
    if count >= max_count:
        meta.halve()
    return action


def on_sampled_miss_in_metadata(meta: SetMetadata, tag: int, rng: random.Random) -> bool:
    """Maybe overwrite a random candidate with a newcomer; returns True if it did."""
    n = len(meta.ctags)
    if n == 0:
        return False
    v = rng.randrange(n)
    u = rng.random()
    c = meta.ccounts[v]
    if meta.ctags[v] is None or c <= 0 or u < 1.0 / c:
        meta.ctags[v] = tag
        meta.ccounts[v] = 1
        return True
    return False


# --------------------------------------------------------------------------- sampling


class SamplingState:
    """Per-MC sample gate: recent miss rate (EWMA) times the sampling coefficient."""

    __slots__ = ("ewma", "alpha", "rng", "fixed", "deterministic", "_acc", "_num", "_den")

    def __init__(
        self,
        rng: random.Random,
        window: int = 16384,
        initial_miss_rate: float = 1.0,
        fixed_rate: float | None = None,
        deterministic: bool = False,
    ) -> None:
        self.ewma = initial_miss_rate
        self.alpha = 1.0 / window
        self.rng = rng
        self.fixed = fixed_rate
        self.deterministic = deterministic
        self._acc = 0.0
        self._num = self._den = 0
        if fixed_rate is not None:
            f = Fraction(fixed_rate).limit_denominator(1 << 20)
            self._num, self._den = f.numerator, f.denominator
            self._acc = 0

    def rate(self, coeff: float) -> float:
        return self.fixed if self.fixed is not None else self.ewma * coeff

    def draw(self, coeff: float) -> bool:
        if self.deterministic:
            if self.fixed is not None:
                self._acc += self._num
                if self._acc >= self._den:
                    self._acc -= self._den
                    return True
                return False
            self._acc += self.ewma * coeff
            if self._acc >= 1.0:
                self._acc -= 1.0
                return True
            return False
        u = self.rng.random()
        return u < (self.fixed if self.fixed is not None else self.ewma * coeff)

    def observe(self, miss: bool) -> None:
        self.ewma += (miss - self.ewma) * self.alpha


# --------------------------------------------------------------------------- partition


@dataclass(frozen=True)
class Partition:
    ways_regular: int
    ways_large: int

    @property
    def regular_ways(self) -> range:
        return range(self.ways_regular)

    @property
    def large_ways(self) -> range:
        return range(self.ways_regular, self.ways_regular + self.ways_large)

    def placement(self, large_page: int, way: int, geo: Geometry) -> list[tuple[int, int]]:
        """(set, way) cells a large page occupies when held in ``way``."""
        if way not in self.large_ways:
            raise ConfigError(f"way {way} is not in the large-page partition")
        first = (large_page % geo.large_sets) * geo.large_span_sets
        return [(s, way) for s in range(first, first + geo.large_span_sets)]


def partition_for_large_pages(ways_regular: int, ways_large: int, geo: Geometry) -> Partition:
    if ways_regular < 0 or ways_large < 0 or ways_regular + ways_large != geo.ways:
        raise ConfigError(f"partition {ways_regular}+{ways_large} does not cover {geo.ways} ways")
    if ways_large and geo.large_sets == 0:
        raise ConfigError("cache has fewer sets than one large page spans")
    return Partition(ways_regular, ways_large)


# --------------------------------------------------------------------------- engine


@dataclass(frozen=True)
class TagBufferParams:
    entries: int = 1024
    ways: int = 8
    threshold: float = 0.7


class BansheeCache(Design):
    name = "banshee"

    def __init__(
        self,
        geo: Geometry,
        params: BansheeParams = BansheeParams(),
        tag_buffer: TagBufferParams = TagBufferParams(),
        costs: CoherenceCosts = CoherenceCosts(),
        seed: int = 1,
        balancer: BandwidthBalancer | None = None,
        record_log: bool = False,
    ) -> None:
        super().__init__(geo)
        self.params = params
        self.partition = partition_for_large_pages(geo.ways - params.ways_large, params.ways_large, geo)
        wr, wl = self.partition.ways_regular, self.partition.ways_large
        self.candidates = params.candidates if params.candidates is not None else default_candidates(geo.ways)
        self.max_count = params.max_count
        self.threshold = (
            params.threshold
            if params.threshold is not None
            else replacement_threshold(geo.lines_per_page, params.sampling_coeff, self.max_count)
        )
        self.large_threshold = (
            params.large_threshold
            if params.large_threshold is not None
            else replacement_threshold(geo.lines_per_large_page, params.large_sampling_coeff, self.max_count)
        )
        bits = metadata_bits(wr, self.candidates, geo.tag_bits, params.counter_bits)
        self.meta_bytes = transfer_bytes(max(geo.tag_row_entry, -(-bits // 8)), geo)
        lbits = metadata_bits(wl, self.candidates, geo.tag_bits, params.counter_bits)
        self.large_meta_bytes = transfer_bytes(max(geo.tag_row_entry, -(-lbits // 8)), geo)
        self.plane = MappingPlane(geo.num_mcs, tag_buffer.entries, tag_buffer.ways, tag_buffer.threshold, costs)
        self.streams = Streams(seed)
        self.sampling = [
            SamplingState(
                self.streams.get(mc, "sample"),
                params.miss_rate_window,
                params.initial_miss_rate,
                params.fixed_sample_rate,
                params.deterministic_sampling,
            )
            for mc in range(geo.num_mcs)
        ]
        self.cand_rng = [self.streams.get(mc, "candidate") for mc in range(geo.num_mcs)]
        self.meta: dict[int, SetMetadata] = {}
        self.lmeta: dict[int, SetMetadata] = {}
        self.balancer = balancer
        self.carried_hook = None
        self.log: list[tuple[int, str, int]] | None = [] if record_log else None
        self.n_access = 0
        self._ps = geo.page_shift
        self._lps = geo.large_page_shift
        self._nmc = geo.num_mcs
        self._sets = geo.sets
        self._set_bits = geo.set_bits
        self._setmask = geo.sets - 1
        self._line = geo.line_bytes
        self._coeff = params.sampling_coeff
        self._lcoeff = params.large_sampling_coeff
        self._always_store = params.store_policy == "always"

    # ---------------------------------------------------------------- helpers

    def _meta(self, s: int) -> SetMetadata:
        m = self.meta.get(s)
        if m is None:
            m = self.meta[s] = SetMetadata(self.partition.ways_regular, self.candidates)
        return m

    def _lmeta(self, ls: int) -> SetMetadata:
        m = self.lmeta.get(ls)
        if m is None:
            m = self.lmeta[ls] = SetMetadata(self.partition.ways_large, self.candidates)
        return m

    def truth(self, key: int) -> MappingInfo:
        """Ground-truth mapping read straight from the set metadata."""
        raw, large = key >> 1, key & 1
        if large:
            ls = raw % self.geo.large_sets
            m = self.lmeta.get(ls)
            w = m.way_of(raw // self.geo.large_sets) if m else None
            return MappingInfo(True, w + self.partition.ways_regular) if w is not None else UNCACHED
        m = self.meta.get(raw & self._setmask)
        w = m.way_of(raw >> self._set_bits) if m else None
        return MappingInfo(True, w) if w is not None else UNCACHED

    def sync_stats(self):
        st = self.stats
        st.flushes = self.plane.flushes
        st.forced_flushes = self.plane.forced_flushes
        st.coherence_us = self.plane.coherence_us
        return st

    def reset_stats(self) -> None:
        super().reset_stats()
        self.plane.flushes = self.plane.forced_flushes = 0
        self.plane.coherence_us = 0.0

    # ---------------------------------------------------------------- access path

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        if large:
            return self._access_large(kind, line_addr)
        if not self.partition.ways_regular:
            raise ConfigError("regular page in trace but the regular partition has no ways")
        self.n_access += 1
        page = line_addr >> self._ps
        key = page << 1
        mc = page % self._nmc
        s = page & self._setmask
        ledger = self.ledger
        buf = self.plane.buffers[mc]
        info = buf.lookup(key)
        if info is None:
            if kind == WRITE:
                ledger.charge(IN, TAG, self.geo.tag_row_entry)
                self.stats.probes += 1
                info = self.truth(key)
            else:
                info = self.plane.page_table.map.get(key, UNCACHED)
                if self.carried_hook is not None:
                    info = self.carried_hook(key, info)
                buf.insert_clean(key, info)
        samp = self.sampling[mc]
        sampled = samp.draw(self._coeff)
        bal = self.balancer
        bypass = bal is not None and bal.active and s < bal.bypass_sets
        hit = info[0]
        if hit:
            meta = self.meta[s]
            if bypass and kind != WRITE and not meta.dirty[info[1]]:
                hit = False
                self.stats.bypassed += 1
                ledger.charge(OFF, EXT_DRAM, self._line)
            else:
                ledger.charge(IN, HIT_DATA, self._line)
                if kind == WRITE:
                    meta.dirty[info[1]] = True
        else:
            ledger.charge(OFF, EXT_DRAM, self._line)
        if hit:
            self.stats.hits += 1
        else:
            self.stats.misses += 1
            if kind != WRITE:
                self.stats.read_misses += 1
        if sampled and not bypass:
            self._sample(mc, s, page >> self._set_bits, key, False)
        samp.observe(not hit)
        if bal is not None:
            bal.tick(ledger)
        return hit

    def _access_large(self, kind: int, line_addr: int) -> bool:
        geo = self.geo
        if not self.partition.ways_large:
            raise ConfigError("large page in trace but the large-page partition has no ways")
        self.n_access += 1
        lp = line_addr >> self._lps
        key = lp << 1 | 1
        mc = lp % self._nmc
        ls = lp % geo.large_sets
        ledger = self.ledger
        buf = self.plane.buffers[mc]
        info = buf.lookup(key)
        if info is None:
            if kind == WRITE:
                ledger.charge(IN, TAG, geo.tag_row_entry)
                self.stats.probes += 1
                info = self.truth(key)
            else:
                info = self.plane.page_table.map.get(key, UNCACHED)
                if self.carried_hook is not None:
                    info = self.carried_hook(key, info)
                buf.insert_clean(key, info)
        samp = self.sampling[mc]
        sampled = samp.draw(self._lcoeff)
        hit = info[0]
        if hit:
            ledger.charge(IN, HIT_DATA, self._line)
            if kind == WRITE:
                self.lmeta[ls].dirty[info[1] - self.partition.ways_regular] = True
            self.stats.hits += 1
        else:
            ledger.charge(OFF, EXT_DRAM, self._line)
            self.stats.misses += 1
            if kind != WRITE:
                self.stats.read_misses += 1
        if sampled:
            self._sample(mc, ls, lp // geo.large_sets, key, True)
        samp.observe(not hit)
        if self.balancer is not None:
            self.balancer.tick(ledger)
        return hit

    # ---------------------------------------------------------------- replacement

    def maybe_sample(self, mc: int, s: int, tag: int, key: int, large: bool = False) -> None:
        self._sample(mc, s, tag, key, large)

    def _sample(self, mc: int, s: int, tag: int, key: int, large: bool) -> None:
        ledger = self.ledger
        if large:
            meta, nbytes, thr = self._lmeta(s), self.large_meta_bytes, self.large_threshold
        else:
            meta, nbytes, thr = self._meta(s), self.meta_bytes, self.threshold
        ledger.charge(IN, TAG, nbytes)
        self.stats.sampled += 1
        if tag in meta.tags or tag in meta.ctags:
            action = on_sampled_hit_in_metadata(meta, tag, thr, self.max_count)
            modified = True
            if action is not None:
                self._replace(mc, s, key, action, large)
        else:
            modified = on_sampled_miss_in_metadata(meta, tag, self.cand_rng[mc])
        if modified or self._always_store:
            ledger.charge(IN, TAG, nbytes)
            self.stats.metadata_writes += 1

    def charge_replacement(self, evicted_dirty: bool, large: bool = False) -> None:
        ledger = self.ledger
        nbytes = self.geo.large_page_bytes if large else self.geo.page_bytes
        ledger.charge(OFF, EXT_DRAM, nbytes)
        ledger.charge(IN, REPLACEMENT, nbytes)
        if evicted_dirty:
            ledger.charge(IN, REPLACEMENT, nbytes)
            ledger.charge(OFF, REPLACEMENT, nbytes)

    def _replace(self, mc: int, s: int, key: int, action: ReplacementAction, large: bool) -> None:
        self.charge_replacement(action.evicted_dirty, large)
        self.stats.replacements += 1
        plane = self.plane
        flush = False
        if large:
            way = action.way + self.partition.ways_regular
            victim = None if action.evicted_tag is None else ((action.evicted_tag * self.geo.large_sets + s) << 1 | 1)
        else:
            way = action.way
            victim = None if action.evicted_tag is None else ((action.evicted_tag << self._set_bits | s) << 1)
        if victim is not None:
            flush = plane.record_remap(mc, victim, UNCACHED)
            if self.log is not None:
                self.log.append((self.n_access, "evict", victim))
        flush = plane.record_remap(mc, key, MappingInfo(True, way)) or flush
        if self.log is not None:
            self.log.append((self.n_access, "admit", key))
        if flush:
            plane.flush()

    # ---------------------------------------------------------------- inspection

    def contents(self) -> dict:
        out = {}
        for s, m in self.meta.items():
            for w, (t, d) in enumerate(zip(m.tags, m.dirty)):
                if t is not None:
                    out[(t << self._set_bits | s) << 1] = (w, d)
        for ls, m in self.lmeta.items():
            for w, (t, d) in enumerate(zip(m.tags, m.dirty)):
                if t is not None:
                    out[(t * self.geo.large_sets + ls) << 1 | 1] = (w + self.partition.ways_regular, d)
        return out

    def metadata_state(self) -> dict:
        return {("R", s): m.state() for s, m in self.meta.items()} | {("L", s): m.state() for s, m in self.lmeta.items()}

    def coherence_violations(self) -> list[tuple[int, MappingInfo, MappingInfo]]:
        """Pages whose effective mapping (buffer over page table) disagrees with the metadata."""
        keys = set(self.contents())
        keys.update(self.plane.page_table.map)
        for buf in self.plane.buffers:
            keys.update(buf.entries_view())
        bad = []
        for key in keys:
            eff, truth = self.plane.effective(key), self.truth(key)
            if eff != truth:
                bad.append((key, eff, truth))
        return bad

    def dump_metadata(self, sets: list[int] | None = None) -> str:
        chosen = sorted(self.meta) if sets is None else sets
        lines = [f"threshold={self.threshold} meta_bytes={self.meta_bytes} candidates={self.candidates}"]
        for s in chosen:
            m = self.meta.get(s)
            if m is not None:
                lines.append(f"set {s:#x}: {m!r}")
        for ls in sorted(self.lmeta):
            lines.append(f"large set {ls:#x}: {self.lmeta[ls]!r}")
        return "\n".join(lines) + "\n"
