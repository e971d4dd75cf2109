"""Brute-force reference replay used by the test suite.

Everything here is written for clarity: plain dicts and lists, the replacement
algorithm transcribed step by step, and hit/miss decided from exact cache
contents rather than through the mapping plane. It shares only the geometry,
the trace type and the PRNG streams with the engines, so that stochastic
paths consume identical draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .config import RunConfig
from .rng import Streams
from .trace import WRITE, Trace

TIERS = {"in_package": ("HitData", "MissData", "Tag", "Replacement"), "off_package": ("ExtDRAM", "Replacement")}


class _Ledger:
    def __init__(self, unit: int) -> None:
        self.unit = unit
        self.b = {t: {c: 0 for c in cats} for t, cats in TIERS.items()}

    def add(self, tier: str, cat: str, n: int) -> None:
        self.b[tier][cat] += math.ceil(n / self.unit) * self.unit


@dataclass
class ShadowState:
    ledger: dict
    outcomes: list[bool]
    contents: dict
    flushes: int = 0
    coherence_us: float = 0.0
    metadata: dict = field(default_factory=dict)
    sampled: int = 0
    replacements: int = 0
    evictions: list = field(default_factory=list)


def replay(trace: Trace, cfg: RunConfig, design: str = "banshee") -> ShadowState:
    if len(trace) and cfg.geometry.sets > 4096 and design == "banshee":
        raise ValueError("the oracle is meant for small geometries")
    fn = {
        "banshee": _banshee,
        "alloy": lambda t, c: _alloy(t, c, c.alloy.replace_prob),
        "alloy1": lambda t, c: _alloy(t, c, 1.0),
        "alloy0.1": lambda t, c: _alloy(t, c, 0.1),
        "unison": _unison_two_pass,
        "tdc": _tdc_two_pass,
        "nocache": _nocache,
        "cacheonly": _cacheonly,
    }[design]
    return fn(trace, cfg)


# --------------------------------------------------------------------------- Banshee


def _banshee(trace: Trace, cfg: RunConfig) -> ShadowState:
    geo, p, tb = cfg.geometry, cfg.banshee, cfg.tag_buffer
    led = _Ledger(geo.min_transfer)
    streams = Streams(cfg.seed)
    max_count = 2**p.counter_bits - 1
    ways_reg = geo.ways - p.ways_large
    n_cand = p.candidates if p.candidates is not None else max(1, math.ceil(5 * geo.ways / 4))

    def thr(lines: int, coeff: float) -> int:
        return min(max(math.floor(lines * coeff / 2 + 0.5), 1), max_count - 1)

    threshold = p.threshold if p.threshold is not None else thr(geo.lines_per_page, p.sampling_coeff)
    lthreshold = p.large_threshold if p.large_threshold is not None else thr(geo.lines_per_large_page, p.large_sampling_coeff)

    def meta_bytes(ways: int) -> int:
        bits = ways * (geo.tag_bits + p.counter_bits + 2) + n_cand * (geo.tag_bits + p.counter_bits)
        return math.ceil(max(geo.tag_row_entry, math.ceil(bits / 8)) / geo.min_transfer) * geo.min_transfer

    mbytes = {False: meta_bytes(ways_reg), True: meta_bytes(p.ways_large)}

    metas: dict[tuple[bool, int], dict] = {}
    page_table: dict[int, tuple[bool, int]] = {}
    buffers: dict[int, list[dict]] = {mc: [] for mc in range(geo.num_mcs)}
    tb_sets = tb.entries // tb.ways
    flush_at = math.ceil(round(tb.threshold * tb.entries, 9))
    clock = [0]
    ewma = {mc: p.initial_miss_rate for mc in range(geo.num_mcs)}
    acc = {mc: 0 if p.fixed_sample_rate is not None else 0.0 for mc in range(geo.num_mcs)}
    state = ShadowState(ledger={}, outcomes=[], contents={})

    def tb_set(key: int) -> int:
        return (key >> 1) // geo.num_mcs % tb_sets

    def tb_find(mc: int, key: int):
        for e in buffers[mc]:
            if e["key"] == key:
                return e
        return None

    def tb_members(mc: int, idx: int) -> list[dict]:
        return [e for e in buffers[mc] if tb_set(e["key"]) == idx]

    def tick() -> int:
        clock[0] += 1
        return clock[0]

    def flush() -> None:
        for mc in buffers:
            for e in buffers[mc]:
                if e["remap"]:
                    if e["info"][0]:
                        page_table[e["key"]] = e["info"]
                    else:
                        page_table.pop(e["key"], None)
                    e["remap"] = False
        state.flushes += 1
        state.coherence_us += cfg.coherence.per_flush_us

    def remap(mc: int, key: int, info: tuple[bool, int]) -> bool:
        e = tb_find(mc, key)
        if e is not None:
            e["remap"], e["info"], e["stamp"] = True, info, tick()
        else:
            members = tb_members(mc, tb_set(key))
            if len(members) >= tb.ways:
                clean = [m for m in members if not m["remap"]]
                if not clean:
                    flush()
                    clean = members
                victim = min(clean, key=lambda m: m["stamp"])
                buffers[mc].remove(victim)
            buffers[mc].append({"key": key, "remap": True, "info": info, "stamp": tick()})
        return sum(e["remap"] for e in buffers[mc]) >= flush_at

    def get_meta(large: bool, s: int) -> dict:
        k = (large, s)
        if k not in metas:
            w = p.ways_large if large else ways_reg
            metas[k] = {
                "cached": [{"tag": None, "count": 0, "dirty": False} for _ in range(w)],
                "cand": [{"tag": None, "count": 0} for _ in range(n_cand)],
            }
        return metas[k]

    def locate(large: bool, s: int, tag: int):
        m = metas.get((large, s))
        if m is None:
            return None
        for w, slot in enumerate(m["cached"]):
            if slot["tag"] == tag:
                return w
        return None

    for n, (kind, line, delta, large) in enumerate(trace.columns(), start=1):
        if large:
            lp = line >> geo.large_page_shift
            raw, s, tag = lp, lp % geo.large_sets, lp // geo.large_sets
            coeff, threshold_here, page_bytes, off = p.large_sampling_coeff, lthreshold, geo.large_page_bytes, ways_reg
        else:
            raw = line >> geo.page_shift
            s, tag = raw % geo.sets, raw // geo.sets
            coeff, threshold_here, page_bytes, off = p.sampling_coeff, threshold, geo.page_bytes, 0
        key = raw * 2 + int(large)
        mc = raw % geo.num_mcs
        w_true = locate(large, s, tag)

        # Mapping-plane bookkeeping: only affects probe traffic and flushes.
        e = tb_find(mc, key)
        if e is not None:
            e["stamp"] = tick()
        elif kind == WRITE:
            led.add("in_package", "Tag", geo.tag_row_entry)
        else:
            info = page_table.get(key, (False, 0))
            members = tb_members(mc, tb_set(key))
            if len(members) < tb.ways:
                buffers[mc].append({"key": key, "remap": False, "info": info, "stamp": tick()})
            else:
                clean = [m for m in members if not m["remap"]]
                if clean:
                    buffers[mc].remove(min(clean, key=lambda m: m["stamp"]))
                    buffers[mc].append({"key": key, "remap": False, "info": info, "stamp": tick()})

        # Sample gate, decided before the access is serviced.
        if p.deterministic_sampling:
            if p.fixed_sample_rate is not None:
                f = Fraction(p.fixed_sample_rate).limit_denominator(1 << 20)
                acc[mc] += f.numerator
                sampled = acc[mc] >= f.denominator
                if sampled:
                    acc[mc] -= f.denominator
            else:
                acc[mc] += ewma[mc] * coeff
                sampled = acc[mc] >= 1.0
                if sampled:
                    acc[mc] -= 1.0
        else:
            u = streams.get(mc, "sample").random()
            rate = p.fixed_sample_rate if p.fixed_sample_rate is not None else ewma[mc] * coeff
            sampled = u < rate

        hit = w_true is not None
        if hit:
            led.add("in_package", "HitData", geo.line_bytes)
            if kind == WRITE:
                metas[(large, s)]["cached"][w_true]["dirty"] = True
        else:
            led.add("off_package", "ExtDRAM", geo.line_bytes)
        state.outcomes.append(hit)

        if sampled:
            state.sampled += 1
            meta = get_meta(large, s)
            nb = mbytes[large]
            led.add("in_package", "Tag", nb)
            entry = next((x for x in meta["cached"] + meta["cand"] if x["tag"] == tag), None)
            store = False
            if entry is not None:
                entry["count"] += 1
                store = True
                if any(entry is c for c in meta["cand"]):
                    cached = meta["cached"]
                    min_count = min(c["count"] for c in cached)
                    if entry["count"] > min_count + threshold_here:
                        victim_way = min(
                            range(len(cached)), key=lambda w: (cached[w]["count"], cached[w]["tag"] is not None, w)
                        )
                        victim = cached[victim_way]
                        old = dict(victim)
                        victim.update(tag=tag, count=entry["count"], dirty=False)
                        if old["tag"] is None:
                            entry.update(tag=None, count=0)
                        else:
                            entry.update(tag=old["tag"], count=old["count"])
                        entry = victim
                        # Replacement traffic: page fill, plus writeback of a dirty victim.
                        led.add("off_package", "ExtDRAM", page_bytes)
                        led.add("in_package", "Replacement", page_bytes)
                        if old["dirty"]:
                            led.add("in_package", "Replacement", page_bytes)
                            led.add("off_package", "Replacement", page_bytes)
                        state.replacements += 1
                        need = False
                        if old["tag"] is not None:
                            vraw = old["tag"] * (geo.large_sets if large else geo.sets) + s
                            vkey = vraw * 2 + int(large)
                            need = remap(mc, vkey, (False, 0)) or need
                            state.evictions.append((n, vkey))
                        need = remap(mc, key, (True, victim_way + off)) or need
                        if need:
                            flush()
                if entry["count"] == max_count:
                    for x in meta["cached"] + meta["cand"]:
                        x["count"] //= 2
            elif meta["cand"]:
                rng = streams.get(mc, "candidate")
                victim = meta["cand"][rng.randrange(len(meta["cand"]))]
                u = rng.random()
                if victim["tag"] is None or victim["count"] == 0 or u < 1 / victim["count"]:
                    victim["tag"] = tag
                    victim["count"] = 1
                    store = True
            if store or p.store_policy == "always":
                led.add("in_package", "Tag", nb)

        ewma[mc] += ((not hit) - ewma[mc]) / p.miss_rate_window

    state.ledger = led.b
    for (large, s), m in metas.items():
        for w, slot in enumerate(m["cached"]):
            if slot["tag"] is not None:
                raw = slot["tag"] * (geo.large_sets if large else geo.sets) + s
                state.contents[raw * 2 + int(large)] = (w + (ways_reg if large else 0), slot["dirty"])
        state.metadata[("L" if large else "R", s)] = (
            tuple(x["tag"] for x in m["cached"]),
            tuple(x["count"] for x in m["cached"]),
            tuple(x["dirty"] for x in m["cached"]),
            tuple(x["tag"] for x in m["cand"]),
            tuple(x["count"] for x in m["cand"]),
        )
    return state


# --------------------------------------------------------------------------- baselines


def _alloy(trace: Trace, cfg: RunConfig, prob: float) -> ShadowState:
    geo = cfg.geometry
    led = _Ledger(geo.min_transfer)
    streams = Streams(cfg.seed)
    nsets = geo.cache_capacity // geo.line_bytes
    lines: dict[int, list] = {}
    out = []
    repl = 0
    for kind, line, _, _ in trace.columns():
        s = line % nsets
        cur = lines.get(s)
        if cur is not None and cur[0] == line:
            led.add("in_package", "HitData", 64)
            led.add("in_package", "Tag", 32)
            if kind == WRITE:
                cur[1] = True
            out.append(True)
            continue
        out.append(False)
        if kind == WRITE:
            led.add("off_package", "ExtDRAM", 64)
            continue
        led.add("in_package", "MissData", 64)
        led.add("in_package", "Tag", 32)
        led.add("off_package", "ExtDRAM", 64)
        if prob >= 1.0:
            fill = True
        elif prob <= 0.0:
            fill = False
        else:
            fill = streams.get((line >> geo.page_shift) % geo.num_mcs, "fill").random() < prob
        if fill:
            led.add("in_package", "Replacement", 96)
            if cur is not None and cur[1]:
                led.add("off_package", "Replacement", 64)
            lines[s] = [line, False]
            repl += 1
    st = ShadowState(led.b, out, {s: (v[0], v[1]) for s, v in sorted(lines.items())})
    st.replacements = repl
    return st


def _groups_mask(groups: set[int]) -> int:
    return sum(1 << g for g in groups)


def _unison_two_pass(trace: Trace, cfg: RunConfig) -> ShadowState:
    if not cfg.footprint.enabled:
        return _unison(trace, cfg, None)
    first = _unison(trace, cfg, None)
    return _unison(trace, cfg, first.metadata["footprints"])


def _unison(trace: Trace, cfg: RunConfig, footprints: list[set[int]] | None) -> ShadowState:
    geo = cfg.geometry
    led = _Ledger(geo.min_transfer)
    sets: dict[int, list[dict]] = {}  # LRU order: index 0 is least recent
    recorded: list[set[int]] = []
    out, evictions = [], []
    for kind, line, _, large in trace.columns():
        if large:
            led.add("off_package", "ExtDRAM", 64)
            out.append(False)
            continue
        page = line >> geo.page_shift
        group = (line % geo.lines_per_page) // 4
        lru = sets.setdefault(page % geo.sets, [])
        ent = next((e for e in lru if e["page"] == page), None)
        led.add("in_package", "Tag", 32)
        if kind == WRITE:
            if ent is not None:
                led.add("in_package", "HitData", 64)
                ent["dirty"].add(group)
                out.append(True)
            else:
                led.add("off_package", "ExtDRAM", 64)
                out.append(False)
            continue
        if ent is not None:
            led.add("in_package", "HitData", 64)
            led.add("in_package", "Tag", 32)
            lru.remove(ent)
            lru.append(ent)
            recorded[ent["fill"]].add(group)
            out.append(True)
            continue
        out.append(False)
        led.add("in_package", "MissData", 64)
        led.add("off_package", "ExtDRAM", 64)
        if len(lru) < geo.ways:
            used = {e["way"] for e in lru}
            way = min(set(range(geo.ways)) - used)
        else:
            old = lru.pop(0)
            evictions.append(old["page"])
            way = old["way"]
            wb = len(old["dirty"]) * 256
            if wb:
                led.add("in_package", "Replacement", wb)
                led.add("off_package", "Replacement", wb)
        k = len(recorded)
        recorded.append({group})
        fill = geo.page_bytes if footprints is None or not cfg.footprint.enabled else len(footprints[k]) * 256
        led.add("off_package", "ExtDRAM", fill)
        led.add("in_package", "Replacement", fill)
        led.add("in_package", "Replacement", 32)
        lru.append({"page": page, "way": way, "dirty": set(), "fill": k})
    contents = {e["page"]: (e["way"], _groups_mask(e["dirty"])) for lru in sets.values() for e in lru}
    st = ShadowState(led.b, out, contents, metadata={"footprints": recorded})
    st.evictions = evictions
    st.replacements = len(recorded)
    return st


def _tdc_two_pass(trace: Trace, cfg: RunConfig) -> ShadowState:
    if not cfg.footprint.enabled:
        return _tdc(trace, cfg, None)
    first = _tdc(trace, cfg, None)
    return _tdc(trace, cfg, first.metadata["footprints"])


def _tdc(trace: Trace, cfg: RunConfig, footprints: list[set[int]] | None) -> ShadowState:
    geo = cfg.geometry
    led = _Ledger(geo.min_transfer)
    fifo: list[int] = []
    dirty: dict[int, set[int]] = {}
    fill_of: dict[int, int] = {}
    recorded: list[set[int]] = []
    out, evictions = [], []
    for kind, line, _, large in trace.columns():
        if large:
            led.add("off_package", "ExtDRAM", 64)
            out.append(False)
            continue
        page = line >> geo.page_shift
        group = (line % geo.lines_per_page) // 4
        if page in dirty:
            led.add("in_package", "HitData", 64)
            if kind == WRITE:
                dirty[page].add(group)
            else:
                recorded[fill_of[page]].add(group)
            out.append(True)
            continue
        out.append(False)
        led.add("off_package", "ExtDRAM", 64)
        if kind == WRITE:
            continue
        if len(fifo) == geo.cache_pages:
            old = fifo.pop(0)
            evictions.append(old)
            wb = len(dirty.pop(old)) * 256
            del fill_of[old]
            if wb:
                led.add("in_package", "Replacement", wb)
                led.add("off_package", "Replacement", wb)
        k = len(recorded)
        recorded.append({group})
        fill = geo.page_bytes if footprints is None or not cfg.footprint.enabled else len(footprints[k]) * 256
        led.add("off_package", "ExtDRAM", fill)
        led.add("in_package", "Replacement", fill)
        fifo.append(page)
        dirty[page] = set()
        fill_of[page] = k
    contents = {p: (i, _groups_mask(dirty[p])) for i, p in enumerate(fifo)}
    st = ShadowState(led.b, out, contents, metadata={"footprints": recorded})
    st.evictions = evictions
    st.replacements = len(recorded)
    return st


def _nocache(trace: Trace, cfg: RunConfig) -> ShadowState:
    led = _Ledger(cfg.geometry.min_transfer)
    for _ in range(len(trace)):
        led.add("off_package", "ExtDRAM", 64)
    return ShadowState(led.b, [False] * len(trace), {})


def _cacheonly(trace: Trace, cfg: RunConfig) -> ShadowState:
    led = _Ledger(cfg.geometry.min_transfer)
    for _ in range(len(trace)):
        led.add("in_package", "HitData", 64)
    return ShadowState(led.b, [True] * len(trace), {})
