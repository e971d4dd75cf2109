"""Traffic ledger, run statistics, reports and the bandwidth-bound runtime proxy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from enum import IntEnum

from .geometry import DramTierParams, Geometry, peak_bandwidth, transfer_bytes


class Tier(IntEnum):
    IN_PACKAGE = 0
    OFF_PACKAGE = 1


class Category(IntEnum):
    HIT_DATA = 0
    MISS_DATA = 1
    TAG = 2
    REPLACEMENT = 3
    EXT_DRAM = 4


IN, OFF = Tier.IN_PACKAGE, Tier.OFF_PACKAGE
HIT_DATA, MISS_DATA, TAG, REPLACEMENT, EXT_DRAM = tuple(Category)

VALID = {
    IN: (HIT_DATA, MISS_DATA, TAG, REPLACEMENT),
    OFF: (EXT_DRAM, REPLACEMENT),
}
_NCAT = len(Category)
_VALID_IDX = frozenset(t * _NCAT + c for t, cats in VALID.items() for c in cats)

TIER_NAMES = {IN: "in_package", OFF: "off_package"}
CATEGORY_NAMES = {
    HIT_DATA: "HitData",
    MISS_DATA: "MissData",
    TAG: "Tag",
    REPLACEMENT: "Replacement",
    EXT_DRAM: "ExtDRAM",
}


class LedgerError(ValueError):
    pass


class TrafficLedger:
    """Byte counters per (tier, category) plus event and instruction totals."""

    __slots__ = ("bytes", "events", "instructions", "min_transfer")

    def __init__(self, min_transfer: int = 32) -> None:
        self.bytes = [0] * (2 * _NCAT)
        self.events = 0
        self.instructions = 0
        self.min_transfer = min_transfer

    def charge(self, tier: int, category: int, payload: int) -> int:
        idx = tier * _NCAT + category
        if idx not in _VALID_IDX:
            raise LedgerError(f"{CATEGORY_NAMES[Category(category)]} is not a {TIER_NAMES[Tier(tier)]} category")
        n = -(-payload // self.min_transfer) * self.min_transfer
        if n < 0:
            raise LedgerError("negative payload")
        self.bytes[idx] += n
        return n

    def get(self, tier: int, category: int) -> int:
        return self.bytes[tier * _NCAT + category]

    def tier_total(self, tier: int) -> int:
        return sum(self.bytes[tier * _NCAT : (tier + 1) * _NCAT])

    @property
    def total(self) -> int:
        return sum(self.bytes)

    def as_dict(self) -> dict[str, dict[str, int]]:
        return {
            TIER_NAMES[t]: {CATEGORY_NAMES[c]: self.get(t, c) for c in cats}
            for t, cats in VALID.items()
        }

    @classmethod
    def from_dict(cls, d: dict[str, dict[str, int]], min_transfer: int = 32) -> "TrafficLedger":
        led = cls(min_transfer)
        for t, cats in VALID.items():
            for c in cats:
                led.bytes[t * _NCAT + c] = int(d[TIER_NAMES[t]][CATEGORY_NAMES[c]])
        return led

    def copy(self) -> "TrafficLedger":
        led = TrafficLedger(self.min_transfer)
        led.bytes = list(self.bytes)
        led.events, led.instructions = self.events, self.instructions
        return led

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrafficLedger):
            return NotImplemented
        return (self.bytes, self.events, self.instructions) == (other.bytes, other.events, other.instructions)

    def __repr__(self) -> str:
        return f"TrafficLedger({self.as_dict()}, events={self.events}, instructions={self.instructions})"


def charge(ledger: TrafficLedger, tier: int, category: int, payload: int) -> int:
    return ledger.charge(tier, category, payload)


@dataclass
class AccessStats:
    hits: int = 0
    misses: int = 0
    read_misses: int = 0
    replacements: int = 0
    sampled: int = 0
    metadata_writes: int = 0
    probes: int = 0
    bypassed: int = 0
    flushes: int = 0
    forced_flushes: int = 0
    coherence_us: float = 0.0

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, type(getattr(self, f.name))())


# --------------------------------------------------------------------------- runtime proxy


@dataclass(frozen=True)
class PerfModel:
    core_frequency: float = 2.7e9
    ipc: float = 16.0  # 1.0 per core x 16 cores


def estimate_runtime(
    ledger: TrafficLedger,
    in_tier: DramTierParams,
    off_tier: DramTierParams,
    coherence_us: float = 0.0,
    instructions: int | None = None,
    perf: PerfModel = PerfModel(),
) -> float:
    """Bandwidth-bound runtime proxy in seconds (not a cycle-level estimate)."""
    instr = ledger.instructions if instructions is None else instructions
    terms = [instr / (perf.ipc * perf.core_frequency)]
    for tier, params in ((IN, in_tier), (OFF, off_tier)):
        nbytes = ledger.tier_total(tier)
        if nbytes:
            bw = peak_bandwidth(params)
            terms.append(float("inf") if bw == 0 else nbytes / bw)
    return max(terms) + coherence_us * 1e-6


# --------------------------------------------------------------------------- balancing


class BandwidthBalancer:
    """Diverts a fraction of sets off-package while in-package traffic dominates.

    Shares are measured over fixed windows of events; the decision made at the
    end of one window holds for the next.
    """

    def __init__(self, sets: int, window: int = 10_000, share: float = 0.8, bypass_fraction: float = 0.25) -> None:
        if window < 1 or not 0 < share < 1 or not 0 <= bypass_fraction <= 1:
            raise ValueError("invalid balancing parameters")
        self.window = window
        self.share = share
        self.bypass_sets = int(round(bypass_fraction * sets))
        self.active = False
        self.windows_active = 0
        self._n = 0
        self._last_in = 0
        self._last_off = 0

    def bypassed(self, set_idx: int) -> bool:
        return self.active and set_idx < self.bypass_sets

    def tick(self, ledger: TrafficLedger) -> None:
        self._n += 1
        if self._n < self.window:
            return
        self._n = 0
        tin, toff = ledger.tier_total(IN), ledger.tier_total(OFF)
        din, doff = tin - self._last_in, toff - self._last_off
        self._last_in, self._last_off = tin, toff
        total = din + doff
        self.active = total > 0 and din / total > self.share
        self.windows_active += self.active


def bandwidth_balance(in_bytes: int, off_bytes: int, share: float = 0.8, bypass_fraction: float = 0.25) -> float:
    """Fraction of sets to bypass given one window's traffic."""
    total = in_bytes + off_bytes
    return bypass_fraction if total and in_bytes / total > share else 0.0


# --------------------------------------------------------------------------- reports

CSV_COLUMNS = (
    "point",
    "design",
    "params",
    "seed",
    "events",
    "instructions",
    "hits",
    "misses",
    "miss_rate",
    "mpki",
    "in_HitData",
    "in_MissData",
    "in_Tag",
    "in_Replacement",
    "off_ExtDRAM",
    "off_Replacement",
    "in_total",
    "off_total",
    "in_bytes_per_instr",
    "off_bytes_per_instr",
    "replacements",
    "sampled",
    "probes",
    "flushes",
    "coherence_us",
    "est_runtime_s",
)


@dataclass
class RunReport:
    design: str
    seed: int
    events: int
    instructions: int
    hits: int
    misses: int
    traffic: dict[str, dict[str, int]]
    replacements: int = 0
    sampled: int = 0
    probes: int = 0
    flushes: int = 0
    coherence_us: float = 0.0
    est_runtime_s: float = 0.0
    point: int = 0
    params: dict[str, object] = field(default_factory=dict)

    @property
    def miss_rate(self) -> float:
        return self.misses / self.events if self.events else 0.0

    @property
    def mpki(self) -> float:
        return self.misses * 1000 / self.instructions if self.instructions else 0.0

    def tier_total(self, tier: str) -> int:
        return sum(self.traffic[tier].values())

    def bytes_per_instr(self, tier: str) -> float:
        return self.tier_total(tier) / self.instructions if self.instructions else 0.0

    @classmethod
    def build(
        cls,
        design: str,
        seed: int,
        ledger: TrafficLedger,
        stats: AccessStats,
        in_tier: DramTierParams,
        off_tier: DramTierParams,
        perf: PerfModel = PerfModel(),
        point: int = 0,
        params: dict | None = None,
    ) -> "RunReport":
        return cls(
            design=design,
            seed=seed,
            events=ledger.events,
            instructions=ledger.instructions,
            hits=stats.hits,
            misses=stats.misses,
            traffic=ledger.as_dict(),
            replacements=stats.replacements,
            sampled=stats.sampled,
            probes=stats.probes,
            flushes=stats.flushes,
            coherence_us=stats.coherence_us,
            est_runtime_s=estimate_runtime(ledger, in_tier, off_tier, stats.coherence_us, perf=perf),
            point=point,
            params=dict(params or {}),
        )

    def csv_row(self) -> dict[str, object]:
        t = self.traffic
        i, o = t["in_package"], t["off_package"]
        return {
            "point": self.point,
            "design": self.design,
            "params": ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items())),
            "seed": self.seed,
            "events": self.events,
            "instructions": self.instructions,
            "hits": self.hits,
            "misses": self.misses,
            "miss_rate": _fmt(self.miss_rate),
            "mpki": _fmt(self.mpki),
            "in_HitData": i["HitData"],
            "in_MissData": i["MissData"],
            "in_Tag": i["Tag"],
            "in_Replacement": i["Replacement"],
            "off_ExtDRAM": o["ExtDRAM"],
            "off_Replacement": o["Replacement"],
            "in_total": self.tier_total("in_package"),
            "off_total": self.tier_total("off_package"),
            "in_bytes_per_instr": _fmt(self.bytes_per_instr("in_package")),
            "off_bytes_per_instr": _fmt(self.bytes_per_instr("off_package")),
            "replacements": self.replacements,
            "sampled": self.sampled,
            "probes": self.probes,
            "flushes": self.flushes,
            "coherence_us": _fmt(self.coherence_us),
            "est_runtime_s": _fmt(self.est_runtime_s),
        }

    def to_json(self) -> dict:
        d = asdict(self)
        d["miss_rate"] = self.miss_rate
        d["mpki"] = self.mpki
        return d

    @classmethod
    def from_json(cls, d: dict) -> "RunReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _fmt(v: object) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps_reports(reports: list[RunReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True) + "\n"
