"""Common shape of a simulated DRAM-cache design and the trace replay loop."""

from __future__ import annotations

from .geometry import Geometry
from .metrics import AccessStats, TrafficLedger
from .trace import Trace


class ConfigError(ValueError):
    pass


class Design:
    name = "design"

    def __init__(self, geo: Geometry) -> None:
        self.geo = geo
        self.ledger = TrafficLedger(geo.min_transfer)
        self.stats = AccessStats()

    def access(self, kind: int, line_addr: int, large: bool = False) -> bool:
        """Service one event; returns True on a DRAM-cache hit."""
        raise NotImplementedError

    def reset_stats(self) -> None:
        """Zero all counters while keeping cache state (end of warm-up)."""
        self.ledger = TrafficLedger(self.geo.min_transfer)
        self.stats.reset()

    def sync_stats(self) -> AccessStats:
        return self.stats

    def contents(self) -> dict:
        """Resident pages (or lines) and their state, for equivalence checks."""
        return {}


def simulate(design: Design, trace: Trace, warmup: int = 0, outcomes: list | None = None) -> Design:
    """Replay ``trace`` through ``design``; counters cover events after ``warmup``."""
    access = design.access
    ledger = design.ledger
    n = 0
    for kind, line, delta, large in trace.columns():
        if n == warmup and warmup:
            design.reset_stats()
            ledger = design.ledger
        hit = access(kind, line, large)
        if outcomes is not None:
            outcomes.append(hit)
        ledger.events += 1
        ledger.instructions += delta
        n += 1
    if warmup and n <= warmup:
        design.reset_stats()
    design.sync_stats()
    return design
