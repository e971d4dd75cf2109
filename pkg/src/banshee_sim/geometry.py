"""Physical memory layout and DRAM tier parameters shared by every design."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

KiB = 1 << 10
MiB = 1 << 20
GiB = 1 << 30


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _log2(n: int) -> int:
    return n.bit_length() - 1


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    phys_addr_bits: int = 48
    line_bytes: int = 64
    page_bytes: int = 4 * KiB
    large_page_bytes: int = 2 * MiB
    cache_capacity: int = 1 * GiB
    ways: int = 4
    num_mcs: int = 4
    min_transfer: int = 32
    tag_row_entry: int = 32

    def __post_init__(self) -> None:
        for name in ("line_bytes", "page_bytes", "large_page_bytes", "min_transfer"):
            if not _is_pow2(getattr(self, name)):
                raise GeometryError(f"{name} must be a power of two")
        if self.line_bytes % self.min_transfer:
            raise GeometryError("line_bytes must be a multiple of min_transfer")
        if self.page_bytes % self.line_bytes or self.large_page_bytes % self.page_bytes:
            raise GeometryError("page sizes must nest: line | page | large page")
        if self.ways < 1 or self.num_mcs < 1:
            raise GeometryError("ways and num_mcs must be >= 1")
        set_bytes = self.page_bytes * self.ways
        if self.cache_capacity % set_bytes or not _is_pow2(self.cache_capacity // set_bytes):
            raise GeometryError(
                f"cache_capacity / (page_bytes * ways) = {self.cache_capacity / set_bytes:g} "
                "is not a power of two"
            )
        if self.tag_bits <= 0:
            raise GeometryError("address space too small for this cache geometry")

    @property
    def sets(self) -> int:
        return self.cache_capacity // (self.page_bytes * self.ways)

    @property
    def set_bits(self) -> int:
        return _log2(self.sets)

    @property
    def page_offset_bits(self) -> int:
        return _log2(self.page_bytes)

    @property
    def tag_bits(self) -> int:
        return self.phys_addr_bits - self.set_bits - self.page_offset_bits

    @property
    def lines_per_page(self) -> int:
        return self.page_bytes // self.line_bytes

    @property
    def lines_per_large_page(self) -> int:
        return self.large_page_bytes // self.line_bytes

    @property
    def page_shift(self) -> int:
        """Shift from a line number to a regular page number."""
        return _log2(self.lines_per_page)

    @property
    def large_page_shift(self) -> int:
        return _log2(self.lines_per_large_page)

    @property
    def large_span_sets(self) -> int:
        """Number of consecutive sets one large page spans in its way."""
        return self.large_page_bytes // self.page_bytes

    @property
    def large_sets(self) -> int:
        """Number of distinct large-page set groups (0 if a large page does not fit)."""
        return self.sets // self.large_span_sets

    @property
    def line_addr_bits(self) -> int:
        return self.phys_addr_bits - _log2(self.line_bytes)

    @property
    def cache_pages(self) -> int:
        return self.cache_capacity // self.page_bytes


class PageId(NamedTuple):
    raw: int
    large: bool = False


def page_of_line(line_addr: int, geo: Geometry, large: bool = False) -> PageId:
    if large:
        return PageId(line_addr >> geo.large_page_shift, True)
    return PageId(line_addr >> geo.page_shift, False)


def set_index(page: PageId, geo: Geometry) -> int:
    """Set of a regular page; for a large page, the first set of its span."""
    if page.large:
        return (page.raw % geo.large_sets) * geo.large_span_sets if geo.large_sets else 0
    return page.raw % geo.sets


def spanned_sets(page: PageId, geo: Geometry) -> range:
    if not page.large:
        return range(page.raw % geo.sets, page.raw % geo.sets + 1)
    first = set_index(page, geo)
    return range(first, first + geo.large_span_sets)


def mc_index(page: PageId, geo: Geometry) -> int:
    # Both page sizes stripe by their own page number, so a page never straddles MCs.
    return page.raw % geo.num_mcs


def transfer_bytes(payload: int, geo: Geometry | None = None) -> int:
    """Round a payload up to the bus's minimum transfer size."""
    if payload < 0:
        raise ValueError("payload must be non-negative")
    unit = geo.min_transfer if geo is not None else 32
    return -(-payload // unit) * unit


@dataclass(frozen=True)
class DramTierParams:
    channels: int
    bus_bytes_per_cycle: int = 16
    frequency: float = 667e6
    latency_cycles: int = 20  # tRCD + tCAS

    def __post_init__(self) -> None:
        if self.channels < 0 or self.bus_bytes_per_cycle <= 0 or self.frequency <= 0:
            raise GeometryError("invalid DRAM tier parameters")


def in_package_default() -> DramTierParams:
    return DramTierParams(channels=4)


def off_package_default() -> DramTierParams:
    return DramTierParams(channels=1)


def peak_bandwidth(tier: DramTierParams) -> float:
    """Peak bytes/second of a DDR tier (two transfers per bus cycle)."""
    return tier.channels * tier.bus_bytes_per_cycle * 2 * tier.frequency
