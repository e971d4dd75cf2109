"""Memory-event traces: the LLC-to-memory-controller stream.

Text form, one event per line::

    R 1f3a0 50
    W 1f3a1 50 L

(kind, hex line address, instructions since the previous event, optional
large-page flag). Blank lines and ``#`` comments are ignored.

Binary form is a flat array of 16-byte little-endian records: byte 0 holds
flags (bit 0 = writeback, bit 1 = large page), bytes 1..7 the line address,
bytes 8..15 the instruction delta.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .geometry import Geometry
from .rng import Streams

READ = 0
WRITE = 1


class EventKind(IntEnum):
    READ_MISS = READ
    DIRTY_WRITEBACK = WRITE


class MemEvent(NamedTuple):
    kind: int
    line_addr: int
    instr_delta: int = 0
    large: bool = False


class TraceFormatError(ValueError):
    def __init__(self, index: int, message: str) -> None:
        super().__init__(f"record {index}: {message}")
        self.index = index


class Trace:
    """Column-oriented event sequence; iterating yields :class:`MemEvent`."""

    __slots__ = ("kinds", "lines", "deltas", "large")

    def __init__(self, kinds, lines, deltas, large) -> None:
        self.kinds = np.asarray(kinds, dtype=np.uint8)
        self.lines = np.asarray(lines, dtype=np.uint64)
        self.deltas = np.asarray(deltas, dtype=np.uint64)
        self.large = np.asarray(large, dtype=bool)
        n = len(self.kinds)
        if not (len(self.lines) == len(self.deltas) == len(self.large) == n):
            raise ValueError("trace columns differ in length")

    @classmethod
    def from_events(cls, events: Iterable[MemEvent]) -> "Trace":
        evs = list(events)
        return cls(
            [e.kind for e in evs],
            [e.line_addr for e in evs],
            [e.instr_delta for e in evs],
            [bool(e.large) for e in evs],
        )

    def __len__(self) -> int:
        return len(self.kinds)

    def __iter__(self) -> Iterator[MemEvent]:
        for k, a, d, lg in self.columns():
            yield MemEvent(k, a, d, lg)

    def __getitem__(self, i: int) -> MemEvent:
        return MemEvent(int(self.kinds[i]), int(self.lines[i]), int(self.deltas[i]), bool(self.large[i]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.lines, other.lines)
            and np.array_equal(self.deltas, other.deltas)
            and np.array_equal(self.large, other.large)
        )

    def columns(self) -> Iterator[tuple[int, int, int, bool]]:
        """Plain-Python columns zipped; the simulators' hot loop iterates this."""
        return zip(self.kinds.tolist(), self.lines.tolist(), self.deltas.tolist(), self.large.tolist())

    def slice(self, start: int, stop: int) -> "Trace":
        return Trace(self.kinds[start:stop], self.lines[start:stop], self.deltas[start:stop], self.large[start:stop])

    @property
    def instructions(self) -> int:
        return int(self.deltas.sum())

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(encode_binary(self))
        return h.hexdigest()


# --------------------------------------------------------------------------- formats


def encode_text(trace: Trace) -> str:
    out = []
    for k, a, d, lg in trace.columns():
        out.append(f"{'W' if k == WRITE else 'R'} {a:x} {d}{' L' if lg else ''}\n")
    return "".join(out)


def decode_text(text: str) -> Trace:
    kinds, lines, deltas, large = [], [], [], []
    idx = 0
    for raw in text.splitlines():
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        parts = s.split()
        if len(parts) not in (3, 4):
            raise TraceFormatError(idx, f"expected 3 or 4 fields, got {len(parts)}")
        kind, addr, delta = parts[:3]
        if kind not in ("R", "W"):
            raise TraceFormatError(idx, f"unknown kind {kind!r}")
        if len(parts) == 4 and parts[3] != "L":
            raise TraceFormatError(idx, f"unknown flag {parts[3]!r}")
        try:
            a = int(addr, 16)
            d = int(delta)
        except ValueError as e:
            raise TraceFormatError(idx, str(e)) from None
        if a < 0 or a >= 1 << 56 or d < 0:
            raise TraceFormatError(idx, "field out of range")
        kinds.append(WRITE if kind == "W" else READ)
        lines.append(a)
        deltas.append(d)
        large.append(len(parts) == 4)
        idx += 1
    return Trace(kinds, lines, deltas, large)


def encode_binary(trace: Trace) -> bytes:
    if len(trace) and int(trace.lines.max()) >= 1 << 56:
        raise ValueError("line address does not fit in 7 bytes")
    flags = trace.kinds.astype(np.uint64) | (trace.large.astype(np.uint64) << np.uint64(1))
    rec = np.empty((len(trace), 2), dtype="<u8")
    rec[:, 0] = flags | (trace.lines << np.uint64(8))
    rec[:, 1] = trace.deltas
    return rec.tobytes()


def decode_binary(data: bytes) -> Trace:
    if len(data) % 16:
        raise TraceFormatError(len(data) // 16, "truncated 16-byte record")
    rec = np.frombuffer(data, dtype="<u8").reshape(-1, 2)
    low = rec[:, 0]
    flags = low & np.uint64(0xFF)
    bad = np.nonzero(flags > 3)[0]
    if len(bad):
        raise TraceFormatError(int(bad[0]), f"unknown flag bits {int(flags[bad[0]]):#x}")
    return Trace(
        (flags & np.uint64(1)).astype(np.uint8),
        low >> np.uint64(8),
        rec[:, 1].copy(),
        (flags >> np.uint64(1)).astype(bool),
    )


def _is_binary(path: Path, fmt: str | None) -> bool:
    if fmt is not None:
        if fmt not in ("text", "binary"):
            raise ValueError(f"unknown trace format {fmt!r}")
        return fmt == "binary"
    return path.suffix == ".bin"


def read_trace(path: str | os.PathLike, fmt: str | None = None) -> Trace:
    """Load a trace; ``.bin`` files are binary unless ``fmt`` says otherwise."""
    p = Path(path)
    if _is_binary(p, fmt):
        return decode_binary(p.read_bytes())
    return decode_text(p.read_text())


def write_trace(path: str | os.PathLike, events: Trace | Iterable[MemEvent], fmt: str | None = None) -> None:
    p = Path(path)
    trace = events if isinstance(events, Trace) else Trace.from_events(events)
    tmp = p.with_name(p.name + ".tmp")
    if _is_binary(p, fmt):
        tmp.write_bytes(encode_binary(trace))
    else:
        tmp.write_text(encode_text(trace))
    os.replace(tmp, p)


# --------------------------------------------------------------------------- generators

GENERATORS = ("zipf", "sequential_scan", "working_set_loop", "mixed")


@dataclass(frozen=True)
class WorkloadSpec:
    generator: str = "zipf"
    footprint_pages: int = 4096
    zipf_s: float = 1.0
    write_fraction: float = 0.0
    events: int = 100_000
    seed: int = 1
    instr_delta: int = 50
    large_pages: bool = False
    base_page: int = 0
    mix_scan_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.footprint_pages < 1:
            raise ValueError("footprint_pages must be >= 1")
        if not 0.0 <= self.write_fraction <= 1.0:
            raise ValueError("write_fraction must lie in [0, 1]")
        if self.zipf_s < 0:
            raise ValueError("zipf_s must be >= 0")
        if self.events < 0 or self.instr_delta < 0:
            raise ValueError("events and instr_delta must be >= 0")
        if not 0.0 <= self.mix_scan_fraction <= 1.0:
            raise ValueError("mix_scan_fraction must lie in [0, 1]")


def zipf_ranks(rng: np.random.Generator, n_items: int, s: float, size: int) -> np.ndarray:
    """Draw ``size`` ranks in [0, n_items) with P(rank k) proportional to (k+1)^-s."""
    w = np.arange(1, n_items + 1, dtype=np.float64) ** -s
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    r = np.searchsorted(cdf, rng.random(size), side="right")
    return np.minimum(r, n_items - 1)


def _zipf_pages(spec: WorkloadSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    ranks = zipf_ranks(rng, spec.footprint_pages, spec.zipf_s, n)
    # Popularity rank is decorrelated from page number so hot pages spread over sets.
    perm = rng.permutation(spec.footprint_pages)
    return perm[ranks]


def _scan(spec: WorkloadSpec, n: int, lpp: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n, dtype=np.int64)
    return (i // lpp) % spec.footprint_pages, i % lpp


def _working_set(spec: WorkloadSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    warm = min(n, spec.footprint_pages)
    rest = rng.integers(0, spec.footprint_pages, size=n - warm)
    return np.concatenate([np.arange(warm, dtype=np.int64), rest])


def _writeback_kinds(pages, offsets, lpp: int, frac: float, rng: np.random.Generator) -> np.ndarray:
    n = len(pages)
    kinds = np.zeros(n, dtype=np.uint8)
    if frac <= 0 or n == 0:
        return kinds
    lines = pages.astype(np.int64) * lpp + offsets
    _, first = np.unique(lines, return_index=True)
    retouched = np.ones(n, dtype=bool)
    retouched[first] = False
    kinds[retouched & (rng.random(n) < frac)] = WRITE
    return kinds


def generate(spec: WorkloadSpec, geo: Geometry) -> Trace:
    """Deterministic synthetic trace for ``spec`` at ``geo``'s page size."""
    n = spec.events
    lpp = geo.lines_per_large_page if spec.large_pages else geo.lines_per_page
    streams = Streams(spec.seed)
    rng = streams.numpy("workload", GENERATORS.index(spec.generator))
    if spec.generator == "zipf":
        pages = _zipf_pages(spec, rng, n)
        offsets = rng.integers(0, lpp, size=n)
    elif spec.generator == "sequential_scan":
        pages, offsets = _scan(spec, n, lpp)
    elif spec.generator == "working_set_loop":
        pages = _working_set(spec, rng, n)
        offsets = rng.integers(0, lpp, size=n)
    else:
        hot_pages = _zipf_pages(spec, rng, n)
        hot_off = rng.integers(0, lpp, size=n)
        # The scan walks a disjoint region above the zipf footprint.
        scan_pages, scan_off = _scan(spec, n, lpp)
        scan_pages = scan_pages + spec.footprint_pages
        pick = rng.random(n) < spec.mix_scan_fraction
        pages = np.where(pick, scan_pages, hot_pages)
        offsets = np.where(pick, scan_off, hot_off)
    pages = pages.astype(np.int64) + spec.base_page
    kinds = _writeback_kinds(pages, offsets, lpp, spec.write_fraction, rng)
    lines = pages.astype(np.uint64) * np.uint64(lpp) + offsets.astype(np.uint64)
    if n and int(lines.max()) >> geo.line_addr_bits:
        raise ValueError("generated line address exceeds the physical address space")
    return Trace(kinds, lines, np.full(n, spec.instr_delta, dtype=np.uint64), np.full(n, spec.large_pages))
