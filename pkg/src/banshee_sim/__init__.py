"""Trace-driven DRAM-cache simulator: Banshee and comparison designs."""

from .banshee import BansheeCache, BansheeParams, SetMetadata, TagBufferParams
from .baselines import AlloyCache, CacheOnly, NoCache, TaglessCache, UnisonCache
from .base import ConfigError, Design, simulate
from .config import RunConfig, from_dict
from .geometry import Geometry
from .metrics import RunReport, TrafficLedger
from .trace import MemEvent, Trace, WorkloadSpec, generate

__all__ = [
    "AlloyCache",
    "BansheeCache",
    "BansheeParams",
    "CacheOnly",
    "ConfigError",
    "Design",
    "Geometry",
    "MemEvent",
    "NoCache",
    "RunConfig",
    "RunReport",
    "SetMetadata",
    "TagBufferParams",
    "TaglessCache",
    "Trace",
    "TrafficLedger",
    "UnisonCache",
    "WorkloadSpec",
    "from_dict",
    "generate",
    "simulate",
]

__version__ = "0.1.0"
