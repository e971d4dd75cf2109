"""Run configuration: a JSON document mapped onto nested dataclasses.

Unknown keys are rejected with their dotted path. ``apply_overrides`` takes
``key.sub=value`` strings (values parsed as JSON, falling back to a bare
string) and is used both for ``--set`` and for sweep points.
"""

from __future__ import annotations

import copy
import dataclasses
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .banshee import BansheeParams, TagBufferParams
from .base import ConfigError
from .geometry import DramTierParams, Geometry, GeometryError
from .mapping import CoherenceCosts
from .metrics import PerfModel
from .trace import WorkloadSpec


@dataclass(frozen=True)
class AlloyParams:
    replace_prob: float = 0.1


@dataclass(frozen=True)
class FootprintParams:
    enabled: bool = True


@dataclass(frozen=True)
class BalanceParams:
    enabled: bool = False
    window: int = 10_000
    share: float = 0.8
    bypass_fraction: float = 0.25


DESIGNS = ("banshee", "alloy", "alloy1", "alloy0.1", "unison", "tdc", "nocache", "cacheonly")


@dataclass(frozen=True)
class RunConfig:
    name: str = "run"
    designs: tuple[str, ...] = ("banshee",)
    seed: int = 1
    warmup: int = 0
    geometry: Geometry = Geometry()
    in_package: DramTierParams = DramTierParams(channels=4)
    off_package: DramTierParams = DramTierParams(channels=1)
    banshee: BansheeParams = BansheeParams()
    tag_buffer: TagBufferParams = TagBufferParams()
    coherence: CoherenceCosts = CoherenceCosts()
    alloy: AlloyParams = AlloyParams()
    footprint: FootprintParams = FootprintParams()
    balance: BalanceParams = BalanceParams()
    perf: PerfModel = PerfModel()
    workload: WorkloadSpec | None = WorkloadSpec()
    trace_path: str | None = None
    sweep: dict[str, list] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for d in self.designs:
            if d not in DESIGNS:
                raise ConfigError(f"designs: unknown design {d!r} (choose from {', '.join(DESIGNS)})")
        if self.workload is None and self.trace_path is None:
            raise ConfigError("workload: either workload or trace_path is required")
        if self.warmup < 0:
            raise ConfigError("warmup: must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["designs"] = list(self.designs)
        return d


_NESTED = {
    "geometry": Geometry,
    "in_package": DramTierParams,
    "off_package": DramTierParams,
    "banshee": BansheeParams,
    "tag_buffer": TagBufferParams,
    "coherence": CoherenceCosts,
    "alloy": AlloyParams,
    "footprint": FootprintParams,
    "balance": BalanceParams,
    "perf": PerfModel,
    "workload": WorkloadSpec,
}


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(data) - names)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}: unknown field")
    try:
        return cls(**data)
    except (TypeError, ValueError, GeometryError) as e:
        raise ConfigError(f"{path}: {e}") from None


def from_dict(data: dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    extra = sorted(set(data) - top)
    if extra:
        raise ConfigError(f"{extra[0]}: unknown field")
    kw: dict[str, Any] = {}
    for k, v in data.items():
        if k in _NESTED:
            if k == "workload" and v is None:
                kw[k] = None
                continue
            if k == "workload" and "seed" not in v:
                v = {**v, "seed": data.get("seed", 1)}
            kw[k] = _build(_NESTED[k], v, k)
        elif k == "designs":
            if isinstance(v, str):
                v = [v]
            kw[k] = tuple(v)
        else:
            kw[k] = v
    if "workload" not in kw and "trace_path" in data and data["trace_path"] is not None:
        kw["workload"] = None
    if "workload" not in kw and "seed" in data:
        kw["workload"] = WorkloadSpec(seed=data["seed"])
    try:
        return RunConfig(**kw)
    except TypeError as e:
        raise ConfigError(f"config: {e}") from None


def load(path: str | Path) -> dict[str, Any]:
    """Parse a config file into a plain dict (validated later by :func:`from_dict`)."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config ({e.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(data: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    cur = data
    for p in parts[:-1]:
        nxt = cur.get(p)
        if nxt is None:
            nxt = cur[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"{dotted}: {p} is not an object")
        cur = nxt
    cur[parts[-1]] = value


def apply_overrides(data: dict[str, Any], overrides: list[str] | dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(data)
    items = overrides.items() if isinstance(overrides, dict) else (_split(o) for o in overrides)
    for k, v in items:
        set_path(out, k, v)
    return out


def _split(override: str) -> tuple[str, Any]:
    if "=" not in override:
        raise ConfigError(f"--set {override!r}: expected key=value")
    k, v = override.split("=", 1)
    return k.strip(), parse_value(v)


def sweep_points(data: dict[str, Any]) -> list[dict[str, Any]]:
    """Cartesian product of the sweep lists, in key order then value order."""
    sweep = data.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep: expected an object of lists")
    keys = list(sweep)
    for k in keys:
        if not isinstance(sweep[k], list) or not sweep[k]:
            raise ConfigError(f"sweep.{k}: expected a non-empty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(sweep[k] for k in keys))]
