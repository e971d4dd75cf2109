"""Build designs from a config, run sweep points and write reports."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from .banshee import BansheeCache
from .base import ConfigError, Design, simulate
from .baselines import AlloyCache, CacheOnly, NoCache, TaglessCache, UnisonCache, profile_footprints
from .config import RunConfig, apply_overrides, from_dict, sweep_points
from .metrics import CSV_COLUMNS, BandwidthBalancer, RunReport, dumps_reports
from .trace import Trace, generate, read_trace

log = logging.getLogger(__name__)


class TraceNotFound(FileNotFoundError):
    pass


def load_trace(cfg: RunConfig) -> Trace:
    if cfg.trace_path is not None:
        p = Path(cfg.trace_path)
        if not p.exists():
            raise TraceNotFound(f"trace file not found: {p}")
        return read_trace(p)
    assert cfg.workload is not None
    return generate(cfg.workload, cfg.geometry)


def build_design(name: str, cfg: RunConfig, trace: Trace | None = None) -> Design:
    geo = cfg.geometry
    if name == "banshee":
        bal = None
        if cfg.balance.enabled:
            bal = BandwidthBalancer(geo.sets, cfg.balance.window, cfg.balance.share, cfg.balance.bypass_fraction)
        return BansheeCache(geo, cfg.banshee, cfg.tag_buffer, cfg.coherence, seed=cfg.seed, balancer=bal)
    if name.startswith("alloy"):
        p = {"alloy": cfg.alloy.replace_prob, "alloy1": 1.0, "alloy0.1": 0.1}[name]
        d = AlloyCache(geo, p, seed=cfg.seed)
        d.name = name
        return d
    if name in ("unison", "tdc"):
        cls = UnisonCache if name == "unison" else TaglessCache
        if not cfg.footprint.enabled:
            return cls(geo, footprint=False)
        if trace is None:
            raise ValueError("footprint-aware designs need the trace for profiling")
        return cls(geo, footprint=profile_footprints(trace, geo, name))
    if name == "nocache":
        return NoCache(geo)
    if name == "cacheonly":
        return CacheOnly(geo)
    raise ValueError(f"unknown design {name!r}")


def run_design(name: str, cfg: RunConfig, trace: Trace, point: int = 0, params: dict | None = None) -> tuple[RunReport, Design]:
    d = build_design(name, cfg, trace)
    simulate(d, trace, warmup=cfg.warmup)
    rep = RunReport.build(name, cfg.seed, d.ledger, d.stats, cfg.in_package, cfg.off_package, cfg.perf, point, params)
    return rep, d


def run_point(data: dict[str, Any], point: int = 0, params: dict | None = None) -> list[RunReport]:
    cfg = from_dict(data)
    trace = load_trace(cfg)
    out = []
    for name in cfg.designs:
        log.info("point %d %s: %d events", point, name, len(trace))
        out.append(run_design(name, cfg, trace, point, params)[0])
    return out


def _run_point_args(args: tuple[dict, int, dict]) -> list[RunReport]:
    return run_point(*args)


def run_sweep(data: dict[str, Any], jobs: int = 1) -> list[RunReport]:
    """Run every sweep point; the result order is independent of ``jobs``."""
    from_dict(data)  # validate before fanning out
    tasks = []
    for i, params in enumerate(sweep_points(data)):
        tasks.append((apply_overrides(data, params), i, params))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_run_point_args, tasks))
    else:
        chunks = [_run_point_args(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


def compare(configs: list[dict[str, Any]]) -> list[RunReport]:
    """Run each config's designs on one shared trace; traces must match."""
    digests = set()
    reports: list[RunReport] = []
    for i, data in enumerate(configs):
        cfg = from_dict(data)
        trace = load_trace(cfg)
        digests.add(trace.digest())
        if len(digests) > 1:
            raise ConfigError(f"config {i} uses a different trace from config 0")
        for name in cfg.designs:
            reports.append(run_design(name, cfg, trace, i)[0])
    return reports


# --------------------------------------------------------------------------- output


def reports_csv(reports: list[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


def read_reports_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def atomic_write(path: str | os.PathLike, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=p.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, p)
    except BaseException:
        os.unlink(tmp)
        raise


def write_reports(out_dir: str | os.PathLike, name: str, reports: list[RunReport]) -> tuple[Path, Path]:
    out = Path(out_dir)
    csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
    atomic_write(csv_path, reports_csv(reports))
    atomic_write(json_path, dumps_reports(reports))
    return csv_path, json_path


def format_table(reports: list[RunReport]) -> str:
    cols = ("design", "miss_rate", "in_HitData", "in_MissData", "in_Tag", "in_Replacement", "off_ExtDRAM", "off_Replacement", "events", "est_runtime_s")
    rows = []
    for r in reports:
        row = r.csv_row()
        row["miss_rate"] = f"{r.miss_rate:.4f}"
        row["est_runtime_s"] = f"{r.est_runtime_s:.4g}"
        rows.append([str(row[c]) for c in cols])
    widths = [max(len(c), *(len(x[i]) for x in rows)) if rows else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(x.rjust(w) for x, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def load_reports_json(text: str) -> list[RunReport]:
    return [RunReport.from_json(d) for d in json.loads(text)]
