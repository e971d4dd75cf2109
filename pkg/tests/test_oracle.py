"""Optimized engines against the brute-force reference replay."""

import pytest
from hypothesis import given, settings, strategies as st

from banshee_sim.base import simulate
from banshee_sim.config import from_dict
from banshee_sim.oracle import replay
from banshee_sim.runner import build_design
from banshee_sim.trace import READ, WRITE, MemEvent, Trace, generate


def config(design, cap_pages=64, ways=4, mcs=2, seed=1, **extra):
    data = {
        "designs": [design],
        "seed": seed,
        "geometry": {"cache_capacity": cap_pages * 4096, "ways": ways, "num_mcs": mcs, "phys_addr_bits": 36},
        "tag_buffer": {"entries": 16, "ways": 4, "threshold": 0.5},
        "workload": {"generator": "zipf", "footprint_pages": 4 * cap_pages, "events": 10_000, "zipf_s": 0.8},
    }
    for k, v in extra.items():
        data[k] = {**data.get(k, {}), **v} if isinstance(v, dict) else v
    return from_dict(data)


def both(cfg, trace, design):
    out: list[bool] = []
    d = simulate(build_design(design, cfg, trace), trace, outcomes=out)
    return d, out, replay(trace, cfg, design)


def assert_equivalent(cfg, trace, design):
    d, out, sh = both(cfg, trace, design)
    assert out == sh.outcomes
    assert d.ledger.as_dict() == sh.ledger
    assert d.contents() == sh.contents
    if design == "banshee":
        assert d.stats.flushes == sh.flushes
        assert d.stats.coherence_us == pytest.approx(sh.coherence_us)
        assert d.metadata_state() == sh.metadata
        assert d.stats.sampled == sh.sampled and d.stats.replacements == sh.replacements
    return d, sh


@pytest.mark.parametrize("design", ["banshee", "alloy", "alloy1", "unison", "tdc", "nocache", "cacheonly"])
@pytest.mark.parametrize("kind", [READ, WRITE])
def test_single_event_matches(design, kind):
    cfg = config(design)
    trace = Trace.from_events([MemEvent(kind, 12345, 7)])
    assert_equivalent(cfg, trace, design)


def test_banshee_16_sets_zipf_matches():
    cfg = config("banshee")
    assert cfg.geometry.sets == 16
    trace = generate(cfg.workload, cfg.geometry)
    d, _ = assert_equivalent(cfg, trace, "banshee")
    assert d.stats.replacements > 0


def test_unison_four_sets_eviction_sequence():
    cfg = config("unison", cap_pages=16, ways=4)
    assert cfg.geometry.sets == 4
    trace = generate(cfg.workload, cfg.geometry)
    sh = replay(trace, cfg, "unison")
    engine = build_design("unison", cfg, trace)
    engine.log = []
    simulate(engine, trace)
    assert [p for _, p in engine.log] == sh.evictions
    assert len(sh.evictions) > 100


def test_tdc_eviction_sequence():
    cfg = config("tdc", cap_pages=16)
    trace = generate(cfg.workload, cfg.geometry)
    engine = build_design("tdc", cfg, trace)
    engine.log = []
    simulate(engine, trace)
    assert [p for _, p in engine.log] == replay(trace, cfg, "tdc").evictions


def test_banshee_eviction_log_matches():
    cfg = config("banshee", banshee={"sampling_coeff": 1.0, "threshold": 1})
    trace = generate(cfg.workload, cfg.geometry)
    from banshee_sim.banshee import BansheeCache

    d = BansheeCache(cfg.geometry, cfg.banshee, cfg.tag_buffer, cfg.coherence, seed=cfg.seed, record_log=True)
    simulate(d, trace)
    sh = replay(trace, cfg, "banshee")
    assert [(n, k) for n, kind, k in d.log if kind == "evict"] == sh.evictions


def test_working_set_eight_times_capacity_direct_mapped_hit_rate():
    # Direct-mapped, always-admit: every line of the working set competes
    # uniformly for its slot, so the steady-state hit rate is about 1/8.
    cfg = from_dict({
        "designs": ["alloy1"],
        "geometry": {"cache_capacity": 64 * 4096, "ways": 1, "num_mcs": 1},
        "workload": {"generator": "working_set_loop", "footprint_pages": 8 * 64, "events": 100_000},
    })
    trace = generate(cfg.workload, cfg.geometry)
    sh = replay(trace, cfg, "alloy1")
    steady = sh.outcomes[20_000:]
    assert sum(steady) / len(steady) == pytest.approx(1 / 8, abs=0.01)
    d, _ = assert_equivalent(cfg, trace, "alloy1")


@pytest.mark.parametrize("design", ["unison", "tdc", "banshee"])
def test_working_set_that_fits_has_no_steady_misses(design):
    extra = {"banshee": {"sampling_coeff": 1.0, "threshold": 1}} if design == "banshee" else {}
    cfg = config(design, cap_pages=16, mcs=1, **extra)
    cfg = from_dict({**cfg.to_dict(), "workload": {"generator": "working_set_loop", "footprint_pages": 16, "events": 20_000}})
    trace = generate(cfg.workload, cfg.geometry)
    d, out, sh = both(cfg, trace, design)
    assert out == sh.outcomes
    assert not any(not h for h in out[10_000:])


@settings(max_examples=15, deadline=None)
@given(
    design=st.sampled_from(["banshee", "alloy", "unison", "tdc"]),
    ways=st.sampled_from([1, 2, 4]),
    mcs=st.sampled_from([1, 2, 4]),
    seed=st.integers(0, 1000),
    wf=st.sampled_from([0.0, 0.3]),
    gen=st.sampled_from(["zipf", "mixed", "working_set_loop", "sequential_scan"]),
    det=st.booleans(),
)
def test_random_small_configs_match(design, ways, mcs, seed, wf, gen, det):
    cfg = config(
        design,
        cap_pages=16 * ways,
        ways=ways,
        mcs=mcs,
        seed=seed,
        banshee={"sampling_coeff": 0.5, "deterministic_sampling": det},
    )
    cfg = from_dict({**cfg.to_dict(), "workload": {"generator": gen, "footprint_pages": 100, "events": 2000, "write_fraction": wf, "seed": seed}})
    trace = generate(cfg.workload, cfg.geometry)
    assert_equivalent(cfg, trace, design)


def test_large_page_partition_matches():
    cfg = from_dict({
        "designs": ["banshee"],
        "geometry": {"cache_capacity": 16 << 20, "ways": 4, "num_mcs": 2},
        "banshee": {"ways_large": 1, "fixed_sample_rate": 0.5, "large_threshold": 2},
        "tag_buffer": {"entries": 16, "ways": 4},
        "workload": {"generator": "zipf", "footprint_pages": 8, "events": 3000, "large_pages": True, "write_fraction": 0.2},
    })
    trace = generate(cfg.workload, cfg.geometry)
    d, _ = assert_equivalent(cfg, trace, "banshee")
    assert d.stats.replacements > 0
