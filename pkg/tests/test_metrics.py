import json

import pytest
from hypothesis import given, strategies as st

from banshee_sim.geometry import DramTierParams, in_package_default, off_package_default, peak_bandwidth
from banshee_sim.metrics import (
    CSV_COLUMNS,
    EXT_DRAM,
    HIT_DATA,
    IN,
    MISS_DATA,
    OFF,
    REPLACEMENT,
    TAG,
    AccessStats,
    BandwidthBalancer,
    LedgerError,
    PerfModel,
    RunReport,
    TrafficLedger,
    bandwidth_balance,
    charge,
    dumps_reports,
    estimate_runtime,
)

IN_T, OFF_T = in_package_default(), off_package_default()


@pytest.mark.parametrize(
    "tier, cat, payload, added",
    [(IN, TAG, 32, 32), (IN, HIT_DATA, 64, 64), (OFF, EXT_DRAM, 20, 32)],
)
def test_charge_examples(tier, cat, payload, added):
    led = TrafficLedger()
    assert charge(led, tier, cat, payload) == added
    assert led.get(tier, cat) == added


@pytest.mark.parametrize("tier, cat", [(OFF, HIT_DATA), (OFF, TAG), (OFF, MISS_DATA), (IN, EXT_DRAM)])
def test_invalid_tier_category_pairs(tier, cat):
    with pytest.raises(LedgerError):
        TrafficLedger().charge(tier, cat, 64)


ops = st.lists(
    st.tuples(
        st.sampled_from([(IN, HIT_DATA), (IN, MISS_DATA), (IN, TAG), (IN, REPLACEMENT), (OFF, EXT_DRAM), (OFF, REPLACEMENT)]),
        st.integers(0, 1 << 22),
    ),
    max_size=50,
)


@given(ops)
def test_totals_and_round_trip(charges):
    led = TrafficLedger()
    prev = 0
    for (t, c), n in charges:
        led.charge(t, c, n)
        assert led.total >= prev  # monotone
        prev = led.total
    d = led.as_dict()
    assert sum(sum(v.values()) for v in d.values()) == led.total
    assert led.tier_total(IN) + led.tier_total(OFF) == led.total
    assert TrafficLedger.from_dict(d) == led
    assert json.loads(json.dumps(d)) == d


def test_ledger_categories_per_tier():
    d = TrafficLedger().as_dict()
    assert set(d["in_package"]) == {"HitData", "MissData", "Tag", "Replacement"}
    assert set(d["off_package"]) == {"ExtDRAM", "Replacement"}


def test_runtime_bandwidth_bound():
    led = TrafficLedger()
    bw = peak_bandwidth(IN_T)
    led.charge(IN, HIT_DATA, int(bw))
    assert estimate_runtime(led, IN_T, OFF_T) == pytest.approx(1.0, rel=1e-6)


def test_runtime_zero_traffic_is_compute_bound():
    led = TrafficLedger()
    led.instructions = 16 * 2.7e9
    assert estimate_runtime(led, IN_T, OFF_T) == pytest.approx(1.0)


def test_runtime_linear_in_off_package_traffic():
    a, b = TrafficLedger(), TrafficLedger()
    a.charge(OFF, EXT_DRAM, 1 << 30)
    b.charge(OFF, EXT_DRAM, 2 << 30)
    assert estimate_runtime(b, IN_T, OFF_T) == pytest.approx(2 * estimate_runtime(a, IN_T, OFF_T))


def test_runtime_adds_coherence_time():
    led = TrafficLedger()
    assert estimate_runtime(led, IN_T, OFF_T, coherence_us=39) == pytest.approx(39e-6)


def test_runtime_with_zero_bandwidth_tier():
    led = TrafficLedger()
    led.charge(IN, HIT_DATA, 64)
    assert estimate_runtime(led, DramTierParams(channels=0), OFF_T) == float("inf")


def test_balance_fraction():
    assert bandwidth_balance(50, 50) == 0.0
    assert bandwidth_balance(90, 10) == 0.25
    assert bandwidth_balance(0, 0) == 0.0


def test_balancer_activates_on_window_share():
    b = BandwidthBalancer(sets=64, window=10, share=0.8, bypass_fraction=0.25)
    led = TrafficLedger()
    for _ in range(10):
        led.charge(IN, HIT_DATA, 64)
        b.tick(led)
    assert b.active and b.bypass_sets == 16
    assert b.bypassed(3) and not b.bypassed(20)
    for _ in range(10):
        led.charge(OFF, EXT_DRAM, 64)
        b.tick(led)
    assert not b.active


def test_balancer_rejects_bad_params():
    with pytest.raises(ValueError):
        BandwidthBalancer(16, share=1.5)


def _report(**kw):
    led = TrafficLedger()
    led.charge(IN, HIT_DATA, 640)
    led.charge(OFF, EXT_DRAM, 64)
    led.events, led.instructions = 11, 550
    st_ = AccessStats(hits=10, misses=1)
    return RunReport.build("banshee", 3, led, st_, IN_T, OFF_T, PerfModel(), **kw)


def test_report_fields_and_csv():
    r = _report(point=2, params={"ways": 4, "banshee.sampling_coeff": 0.1})
    assert r.miss_rate == pytest.approx(1 / 11)
    assert r.mpki == pytest.approx(1000 / 550)
    row = r.csv_row()
    assert tuple(row) == CSV_COLUMNS
    assert row["params"] == "banshee.sampling_coeff=0.1;ways=4"
    assert row["in_HitData"] == 640 and row["off_total"] == 64


def test_report_json_round_trip():
    r = _report(params={"x": 1})
    again = RunReport.from_json(json.loads(dumps_reports([r]))[0])
    assert again == r


def test_stats_reset():
    s = AccessStats(hits=3, coherence_us=2.0)
    s.reset()
    assert s == AccessStats()
