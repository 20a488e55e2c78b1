import json
import random

import pytest

from apcs.energy import EnergyModel, negligent_hours, wastage_kwh
from apcs.occupancy import Direction, Sensor
from apcs.simharness import (
    Crossing,
    CrossingSchedule,
    InvalidScheduleError,
    NoiseProfile,
    SystemConfig,
    gen_trace,
    load_scenario,
    negligence_baseline,
    oracle_occupancy,
    random_schedule,
    run_scenario,
    save_scenario,
    schedule_from_dict,
    schedule_to_dict,
    read_trace_jsonl,
    write_trace_jsonl,
)

H = 3_600_000


def schedule(crossings, duration):
    return CrossingSchedule(tuple(crossings), duration)


def test_gen_trace_single_in():
    trace = gen_trace(schedule([Crossing(0, Direction.IN, 3000)], 10_000))
    assert [(e.timestamp_ms, e.sensor) for e in trace] == [
        (0, Sensor.IR1),
        (3000, Sensor.IR2),
    ]


def test_gen_trace_out_reverses_sensor_order():
    trace = gen_trace(
        schedule(
            [Crossing(0, Direction.IN, 100), Crossing(20_000, Direction.OUT, 500)],
            30_000,
        )
    )
    assert [(e.timestamp_ms, e.sensor) for e in trace[2:]] == [
        (20_000, Sensor.IR2),
        (20_500, Sensor.IR1),
    ]


def test_gen_trace_empty_schedule():
    assert gen_trace(schedule([], 0)) == ()


def test_gen_trace_same_seed_same_trace():
    sched = schedule(
        [Crossing(0, Direction.IN, 1000), Crossing(60_000, Direction.OUT, 1000)],
        120_000,
    )
    noise = NoiseProfile(drop_edge_prob=0.3, spurious_edge_rate_per_min=5, jitter_ms=50, rng_seed=99)
    assert gen_trace(sched, noise) == gen_trace(sched, noise)
    different = NoiseProfile(drop_edge_prob=0.3, spurious_edge_rate_per_min=5, jitter_ms=50, rng_seed=100)
    assert gen_trace(sched, noise) != gen_trace(sched, different)


def test_schedule_validation_rejects_negative_occupancy():
    bad = schedule([Crossing(0, Direction.OUT, 1000)], 10_000)
    with pytest.raises(InvalidScheduleError):
        bad.validate()
    with pytest.raises(InvalidScheduleError):
        gen_trace(bad)


def test_oracle_single_entry():
    timeline = oracle_occupancy(schedule([Crossing(0, Direction.IN, 3000)], 10_000))
    assert timeline.count_at(0) == 0
    assert timeline.count_at(2999) == 0
    assert timeline.count_at(3000) == 1
    assert timeline.count_at(9999) == 1


def test_oracle_in_then_out():
    timeline = oracle_occupancy(
        schedule(
            [Crossing(0, Direction.IN, 1000), Crossing(60_000, Direction.OUT, 1000)],
            120_000,
        )
    )
    assert timeline.count_at(999) == 0
    assert timeline.count_at(1000) == 1
    assert timeline.count_at(60_999) == 1
    assert timeline.count_at(61_000) == 0


def test_detector_matches_oracle_on_random_schedules():
    rng = random.Random(42)
    for _ in range(100):
        sched = random_schedule(rng, max_crossings=40)
        result = run_scenario(sched)
        timeline = oracle_occupancy(sched)
        completions = sorted(c.completes_at_ms for c in sched.crossings)
        assert len(result.crossings) == len(sched.crossings)
        for crossing, count in zip(result.crossings, result.counts):
            assert count == timeline.count_at(crossing.completed_at_ms)
        assert [c.completed_at_ms for c in result.crossings] == completions


def test_run_scenario_single_visit_energy():
    sched = schedule(
        [Crossing(0, Direction.IN, 1200), Crossing(H, Direction.OUT, 1200)],
        2 * H,
    )
    result = run_scenario(sched)
    # on from the IN completion to the OUT completion: exactly one hour
    assert result.ledger.total_kwh == pytest.approx(0.7548, abs=1e-9)
    assert result.final_count == 0


def test_run_scenario_empty_schedule():
    result = run_scenario(schedule([], 5 * H))
    assert result.crossings == ()
    assert result.ledger.total_kwh == 0
    assert all(not a.on for _, bank in result.actuation_log for a in bank.appliances)


def test_run_scenario_all_edges_dropped():
    sched = schedule(
        [Crossing(0, Direction.IN, 1200), Crossing(H, Direction.OUT, 1200)],
        2 * H,
    )
    result = run_scenario(sched, NoiseProfile(drop_edge_prob=1.0, rng_seed=1))
    assert result.trace == ()
    assert result.final_count == 0
    assert result.crossings == ()


def test_run_scenario_publishes_count_per_crossing():
    sched = schedule(
        [
            Crossing(0, Direction.IN, 1000),
            Crossing(20_000, Direction.IN, 1000),
            Crossing(40_000, Direction.OUT, 1000),
            Crossing(60_000, Direction.OUT, 1000),
        ],
        80_000,
    )
    result = run_scenario(sched, config=SystemConfig(min_update_interval_ms=0, coalesce=False))
    assert [e.fields["field1"] for e in result.telemetry_entries] == ["1", "2", "1", "0"]


def test_baseline_all_vacant_reproduces_closed_form():
    sched = schedule([], 240 * H)  # 30 days x 8 h, nobody ever present
    model = EnergyModel()
    for pct, expected in [(90, 163.0368), (50, 90.576), (10, 18.1152)]:
        baseline = negligence_baseline(sched, pct, model)
        assert baseline.total_kwh == pytest.approx(expected, abs=1e-9)
        closed_form = wastage_kwh(model, negligent_hours(30, 8, pct))
        assert baseline.total_kwh == pytest.approx(closed_form, abs=1e-9)


def test_baseline_zero_negligence_equals_auto_energy():
    sched = schedule(
        [Crossing(10_000, Direction.IN, 1200), Crossing(H, Direction.OUT, 1200)],
        2 * H,
    )
    baseline = negligence_baseline(sched, 0)
    auto = run_scenario(sched)
    assert baseline.total_kwh == pytest.approx(auto.ledger.total_kwh, abs=1e-12)


def test_baseline_dominates_auto_for_any_negligence():
    rng = random.Random(5)
    for _ in range(30):
        sched = random_schedule(rng, max_crossings=20)
        auto_kwh = run_scenario(sched).ledger.total_kwh
        previous = auto_kwh
        for pct in (0, 10, 50, 90, 100):
            b = negligence_baseline(sched, pct).total_kwh
            assert b >= auto_kwh - 1e-9
            assert b >= previous - 1e-9  # more negligence never saves energy
            previous = b


def test_baseline_front_loads_each_vacancy():
    # one hour vacant, then one hour occupied: with 50% the bank must burn
    # the first half hour, stay on through the visit, and nothing after
    sched = schedule(
        [Crossing(H, Direction.IN, 0), Crossing(2 * H - 1, Direction.OUT, 1)],
        2 * H,
    )
    baseline = negligence_baseline(sched, 50)
    transitions = [(t, bank.any_on()) for t, bank in baseline.actuation_log]
    assert transitions[0] == (0, True)
    assert (H // 2, False) in transitions
    assert (H, True) in transitions


def test_scenario_roundtrip_files(tmp_path):
    sched = schedule(
        [Crossing(0, Direction.IN, 900), Crossing(30_000, Direction.OUT, 800)],
        60_000,
    )
    noise = NoiseProfile(jitter_ms=10, rng_seed=7)
    path = tmp_path / "scenario.json"
    save_scenario(path, sched, noise)
    loaded_sched, loaded_noise = load_scenario(path)
    assert loaded_sched == sched
    assert loaded_noise == noise
    assert schedule_from_dict(schedule_to_dict(sched))[0] == sched


def test_trace_jsonl_roundtrip(tmp_path):
    sched = schedule([Crossing(0, Direction.IN, 1200)], 10_000)
    trace = gen_trace(sched)
    path = tmp_path / "trace.jsonl"
    write_trace_jsonl(path, trace)
    assert read_trace_jsonl(path) == trace
    lines = path.read_text().strip().splitlines()
    assert json.loads(lines[0]) == {"t_ms": 0, "sensor": "IR1"}


def test_trace_jsonl_rejects_garbage(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"t_ms": 1, "sensor": "IR9"}\n')
    with pytest.raises(ValueError):
        read_trace_jsonl(path)


def test_scenario_result_serialization_deterministic():
    rng = random.Random(77)
    sched = random_schedule(rng, max_crossings=30)
    noise = NoiseProfile(drop_edge_prob=0.1, jitter_ms=20, rng_seed=123)
    first = json.dumps(run_scenario(sched, noise).to_json_dict(), sort_keys=True)
    second = json.dumps(run_scenario(sched, noise).to_json_dict(), sort_keys=True)
    assert first == second
