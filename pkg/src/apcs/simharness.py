"""Scenario generation and deterministic end-to-end replay.

A scenario is a schedule of ground-truth crossings (when a person walks
through, which way, and how far apart the two sensor edges land). The
harness expands schedules into raw sensor traces (optionally with noise),
replays them through the detector/counter/relay/telemetry pipeline, and
builds the no-automation negligence baseline that savings are measured
against.

The brute-force occupancy oracle reads the schedule directly, with no state
machine, so it stays independent of the detector it checks.
"""

from __future__ import annotations

import bisect
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .actuation import ApplianceBankState, Mode, default_bank, reconcile
from .energy import EnergyLedger, EnergyModel, ledger_from_log
from .occupancy import (
    CrossingEvent,
    DetectorState,
    Direction,
    OccupancyCounter,
    Sensor,
    SensorEvent,
    apply_crossing,
    ingest,
)
from .telemetry import Channel, PublishQueue, TelemetryEntry

DEFAULT_INTER_SENSOR_GAP_MS = 1200  # normal walking pace through a doorway


class InvalidScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class Crossing:
    t_ms: int
    direction: Direction
    gap_ms: int = DEFAULT_INTER_SENSOR_GAP_MS

    @property
    def completes_at_ms(self) -> int:
        return self.t_ms + self.gap_ms


@dataclass(frozen=True)
class CrossingSchedule:
    crossings: Tuple[Crossing, ...]
    duration_ms: int

    def validate(self) -> None:
        if self.duration_ms < 0:
            raise InvalidScheduleError("duration_ms must be >= 0")
        occupancy = 0
        prev_t = None
        for c in self.crossings:
            if c.t_ms < 0 or c.gap_ms < 0:
                raise InvalidScheduleError("crossing times and gaps must be >= 0")
            if prev_t is not None and c.t_ms < prev_t:
                raise InvalidScheduleError("crossings must be sorted by t_ms")
            prev_t = c.t_ms
            occupancy += 1 if c.direction is Direction.IN else -1
            if occupancy < 0:
                raise InvalidScheduleError(
                    f"schedule not realizable: occupancy goes negative at t={c.t_ms}"
                )


@dataclass(frozen=True)
class NoiseProfile:
    drop_edge_prob: float = 0.0
    spurious_edge_rate_per_min: float = 0.0
    jitter_ms: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_edge_prob <= 1.0:
            raise ValueError("drop_edge_prob must be in [0, 1]")
        if self.spurious_edge_rate_per_min < 0 or self.jitter_ms < 0:
            raise ValueError("noise magnitudes must be >= 0")

    def is_noop(self) -> bool:
        return (
            self.drop_edge_prob == 0.0
            and self.spurious_edge_rate_per_min == 0.0
            and self.jitter_ms == 0
        )


def gen_trace(
    schedule: CrossingSchedule, noise: Optional[NoiseProfile] = None
) -> Tuple[SensorEvent, ...]:
    """Expand a schedule into sensor edges: IR1 then IR2 for IN, IR2 then IR1 for OUT.

    Noise is applied after expansion, in a fixed order (drops, jitter, then
    spurious edges) so the same seed always yields the same trace. The
    result is sorted by timestamp with the expansion order preserved on ties.
    """
    schedule.validate()
    edges: List[Tuple[int, Sensor]] = []
    for c in schedule.crossings:
        first, second = (
            (Sensor.IR1, Sensor.IR2)
            if c.direction is Direction.IN
            else (Sensor.IR2, Sensor.IR1)
        )
        edges.append((c.t_ms, first))
        edges.append((c.completes_at_ms, second))

    if noise is not None and not noise.is_noop():
        rng = random.Random(noise.rng_seed)
        if noise.drop_edge_prob > 0:
            edges = [e for e in edges if rng.random() >= noise.drop_edge_prob]
        if noise.jitter_ms > 0:
            edges = [
                (max(0, t + rng.randint(-noise.jitter_ms, noise.jitter_ms)), s)
                for t, s in edges
            ]
        if noise.spurious_edge_rate_per_min > 0 and schedule.duration_ms > 0:
            rate_per_ms = noise.spurious_edge_rate_per_min / 60_000
            t = rng.expovariate(rate_per_ms)
            while t <= schedule.duration_ms:
                edges.append((int(t), rng.choice([Sensor.IR1, Sensor.IR2])))
                t += rng.expovariate(rate_per_ms)

    edges.sort(key=lambda e: e[0])  # stable: equal timestamps keep order
    return tuple(SensorEvent(t, s) for t, s in edges)


class OccupancyTimeline:
    """Step function time -> count, computed straight from the schedule.

    A crossing counts from the moment its second edge lands. No detector
    state is involved, which is the point: this is the independent oracle.
    """

    def __init__(self, steps: Sequence[Tuple[int, int]]):
        # steps: (completion_ms, count after that completion), sorted
        self._times = [t for t, _ in steps]
        self._counts = [c for _, c in steps]

    @property
    def steps(self) -> List[Tuple[int, int]]:
        return list(zip(self._times, self._counts))

    def count_at(self, t_ms: int) -> int:
        idx = bisect.bisect_right(self._times, t_ms)
        return self._counts[idx - 1] if idx else 0

    def occupied_intervals(self, duration_ms: int) -> List[Tuple[int, int]]:
        """Maximal [start, end) intervals with count > 0, clipped to the duration."""
        intervals: List[Tuple[int, int]] = []
        current_start = None
        prev_count = 0
        for t, count in zip(self._times, self._counts):
            if t >= duration_ms:
                break
            if prev_count == 0 and count > 0:
                current_start = t
            elif prev_count > 0 and count == 0 and current_start is not None:
                if t > current_start:
                    intervals.append((current_start, t))
                current_start = None
            prev_count = count
        if current_start is not None and duration_ms > current_start:
            intervals.append((current_start, duration_ms))
        return intervals


def oracle_occupancy(schedule: CrossingSchedule) -> OccupancyTimeline:
    schedule.validate()
    completions = sorted(
        schedule.crossings, key=lambda c: c.completes_at_ms
    )
    steps: List[Tuple[int, int]] = []
    count = 0
    for c in completions:
        count += 1 if c.direction is Direction.IN else -1
        steps.append((c.completes_at_ms, count))
    # collapse simultaneous completions to the final count at that instant
    collapsed: List[Tuple[int, int]] = []
    for t, c in steps:
        if collapsed and collapsed[-1][0] == t:
            collapsed[-1] = (t, c)
        else:
            collapsed.append((t, c))
    return OccupancyTimeline(collapsed)


@dataclass(frozen=True)
class SystemConfig:
    """Everything a replay needs. Telemetry rate limiting defaults to off so
    replays are lossless; the live service uses the channel default (15 s)."""

    window_ms: int = 15_000
    debounce_ms: int = 200
    clamp_at_zero: bool = True
    model: EnergyModel = field(default_factory=EnergyModel)
    channel_id: int = 1
    write_api_key: str = "APCSWRITEKEY0000"
    min_update_interval_ms: int = 0
    coalesce: bool = True
    queue_capacity: int = 1024


@dataclass
class ScenarioResult:
    schedule: CrossingSchedule
    config: SystemConfig
    trace: Tuple[SensorEvent, ...]
    crossings: Tuple[CrossingEvent, ...]
    counts: Tuple[int, ...]  # count after each detected crossing
    actuation_log: Tuple[Tuple[int, ApplianceBankState], ...]
    telemetry_entries: Tuple[TelemetryEntry, ...]
    dropped_publishes: int
    final_count: int
    ledger: EnergyLedger

    def to_json_dict(self) -> dict:
        return {
            "final_count": self.final_count,
            "total_kwh": round(self.ledger.total_kwh, 9),
            "crossings": [
                {"dir": c.direction.value, "t_ms": c.completed_at_ms}
                for c in self.crossings
            ],
            "counts": list(self.counts),
            "trace": [
                {"t_ms": e.timestamp_ms, "sensor": e.sensor.value} for e in self.trace
            ],
            "actuation_log": [
                {
                    "t_ms": t,
                    "on": [a.id for a in bank.appliances if a.on],
                }
                for t, bank in self.actuation_log
            ],
            "telemetry": [e.feed_row() for e in self.telemetry_entries],
            "dropped_publishes": self.dropped_publishes,
        }


def run_scenario(
    schedule: CrossingSchedule,
    noise: Optional[NoiseProfile] = None,
    config: SystemConfig = SystemConfig(),
) -> ScenarioResult:
    """Replay a schedule end to end: trace -> detector -> counter -> relay ->
    telemetry -> energy ledger. Pure virtual time, fully deterministic."""
    trace = gen_trace(schedule, noise)

    detector = DetectorState(window_ms=config.window_ms, debounce_ms=config.debounce_ms)
    counter = OccupancyCounter(0, clamp_at_zero=config.clamp_at_zero)
    bank = default_bank(config.model.n_lights, config.model.n_fans, Mode.AUTO)
    channel = Channel(
        channel_id=config.channel_id,
        write_api_key=config.write_api_key,
        min_update_interval_ms=config.min_update_interval_ms,
    )
    queue = PublishQueue(capacity=config.queue_capacity, coalesce=config.coalesce)

    log: List[Tuple[int, ApplianceBankState]] = [(0, bank)]
    crossings: List[CrossingEvent] = []
    counts: List[int] = []

    for event in trace:
        detector, crossing = ingest(detector, event)
        if crossing is None:
            continue
        counter = apply_crossing(counter, crossing)
        crossings.append(crossing)
        counts.append(counter.count)
        new_bank = reconcile(bank, counter.count)
        if new_bank != bank:
            log.append((event.timestamp_ms, new_bank))
            bank = new_bank
        queue.publish_count(counter.count, event.timestamp_ms)
        queue.drain(channel, config.write_api_key, event.timestamp_ms)

    end_ms = schedule.duration_ms
    if trace:
        end_ms = max(end_ms, trace[-1].timestamp_ms)
    queue.flush(channel, config.write_api_key, end_ms)
    log.append((end_ms, bank))

    return ScenarioResult(
        schedule=schedule,
        config=config,
        trace=trace,
        crossings=tuple(crossings),
        counts=tuple(counts),
        actuation_log=tuple(log),
        telemetry_entries=tuple(channel.entries),
        dropped_publishes=queue.dropped,
        final_count=counter.count,
        ledger=ledger_from_log(config.model, log),
    )


@dataclass
class NegligenceBaseline:
    """The no-automation world: appliances on while occupied, and left on for
    a fixed fraction of every vacancy interval (front-loaded from its start)."""

    negligence_pct: float
    timeline: OccupancyTimeline
    actuation_log: Tuple[Tuple[int, ApplianceBankState], ...]
    ledger: EnergyLedger

    @property
    def total_kwh(self) -> float:
        return self.ledger.total_kwh


def negligence_baseline(
    schedule: CrossingSchedule,
    negligence_pct: float,
    model: EnergyModel = EnergyModel(),
) -> NegligenceBaseline:
    if not 0.0 <= negligence_pct <= 100.0:
        raise InvalidScheduleError("negligence_pct must be in [0, 100]")
    schedule.validate()
    timeline = oracle_occupancy(schedule)
    duration = schedule.duration_ms

    bank_off = default_bank(model.n_lights, model.n_fans, Mode.MANUAL)
    bank_on = replace(
        bank_off, appliances=tuple(replace(a, on=True) for a in bank_off.appliances)
    )

    # Build alternating occupied/vacant segments over [0, duration).
    occupied = timeline.occupied_intervals(duration)
    log: List[Tuple[int, ApplianceBankState]] = []

    def emit(t: int, state: ApplianceBankState) -> None:
        if log and log[-1][0] == t:
            log[-1] = (t, state)
        elif not log or log[-1][1] != state:
            log.append((t, state))

    def cover_vacancy(a: int, b: int) -> None:
        on_ms = round((b - a) * negligence_pct / 100)
        if on_ms > 0:
            emit(a, bank_on)
            emit(a + on_ms, bank_off)
        else:
            emit(a, bank_off)

    cursor = 0
    emit(0, bank_off)
    for start, end in occupied:
        if start > cursor:
            cover_vacancy(cursor, start)
        emit(start, bank_on)
        cursor = end
    if cursor < duration:
        cover_vacancy(cursor, duration)
    log.append((duration, log[-1][1] if log else bank_off))

    return NegligenceBaseline(
        negligence_pct=negligence_pct,
        timeline=timeline,
        actuation_log=tuple(log),
        ledger=ledger_from_log(model, log),
    )


def random_schedule(
    rng: random.Random,
    max_crossings: int = 200,
    window_ms: int = 15_000,
    debounce_ms: int = 200,
) -> CrossingSchedule:
    """A well-formed schedule: crossings never overlap, every pair completes
    inside the window, and edges of distinct crossings clear the debounce."""
    n = rng.randint(1, max_crossings)
    t = rng.randint(0, 5_000)
    occupancy = 0
    crossings: List[Crossing] = []
    for _ in range(n):
        gap = rng.randint(0, min(8_000, window_ms - 1))
        if occupancy == 0:
            direction = Direction.IN
        else:
            direction = rng.choice([Direction.IN, Direction.OUT])
        occupancy += 1 if direction is Direction.IN else -1
        crossings.append(Crossing(t, direction, gap))
        t += gap + debounce_ms + 1 + rng.randint(0, 60_000)
    duration = t + rng.randint(0, 10_000)
    return CrossingSchedule(tuple(crossings), duration)


# ---------------------------------------------------------------------------
# File formats


def schedule_to_dict(
    schedule: CrossingSchedule, noise: Optional[NoiseProfile] = None
) -> dict:
    doc = {
        "duration_ms": schedule.duration_ms,
        "crossings": [
            {"t_ms": c.t_ms, "dir": c.direction.value, "gap_ms": c.gap_ms}
            for c in schedule.crossings
        ],
    }
    if noise is not None:
        doc["noise"] = {
            "drop_edge_prob": noise.drop_edge_prob,
            "spurious_edge_rate_per_min": noise.spurious_edge_rate_per_min,
            "jitter_ms": noise.jitter_ms,
            "rng_seed": noise.rng_seed,
        }
    return doc


def schedule_from_dict(doc: dict) -> Tuple[CrossingSchedule, Optional[NoiseProfile]]:
    crossings = tuple(
        Crossing(
            t_ms=int(c["t_ms"]),
            direction=Direction(c["dir"]),
            gap_ms=int(c.get("gap_ms", DEFAULT_INTER_SENSOR_GAP_MS)),
        )
        for c in doc["crossings"]
    )
    schedule = CrossingSchedule(crossings, int(doc["duration_ms"]))
    schedule.validate()
    noise = None
    if doc.get("noise"):
        nd = doc["noise"]
        noise = NoiseProfile(
            drop_edge_prob=float(nd.get("drop_edge_prob", 0.0)),
            spurious_edge_rate_per_min=float(nd.get("spurious_edge_rate_per_min", 0.0)),
            jitter_ms=int(nd.get("jitter_ms", 0)),
            rng_seed=int(nd.get("rng_seed", 0)),
        )
    return schedule, noise


def load_scenario(path: Union[str, Path]) -> Tuple[CrossingSchedule, Optional[NoiseProfile]]:
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_dict(json.load(fh))


def save_scenario(
    path: Union[str, Path],
    schedule: CrossingSchedule,
    noise: Optional[NoiseProfile] = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_dict(schedule, noise), fh, indent=2)
        fh.write("\n")


def write_trace_jsonl(path: Union[str, Path], trace: Iterable[SensorEvent]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in trace:
            fh.write(
                json.dumps({"t_ms": event.timestamp_ms, "sensor": event.sensor.value})
                + "\n"
            )


def read_trace_jsonl(path: Union[str, Path]) -> Tuple[SensorEvent, ...]:
    events: List[SensorEvent] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                events.append(SensorEvent(int(doc["t_ms"]), Sensor(doc["sensor"])))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad trace line: {exc}") from exc
    return tuple(events)
