"""Dual-IR direction detection and person counting.

Two IR sensors sit side by side at the doorway. A person walking in trips
IR1 first, then IR2; walking out trips them in the opposite order. The
detector pairs the two edges inside a bounded window (15 s by default) and
emits one crossing per completed pair. Everything here is a pure transition
function over timestamped events so traces can be replayed deterministically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Tuple

DEFAULT_WINDOW_MS = 15_000
DEFAULT_DEBOUNCE_MS = 200


class Sensor(enum.Enum):
    IR1 = "IR1"
    IR2 = "IR2"


class Direction(enum.Enum):
    IN = "IN"
    OUT = "OUT"


class Phase(enum.Enum):
    IDLE = "IDLE"
    AWAIT_IR2 = "AWAIT_IR2"  # IR1 fired, waiting for IR2 to complete an IN
    AWAIT_IR1 = "AWAIT_IR1"  # IR2 fired, waiting for IR1 to complete an OUT


class MonotonicityError(ValueError):
    """Raised when an event's timestamp precedes an already-ingested one."""


@dataclass(frozen=True)
class SensorEvent:
    """One rising edge on one sensor, in milliseconds since scenario start."""

    timestamp_ms: int
    sensor: Sensor

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError(f"negative timestamp: {self.timestamp_ms}")


@dataclass(frozen=True)
class CrossingEvent:
    """A completed pair of edges: one person through the doorway."""

    direction: Direction
    completed_at_ms: int


@dataclass(frozen=True)
class DetectorState:
    """Pairing state machine state.

    ``deadline_ms`` is set whenever a window is open (phase != IDLE) and
    equals the opening edge's timestamp plus ``window_ms``. ``last_ir1_ms``
    / ``last_ir2_ms`` hold the last *accepted* edge per sensor and drive the
    same-sensor debounce. ``last_seen_ms`` enforces trace monotonicity.
    """

    phase: Phase = Phase.IDLE
    deadline_ms: Optional[int] = None
    window_ms: int = DEFAULT_WINDOW_MS
    debounce_ms: int = DEFAULT_DEBOUNCE_MS
    last_ir1_ms: Optional[int] = None
    last_ir2_ms: Optional[int] = None
    last_seen_ms: int = -1

    def __post_init__(self):
        if self.window_ms <= 0:
            raise ValueError("window_ms must be positive")
        if self.debounce_ms < 0:
            raise ValueError("debounce_ms must be >= 0")
        if (self.phase is Phase.IDLE) != (self.deadline_ms is None):
            raise ValueError("deadline_ms must be set exactly when a window is open")


@dataclass(frozen=True)
class OccupancyCounter:
    """Running tally of IN minus OUT crossings.

    With ``clamp_at_zero`` (the default) a spurious exit cannot drive the
    count negative; set it to False to get the raw unguarded decrement.
    """

    count: int = 0
    clamp_at_zero: bool = True


def expire(state: DetectorState, now_ms: int) -> DetectorState:
    """Close a pending window whose deadline has passed.

    The open edge is discarded; an edge on the deadline itself still counts
    (expiry is strict: now must exceed the deadline).
    """
    if state.phase is not Phase.IDLE and now_ms > state.deadline_ms:
        return replace(state, phase=Phase.IDLE, deadline_ms=None)
    return state


def _debounced(state: DetectorState, event: SensorEvent) -> bool:
    last = state.last_ir1_ms if event.sensor is Sensor.IR1 else state.last_ir2_ms
    return last is not None and (event.timestamp_ms - last) < state.debounce_ms


def _accept_edge(state: DetectorState, event: SensorEvent, **changes) -> DetectorState:
    if event.sensor is Sensor.IR1:
        changes["last_ir1_ms"] = event.timestamp_ms
    else:
        changes["last_ir2_ms"] = event.timestamp_ms
    return replace(state, **changes)


def ingest(
    state: DetectorState, event: SensorEvent
) -> Tuple[DetectorState, Optional[CrossingEvent]]:
    """Feed one edge through the pairing state machine.

    Transition rules:
      * IDLE + IR1 opens an IN window; IDLE + IR2 opens an OUT window.
      * The opposite sensor's edge before (or exactly on) the deadline
        completes the crossing and returns to IDLE.
      * A same-sensor edge within ``debounce_ms`` of that sensor's last
        accepted edge is chatter and is dropped.
      * A same-sensor repeat while its own window is pending is ignored and
        does not refresh the deadline (single-file assumption; simultaneous
        multi-person crossings are out of scope).
      * An edge arriving after the deadline first expires the stale window,
        then is processed from IDLE as the start of a new crossing.

    Raises MonotonicityError for an out-of-order timestamp, which signals a
    malformed trace rather than a recoverable condition.
    """
    if event.timestamp_ms < state.last_seen_ms:
        raise MonotonicityError(
            f"event at {event.timestamp_ms}ms precedes last seen {state.last_seen_ms}ms"
        )
    state = replace(state, last_seen_ms=event.timestamp_ms)
    state = expire(state, event.timestamp_ms)

    if _debounced(state, event):
        return state, None

    if state.phase is Phase.IDLE:
        if event.sensor is Sensor.IR1:
            new_phase = Phase.AWAIT_IR2
        else:
            new_phase = Phase.AWAIT_IR1
        return (
            _accept_edge(
                state,
                event,
                phase=new_phase,
                deadline_ms=event.timestamp_ms + state.window_ms,
            ),
            None,
        )

    if state.phase is Phase.AWAIT_IR2 and event.sensor is Sensor.IR2:
        crossing = CrossingEvent(Direction.IN, event.timestamp_ms)
        return _accept_edge(state, event, phase=Phase.IDLE, deadline_ms=None), crossing

    if state.phase is Phase.AWAIT_IR1 and event.sensor is Sensor.IR1:
        crossing = CrossingEvent(Direction.OUT, event.timestamp_ms)
        return _accept_edge(state, event, phase=Phase.IDLE, deadline_ms=None), crossing

    # Same sensor as the opening edge, beyond debounce: ignored, no refresh.
    return state, None


def apply_crossing(counter: OccupancyCounter, crossing: CrossingEvent) -> OccupancyCounter:
    """Apply one crossing to the count (decrement clamps at zero by default)."""
    if crossing.direction is Direction.IN:
        return replace(counter, count=counter.count + 1)
    decremented = counter.count - 1
    if counter.clamp_at_zero and decremented < 0:
        decremented = 0
    return replace(counter, count=decremented)
