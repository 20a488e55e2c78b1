"""ThingSpeak-style telemetry channel and the device-side count publisher.

The channel is an in-process append-only feed. Updates are authenticated by
a write key and rate limited (default 15 s between accepted entries, the
public service's behaviour); a rejected update returns entry id 0 instead of
an error so client code ports cleanly. The publisher queue absorbs the rate
limit: publishes enqueue instantly and a drain step submits them as the
clock permits, optionally coalescing backlogged counts down to the newest.

All timestamps are virtual milliseconds supplied by the caller, which keeps
replays deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Deque, Dict, List, Optional, Tuple

DEFAULT_MIN_UPDATE_INTERVAL_MS = 15_000
DEFAULT_QUEUE_CAPACITY = 1024


class BadApiKeyError(PermissionError):
    pass


class UnknownChannelError(KeyError):
    pass


def rfc3339_utc(ms: int) -> str:
    """Render a virtual-clock millisecond offset as an RFC3339 UTC second."""
    return (
        datetime.fromtimestamp(ms / 1000, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    )


@dataclass(frozen=True)
class TelemetryEntry:
    entry_id: int
    created_at_ms: int
    fields: Dict[str, str]

    def feed_row(self) -> dict:
        row = {"created_at": rfc3339_utc(self.created_at_ms), "entry_id": self.entry_id}
        row.update(self.fields)
        return row


@dataclass
class Channel:
    """One append-only feed. Single-writer; owned by the service loop."""

    channel_id: int
    write_api_key: str
    field_names: Dict[str, str] = field(default_factory=lambda: {"field1": "count"})
    min_update_interval_ms: int = DEFAULT_MIN_UPDATE_INTERVAL_MS
    entries: List[TelemetryEntry] = field(default_factory=list)

    def last_accepted_at_ms(self) -> Optional[int]:
        return self.entries[-1].created_at_ms if self.entries else None


def update(channel: Channel, api_key: str, fields: Dict[str, str], now_ms: int) -> int:
    """Append an entry; returns its id, or 0 when rate-limited.

    Authorization failures raise, they are not the rate-limit sentinel.
    """
    if api_key != channel.write_api_key:
        raise BadApiKeyError(f"bad write key for channel {channel.channel_id}")
    last = channel.last_accepted_at_ms()
    if last is not None and now_ms - last < channel.min_update_interval_ms:
        return 0
    entry = TelemetryEntry(
        entry_id=len(channel.entries) + 1,
        created_at_ms=now_ms,
        fields=dict(fields),
    )
    channel.entries.append(entry)
    return entry.entry_id


@dataclass(frozen=True)
class FeedPage:
    channel_id: int
    field_names: Dict[str, str]
    entries: Tuple[TelemetryEntry, ...]

    def to_json_dict(self) -> dict:
        meta = {"id": self.channel_id}
        meta.update(self.field_names)
        return {"channel": meta, "feeds": [e.feed_row() for e in self.entries]}


def feeds(channel: Channel, results: int = 0) -> FeedPage:
    """Last ``results`` entries in chronological order; 0 means all."""
    if results < 0:
        raise ValueError("results must be >= 0")
    entries = channel.entries if results == 0 else channel.entries[-results:]
    return FeedPage(
        channel_id=channel.channel_id,
        field_names=dict(channel.field_names),
        entries=tuple(entries),
    )


class ChannelStore:
    """Channels by id, for the feed endpoint."""

    def __init__(self):
        self._channels: Dict[int, Channel] = {}

    def add(self, channel: Channel) -> Channel:
        self._channels[channel.channel_id] = channel
        return channel

    def get(self, channel_id: int) -> Channel:
        try:
            return self._channels[channel_id]
        except KeyError:
            raise UnknownChannelError(channel_id) from None


@dataclass
class PublishQueue:
    """Bounded FIFO between the event loop and the channel.

    With ``coalesce`` (the default) a publish that lands on a non-empty
    backlog replaces the newest pending count: when throttled, the channel
    records the latest state rather than every intermediate. Overflow drops
    the oldest pending item and counts it.
    """

    capacity: int = DEFAULT_QUEUE_CAPACITY
    coalesce: bool = True
    pending: Deque[Tuple[int, int]] = field(default_factory=deque)  # (count, t_ms)
    dropped: int = 0

    def publish_count(self, count: int, now_ms: int) -> None:
        if self.coalesce and self.pending:
            self.pending[-1] = (count, now_ms)
            return
        self.pending.append((count, now_ms))
        if len(self.pending) > self.capacity:
            self.pending.popleft()
            self.dropped += 1

    def drain(self, channel: Channel, api_key: str, now_ms: int) -> int:
        """Submit pending counts until empty or rate-limited; returns #accepted."""
        accepted = 0
        while self.pending:
            count, _ = self.pending[0]
            entry_id = update(channel, api_key, {"field1": str(count)}, now_ms)
            if entry_id == 0:
                break
            self.pending.popleft()
            accepted += 1
        return accepted

    def next_permitted_ms(self, channel: Channel, now_ms: int) -> Optional[int]:
        """Earliest instant a pending item could be accepted; None if idle."""
        if not self.pending:
            return None
        last = channel.last_accepted_at_ms()
        if last is None:
            return now_ms
        return max(now_ms, last + channel.min_update_interval_ms)

    def flush(self, channel: Channel, api_key: str, now_ms: int) -> int:
        """Drain everything, advancing the virtual clock past rate limits."""
        flushed_at = now_ms
        total = 0
        while self.pending:
            flushed_at = self.next_permitted_ms(channel, flushed_at)
            total += self.drain(channel, api_key, flushed_at)
        return total
