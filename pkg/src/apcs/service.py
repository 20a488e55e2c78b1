"""The gateway: owns live system state and serves the monitoring/control API.

Exactly one thread (the gateway loop) mutates the detector, counter,
appliance bank and telemetry channel. Sensor events and API commands travel
through the same bounded queue, so every status snapshot corresponds to the
state after some prefix of processed messages and there are no torn reads.
HTTP handlers only enqueue and wait for a reply.
"""

from __future__ import annotations

import logging
import os
import queue
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple
from urllib.parse import parse_qs

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import actuation, occupancy, telemetry
from .actuation import (
    ALL,
    ApplianceBankState,
    ControlCommand,
    Mode,
    UnknownApplianceError,
    WrongModeError,
    default_bank,
)
from .occupancy import (
    DetectorState,
    MonotonicityError,
    OccupancyCounter,
    Phase,
    SensorEvent,
)
from .telemetry import BadApiKeyError, Channel, ChannelStore, PublishQueue, UnknownChannelError

logger = logging.getLogger("apcs.service")

DEFAULT_TOKEN_TTL_MS = 24 * 3_600_000
COMMAND_TIMEOUT_S = 10.0


class ServiceBusyError(RuntimeError):
    """The gateway's message queue is full; the request was rejected."""


class InvalidCredentialsError(PermissionError):
    pass


class UnauthorizedError(PermissionError):
    pass


@dataclass(frozen=True)
class GatewayConfig:
    user: str = "admin"
    password: str = "secret"
    port: int = 8080
    window_ms: int = occupancy.DEFAULT_WINDOW_MS
    debounce_ms: int = occupancy.DEFAULT_DEBOUNCE_MS
    clamp_at_zero: bool = True
    n_lights: int = 4
    n_fans: int = 4
    channel_id: int = 1
    write_api_key: str = "APCSWRITEKEY0000"
    min_update_interval_ms: int = telemetry.DEFAULT_MIN_UPDATE_INTERVAL_MS
    coalesce: bool = True
    token_ttl_ms: int = DEFAULT_TOKEN_TTL_MS
    queue_size: int = 1024

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        env = os.environ
        values: Dict[str, Any] = {
            "user": env.get("APCS_USER", cls.user),
            "password": env.get("APCS_PASSWORD", cls.password),
            "port": int(env.get("APCS_PORT", cls.port)),
            "window_ms": int(env.get("APCS_WINDOW_MS", cls.window_ms)),
            "debounce_ms": int(env.get("APCS_DEBOUNCE_MS", cls.debounce_ms)),
            "write_api_key": env.get("APCS_CHANNEL_KEY", cls.write_api_key),
            "min_update_interval_ms": int(
                env.get("APCS_RATE_INTERVAL_MS", cls.min_update_interval_ms)
            ),
        }
        values.update(overrides)
        return cls(**values)


class SimClock:
    """Virtual milliseconds, optionally running faster than the wall."""

    def __init__(self, speed: float = 1.0, start_ms: int = 0):
        if speed <= 0:
            raise ValueError("speed must be positive")
        self.speed = speed
        self._virtual0 = start_ms
        self._wall0 = time.monotonic()

    def now_ms(self) -> int:
        return int(self._virtual0 + (time.monotonic() - self._wall0) * 1000 * self.speed)

    def wall_seconds_until(self, virtual_ms: int) -> float:
        return max(0.0, (virtual_ms - self.now_ms()) / 1000 / self.speed)


class ManualClock:
    """Test clock: time moves only when told to."""

    def __init__(self, start_ms: int = 0):
        self._now = start_ms
        self.speed = 1.0

    def now_ms(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> None:
        self._now += delta_ms

    def wall_seconds_until(self, virtual_ms: int) -> float:
        return 0.0 if virtual_ms <= self._now else 0.05


class SessionStore:
    """Issues and validates opaque bearer tokens for the single admin user."""

    def __init__(self, user: str, password: str, ttl_ms: int = DEFAULT_TOKEN_TTL_MS):
        self._user = user
        self._password = password
        self._ttl_ms = ttl_ms
        self._tokens: Dict[str, float] = {}  # token -> expiry (epoch seconds)
        self._lock = threading.Lock()

    def login(self, user: str, password: str) -> Tuple[str, str]:
        if not (
            secrets.compare_digest(user, self._user)
            and secrets.compare_digest(password, self._password)
        ):
            raise InvalidCredentialsError("bad user or password")
        token = secrets.token_urlsafe(32)  # 256 bits
        expires = time.time() + self._ttl_ms / 1000
        with self._lock:
            self._tokens[token] = expires
        expires_at = datetime.fromtimestamp(expires, tz=timezone.utc).strftime(
            "%Y-%m-%dT%H:%M:%SZ"
        )
        return token, expires_at

    def require(self, token: Optional[str]) -> None:
        if token is None:
            raise UnauthorizedError("missing bearer token")
        with self._lock:
            expires = self._tokens.get(token)
            if expires is None:
                raise UnauthorizedError("unknown token")
            if time.time() > expires:
                del self._tokens[token]
                raise UnauthorizedError("token expired")

    def expire_all(self) -> None:
        """Testing hook: invalidate every issued token."""
        with self._lock:
            for token in self._tokens:
                self._tokens[token] = 0.0


@dataclass(frozen=True)
class StatusSnapshot:
    mode: str
    count: int
    appliances: Tuple[Dict[str, Any], ...]
    lights_on: int
    fans_on: int
    last_event_at: Optional[int]
    telemetry_entries: int

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "count": self.count,
            "appliances": list(self.appliances),
            "lights_on": self.lights_on,
            "fans_on": self.fans_on,
            "last_event_at": self.last_event_at,
            "telemetry_entries": self.telemetry_entries,
        }


@dataclass
class _Command:
    kind: str
    payload: tuple
    reply: "queue.SimpleQueue[Tuple[str, Any]]" = field(default_factory=queue.SimpleQueue)


class Gateway:
    """Single-mutator event loop with command injection."""

    def __init__(self, config: GatewayConfig, clock=None):
        self.config = config
        self.clock = clock if clock is not None else SimClock()
        self.sessions = SessionStore(config.user, config.password, config.token_ttl_ms)

        self._detector = DetectorState(
            window_ms=config.window_ms, debounce_ms=config.debounce_ms
        )
        self._counter = OccupancyCounter(0, clamp_at_zero=config.clamp_at_zero)
        self._bank = default_bank(config.n_lights, config.n_fans, Mode.AUTO)
        self.channels = ChannelStore()
        self._channel = self.channels.add(
            Channel(
                channel_id=config.channel_id,
                write_api_key=config.write_api_key,
                min_update_interval_ms=config.min_update_interval_ms,
            )
        )
        self._publisher = PublishQueue(coalesce=config.coalesce)
        self._last_event_at: Optional[int] = None
        self.rejected_events = 0

        self._queue: "queue.Queue[Any]" = queue.Queue(maxsize=config.queue_size)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="apcs-gateway", daemon=True)

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "Gateway":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        try:
            self._queue.put_nowait(None)
        except queue.Full:
            pass
        self._thread.join(timeout=5)

    # -- producers (any thread) ---------------------------------------------

    def submit_event(self, event: SensorEvent) -> None:
        try:
            self._queue.put_nowait(event)
        except queue.Full:
            raise ServiceBusyError("event queue full") from None

    def _ask(self, kind: str, *payload) -> Any:
        cmd = _Command(kind, payload)
        try:
            self._queue.put_nowait(cmd)
        except queue.Full:
            raise ServiceBusyError("command queue full") from None
        status, value = cmd.reply.get(timeout=COMMAND_TIMEOUT_S)
        if status == "err":
            raise value
        return value

    def status(self) -> StatusSnapshot:
        return self._ask("status")

    def set_mode(self, mode: Mode) -> StatusSnapshot:
        return self._ask("mode", mode)

    def set_appliance(self, target, desired_on: bool) -> StatusSnapshot:
        return self._ask("appliance", target, desired_on)

    def telemetry_update(self, api_key: str, fields: Dict[str, str]) -> int:
        return self._ask("telemetry_update", api_key, fields)

    def telemetry_feeds(self, channel_id: int, results: int) -> telemetry.FeedPage:
        return self._ask("feeds", channel_id, results)

    def drain_barrier(self) -> StatusSnapshot:
        """Wait until everything queued before this call has been processed."""
        return self.status()

    # -- the loop (single mutator) -------------------------------------------

    def _run(self) -> None:
        while not self._stop.is_set():
            timeout = self._next_wakeup()
            try:
                msg = self._queue.get(timeout=timeout)
            except queue.Empty:
                self._on_timer()
                continue
            if msg is None:
                break
            if isinstance(msg, SensorEvent):
                self._handle_event(msg)
            elif isinstance(msg, _Command):
                try:
                    msg.reply.put(("ok", self._handle_command(msg)))
                except Exception as exc:  # travels back to the caller
                    msg.reply.put(("err", exc))

    def _next_wakeup(self) -> Optional[float]:
        candidates: List[int] = []
        if self._detector.phase is not Phase.IDLE:
            candidates.append(self._detector.deadline_ms + 1)  # expiry is strict
        permitted = self._publisher.next_permitted_ms(self._channel, self.clock.now_ms())
        if permitted is not None:
            candidates.append(permitted)
        if not candidates:
            return None
        return min(1.0, self.clock.wall_seconds_until(min(candidates)))

    def _on_timer(self) -> None:
        now = self.clock.now_ms()
        self._detector = occupancy.expire(self._detector, now)
        self._publisher.drain(self._channel, self.config.write_api_key, now)

    def _handle_event(self, event: SensorEvent) -> None:
        try:
            self._detector, crossing = occupancy.ingest(self._detector, event)
        except MonotonicityError as exc:
            self.rejected_events += 1
            logger.warning("dropped malformed event: %s", exc)
            return
        self._last_event_at = event.timestamp_ms
        if crossing is None:
            return
        self._counter = occupancy.apply_crossing(self._counter, crossing)
        self._bank = actuation.reconcile(self._bank, self._counter.count)
        self._publisher.publish_count(self._counter.count, event.timestamp_ms)
        self._publisher.drain(
            self._channel, self.config.write_api_key, max(event.timestamp_ms, self.clock.now_ms())
        )

    def _handle_command(self, cmd: _Command):
        if cmd.kind == "status":
            return self._snapshot()
        if cmd.kind == "mode":
            (mode,) = cmd.payload
            self._bank = actuation.set_mode(self._bank, mode, self._counter.count)
            return self._snapshot()
        if cmd.kind == "appliance":
            target, desired_on = cmd.payload
            command = ControlCommand(target, desired_on, issued_at_ms=self.clock.now_ms())
            self._bank = actuation.manual_set(self._bank, command)
            return self._snapshot()
        if cmd.kind == "telemetry_update":
            api_key, fields = cmd.payload
            return telemetry.update(self._channel, api_key, fields, self.clock.now_ms())
        if cmd.kind == "feeds":
            channel_id, results = cmd.payload
            return telemetry.feeds(self.channels.get(channel_id), results)
        raise RuntimeError(f"unknown command {cmd.kind!r}")

    def _snapshot(self) -> StatusSnapshot:
        bank = self._bank
        return StatusSnapshot(
            mode=bank.mode.value,
            count=self._counter.count,
            appliances=tuple(
                {
                    "id": a.id,
                    "kind": a.kind.value,
                    "state": "ON" if a.on else "OFF",
                    "watts": a.watts,
                }
                for a in bank.appliances
            ),
            lights_on=bank.lights_on(),
            fans_on=bank.fans_on(),
            last_event_at=self._last_event_at,
            telemetry_entries=len(self._channel.entries),
        )


# ---------------------------------------------------------------------------
# HTTP layer


def create_app(gateway: Gateway) -> FastAPI:
    """Build the FastAPI app exposing the control API and the telemetry channel."""
    app = FastAPI(title="apcs", docs_url=None, redoc_url=None)

    def error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse({"error": code, "message": message}, status_code=status)

    def bearer_token(request: Request) -> Optional[str]:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            return header[7:].strip()
        return None

    def authorize(request: Request) -> Optional[JSONResponse]:
        try:
            gateway.sessions.require(bearer_token(request))
        except UnauthorizedError as exc:
            return error(401, "unauthorized", str(exc))
        return None

    @app.post("/login")
    async def login(request: Request):
        body = await request.json()
        try:
            token, expires_at = gateway.sessions.login(
                str(body.get("user", "")), str(body.get("password", ""))
            )
        except InvalidCredentialsError as exc:
            return error(401, "invalid_credentials", str(exc))
        return {"token": token, "expires_at": expires_at}

    @app.get("/status")
    def get_status(request: Request):
        denied = authorize(request)
        if denied:
            return denied
        try:
            return gateway.status().to_json_dict()
        except ServiceBusyError as exc:
            return error(503, "service_busy", str(exc))

    @app.post("/mode")
    async def post_mode(request: Request):
        denied = authorize(request)
        if denied:
            return denied
        body = await request.json()
        raw = body.get("mode")
        try:
            mode = Mode(raw)
        except ValueError:
            return error(400, "bad_mode", f"mode must be AUTO or MANUAL, got {raw!r}")
        try:
            return gateway.set_mode(mode).to_json_dict()
        except ServiceBusyError as exc:
            return error(503, "service_busy", str(exc))

    @app.post("/appliance/{appliance_id}")
    async def post_appliance(appliance_id: str, request: Request):
        denied = authorize(request)
        if denied:
            return denied
        body = await request.json()
        raw = body.get("state")
        if raw not in ("ON", "OFF"):
            return error(400, "bad_state", f"state must be ON or OFF, got {raw!r}")
        target = ALL if appliance_id == "all" else None
        if target is None:
            try:
                target = int(appliance_id)
            except ValueError:
                return error(404, "unknown_appliance", f"no appliance {appliance_id!r}")
        try:
            return gateway.set_appliance(target, raw == "ON").to_json_dict()
        except WrongModeError as exc:
            return error(409, "wrong_mode", str(exc))
        except UnknownApplianceError:
            return error(404, "unknown_appliance", f"no appliance {appliance_id!r}")
        except ServiceBusyError as exc:
            return error(503, "service_busy", str(exc))

    @app.post("/update")
    async def post_update(request: Request):
        # ThingSpeak-style: form-encoded body, plain decimal entry id back.
        body = (await request.body()).decode("utf-8", errors="replace")
        params = {k: v[-1] for k, v in parse_qs(body).items()}
        api_key = params.pop("api_key", "")
        fields = {k: v for k, v in params.items() if k.startswith("field")}
        try:
            entry_id = gateway.telemetry_update(api_key, fields)
        except BadApiKeyError as exc:
            return error(401, "bad_api_key", str(exc))
        except ServiceBusyError as exc:
            return error(503, "service_busy", str(exc))
        return PlainTextResponse(str(entry_id))

    @app.get("/channels/{channel_id}/feeds.json")
    def get_feeds(channel_id: int, results: int = 0):
        try:
            page = gateway.telemetry_feeds(channel_id, results)
        except UnknownChannelError:
            return error(404, "unknown_channel", f"no channel {channel_id}")
        except ValueError as exc:
            return error(400, "bad_request", str(exc))
        except ServiceBusyError as exc:
            return error(503, "service_busy", str(exc))
        return page.to_json_dict()

    return app


def feed_trace(gateway: Gateway, trace, stop: Optional[threading.Event] = None) -> None:
    """Stream a trace into the gateway, pacing each event by the gateway clock."""
    for event in trace:
        if stop is not None and stop.is_set():
            return
        delay = gateway.clock.wall_seconds_until(event.timestamp_ms)
        if delay > 0:
            time.sleep(delay)
        gateway.submit_event(event)
