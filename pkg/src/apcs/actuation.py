"""Relay abstraction: maps the occupancy count and manual commands to appliance state.

The bank is switched all-or-nothing in AUTO mode (count > 0 turns everything
on, count <= 0 turns everything off). MANUAL mode freezes the bank and hands
control to per-appliance commands; commands sent while in AUTO are rejected
rather than silently switching modes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Tuple, Union

LIGHT_WATTS = 40.0
FAN_WATTS = 60.0

ALL = "ALL"


class ApplianceKind(enum.Enum):
    LIGHT = "LIGHT"
    FAN = "FAN"


class Mode(enum.Enum):
    AUTO = "AUTO"
    MANUAL = "MANUAL"


class UnknownApplianceError(KeyError):
    """Command targets an appliance id that is not in the bank."""


class WrongModeError(RuntimeError):
    """Manual command issued while the bank is in AUTO mode."""


@dataclass(frozen=True)
class Appliance:
    id: int
    kind: ApplianceKind
    watts: float
    on: bool = False

    def __post_init__(self):
        if self.watts <= 0:
            raise ValueError(f"watts must be positive, got {self.watts}")


@dataclass(frozen=True)
class ControlCommand:
    """A manual on/off request for one appliance or the whole bank."""

    target: Union[int, str]  # appliance id, or ALL
    desired_on: bool
    issued_at_ms: int = 0


@dataclass(frozen=True)
class ApplianceBankState:
    appliances: Tuple[Appliance, ...]
    mode: Mode = Mode.AUTO

    def __post_init__(self):
        ids = [a.id for a in self.appliances]
        if len(ids) != len(set(ids)):
            raise ValueError("appliance ids must be unique within the bank")

    def any_on(self) -> bool:
        return any(a.on for a in self.appliances)

    def lights_on(self) -> int:
        return sum(1 for a in self.appliances if a.kind is ApplianceKind.LIGHT and a.on)

    def fans_on(self) -> int:
        return sum(1 for a in self.appliances if a.kind is ApplianceKind.FAN and a.on)


def default_bank(n_lights: int = 4, n_fans: int = 4, mode: Mode = Mode.AUTO) -> ApplianceBankState:
    """Build the standard trial-room bank: lights first, then fans, all off."""
    appliances = []
    next_id = 1
    for _ in range(n_lights):
        appliances.append(Appliance(next_id, ApplianceKind.LIGHT, LIGHT_WATTS))
        next_id += 1
    for _ in range(n_fans):
        appliances.append(Appliance(next_id, ApplianceKind.FAN, FAN_WATTS))
        next_id += 1
    return ApplianceBankState(tuple(appliances), mode)


def reconcile(bank: ApplianceBankState, count: int) -> ApplianceBankState:
    """Drive the bank from the count: everything on iff count > 0.

    MANUAL banks are returned unchanged, so this is safe to call
    unconditionally after every count change.
    """
    if bank.mode is Mode.MANUAL:
        return bank
    want_on = count > 0
    if all(a.on == want_on for a in bank.appliances):
        return bank
    return replace(
        bank, appliances=tuple(replace(a, on=want_on) for a in bank.appliances)
    )


def set_mode(bank: ApplianceBankState, mode: Mode, count: int) -> ApplianceBankState:
    """Switch control mode.

    Entering AUTO immediately reasserts the occupancy-derived state (hence
    the count argument); entering MANUAL freezes whatever is on right now.
    """
    if mode is bank.mode:
        return bank
    bank = replace(bank, mode=mode)
    if mode is Mode.AUTO:
        bank = reconcile(bank, count)
    return bank


def manual_set(bank: ApplianceBankState, cmd: ControlCommand) -> ApplianceBankState:
    """Apply a manual command to a MANUAL-mode bank.

    Raises WrongModeError in AUTO (the command is rejected, not queued) and
    UnknownApplianceError for a target id that does not exist.
    """
    if bank.mode is not Mode.MANUAL:
        raise WrongModeError("manual commands are only accepted in MANUAL mode")
    if cmd.target == ALL:
        return replace(
            bank, appliances=tuple(replace(a, on=cmd.desired_on) for a in bank.appliances)
        )
    ids = {a.id for a in bank.appliances}
    if cmd.target not in ids:
        raise UnknownApplianceError(cmd.target)
    return replace(
        bank,
        appliances=tuple(
            replace(a, on=cmd.desired_on) if a.id == cmd.target else a
            for a in bank.appliances
        ),
    )
