"""Power-consumption and wastage accounting.

The model charges each appliance a flat kWh-per-hour figure by kind. The
defaults (0.0513 for a 40 W tube light, 0.1374 for a 60 W fan) intentionally
differ from the nominal wattages converted to kWh; they are the coefficients
the wastage tables are calibrated against, and they are configurable.

Negligence accounting: over a period of ``days`` x ``hours_per_day``, the
appliances are assumed left running for ``negligence_pct`` percent of that
time with nobody in the room. The wasted and utilized figures always sum to
the full-period consumption.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from .actuation import ApplianceBankState, ApplianceKind

MS_PER_HOUR = 3_600_000

DEFAULT_LIGHT_KWH_PER_HOUR = 0.0513
DEFAULT_FAN_KWH_PER_HOUR = 0.1374


class NegativeInputError(ValueError):
    pass


class ZeroBaselineError(ZeroDivisionError):
    pass


class UnsortedLogError(ValueError):
    pass


class EmptyLogError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyModel:
    light_kwh_per_hour: float = DEFAULT_LIGHT_KWH_PER_HOUR
    fan_kwh_per_hour: float = DEFAULT_FAN_KWH_PER_HOUR
    n_lights: int = 4
    n_fans: int = 4

    def __post_init__(self):
        if self.light_kwh_per_hour <= 0 or self.fan_kwh_per_hour <= 0:
            raise ValueError("energy coefficients must be positive")
        if self.n_lights < 0 or self.n_fans < 0:
            raise ValueError("appliance counts must be >= 0")

    def kwh_per_hour(self, kind: ApplianceKind) -> float:
        return (
            self.light_kwh_per_hour
            if kind is ApplianceKind.LIGHT
            else self.fan_kwh_per_hour
        )

    def bank_kwh_per_hour(self) -> float:
        """Whole-bank rate with every appliance running."""
        return (
            self.n_lights * self.light_kwh_per_hour
            + self.n_fans * self.fan_kwh_per_hour
        )


@dataclass(frozen=True)
class WastageReport:
    days: int
    hours_per_day: float
    negligence_pct: float
    wasted_kwh: float
    utilized_kwh: float

    def total_kwh(self) -> float:
        return self.wasted_kwh + self.utilized_kwh


def negligent_hours(days: int, hours_per_day: float, negligence_pct: float) -> float:
    """Hours per period the appliances run with the room empty."""
    if days < 0 or hours_per_day < 0 or negligence_pct < 0:
        raise NegativeInputError("days, hours and negligence must be >= 0")
    if negligence_pct > 100:
        raise NegativeInputError(f"negligence_pct must be <= 100, got {negligence_pct}")
    return days * hours_per_day * negligence_pct / 100


def wastage_kwh(model: EnergyModel, hours: float) -> float:
    """Energy burned by the full bank over the given hours."""
    if hours < 0:
        raise NegativeInputError(f"hours must be >= 0, got {hours}")
    return hours * model.bank_kwh_per_hour()


def table1_report(
    model: EnergyModel, days: int, hours_per_day: float, negligence_pct: float
) -> WastageReport:
    """One wastage/utilization row for a negligence percentage.

    wasted is the energy for the negligent hours; utilized is the remainder
    of the full-period consumption, so the two always sum to the full total.
    """
    wasted = wastage_kwh(model, negligent_hours(days, hours_per_day, negligence_pct))
    total = wastage_kwh(model, days * hours_per_day)
    return WastageReport(
        days=days,
        hours_per_day=hours_per_day,
        negligence_pct=negligence_pct,
        wasted_kwh=wasted,
        utilized_kwh=total - wasted,
    )


@dataclass
class EnergyLedger:
    """Per-appliance on-time accumulated from an actuation log.

    On-times are integer milliseconds so ledgers split at any timestamp
    merge back together exactly. ``total_kwh`` is derived from the on-times
    on demand, which keeps the merge exact too.
    """

    on_ms: Dict[int, int] = field(default_factory=dict)
    kwh_per_hour: Dict[int, float] = field(default_factory=dict)

    @property
    def total_kwh(self) -> float:
        return sum(
            (ms / MS_PER_HOUR) * self.kwh_per_hour[app_id]
            for app_id, ms in sorted(self.on_ms.items())
        )

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        for app_id, coeff in other.kwh_per_hour.items():
            if app_id in self.kwh_per_hour and self.kwh_per_hour[app_id] != coeff:
                raise ValueError(f"conflicting coefficient for appliance {app_id}")
        merged = EnergyLedger(dict(self.on_ms), dict(self.kwh_per_hour))
        merged.kwh_per_hour.update(other.kwh_per_hour)
        for app_id, ms in other.on_ms.items():
            merged.on_ms[app_id] = merged.on_ms.get(app_id, 0) + ms
        return merged


def ledger_from_log(
    model: EnergyModel,
    actuation_log: Sequence[Tuple[int, ApplianceBankState]],
) -> EnergyLedger:
    """Integrate an actuation log into per-appliance on-time and kWh.

    Each entry's bank state holds from its timestamp until the next entry;
    the final entry's timestamp closes the last interval (its state is not
    integrated). A single-entry log therefore has zero duration.
    """
    if not actuation_log:
        raise EmptyLogError("actuation log must contain at least one entry")
    times = [t for t, _ in actuation_log]
    if any(b < a for a, b in zip(times, times[1:])):
        raise UnsortedLogError("actuation log timestamps must be sorted")

    ledger = EnergyLedger()
    for _, bank in actuation_log:
        for app in bank.appliances:
            ledger.on_ms.setdefault(app.id, 0)
            ledger.kwh_per_hour[app.id] = model.kwh_per_hour(app.kind)
    for (t0, bank), (t1, _) in zip(actuation_log, actuation_log[1:]):
        span = t1 - t0
        if span == 0:
            continue
        for app in bank.appliances:
            if app.on:
                ledger.on_ms[app.id] += span
    return ledger


def savings_pct(baseline_kwh: float, actual_kwh: float) -> float:
    """Percentage of the baseline consumption avoided."""
    if baseline_kwh <= 0:
        raise ZeroBaselineError("baseline must be positive to compute savings")
    if actual_kwh < 0:
        raise NegativeInputError(f"actual_kwh must be >= 0, got {actual_kwh}")
    return 100 * (baseline_kwh - actual_kwh) / baseline_kwh


def savings_document(
    report: WastageReport,
    baseline_kwh: float,
    auto_kwh: float,
) -> dict:
    """Assemble the savings report document (values rounded for presentation)."""
    doc = {
        "days": report.days,
        "hours_per_day": report.hours_per_day,
        "negligence_pct": report.negligence_pct,
        "wasted_kwh": round(report.wasted_kwh, 4),
        "utilized_kwh": round(report.utilized_kwh, 4),
        "baseline_kwh": round(baseline_kwh, 4),
        "auto_kwh": round(auto_kwh, 4),
    }
    if baseline_kwh > 0:
        doc["savings_pct"] = round(savings_pct(baseline_kwh, auto_kwh), 4)
    return doc
