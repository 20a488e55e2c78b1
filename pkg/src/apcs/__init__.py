"""Software twin of an occupancy-driven power conservation system.

Dual-IR direction detection, person counting, an auto/manual appliance bank,
a ThingSpeak-style telemetry channel, energy/wastage accounting, and a
deterministic simulation harness, all behind one control gateway.
"""

__version__ = "0.1.0"
