"""Closed-form arithmetic for rotating inertia and grid frequency events.

Everything here is algebraic: no time integration, no iteration. Signs
follow the generator convention, positive power flows to the grid, so a
falling grid frequency yields a positive inertial contribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi

# Angular speed used for the canonical contribution table below. The
# published plant table was computed from a starting speed slightly above
# the nominal 2*pi*50 rad/s; 315.0 rad/s reproduces all five printed
# integer megawatt figures, the nominal value does not.
REFERENCE_OMEGA_START_RAD_S = 315.0


@dataclass(frozen=True)
class UnitRating:
    """Nameplate data needed for inertia arithmetic."""

    rated_power_w: float
    rated_speed_rad_s: float
    inertia_kg_m2: float

    def __post_init__(self):
        if self.rated_power_w <= 0.0:
            raise ValueError("rated_power_w must be positive")
        if self.rated_speed_rad_s <= 0.0:
            raise ValueError("rated_speed_rad_s must be positive")
        if self.inertia_kg_m2 <= 0.0:
            raise ValueError("inertia_kg_m2 must be positive")


@dataclass(frozen=True)
class FleetEntry:
    """One aggregated machine group: time constant and rated power."""

    tau_m_s: float
    rated_power_w: float


@dataclass(frozen=True)
class FrequencyExcursion:
    """Linear speed excursion from omega_start to omega_end over duration_s."""

    omega_start_rad_s: float
    omega_end_rad_s: float
    duration_s: float

    def __post_init__(self):
        if self.omega_start_rad_s <= 0.0 or self.omega_end_rad_s <= 0.0:
            raise ValueError("excursion speeds must be positive")
        if self.duration_s <= 0.0:
            raise ValueError("duration_s must be positive")


def mechanical_time_constant(rating: UnitRating) -> float:
    """Kinetic energy at rated speed divided by rated power, in seconds."""
    return (rating.inertia_kg_m2 * rating.rated_speed_rad_s**2
            / rating.rated_power_w)


def system_time_constant(fleet: list[FleetEntry]) -> float:
    """Power-weighted mean time constant of a fleet of machine groups."""
    if not fleet:
        raise ValueError("fleet must contain at least one entry")
    weighted = sum(e.tau_m_s * e.rated_power_w for e in fleet)
    total = sum(e.rated_power_w for e in fleet)
    if total <= 0.0:
        raise ValueError("total rated power must be positive")
    return weighted / total


def rocof_from_imbalance(power_imbalance_pu: float, system_tau_m_s: float,
                         rated_frequency_hz: float = 50.0) -> float:
    """Initial frequency slope in Hz/s for a per-unit power imbalance.

    A surplus of generation (positive imbalance) accelerates the system.
    """
    if system_tau_m_s <= 0.0:
        raise ValueError("system_tau_m_s must be positive")
    return power_imbalance_pu / system_tau_m_s * rated_frequency_hz


def inertial_power_instant(tau_m_s: float, speed_rate_pu_per_s: float) -> float:
    """Small-deviation inertial power in per unit of rated power.

    speed_rate_pu_per_s is the grid speed derivative on the rated-speed
    base. Decelerating grids draw stored energy out of the rotor, so the
    returned contribution is positive when the rate is negative.
    """
    return -tau_m_s * speed_rate_pu_per_s


def kinetic_energy_delta(inertia_kg_m2: float,
                         excursion: FrequencyExcursion) -> float:
    """Energy released by the rotor over the excursion, in joules.

    Positive when the rotor slows down (energy handed to the grid),
    negative when it is spun up. Antisymmetric under reversal.
    """
    w1 = excursion.omega_start_rad_s
    w2 = excursion.omega_end_rad_s
    return 0.5 * inertia_kg_m2 * (w1 * w1 - w2 * w2)


def mean_power_contribution(tau_m_s: float,
                            excursion: FrequencyExcursion) -> float:
    """Window-mean inertial power over the excursion, per unit of rating.

    Equals the kinetic energy change divided by duration and rated power
    when the rating speed is the excursion start speed. Linear in tau_m.
    """
    ratio = excursion.omega_end_rad_s / excursion.omega_start_rad_s
    return 0.5 * (tau_m_s / excursion.duration_s) * (1.0 - ratio * ratio)


@dataclass(frozen=True)
class TableRow:
    """One row of the canonical contribution table, full precision."""

    label: str
    sum_pn_mw: float
    rocof_hz_per_s: float
    tau_m_s: float
    dp_over_pn_pct: float
    dp_mw: float


# (label, summed rated power MW, RoCoF Hz/s, tau_m s) for the Frades 2
# plant: four single-unit cases and the two-unit hydraulic short circuit.
REFERENCE_CASES = (
    ("Frades2 U1", 395.0, 0.5, 7.9),
    ("Frades2 U1", 395.0, 1.0, 7.9),
    ("Frades2 U1", 395.0, 2.0, 7.9),
    ("Frades2 U1", 395.0, 2.0, 3.95),
    ("Frades2 HSC U1+U2", 790.0, 2.0, 7.9),
)


def reference_table_rows(omega_start_rad_s: float = REFERENCE_OMEGA_START_RAD_S,
                         duration_s: float = 1.0) -> list[TableRow]:
    """Canonical table of mean inertial contributions for rising frequency.

    Magnitudes are reported (a rising grid absorbs power into the rotor).
    Rows keep full precision; rounding to integer percent and MW happens
    only at the formatting layer.
    """
    rows = []
    for label, sum_pn_mw, rocof, tau_m in REFERENCE_CASES:
        w1 = omega_start_rad_s
        w2 = w1 + TWO_PI * rocof * duration_s
        pu = abs(mean_power_contribution(tau_m, FrequencyExcursion(w1, w2, duration_s)))
        rows.append(TableRow(label=label, sum_pn_mw=sum_pn_mw,
                             rocof_hz_per_s=rocof, tau_m_s=tau_m,
                             dp_over_pn_pct=pu * 100.0, dp_mw=pu * sum_pn_mw))
    return rows


def reference_table_csv(rows: list[TableRow]) -> str:
    """CSV rendering with integer-rounded percent and MW columns."""
    lines = ["label,sum_pn_mw,rocof_hz_per_s,tau_m_s,dp_over_pn_pct,dp_mw"]
    for r in rows:
        lines.append("%s,%.9g,%.9g,%.9g,%d,%d"
                     % (r.label, r.sum_pn_mw, r.rocof_hz_per_s, r.tau_m_s,
                        round(r.dp_over_pn_pct), round(r.dp_mw)))
    return "\n".join(lines) + "\n"


def format_reference_table(rows: list[TableRow]) -> str:
    """Aligned text table with integer-rounded percent and MW columns."""
    header = (f"{'case':<20}{'sum Pn [MW]':>12}{'RoCoF [Hz/s]':>14}"
              f"{'tau_m [s]':>11}{'dP/Pn [%]':>11}{'dP [MW]':>9}")
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r.label:<20}{r.sum_pn_mw:>12.0f}{r.rocof_hz_per_s:>14.1f}"
                     f"{r.tau_m_s:>11.2f}{round(r.dp_over_pn_pct):>11d}"
                     f"{round(r.dp_mw):>9d}")
    return "\n".join(lines) + "\n"
