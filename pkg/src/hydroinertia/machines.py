"""Electromechanical models: unit rotors, grid equivalent, bus frequency.

All machine quantities are per unit on the machine's own rating. Rotor
dynamics are written in torque form,

    tau_m * dw/dt = t_mec - p_e / w - damping * (w - w_grid)

with tau_m the mechanical time constant (stored kinetic energy at rated
speed divided by rated power, in seconds).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field


@dataclass(frozen=True)
class SynchronousMachineClassical:
    """Constant-flux machine behind a reactance, for grid-tied runs.

    States are the load angle against the bus [rad] and rotor speed [pu].
    """

    tau_m_s: float
    p_max_pu: float
    damping_pu: float
    omega_base_rad_s: float = 2.0 * math.pi * 50.0

    @classmethod
    def calibrated(cls, initial_power_pu: float, *, tau_m_s: float = 7.9,
                   sync_freq_hz: float = 1.0, damping_pu: float = 9.0,
                   base_freq_hz: float = 50.0) -> "SynchronousMachineClassical":
        """Machine whose rotor mode sits at sync_freq_hz when loaded as given.

        The small-signal stiffness p_max * cos(delta0) is pinned to
        (2 pi f)^2 tau_m / omega_base, then p_max follows from the
        requested operating point.
        """
        if not 0.0 < sync_freq_hz:
            raise ValueError("sync_freq_hz must be positive")
        omega_base = 2.0 * math.pi * base_freq_hz
        stiffness = (2.0 * math.pi * sync_freq_hz) ** 2 * tau_m_s / omega_base
        p_max = math.hypot(initial_power_pu, stiffness)
        return cls(tau_m_s=tau_m_s, p_max_pu=p_max, damping_pu=damping_pu,
                   omega_base_rad_s=omega_base)

    @property
    def reactance_pu(self) -> float:
        # unity internal and bus voltages
        return 1.0 / self.p_max_pu

    def electrical_power_pu(self, delta_rad: float) -> float:
        return self.p_max_pu * math.sin(delta_rad)

    def equilibrium_angle(self, power_pu: float) -> float:
        if abs(power_pu) > self.p_max_pu:
            raise ValueError(
                f"power {power_pu:.4g} pu exceeds the {self.p_max_pu:.4g} pu "
                "transfer limit")
        return math.asin(power_pu / self.p_max_pu)

    def derivatives(self, delta_rad: float, omega_pu: float,
                    torque_mec_pu: float, omega_grid_pu: float,
                    ) -> tuple[float, float]:
        slip = omega_pu - omega_grid_pu
        ddelta = self.omega_base_rad_s * slip
        domega = (torque_mec_pu
                  - self.electrical_power_pu(delta_rad) / omega_pu
                  - self.damping_pu * slip) / self.tau_m_s
        return ddelta, domega


@dataclass(frozen=True)
class VariableSpeedUnit:
    """Converter-fed unit: the rotor is decoupled from grid frequency.

    States are rotor speed [pu] and delivered converter power [pu]; the
    converter tracks its clipped command through a first-order lag.
    """

    tau_m_s: float
    converter_lag_s: float = 0.05
    p_floor_pu: float = 0.0
    p_ceiling_pu: float = 1.064

    def clip_command(self, p_cmd_pu: float) -> float:
        return min(max(p_cmd_pu, self.p_floor_pu), self.p_ceiling_pu)

    def derivatives(self, omega_pu: float, p_conv_pu: float,
                    torque_mec_pu: float, p_cmd_pu: float,
                    ) -> tuple[float, float]:
        domega = (torque_mec_pu - p_conv_pu / omega_pu) / self.tau_m_s
        dp = (self.clip_command(p_cmd_pu) - p_conv_pu) / self.converter_lag_s
        return domega, dp


@dataclass(frozen=True)
class GridEquivalentGenerator:
    """Aggregate of the remaining islanded generation with a droop governor.

    States are system speed [pu] and governor output [pu on the equivalent
    rating]. Grid frequency in an island is this machine's rotor speed.
    """

    rated_power_w: float = 4.4e9
    tau_m_s: float = 7.9
    droop_pu: float = 0.10
    governor_lag_s: float = 0.5

    def derivatives(self, omega_pu: float, p_gov_pu: float,
                    p_injected_w: float, p_load_w: float, p_ref_pu: float,
                    ) -> tuple[float, float]:
        p_cmd = p_ref_pu - (omega_pu - 1.0) / self.droop_pu
        dp = (p_cmd - p_gov_pu) / self.governor_lag_s
        accel = (p_gov_pu
                 + (p_injected_w - p_load_w) / self.rated_power_w) / omega_pu
        return accel / self.tau_m_s, dp


@dataclass(frozen=True)
class FrequencyProfile:
    """Piecewise-linear bus frequency for grid-tied scenarios."""

    times_s: tuple[float, ...]
    freqs_hz: tuple[float, ...]
    base_freq_hz: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "times_s", tuple(float(t) for t in self.times_s))
        object.__setattr__(self, "freqs_hz", tuple(float(f) for f in self.freqs_hz))
        if len(self.times_s) != len(self.freqs_hz):
            raise ValueError("times_s and freqs_hz must have equal length")
        if len(self.times_s) < 2:
            raise ValueError("a profile needs at least two knots")
        for a, b in zip(self.times_s, self.times_s[1:]):
            if b <= a:
                raise ValueError("profile knot times must increase strictly")
        if self.base_freq_hz <= 0.0:
            raise ValueError("base_freq_hz must be positive")

    def frequency_hz(self, t: float) -> float:
        ts, fs = self.times_s, self.freqs_hz
        if t <= ts[0]:
            return fs[0]
        if t >= ts[-1]:
            return fs[-1]
        i = bisect_right(ts, t) - 1
        frac = (t - ts[i]) / (ts[i + 1] - ts[i])
        return fs[i] + frac * (fs[i + 1] - fs[i])

    def omega_pu(self, t: float) -> float:
        return self.frequency_hz(t) / self.base_freq_hz

    def rocof_hz_s(self, t: float) -> float:
        ts, fs = self.times_s, self.freqs_hz
        if t < ts[0] or t >= ts[-1]:
            return 0.0
        i = bisect_right(ts, t) - 1
        return (fs[i + 1] - fs[i]) / (ts[i + 1] - ts[i])

    @classmethod
    def symmetric_ramp(cls, rate_hz_s: float, excursion_hz: float, *,
                       lead_s: float = 1.0, hold_s: float = 2.0,
                       tail_s: float = 6.0, base_freq_hz: float = 50.0,
                       up_first: bool = True) -> "FrequencyProfile":
        """Hold, ramp away, hold, ramp back, hold.

        The excursion and the return both run at the given rate, so each
        ramp lasts excursion_hz / rate_hz_s seconds.
        """
        if rate_hz_s <= 0.0 or excursion_hz <= 0.0:
            raise ValueError("rate and excursion must be positive")
        ramp_s = excursion_hz / rate_hz_s
        peak = base_freq_hz + (excursion_hz if up_first else -excursion_hz)
        times = (0.0, lead_s, lead_s + ramp_s, lead_s + ramp_s + hold_s,
                 lead_s + 2.0 * ramp_s + hold_s,
                 lead_s + 2.0 * ramp_s + hold_s + tail_s)
        freqs = (base_freq_hz, base_freq_hz, peak, peak,
                 base_freq_hz, base_freq_hz)
        return cls(times_s=times, freqs_hz=freqs, base_freq_hz=base_freq_hz)
