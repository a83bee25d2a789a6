"""Unit-level power controller and speed governor.

The converter-side controller turns grid frequency into a power setpoint:
a base setpoint plus three additive corrections (filtered-derivative
inertial support, droop-proportional primary reserve through a lag, and a
triggered fast-reserve step). The governor holds rotor speed by moving
the guide vanes. All controller steps are pure functions from explicit
state to new state, so runs stay deterministic and replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EnvelopeError


@dataclass(frozen=True)
class ControllerConfig:
    """Converter power-controller parameters.

    si_gain_s scales the filtered frequency derivative into power; setting
    it equal to the unit's mechanical time constant makes the converter
    mimic the stored-energy exchange of a directly coupled machine.
    """

    si_gain_s: float = 7.9
    si_filter_s: float = 0.1
    droop_pu: float = 0.10
    fcr_lag_s: float = 2.0
    ffr_threshold_hz: float = 49.5
    ffr_step_pu: float = 0.1
    ffr_duration_s: float = 5.0
    base_power_pu: float = 0.7
    si_enabled: bool = True
    fcr_enabled: bool = False
    ffr_enabled: bool = False

    def __post_init__(self):
        if self.si_gain_s < 0.0:
            raise ValueError("si_gain_s must be non-negative")
        if self.si_filter_s <= 0.0:
            raise ValueError("si_filter_s must be positive")
        if self.droop_pu <= 0.0:
            raise ValueError("droop_pu must be positive")
        if self.fcr_lag_s <= 0.0:
            raise ValueError("fcr_lag_s must be positive")
        if self.ffr_duration_s <= 0.0:
            raise ValueError("ffr_duration_s must be positive")


@dataclass(frozen=True)
class DerivativeFilterState:
    """State of the filtered-derivative branch."""

    filtered_pu: float
    last_input_pu: float

    @classmethod
    def at_frequency(cls, frequency_pu: float) -> "DerivativeFilterState":
        return cls(filtered_pu=frequency_pu, last_input_pu=frequency_pu)


def si_branch_step(state: DerivativeFilterState, grid_frequency_pu: float,
                   dt_s: float, gain_s: float, filter_time_s: float,
                   ) -> tuple[DerivativeFilterState, float]:
    """Advance the inertial branch one step; returns (state, output [pu]).

    Trapezoidal discretization of the first-order filter dx/dt =
    (f - x) / tau; the branch output is -gain * (f - x) / tau, the
    filtered frequency derivative scaled into power. The trapezoidal form
    keeps the low-frequency gain of the continuous filter and is stable
    for any step size.
    """
    half = dt_s / (2.0 * filter_time_s)
    x = ((state.filtered_pu * (1.0 - half)
          + half * (state.last_input_pu + grid_frequency_pu))
         / (1.0 + half))
    output = -gain_s * (grid_frequency_pu - x) / filter_time_s
    return DerivativeFilterState(x, grid_frequency_pu), output


def fcr_branch_step(output_pu: float, grid_frequency_pu: float, dt_s: float,
                    droop_pu: float, lag_s: float) -> float:
    """First-order tracking of the droop target -(f - 1) / droop."""
    target = -(grid_frequency_pu - 1.0) / droop_pu
    return output_pu + (target - output_pu) * (1.0 - math.exp(-dt_s / lag_s))


@dataclass(frozen=True)
class FastReserveState:
    """Trigger state of the fast-reserve step: armed, active or spent.

    A spent branch rearms only once frequency has recovered above the
    threshold, so a long under-frequency stretch fires exactly once.
    """

    mode: str
    activated_at_s: float = 0.0

    @classmethod
    def armed(cls) -> "FastReserveState":
        return cls(mode="armed")


def ffr_branch_step(state: FastReserveState, grid_frequency_hz: float,
                    t_s: float, *, threshold_hz: float, step_pu: float,
                    duration_s: float) -> tuple[FastReserveState, float]:
    if state.mode == "armed":
        if grid_frequency_hz < threshold_hz:
            return FastReserveState("active", t_s), step_pu
        return state, 0.0
    if state.mode == "active":
        if t_s - state.activated_at_s < duration_s:
            return state, step_pu
        state = FastReserveState("spent", state.activated_at_s)
    # spent: wait for recovery before rearming
    if grid_frequency_hz >= threshold_hz:
        return FastReserveState.armed(), 0.0
    return state, 0.0


def compose_setpoint(base_pu: float, si_pu: float, fcr_pu: float,
                     ffr_pu: float, *, floor_pu: float = 0.0,
                     ceiling_pu: float = 1.064) -> tuple[float, bool]:
    """Sum the branches onto the base setpoint and clip to unit limits.

    Returns (setpoint, clipped) so callers can log saturation events.
    """
    total = base_pu + si_pu + fcr_pu + ffr_pu
    if total > ceiling_pu:
        return ceiling_pu, True
    if total < floor_pu:
        return floor_pu, True
    return total, False


@dataclass(frozen=True)
class SpeedPolicy:
    """Speed-setpoint schedule over the continuous speed range."""

    mode: str
    n_min_rpm: float = 350.0
    n_max_rpm: float = 381.0
    n_middle_rpm: float = 365.5
    knee_pu: float = 0.98

    def __post_init__(self):
        if self.mode not in ("optimal", "middle"):
            raise ValueError(f"unknown speed policy mode '{self.mode}'")
        if not self.n_min_rpm < self.n_middle_rpm < self.n_max_rpm:
            raise ValueError("speed range must satisfy n_min < n_middle < n_max")
        if not 0.0 < self.knee_pu < 1.0:
            raise ValueError("knee_pu must lie in (0, 1)")


def speed_setpoint_select(power_pu: float, policy: SpeedPolicy) -> float:
    """Speed setpoint [min^-1] for the given power loading.

    Optimal mode rides the minimum speed up to the knee, then rises
    linearly to the maximum at rated power (and saturates there for brief
    over-rating). Middle mode parks in the centre of the range, which
    maximizes the speed margin available for inertial support.
    """
    if not 0.0 < power_pu <= 1.05:
        raise EnvelopeError(
            f"power {power_pu:.4g} pu outside the (0, 1.05] setpoint envelope")
    if policy.mode == "middle":
        return policy.n_middle_rpm
    if power_pu <= policy.knee_pu:
        return policy.n_min_rpm
    frac = (power_pu - policy.knee_pu) / (1.0 - policy.knee_pu)
    if frac > 1.0:
        frac = 1.0
    return policy.n_min_rpm + frac * (policy.n_max_rpm - policy.n_min_rpm)


@dataclass(frozen=True)
class GovernorConfig:
    kp: float = 2.5
    ki: float = 0.5
    rate_limit_pu_s: float = 0.1
    floor_pu: float = 0.0
    ceiling_pu: float = 1.0

    def __post_init__(self):
        if self.rate_limit_pu_s <= 0.0:
            raise ValueError("rate_limit_pu_s must be positive")
        if self.floor_pu >= self.ceiling_pu:
            raise ValueError("floor_pu must lie below ceiling_pu")


@dataclass(frozen=True)
class GovernorState:
    opening_pu: float
    integral_pu: float

    @classmethod
    def at_opening(cls, opening_pu: float) -> "GovernorState":
        # the integrator carries the standing bias, so zero error holds
        # the vanes exactly where steady-state initialization put them
        return cls(opening_pu=opening_pu, integral_pu=opening_pu)


def governor_step(speed_error_pu: float, state: GovernorState, dt_s: float,
                  config: GovernorConfig) -> tuple[GovernorState, float]:
    """PI vane positioning with slew and position limits.

    Positive error (rotor below setpoint) opens the vanes. Back-calculation
    anti-windup pins the integrator to the realized position whenever a
    limit truncates the command.
    """
    integral = state.integral_pu + config.ki * speed_error_pu * dt_s
    command = integral + config.kp * speed_error_pu
    slew = config.rate_limit_pu_s * dt_s
    lo = max(config.floor_pu, state.opening_pu - slew)
    hi = min(config.ceiling_pu, state.opening_pu + slew)
    opening = min(max(command, lo), hi)
    if opening != command:
        integral = opening - config.kp * speed_error_pu
    return GovernorState(opening, integral), opening
