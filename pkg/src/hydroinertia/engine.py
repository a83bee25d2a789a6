"""Coupled time-domain simulation of one unit against a grid.

A Scenario assembles the waterway, the unit rotor model, the converter
controller and governor, and the grid boundary (a frequency profile or an
islanded equivalent). Continuous states advance with a fixed-step
classical fourth-order method; controller and governor states update
discretely at step boundaries and are held constant inside a step. Runs
are deterministic: identical scenarios produce identical byte streams.

State vector layout: five hydraulic states, then the unit rotor (load
angle and speed for a synchronous unit; speed and converter power for a
variable-speed unit), then the island equivalent (speed and governor
output) when islanded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import (
    ControllerConfig,
    DerivativeFilterState,
    FastReserveState,
    GovernorConfig,
    GovernorState,
    compose_setpoint,
    fcr_branch_step,
    ffr_branch_step,
    governor_step,
    si_branch_step,
    speed_setpoint_select,
    SpeedPolicy,
)
from .errors import SimulationError
from .hydraulics import (
    HydraulicNetwork,
    HydraulicState,
    hydraulic_derivatives,
    steady_state_init,
)
from .machines import (
    FrequencyProfile,
    GridEquivalentGenerator,
    SynchronousMachineClassical,
    VariableSpeedUnit,
)

_GRID_KINDS = ("infinite", "islanded")
_UNIT_KINDS = ("synchronous", "variable_speed")
_WINDOW_KINDS = ("mean_power", "rocof", "oscillation")
_SPECTRAL_MIN_SPAN_S = 4.0


@dataclass(frozen=True)
class LoadStep:
    time_s: float
    delta_w: float


@dataclass(frozen=True)
class SetpointChange:
    time_s: float
    power_pu: float


@dataclass(frozen=True)
class IslandConfig:
    equivalent: GridEquivalentGenerator
    initial_loading_pu: float = 0.8
    load_steps: tuple[LoadStep, ...] = ()


@dataclass(frozen=True)
class MetricWindow:
    name: str
    kind: str
    start_s: float
    end_s: float


@dataclass(frozen=True)
class EngineEvent:
    time_s: float
    kind: str
    detail: str


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: str
    unit_kind: str
    controller: ControllerConfig
    governor: GovernorConfig
    speed_policy: SpeedPolicy
    network: HydraulicNetwork
    profile: FrequencyProfile | None = None
    island: IslandConfig | None = None
    setpoint_changes: tuple[SetpointChange, ...] = ()
    windows: tuple[MetricWindow, ...] = ()
    dt_s: float = 1e-3
    duration_s: float = 10.0
    rated_power_w: float = 395e6
    rated_speed_rpm: float = 375.0
    tau_m_s: float = 7.9
    damping_pu: float = 9.0
    sync_freq_hz: float = 1.0
    converter_lag_s: float = 0.05
    p_floor_pu: float = 0.0
    p_ceiling_pu: float = 1.064
    strategy: str = "converter-power"
    waterway_path: str | None = None

    def __post_init__(self):
        if self.grid not in _GRID_KINDS:
            raise ValueError(f"unknown grid kind '{self.grid}'")
        if self.unit_kind not in _UNIT_KINDS:
            raise ValueError(f"unknown unit kind '{self.unit_kind}'")
        if self.strategy == "vane-power":
            raise NotImplementedError(
                "vane-power strategy (vanes regulate power, converter "
                "regulates speed) is recognized but not implemented")
        if self.strategy != "converter-power":
            raise ValueError(f"unknown strategy '{self.strategy}'")
        if not 0.0 < self.dt_s <= 0.01:
            raise ValueError("dt_s must lie in (0, 0.01] s")
        if self.duration_s <= 0.0:
            raise ValueError("duration_s must be positive")
        steps = self.duration_s / self.dt_s
        if abs(steps - round(steps)) > 1e-6:
            raise ValueError("duration_s must be a whole number of steps")
        if self.grid == "infinite":
            if self.profile is None:
                raise ValueError("infinite-grid scenarios need a profile")
            if self.island is not None:
                raise ValueError("infinite-grid scenarios take no island block")
        else:
            if self.island is None:
                raise ValueError("islanded scenarios need an island block")
            if self.profile is not None:
                raise ValueError("islanded scenarios take no profile")
            self._check_times(tuple(s.time_s for s in self.island.load_steps),
                              "load step")
        self._check_times(tuple(s.time_s for s in self.setpoint_changes),
                          "setpoint change")
        names = set()
        for w in self.windows:
            if w.kind not in _WINDOW_KINDS:
                raise ValueError(f"unknown window kind '{w.kind}'")
            if not 0.0 <= w.start_s < w.end_s <= self.duration_s:
                raise ValueError(f"window '{w.name}' lies outside the run")
            if w.name in names:
                raise ValueError(f"duplicate window name '{w.name}'")
            names.add(w.name)
        if self.tau_m_s <= 0.0 or self.rated_power_w <= 0.0 \
                or self.rated_speed_rpm <= 0.0:
            raise ValueError("unit rating values must be positive")

    def _check_times(self, times: tuple[float, ...], label: str):
        for a, b in zip(times, times[1:]):
            if b < a:
                raise ValueError(f"{label} times must be ordered")
        for t in times:
            if not 0.0 < t <= self.duration_s:
                raise ValueError(f"{label} at t={t:g} s outside the run")


@dataclass
class SimulationResult:
    scenario: Scenario
    t_s: np.ndarray
    f_grid_hz: np.ndarray
    p_unit_mw: np.ndarray
    n_rpm: np.ndarray
    h1_m: np.ndarray
    q1_m3s: np.ndarray
    t1_pu: np.ndarray
    y1_pu: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)
    events: list[EngineEvent] = field(default_factory=list)

    _COLUMNS = ("t_s", "f_grid_hz", "p_unit_mw", "n_rpm", "h1_m", "q1_m3s",
                "t1_pu", "y1_pu")

    def to_csv(self) -> str:
        lines = [",".join(self._COLUMNS)]
        cols = [getattr(self, name) for name in self._COLUMNS]
        for row in zip(*cols):
            lines.append(",".join(f"{v:.9g}" for v in row))
        return "\n".join(lines) + "\n"

    def event_log(self) -> str:
        return "".join(f"t={e.time_s:.3f} {e.kind} {e.detail}\n"
                       for e in self.events)


@dataclass(frozen=True)
class WindowMetric:
    name: str
    kind: str
    available: bool
    value_mw: float | None = None
    value_hz_s: float | None = None
    value_hz: float | None = None
    amplitude_mw: float | None = None
    decay_ratio: float | None = None


@dataclass(frozen=True)
class Metrics:
    windows: tuple[WindowMetric, ...]
    speed_min_rpm: float
    speed_max_rpm: float

    def by_name(self, name: str) -> WindowMetric:
        for w in self.windows:
            if w.name == name:
                return w
        raise KeyError(name)


def integrate_step(rhs, state: tuple, t_s: float, dt_s: float, k1=None) -> tuple:
    """One classical fourth-order step of dy/dt = rhs(t, y).

    k1 may carry a precomputed rhs(t_s, state), so callers that already
    evaluated the boundary for output sampling pay three stages, not four.
    """
    if k1 is None:
        k1 = rhs(t_s, state)
        for v in k1:
            if not math.isfinite(v):
                raise SimulationError(f"non-finite derivative at t={t_s:.6g} s")
    half = 0.5 * dt_s
    k2 = rhs(t_s + half, tuple(a + half * b for a, b in zip(state, k1)))
    k3 = rhs(t_s + half, tuple(a + half * b for a, b in zip(state, k2)))
    k4 = rhs(t_s + dt_s, tuple(a + dt_s * b for a, b in zip(state, k3)))
    sixth = dt_s / 6.0
    out = tuple(a + sixth * (b + 2.0 * (c + d) + e)
                for a, b, c, d, e in zip(state, k1, k2, k3, k4))
    for v in out:
        if not math.isfinite(v):
            raise SimulationError(
                f"non-finite state after step at t={t_s:.6g} s")
    return out


class _Held:
    """Values held constant across one integration step (ZOH), plus the
    latest turbine solve for warm starts and output sampling."""

    __slots__ = ("opening", "p_cmd", "load_w", "head_guess", "head_m",
                 "torque_nm", "p_inj_w")

    def __init__(self):
        self.opening = 0.0
        self.p_cmd = 0.0
        self.load_w = 0.0
        self.head_guess = None
        self.head_m = 0.0
        self.torque_nm = 0.0
        self.p_inj_w = 0.0


def run_scenario(scenario: Scenario) -> SimulationResult:
    sc = scenario
    dt = sc.dt_s
    n_steps = round(sc.duration_s / dt)
    s_unit = sc.rated_power_w
    rated_rpm = sc.rated_speed_rpm
    torque_base = s_unit / (math.pi * rated_rpm / 30.0)
    is_sync = sc.unit_kind == "synchronous"
    is_island = sc.grid == "islanded"
    base_freq = sc.profile.base_freq_hz if sc.profile is not None else 50.0
    ctrl = sc.controller
    network = sc.network
    events: list[EngineEvent] = []
    held = _Held()

    # initial operating point
    p_o = ctrl.base_power_pu
    if is_sync:
        w0 = 1.0 if is_island else sc.profile.omega_pu(0.0)
        n0 = rated_rpm * w0
    else:
        n0 = speed_setpoint_select(p_o, sc.speed_policy)
        w0 = n0 / rated_rpm
    hyd0, opening0, turb0 = steady_state_init(network, p_o * s_unit, n0)
    held.opening = opening0
    held.head_guess = turb0.head_m

    if is_sync:
        machine = SynchronousMachineClassical.calibrated(
            p_o, tau_m_s=sc.tau_m_s, sync_freq_hz=sc.sync_freq_hz,
            damping_pu=sc.damping_pu, base_freq_hz=base_freq)
        y = hyd0.as_tuple() + (machine.equilibrium_angle(p_o), w0)
    else:
        machine = VariableSpeedUnit(
            tau_m_s=sc.tau_m_s, converter_lag_s=sc.converter_lag_s,
            p_floor_pu=sc.p_floor_pu, p_ceiling_pu=sc.p_ceiling_pu)
        held.p_cmd = p_o
        y = hyd0.as_tuple() + (w0, p_o)

    if is_island:
        eq = sc.island.equivalent
        p_ref = sc.island.initial_loading_pu
        held.load_w = p_ref * eq.rated_power_w + p_o * s_unit
        y = y + (1.0, p_ref)
    else:
        eq = None
        p_ref = 0.0
    profile_omega = None if is_island else sc.profile.omega_pu
    omega_idx = 6 if is_sync else 5

    def evaluate(t: float, yv: tuple) -> tuple:
        omega = yv[omega_idx]
        hstate = HydraulicState(yv[0], yv[1], yv[2], yv[3], yv[4])
        rates, turb = hydraulic_derivatives(
            network, hstate, omega * rated_rpm, held.opening,
            head_guess=held.head_guess)
        held.head_guess = turb.head_m
        held.head_m = turb.head_m
        held.torque_nm = turb.torque_nm
        t_mec = turb.torque_nm / torque_base
        w_grid = yv[7] if is_island else profile_omega(t)
        if is_sync:
            ddelta, domega = machine.derivatives(yv[5], omega, t_mec, w_grid)
            unit_rates = (ddelta, domega)
            p_inj_w = machine.electrical_power_pu(yv[5]) * s_unit
        else:
            domega, dp = machine.derivatives(omega, yv[6], t_mec, held.p_cmd)
            unit_rates = (domega, dp)
            p_inj_w = yv[6] * s_unit
        held.p_inj_w = p_inj_w
        if is_island:
            dw_g, dp_gov = eq.derivatives(yv[7], yv[8], p_inj_w, held.load_w,
                                          p_ref)
            return rates + unit_rates + (dw_g, dp_gov)
        return rates + unit_rates

    # controller state
    si_state = DerivativeFilterState.at_frequency(
        1.0 if is_island else sc.profile.omega_pu(0.0))
    fcr_out = 0.0
    ffr_state = FastReserveState.armed()
    gov_state = GovernorState.at_opening(opening0)
    n_set = None if is_sync else speed_setpoint_select(p_o, sc.speed_policy)
    clipped_prev = False
    ffr_active_prev = False

    # output storage
    total = n_steps + 1
    t_arr = np.arange(total) * dt
    chans = {name: np.empty(total) for name in
             ("f_grid_hz", "p_unit_mw", "n_rpm", "h1_m", "q1_m3s", "t1_pu",
              "y1_pu", "p_mech_mw", "p_setpoint_pu", "si_pu")}
    if is_island:
        chans["p_gov_pu"] = np.empty(total)
        chans["p_load_mw"] = np.empty(total)

    def record(i: int, yv: tuple, f_hz: float, u_si: float):
        omega = yv[omega_idx]
        chans["f_grid_hz"][i] = f_hz
        chans["p_unit_mw"][i] = held.p_inj_w / 1e6
        chans["n_rpm"][i] = omega * rated_rpm
        chans["h1_m"][i] = held.head_m
        chans["q1_m3s"][i] = yv[1]
        chans["t1_pu"][i] = held.torque_nm / torque_base
        chans["y1_pu"][i] = held.opening
        chans["p_mech_mw"][i] = held.torque_nm / torque_base * omega * s_unit / 1e6
        chans["p_setpoint_pu"][i] = held.p_cmd if not is_sync else p_o
        chans["si_pu"][i] = u_si
        if is_island:
            chans["p_gov_pu"][i] = yv[8]
            chans["p_load_mw"][i] = held.load_w / 1e6

    load_steps = sc.island.load_steps if is_island else ()
    setpoints = sc.setpoint_changes
    next_load = 0
    next_setp = 0

    f0_hz = base_freq if is_island else sc.profile.frequency_hz(0.0)
    k1 = evaluate(0.0, y)
    record(0, y, f0_hz, 0.0)

    u_si = 0.0
    for k in range(n_steps):
        t = k * dt
        t_next = t + dt
        y = integrate_step(evaluate, y, t, dt, k1=k1)

        # events falling inside the step just taken
        while next_load < len(load_steps) \
                and load_steps[next_load].time_s <= t_next + 1e-12:
            step = load_steps[next_load]
            held.load_w += step.delta_w
            events.append(EngineEvent(step.time_s, "load_step",
                                      f"{step.delta_w / 1e6:+g} MW"))
            next_load += 1
        while next_setp < len(setpoints) \
                and setpoints[next_setp].time_s <= t_next + 1e-12:
            change = setpoints[next_setp]
            p_o = change.power_pu
            events.append(EngineEvent(change.time_s, "setpoint_change",
                                      f"base power -> {p_o:g} pu"))
            if not is_sync:
                n_set = speed_setpoint_select(p_o, sc.speed_policy)
            next_setp += 1

        f_hz = y[7] * base_freq if is_island \
            else sc.profile.frequency_hz(t_next)

        if not is_sync:
            f_pu = f_hz / base_freq
            if ctrl.si_enabled:
                si_state, u_si = si_branch_step(
                    si_state, f_pu, dt, ctrl.si_gain_s, ctrl.si_filter_s)
            else:
                u_si = 0.0
            if ctrl.fcr_enabled:
                fcr_out = fcr_branch_step(fcr_out, f_pu, dt, ctrl.droop_pu,
                                          ctrl.fcr_lag_s)
            u_fcr = fcr_out if ctrl.fcr_enabled else 0.0
            if ctrl.ffr_enabled:
                ffr_state, u_ffr = ffr_branch_step(
                    ffr_state, f_hz, t_next,
                    threshold_hz=ctrl.ffr_threshold_hz,
                    step_pu=ctrl.ffr_step_pu,
                    duration_s=ctrl.ffr_duration_s)
                ffr_active = u_ffr != 0.0
                if ffr_active != ffr_active_prev:
                    events.append(EngineEvent(
                        t_next, "ffr", "on" if ffr_active else "off"))
                    ffr_active_prev = ffr_active
            else:
                u_ffr = 0.0
            p_cmd, clipped = compose_setpoint(
                p_o, u_si, u_fcr, u_ffr, floor_pu=sc.p_floor_pu,
                ceiling_pu=sc.p_ceiling_pu)
            if clipped != clipped_prev:
                detail = (f"setpoint clipped to {p_cmd:g} pu" if clipped
                          else "setpoint back inside limits")
                events.append(EngineEvent(t_next, "clip", detail))
                clipped_prev = clipped
            held.p_cmd = p_cmd
            err = (n_set - y[5] * rated_rpm) / rated_rpm
            gov_state, held.opening = governor_step(err, gov_state, dt,
                                                    sc.governor)

        k1 = evaluate(t_next, y)
        record(k + 1, y, f_hz, u_si)

    extras = {name: chans.pop(name) for name in list(chans)
              if name not in SimulationResult._COLUMNS}
    return SimulationResult(scenario=sc, t_s=t_arr, extras=extras,
                            events=events, **chans)


def _lsq_slope(t: np.ndarray, x: np.ndarray) -> float:
    tc = t - t.mean()
    return float(np.dot(tc, x - x.mean()) / np.dot(tc, tc))


def _spectral_peak(t: np.ndarray, p: np.ndarray) -> tuple[float, float]:
    """Dominant oscillation (frequency [Hz], amplitude) of a detrended
    signal using a Hann window and parabolic bin interpolation."""
    x = p - (p.mean() + _lsq_slope(t, p) * (t - t.mean()))
    n = len(x)
    window = np.hanning(n)
    spectrum = np.abs(np.fft.rfft(x * window))
    if len(spectrum) < 3:
        return 0.0, 0.0
    k = int(np.argmax(spectrum[1:])) + 1
    if 1 <= k < len(spectrum) - 1:
        a, b, c = spectrum[k - 1], spectrum[k], spectrum[k + 1]
        denom = a - 2.0 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0.0 else 0.0
    else:
        shift = 0.0
    dt = float(t[1] - t[0])
    freq = (k + shift) / (n * dt)
    # Hann coherent gain is 1/2
    amplitude = 2.0 * float(spectrum[k]) / (0.5 * n)
    return float(freq), amplitude


def extract_metrics(result: SimulationResult,
                    windows: tuple[MetricWindow, ...] | None = None) -> Metrics:
    """Window metrics over a finished run.

    Power means are deviations from the initial steady output. Spectral
    windows shorter than 4 s cannot resolve a 1 Hz mode cleanly and come
    back marked unavailable.
    """
    if windows is None:
        windows = result.scenario.windows
    t = result.t_s
    out = []
    p_base = float(result.p_unit_mw[0])
    for w in windows:
        sel = (t >= w.start_s - 1e-12) & (t <= w.end_s + 1e-12)
        if not np.any(sel):
            raise ValueError(f"window '{w.name}' selects no samples")
        if w.kind == "mean_power":
            value = float(result.p_unit_mw[sel].mean()) - p_base
            out.append(WindowMetric(w.name, w.kind, True, value_mw=value))
        elif w.kind == "rocof":
            slope = _lsq_slope(t[sel], result.f_grid_hz[sel])
            out.append(WindowMetric(w.name, w.kind, True, value_hz_s=slope))
        else:
            if w.end_s - w.start_s < _SPECTRAL_MIN_SPAN_S - 1e-9:
                out.append(WindowMetric(w.name, w.kind, False))
                continue
            freq, amp = _spectral_peak(t[sel], result.p_unit_mw[sel])
            seg = result.p_unit_mw[sel]
            ts = t[sel]
            detrended = seg - (seg.mean() + _lsq_slope(ts, seg) * (ts - ts.mean()))
            mid = len(detrended) // 2
            rms_a = float(np.sqrt(np.mean(detrended[:mid] ** 2)))
            rms_b = float(np.sqrt(np.mean(detrended[mid:] ** 2)))
            ratio = rms_b / rms_a if rms_a > 0.0 else 0.0
            out.append(WindowMetric(w.name, w.kind, True, value_hz=freq,
                                    amplitude_mw=amp, decay_ratio=ratio))
    return Metrics(windows=tuple(out),
                   speed_min_rpm=float(result.n_rpm.min()),
                   speed_max_rpm=float(result.n_rpm.max()))
