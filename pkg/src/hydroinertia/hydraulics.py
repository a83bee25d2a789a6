"""Lumped rigid-column model of a pumped-storage waterway.

Topology is fixed: upper reservoir, headrace tunnel, upper surge tank,
penstock with the turbine, lower surge tank, tailrace tunnel, lower
reservoir. Each pipe carries one discharge state governed by

    dQ/dt = g A / L * (H_upstream - H_downstream - f Q |Q|)

and each surge tank integrates its flow imbalance. The turbine closes the
penstock momentum balance through the head implied by its characteristic
at the instantaneous discharge, speed and guide-vane opening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from scipy.optimize import brentq

from .characteristic import (
    GRAVITY,
    RHO_WATER,
    PumpTurbineCharacteristic,
    load_characteristic,
    make_default_characteristic,
)
from .errors import (
    ConfigError,
    EnvelopeError,
    InfeasibleSetpointError,
    SimulationError,
)


@dataclass(frozen=True)
class Reservoir:
    level: float  # free surface elevation [m]


@dataclass(frozen=True)
class Pipe:
    length: float                # [m]
    area: float                  # [m^2]
    friction_coefficient: float  # head loss = f * Q|Q|  [s^2/m^5]

    def __post_init__(self):
        if self.length <= 0.0 or self.area <= 0.0:
            raise ValueError("pipe length and area must be positive")
        if self.friction_coefficient < 0.0:
            raise ValueError("friction_coefficient must be non-negative")


@dataclass(frozen=True)
class SurgeTank:
    section_area: float  # [m^2]

    def __post_init__(self):
        if self.section_area <= 0.0:
            raise ValueError("section_area must be positive")


@dataclass(frozen=True)
class HydraulicNetwork:
    upper_reservoir: Reservoir
    headrace: Pipe
    upper_surge_tank: SurgeTank
    penstock: Pipe
    characteristic: PumpTurbineCharacteristic
    lower_surge_tank: SurgeTank
    tailrace: Pipe
    lower_reservoir: Reservoir


@dataclass(frozen=True)
class HydraulicState:
    """Discharges [m^3/s] and surge-tank levels [m]."""

    q_headrace_m3s: float
    q_penstock_m3s: float
    q_tailrace_m3s: float
    z_upper_m: float
    z_lower_m: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.q_headrace_m3s, self.q_penstock_m3s, self.q_tailrace_m3s,
                self.z_upper_m, self.z_lower_m)


@dataclass(frozen=True)
class TurbineOutputs:
    head_m: float
    torque_nm: float
    discharge_m3s: float


def solve_turbine_head(char: PumpTurbineCharacteristic, discharge: float,
                       speed_rpm: float, opening: float,
                       guess: float | None = None) -> float:
    """Net head at which the characteristic passes the given discharge.

    Solves q11(n D / sqrt(H), y) * D^2 * sqrt(H) = Q for H. In sqrt-head
    the left side is piecewise linear (bilinear surface), so a secant
    iteration lands exactly once it stays inside one grid cell; a
    bisection fallback guards cell hopping.
    """
    if discharge <= 0.0:
        raise ValueError("discharge must be positive for the head solve")
    if opening <= 0.0:
        raise ValueError("opening must be positive for the head solve")
    nd = speed_rpm * char.diameter_m
    d2 = char.diameter_m * char.diameter_m
    u_lo = nd / char.n11_axis[-1] * (1.0 + 1e-12)
    u_hi = nd / char.n11_axis[0] * (1.0 - 1e-12)

    def err(u: float) -> float:
        q11, _ = char.sample(nd / u, opening)
        return q11 * d2 * u - discharge

    u0 = math.sqrt(guess) if guess and guess > 0.0 else 0.5 * (u_lo + u_hi)
    u0 = min(max(u0, u_lo), u_hi)
    u1 = min(u0 * (1.0 + 1e-7), u_hi) if u0 < 0.5 * (u_lo + u_hi) \
        else max(u0 * (1.0 - 1e-7), u_lo)
    f0, f1 = err(u0), err(u1)
    for _ in range(12):
        if f1 == f0:
            break
        u2 = u1 - f1 * (u1 - u0) / (f1 - f0)
        if not u_lo <= u2 <= u_hi:
            break
        if abs(u2 - u1) <= 1e-13 * u1:
            return u2 * u2
        u0, f0, u1, f1 = u1, f1, u2, err(u2)
    else:
        u2 = u1

    # fallback: bracketed bisection (err is increasing in u)
    f_lo, f_hi = err(u_lo), err(u_hi)
    if f_lo > 0.0:
        raise EnvelopeError(
            "discharge requires n11 above the tabulated range "
            f"(Q = {discharge:.4g} m^3/s at {speed_rpm:.4g} rpm, y = {opening:.4g})")
    if f_hi < 0.0:
        raise EnvelopeError(
            "discharge requires n11 below the tabulated range "
            f"(Q = {discharge:.4g} m^3/s at {speed_rpm:.4g} rpm, y = {opening:.4g})")
    a, b = u_lo, u_hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if err(mid) < 0.0:
            a = mid
        else:
            b = mid
        if b - a <= 1e-14 * b:
            break
    u = 0.5 * (a + b)
    return u * u


def hydraulic_derivatives(network: HydraulicNetwork, state: HydraulicState,
                          speed_rpm: float, opening: float,
                          head_guess: float | None = None,
                          ) -> tuple[tuple[float, float, float, float, float],
                                     TurbineOutputs]:
    """Time derivatives of the hydraulic state plus turbine outputs.

    Surge-tank level rates are the junction mass balances themselves, so
    conservation holds to round-off by construction (see mass_residuals).
    """
    qh, qp, qt, zu, zl = state.as_tuple()
    char = network.characteristic
    d = char.diameter_m

    if opening <= 0.0:
        if abs(qp) > 1e-9:
            raise SimulationError(
                f"guide vanes closed with {qp:.4g} m^3/s still flowing")
        head = zu - zl
        dqp = 0.0
        n11 = speed_rpm * d / math.sqrt(head)
        _, t11 = char.sample(n11, 0.0)
    else:
        if qp <= 0.0:
            raise EnvelopeError(
                "penstock flow reversed; only generating-quadrant data is tabulated")
        pen = network.penstock
        if head_guess is None:
            head_guess = zu - zl - pen.friction_coefficient * qp * qp
        head = solve_turbine_head(char, qp, speed_rpm, opening, guess=head_guess)
        n11 = speed_rpm * d / math.sqrt(head)
        _, t11 = char.sample(n11, opening)
        dqp = (GRAVITY * pen.area / pen.length
               * (zu - zl - pen.friction_coefficient * qp * abs(qp) - head))

    torque = t11 * RHO_WATER * GRAVITY * d**3 * head

    hr = network.headrace
    tr = network.tailrace
    dqh = (GRAVITY * hr.area / hr.length
           * (network.upper_reservoir.level - zu
              - hr.friction_coefficient * qh * abs(qh)))
    dqt = (GRAVITY * tr.area / tr.length
           * (zl - network.lower_reservoir.level
              - tr.friction_coefficient * qt * abs(qt)))
    dzu = (qh - qp) / network.upper_surge_tank.section_area
    dzl = (qp - qt) / network.lower_surge_tank.section_area

    rates = (dqh, dqp, dqt, dzu, dzl)
    return rates, TurbineOutputs(head_m=head, torque_nm=torque, discharge_m3s=qp)


def mass_residuals(network: HydraulicNetwork, state: HydraulicState,
                   rates: tuple[float, ...]) -> tuple[float, float]:
    """Junction balance residuals [m^3/s]; zero up to round-off."""
    upper = (state.q_headrace_m3s - state.q_penstock_m3s
             - network.upper_surge_tank.section_area * rates[3])
    lower = (state.q_penstock_m3s - state.q_tailrace_m3s
             - network.lower_surge_tank.section_area * rates[4])
    return upper, lower


def steady_state_init(network: HydraulicNetwork, target_power_w: float,
                      speed_rpm: float, *, upper_level: float | None = None,
                      lower_level: float | None = None,
                      allow_no_load: bool = False,
                      ) -> tuple[HydraulicState, float, TurbineOutputs]:
    """Steady state (flows, levels, opening) delivering the target power.

    Solves the series flow against the head implied by line losses, then
    the guide-vane opening against shaft power. Raises
    InfeasibleSetpointError when fully open vanes cannot reach the target.
    """
    zur = network.upper_reservoir.level if upper_level is None else upper_level
    zlr = network.lower_reservoir.level if lower_level is None else lower_level
    gross = zur - zlr
    if gross <= 0.0:
        raise ValueError("gross head must be positive")
    char = network.characteristic
    d = char.diameter_m
    omega = math.pi * speed_rpm / 30.0

    if target_power_w <= 0.0:
        if target_power_w == 0.0 and allow_no_load:
            n11 = speed_rpm * d / math.sqrt(gross)
            _, t11 = char.sample(n11, 0.0)
            torque = t11 * RHO_WATER * GRAVITY * d**3 * gross
            state = HydraulicState(0.0, 0.0, 0.0, zur, zlr)
            return state, 0.0, TurbineOutputs(gross, torque, 0.0)
        raise InfeasibleSetpointError(
            "target power must be positive (pass allow_no_load for a closed unit)")

    f_sum = (network.headrace.friction_coefficient
             + network.penstock.friction_coefficient
             + network.tailrace.friction_coefficient)
    # the flow bracket keeps n11 inside the tabulated envelope
    head_floor = (speed_rpm * d / char.n11_axis[-1]) ** 2
    if gross <= head_floor:
        raise EnvelopeError(
            f"gross head {gross:.4g} m below the characteristic envelope floor")
    q_cap = (math.sqrt((gross - head_floor * (1.0 + 1e-9)) / f_sum)
             if f_sum > 0.0 else 10.0 * d**2 * math.sqrt(gross))

    def flow_for(y: float) -> float:
        def err_q(q: float) -> float:
            head = gross - f_sum * q * q
            rh = math.sqrt(head)
            q11, _ = char.sample(speed_rpm * d / rh, y)
            return q11 * d * d * rh - q
        return brentq(err_q, 0.0, q_cap, xtol=1e-12, rtol=1e-15, maxiter=200)

    def power_of(y: float) -> float:
        q = flow_for(y)
        head = gross - f_sum * q * q
        rh = math.sqrt(head)
        q11, t11 = char.sample(speed_rpm * d / rh, y)
        return t11 * RHO_WATER * GRAVITY * d**3 * head * omega

    y_floor = 1e-4
    p_max = power_of(1.0)
    if target_power_w > p_max:
        raise InfeasibleSetpointError(
            f"target {target_power_w / 1e6:.1f} MW exceeds the "
            f"{p_max / 1e6:.1f} MW available at this head and speed")
    if target_power_w <= power_of(y_floor):
        raise InfeasibleSetpointError(
            f"target {target_power_w / 1e6:.3f} MW below the minimum stable opening")

    opening = brentq(lambda y: power_of(y) - target_power_w, y_floor, 1.0,
                     xtol=1e-13, rtol=1e-15, maxiter=200)
    q = flow_for(opening)
    head = gross - f_sum * q * q
    state = HydraulicState(
        q_headrace_m3s=q, q_penstock_m3s=q, q_tailrace_m3s=q,
        z_upper_m=zur - network.headrace.friction_coefficient * q * q,
        z_lower_m=zlr + network.tailrace.friction_coefficient * q * q)
    rh = math.sqrt(head)
    _, t11 = char.sample(speed_rpm * d / rh, opening)
    torque = t11 * RHO_WATER * GRAVITY * d**3 * head
    return state, opening, TurbineOutputs(head, torque, q)


# Frades 2 like default geometry: roughly 2 % line losses at rated flow.
_DEFAULT_GEOMETRY = {
    "upper_level": 431.8,
    "lower_level": 0.0,
    "headrace": (4300.0, 63.0, 3.5e-4),
    "upper_surge_tank": 300.0,
    "penstock": (1200.0, 28.0, 2.6e-4),
    "lower_surge_tank": 400.0,
    "tailrace": (1500.0, 63.0, 1.4e-4),
}


def make_default_network(char: PumpTurbineCharacteristic | None = None,
                         ) -> HydraulicNetwork:
    """Waterway with the default geometry and characteristic."""
    g = _DEFAULT_GEOMETRY
    return HydraulicNetwork(
        upper_reservoir=Reservoir(level=g["upper_level"]),
        headrace=Pipe(*g["headrace"]),
        upper_surge_tank=SurgeTank(section_area=g["upper_surge_tank"]),
        penstock=Pipe(*g["penstock"]),
        characteristic=char if char is not None else make_default_characteristic(),
        lower_surge_tank=SurgeTank(section_area=g["lower_surge_tank"]),
        tailrace=Pipe(*g["tailrace"]),
        lower_reservoir=Reservoir(level=g["lower_level"]),
    )


_ELEMENT_SEQUENCE = ("reservoir", "pipe", "surge_tank", "pipe", "turbine",
                     "surge_tank", "pipe", "reservoir")
_ELEMENT_FIELDS = {
    "reservoir": ("level",),
    "pipe": ("length", "area", "friction_coefficient"),
    "surge_tank": ("section_area",),
    "turbine": ("characteristic",),
}


def load_waterway(path: str | Path) -> HydraulicNetwork:
    """Parse a waterway geometry file.

    One element per line, in topological order from the upper to the lower
    reservoir, each with key=value fields named after the element types.
    The turbine line points at its characteristic grid file, resolved
    relative to the geometry file.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read waterway file: {exc}",
                          location=str(path)) from None

    elements: list[tuple[str, dict[str, str], int]] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        kind = parts[0]
        if kind not in _ELEMENT_FIELDS:
            raise ConfigError(f"unknown element '{kind}'",
                              location=f"{path}:{lineno}")
        fields: dict[str, str] = {}
        for item in parts[1:]:
            if "=" not in item:
                raise ConfigError(f"expected key=value, found '{item}'",
                                  location=f"{path}:{lineno}")
            key, value = item.split("=", 1)
            if key not in _ELEMENT_FIELDS[kind]:
                raise ConfigError(f"unknown field '{key}' for element '{kind}'",
                                  location=f"{path}:{lineno}")
            if key in fields:
                raise ConfigError(f"duplicate field '{key}'",
                                  location=f"{path}:{lineno}")
            fields[key] = value
        missing = [k for k in _ELEMENT_FIELDS[kind] if k not in fields]
        if missing:
            raise ConfigError(
                f"element '{kind}' is missing field '{missing[0]}'",
                location=f"{path}:{lineno}")
        elements.append((kind, fields, lineno))

    kinds = tuple(kind for kind, _, _ in elements)
    if kinds != _ELEMENT_SEQUENCE:
        for pos, expected in enumerate(_ELEMENT_SEQUENCE):
            found = kinds[pos] if pos < len(kinds) else "end of file"
            if found != expected:
                lineno = elements[pos][2] if pos < len(elements) else None
                where = f"{path}:{lineno}" if lineno else str(path)
                raise ConfigError(
                    f"expected element '{expected}' at position {pos + 1}, "
                    f"found '{found}'", location=where)
        raise ConfigError(
            f"expected {len(_ELEMENT_SEQUENCE)} elements, found {len(kinds)}",
            location=str(path))

    def number(kind: str, fields: dict[str, str], key: str, lineno: int) -> float:
        try:
            value = float(fields[key])
        except ValueError:
            raise ConfigError(f"field '{key}' of '{kind}' is not a number",
                              location=f"{path}:{lineno}") from None
        if not math.isfinite(value):
            raise ConfigError(f"field '{key}' of '{kind}' must be finite",
                              location=f"{path}:{lineno}")
        return value

    def build_pipe(entry):
        kind, fields, lineno = entry
        try:
            return Pipe(length=number(kind, fields, "length", lineno),
                        area=number(kind, fields, "area", lineno),
                        friction_coefficient=number(
                            kind, fields, "friction_coefficient", lineno))
        except ValueError as exc:
            raise ConfigError(str(exc), location=f"{path}:{lineno}") from None

    char_entry = elements[4]
    char_path = Path(char_entry[1]["characteristic"])
    if not char_path.is_absolute():
        char_path = path.parent / char_path
    characteristic = load_characteristic(char_path)

    try:
        upper_tank = SurgeTank(section_area=number(*elements[2][:2],
                                                   "section_area", elements[2][2]))
        lower_tank = SurgeTank(section_area=number(*elements[5][:2],
                                                   "section_area", elements[5][2]))
    except ValueError as exc:
        raise ConfigError(str(exc), location=str(path)) from None

    return HydraulicNetwork(
        upper_reservoir=Reservoir(level=number(*elements[0][:2], "level",
                                               elements[0][2])),
        headrace=build_pipe(elements[1]),
        upper_surge_tank=upper_tank,
        penstock=build_pipe(elements[3]),
        characteristic=characteristic,
        lower_surge_tank=lower_tank,
        tailrace=build_pipe(elements[6]),
        lower_reservoir=Reservoir(level=number(*elements[7][:2], "level",
                                               elements[7][2])),
    )
