"""Four-quadrant pump-turbine characteristic, tabulated and interpolated.

The machine is described by two surfaces over (n11, y):

    n11 = n * D / sqrt(H)      unit speed [rpm m / sqrt(m)]
    q11 = Q / (D^2 sqrt(H))    unit discharge
    t11 = T / (rho g D^3 H)    unit torque

with n in rpm, Q in m^3/s, T in N m, D the runner reference diameter and
H the net head. Shaft efficiency follows from the identity
eta = (pi/30) * n11 * t11 / q11.

Real manufacturer hill-chart data can be dropped in through the plain
text grid format handled by load_characteristic / serialize_characteristic.
A synthetic surface for a Frades 2 like unit is generated by
make_default_characteristic: discharge droops linearly with speed (the
centrifugal effect of a radial runner) and efficiency falls parabolically
away from the design point, with the linear terms arranged so that shaft
power at fixed head and opening is stationary in speed at the rated point.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, EnvelopeError

RHO_WATER = 1000.0  # kg/m^3
GRAVITY = 9.81      # m/s^2


@dataclass(frozen=True)
class PumpTurbineCharacteristic:
    """Gridded unit-quantity surfaces q11(n11, y) and t11(n11, y).

    Matrices are row-major over the n11 axis: q11[i][j] belongs to
    n11_axis[i], y_axis[j].
    """

    diameter_m: float
    n11_axis: tuple[float, ...]
    y_axis: tuple[float, ...]
    q11: tuple[tuple[float, ...], ...]
    t11: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if self.diameter_m <= 0.0:
            raise ValueError("diameter_m must be positive")
        for name, axis in (("n11_axis", self.n11_axis), ("y_axis", self.y_axis)):
            if len(axis) < 2:
                raise ValueError(f"{name} needs at least two points")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        for name, mat in (("q11", self.q11), ("t11", self.t11)):
            if len(mat) != len(self.n11_axis):
                raise ValueError(f"{name} must have one row per n11 value")
            if any(len(row) != len(self.y_axis) for row in mat):
                raise ValueError(f"{name} rows must match the y axis length")

    def sample(self, n11: float, y: float) -> tuple[float, float]:
        """Bilinear (q11, t11) at the requested unit speed and opening."""
        na, ya = self.n11_axis, self.y_axis
        if not na[0] <= n11 <= na[-1]:
            raise EnvelopeError(
                f"n11 = {n11:.6g} outside tabulated range [{na[0]:.6g}, {na[-1]:.6g}]")
        if not ya[0] <= y <= ya[-1]:
            raise EnvelopeError(
                f"opening y = {y:.6g} outside tabulated range [{ya[0]:.6g}, {ya[-1]:.6g}]")
        i = min(bisect_right(na, n11), len(na) - 1) - 1
        j = min(bisect_right(ya, y), len(ya) - 1) - 1
        fn = (n11 - na[i]) / (na[i + 1] - na[i])
        fy = (y - ya[j]) / (ya[j + 1] - ya[j])
        w00 = (1.0 - fn) * (1.0 - fy)
        w10 = fn * (1.0 - fy)
        w01 = (1.0 - fn) * fy
        w11 = fn * fy
        q0, q1 = self.q11[i], self.q11[i + 1]
        t0, t1 = self.t11[i], self.t11[i + 1]
        q = w00 * q0[j] + w10 * q1[j] + w01 * q0[j + 1] + w11 * q1[j + 1]
        t = w00 * t0[j] + w10 * t1[j] + w01 * t0[j + 1] + w11 * t1[j + 1]
        return q, t


def turbine_operating_point(speed_rpm: float, opening: float, net_head_m: float,
                            char: PumpTurbineCharacteristic) -> tuple[float, float]:
    """Discharge [m^3/s] and shaft torque [N m] at the given conditions."""
    if net_head_m <= 0.0:
        raise ValueError("net_head_m must be positive")
    root_h = math.sqrt(net_head_m)
    d = char.diameter_m
    n11 = speed_rpm * d / root_h
    q11, t11 = char.sample(n11, opening)
    discharge = q11 * d * d * root_h
    torque = t11 * RHO_WATER * GRAVITY * d**3 * net_head_m
    return discharge, torque


# Frades 2 like reference data used by the synthetic surface builder.
DEFAULT_RATED_POWER_W = 395e6
DEFAULT_RATED_SPEED_RPM = 375.0
DEFAULT_RATED_HEAD_M = 420.0
DEFAULT_DIAMETER_M = 4.5
DEFAULT_BEST_EFFICIENCY = 0.90

_FLOW_SPEED_DROOP = 0.4     # relative discharge change per unit of speed ratio
_ETA_SPEED_CURVATURE = 1.5  # efficiency falloff with speed ratio squared
_ETA_GATE_CURVATURE = 0.3   # efficiency falloff with (1 - y)^2
_WINDAGE_FRACTION = 0.005   # no-load drag torque as a fraction of rated


def make_default_characteristic(n11_points: int = 17,
                                y_points: int = 11) -> PumpTurbineCharacteristic:
    """Synthetic hill chart calibrated to the default rated point.

    At (375 rpm, y = 1, H = 420 m) the tabulated surfaces return exactly
    the rated 395 MW shaft power and the discharge implied by a net
    efficiency of 0.9.
    """
    d = DEFAULT_DIAMETER_M
    root_h = math.sqrt(DEFAULT_RATED_HEAD_M)
    omega_ref = math.pi * DEFAULT_RATED_SPEED_RPM / 30.0
    q_ref = DEFAULT_RATED_POWER_W / (
        RHO_WATER * GRAVITY * DEFAULT_RATED_HEAD_M * DEFAULT_BEST_EFFICIENCY)
    torque_ref = DEFAULT_RATED_POWER_W / omega_ref

    n11_ref = DEFAULT_RATED_SPEED_RPM * d / root_h
    q11_ref = q_ref / (d * d * root_h)
    t11_ref = torque_ref / (RHO_WATER * GRAVITY * d**3 * DEFAULT_RATED_HEAD_M)
    t11_windage = _WINDAGE_FRACTION * t11_ref
    # hydraulic torque before windage must hand back exactly t11_ref at rated
    eta_scale = (t11_ref + t11_windage) * (math.pi / 30.0) * n11_ref / q11_ref

    def q11_of(nu: float, y: float) -> float:
        return y * q11_ref * (1.0 + _FLOW_SPEED_DROOP * (1.0 - nu))

    def t11_of(nu: float, y: float) -> float:
        eta_h = (eta_scale
                 * (1.0 + _FLOW_SPEED_DROOP * (nu - 1.0))
                 * (1.0 - _ETA_SPEED_CURVATURE * (nu - 1.0) ** 2)
                 * (1.0 - _ETA_GATE_CURVATURE * (1.0 - y) ** 2))
        hydraulic = (30.0 / math.pi) * eta_h * q11_of(nu, y) / (nu * n11_ref)
        return hydraulic - t11_windage * nu * nu

    nu_lo, nu_hi = 0.80, 1.20
    n11_axis = tuple(n11_ref * (nu_lo + (nu_hi - nu_lo) * i / (n11_points - 1))
                     for i in range(n11_points))
    y_axis = tuple(j / (y_points - 1) for j in range(y_points))
    q11 = tuple(tuple(q11_of(n11 / n11_ref, y) for y in y_axis)
                for n11 in n11_axis)
    t11 = tuple(tuple(t11_of(n11 / n11_ref, y) for y in y_axis)
                for n11 in n11_axis)
    return PumpTurbineCharacteristic(diameter_m=d, n11_axis=n11_axis,
                                     y_axis=y_axis, q11=q11, t11=t11)


def serialize_characteristic(char: PumpTurbineCharacteristic) -> str:
    """Plain-text grid rendering, exact float round trip via repr."""
    lines = [
        "# pump-turbine characteristic grid",
        "# q11 and t11 are row-major over the n11 axis",
        f"diameter_m {char.diameter_m!r}",
        f"n11_count {len(char.n11_axis)}",
        f"y_count {len(char.y_axis)}",
        " ".join(repr(v) for v in char.n11_axis),
        " ".join(repr(v) for v in char.y_axis),
    ]
    for row in char.q11:
        lines.append(" ".join(repr(v) for v in row))
    for row in char.t11:
        lines.append(" ".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"


def load_characteristic(path: str | Path) -> PumpTurbineCharacteristic:
    """Parse the plain-text grid format written by serialize_characteristic."""
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read characteristic file: {exc}",
                          location=str(path)) from None

    header: dict[str, str] = {}
    tokens: list[str] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(header) < 3:
            if len(parts) != 2:
                raise ConfigError("expected 'name value' header line",
                                  location=f"{path}:{lineno}")
            key = parts[0]
            expected = ("diameter_m", "n11_count", "y_count")[len(header)]
            if key != expected:
                raise ConfigError(f"expected header '{expected}', found '{key}'",
                                  location=f"{path}:{lineno}")
            header[key] = parts[1]
        else:
            tokens.extend(parts)

    if len(header) < 3:
        raise ConfigError("missing header lines (diameter_m, n11_count, y_count)",
                          location=str(path))
    try:
        diameter = float(header["diameter_m"])
        n_count = int(header["n11_count"])
        y_count = int(header["y_count"])
    except ValueError as exc:
        raise ConfigError(f"bad header value: {exc}", location=str(path)) from None

    need = n_count + y_count + 2 * n_count * y_count
    if len(tokens) != need:
        raise ConfigError(
            f"expected {need} numbers after the header, found {len(tokens)}",
            location=str(path))
    try:
        values = [float(t) for t in tokens]
    except ValueError as exc:
        raise ConfigError(f"bad number in grid data: {exc}",
                          location=str(path)) from None
    if any(not math.isfinite(v) for v in values):
        raise ConfigError("grid data must be finite", location=str(path))

    pos = 0

    def take(count: int) -> list[float]:
        nonlocal pos
        chunk = values[pos:pos + count]
        pos += count
        return chunk

    n11_axis = tuple(take(n_count))
    y_axis = tuple(take(y_count))
    q11 = tuple(tuple(take(y_count)) for _ in range(n_count))
    t11 = tuple(tuple(take(y_count)) for _ in range(n_count))
    try:
        return PumpTurbineCharacteristic(diameter_m=diameter, n11_axis=n11_axis,
                                         y_axis=y_axis, q11=q11, t11=t11)
    except ValueError as exc:
        raise ConfigError(str(exc), location=str(path)) from None
