"""Scenario files: a small TOML dialect with strict key checking.

A scenario file describes one run end to end: the unit and its ratings,
the controller and governor settings, the grid boundary (a frequency
profile or an islanded equivalent with load steps), metric windows, and
the waterway, referenced by path rather than inlined. Every physical
quantity carries its unit in the key name (`*_w`, `*_s`, `*_hz`, `*_pu`,
`*_rpm`).

Unknown keys and duplicate keys are rejected with line numbers; the
usual TOML habit of silently ignoring strangers does not help anyone
debugging a mistyped `si_gain_s`. `serialize_config` writes a file that
parses back to an identical Scenario (floats go through repr, which
round-trips exactly).
"""

from __future__ import annotations

import json
import os
import re

try:
    import tomllib as _toml
except ImportError:
    import tomli as _toml

from .control import ControllerConfig, GovernorConfig, SpeedPolicy
from .engine import (
    IslandConfig,
    LoadStep,
    MetricWindow,
    Scenario,
    SetpointChange,
)
from .errors import ConfigError
from .hydraulics import load_waterway, make_default_network
from .machines import FrequencyProfile, GridEquivalentGenerator

_REQUIRED_SECTIONS = ("scenario", "controller", "governor")

_SCHEMA = {
    "scenario": {"name", "grid", "unit_kind", "strategy", "dt_s",
                 "duration_s", "waterway"},
    "unit": {"rated_power_w", "rated_speed_rpm", "tau_m_s", "damping_pu",
             "sync_freq_hz", "converter_lag_s", "p_floor_pu",
             "p_ceiling_pu"},
    "controller": {"base_power_pu", "si_enabled", "si_gain_s", "si_filter_s",
                   "fcr_enabled", "droop_pu", "fcr_lag_s", "ffr_enabled",
                   "ffr_threshold_hz", "ffr_step_pu", "ffr_duration_s"},
    "governor": {"kp", "ki", "rate_limit_pu_s", "floor_pu", "ceiling_pu"},
    "speed_policy": {"mode", "n_min_rpm", "n_max_rpm", "n_middle_rpm",
                     "knee_pu"},
    "profile": {"rate_hz_s", "excursion_hz", "lead_s", "hold_s", "tail_s",
                "up_first", "base_freq_hz", "times_s", "freqs_hz"},
    "island": {"rated_power_w", "tau_m_s", "droop_pu", "governor_lag_s",
               "initial_loading_pu", "load_steps"},
    "island.load_steps": {"time_s", "size_w"},
    "setpoint_changes": {"time_s", "power_pu"},
    "windows": {"name", "kind", "start_s", "end_s"},
}

_HEADER_RE = re.compile(r"^\s*\[(\[?)\s*([A-Za-z0-9_.-]+)\s*\]?\]\s*$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")


def _scan_lines(text: str) -> tuple[dict, dict]:
    """Line numbers for keys and section headers, plus duplicate checks.

    Returns ({(section, key): line}, {section: line}). Sections are the
    dotted header names; each [[...]] header opens a fresh key scope so
    repeated keys across array elements are legal.
    """
    key_lines: dict[tuple[str, str], int] = {}
    header_lines: dict[str, int] = {}
    scope = ""
    instance = 0
    in_array = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if in_array > 0:
            in_array += line.count("[") - line.count("]")
            continue
        m = _HEADER_RE.match(raw)
        if m:
            scope = m.group(2)
            instance = instance + 1 if m.group(1) else 0
            header_lines.setdefault(scope, lineno)
            continue
        m = _KEY_RE.match(raw)
        if m:
            key = m.group(1)
            probe = (f"{scope}#{instance}", key)
            if probe in key_lines:
                raise ConfigError(
                    f"line {lineno}: duplicate key '{key}' in "
                    f"[{scope or 'top level'}] (first defined at line "
                    f"{key_lines[probe]})")
            key_lines[probe] = lineno
            key_lines.setdefault((scope, key), lineno)
            value = raw.split("=", 1)[1]
            in_array = value.count("[") - value.count("]")
    return key_lines, header_lines


def _key_location(key_lines: dict, section: str, key: str) -> str:
    line = key_lines.get((section, key))
    return f"line {line}: " if line else ""


def _check_keys(section: str, table: dict, key_lines: dict):
    allowed = _SCHEMA[section]
    for key in table:
        if key not in allowed:
            loc = _key_location(key_lines, section.split(".")[-1], key)
            raise ConfigError(f"{loc}unknown key '{key}' in [{section}]")


def _typed(table: dict, section: str, key: str, kinds, default=None,
           required: bool = False):
    if key not in table:
        if required:
            raise ConfigError(f"[{section}] is missing required key '{key}'")
        return default
    value = table[key]
    if kinds is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key '{key}' in [{section}] must be a number")
        return float(value)
    if not isinstance(value, kinds):
        raise ConfigError(
            f"key '{key}' in [{section}] must be of type "
            f"{getattr(kinds, '__name__', kinds)}")
    return value


def _float_list(table: dict, section: str, key: str):
    values = table[key]
    if not isinstance(values, list) or not values \
            or any(isinstance(v, bool) or not isinstance(v, (int, float))
                   for v in values):
        raise ConfigError(
            f"key '{key}' in [{section}] must be a non-empty number array")
    return tuple(float(v) for v in values)


def _build_profile(table: dict, key_lines: dict) -> FrequencyProfile:
    _check_keys("profile", table, key_lines)
    has_ramp = "rate_hz_s" in table or "excursion_hz" in table
    has_points = "times_s" in table or "freqs_hz" in table
    if has_ramp and has_points:
        raise ConfigError(
            "[profile] mixes ramp keys with explicit times_s/freqs_hz")
    base = _typed(table, "profile", "base_freq_hz", float, 50.0)
    if has_points:
        times = _float_list(table, "profile", "times_s")
        freqs = _float_list(table, "profile", "freqs_hz")
        return FrequencyProfile(times, freqs, base_freq_hz=base)
    if not has_ramp:
        raise ConfigError(
            "[profile] needs either rate_hz_s/excursion_hz or "
            "times_s/freqs_hz")
    return FrequencyProfile.symmetric_ramp(
        _typed(table, "profile", "rate_hz_s", float, required=True),
        _typed(table, "profile", "excursion_hz", float, required=True),
        lead_s=_typed(table, "profile", "lead_s", float, 1.0),
        hold_s=_typed(table, "profile", "hold_s", float, 2.0),
        tail_s=_typed(table, "profile", "tail_s", float, 6.0),
        base_freq_hz=base,
        up_first=_typed(table, "profile", "up_first", bool, True))


def _build_island(table: dict, key_lines: dict) -> IslandConfig:
    _check_keys("island", table, key_lines)
    equivalent = GridEquivalentGenerator(
        rated_power_w=_typed(table, "island", "rated_power_w", float, 4.4e9),
        tau_m_s=_typed(table, "island", "tau_m_s", float, 7.9),
        droop_pu=_typed(table, "island", "droop_pu", float, 0.10),
        governor_lag_s=_typed(table, "island", "governor_lag_s", float, 0.5))
    steps = []
    raw_steps = table.get("load_steps", [])
    if not isinstance(raw_steps, list):
        raise ConfigError("[[island.load_steps]] must be an array of tables")
    for entry in raw_steps:
        _check_keys("island.load_steps", entry, key_lines)
        steps.append(LoadStep(
            time_s=_typed(entry, "island.load_steps", "time_s", float,
                          required=True),
            delta_w=_typed(entry, "island.load_steps", "size_w", float,
                           required=True)))
    return IslandConfig(
        equivalent=equivalent,
        initial_loading_pu=_typed(table, "island", "initial_loading_pu",
                                  float, 0.8),
        load_steps=tuple(steps))


def parse_config(text: str, *, base_dir: str | None = None) -> Scenario:
    """Parse scenario file text into a validated Scenario.

    Relative waterway paths resolve against base_dir (the config file's
    directory when loaded through load_config, the working directory
    otherwise).
    """
    if not text.strip():
        raise ConfigError(
            "configuration is empty; required sections: "
            + ", ".join(f"[{s}]" for s in _REQUIRED_SECTIONS))
    key_lines, header_lines = _scan_lines(text)
    try:
        doc = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from exc

    for section in doc:
        if section not in _SCHEMA or section == "island.load_steps":
            line = header_lines.get(section)
            loc = f"line {line}: " if line else ""
            raise ConfigError(f"{loc}unknown section [{section}]")
    missing = [s for s in _REQUIRED_SECTIONS if s not in doc]
    if missing:
        raise ConfigError("missing required section"
                          + ("s " if len(missing) > 1 else " ")
                          + ", ".join(f"[{s}]" for s in missing))
    for section in ("scenario", "unit", "controller", "governor",
                    "speed_policy"):
        if section in doc:
            _check_keys(section, doc[section], key_lines)
    for entry in doc.get("setpoint_changes", []):
        _check_keys("setpoint_changes", entry, key_lines)
    for entry in doc.get("windows", []):
        _check_keys("windows", entry, key_lines)

    sc = doc["scenario"]
    unit = doc.get("unit", {})
    ctl = doc["controller"]
    gov = doc["governor"]
    pol = doc.get("speed_policy", {})

    waterway = _typed(sc, "scenario", "waterway", str)
    if waterway is None:
        network = make_default_network()
    else:
        path = waterway if os.path.isabs(waterway) \
            else os.path.join(base_dir or ".", waterway)
        network = load_waterway(path)

    profile = _build_profile(doc["profile"], key_lines) \
        if "profile" in doc else None
    island = _build_island(doc["island"], key_lines) \
        if "island" in doc else None

    controller = ControllerConfig(
        base_power_pu=_typed(ctl, "controller", "base_power_pu", float, 0.7),
        si_enabled=_typed(ctl, "controller", "si_enabled", bool, True),
        si_gain_s=_typed(ctl, "controller", "si_gain_s", float, 7.9),
        si_filter_s=_typed(ctl, "controller", "si_filter_s", float, 0.1),
        fcr_enabled=_typed(ctl, "controller", "fcr_enabled", bool, False),
        droop_pu=_typed(ctl, "controller", "droop_pu", float, 0.10),
        fcr_lag_s=_typed(ctl, "controller", "fcr_lag_s", float, 2.0),
        ffr_enabled=_typed(ctl, "controller", "ffr_enabled", bool, False),
        ffr_threshold_hz=_typed(ctl, "controller", "ffr_threshold_hz",
                                float, 49.5),
        ffr_step_pu=_typed(ctl, "controller", "ffr_step_pu", float, 0.1),
        ffr_duration_s=_typed(ctl, "controller", "ffr_duration_s", float,
                              5.0))
    governor = GovernorConfig(
        kp=_typed(gov, "governor", "kp", float, 2.5),
        ki=_typed(gov, "governor", "ki", float, 0.5),
        rate_limit_pu_s=_typed(gov, "governor", "rate_limit_pu_s", float,
                               0.1),
        floor_pu=_typed(gov, "governor", "floor_pu", float, 0.0),
        ceiling_pu=_typed(gov, "governor", "ceiling_pu", float, 1.0))
    policy = SpeedPolicy(
        mode=_typed(pol, "speed_policy", "mode", str, "optimal"),
        n_min_rpm=_typed(pol, "speed_policy", "n_min_rpm", float, 350.0),
        n_max_rpm=_typed(pol, "speed_policy", "n_max_rpm", float, 381.0),
        n_middle_rpm=_typed(pol, "speed_policy", "n_middle_rpm", float,
                            365.5),
        knee_pu=_typed(pol, "speed_policy", "knee_pu", float, 0.98))

    changes = tuple(
        SetpointChange(
            time_s=_typed(e, "setpoint_changes", "time_s", float,
                          required=True),
            power_pu=_typed(e, "setpoint_changes", "power_pu", float,
                            required=True))
        for e in doc.get("setpoint_changes", []))
    windows = tuple(
        MetricWindow(
            name=_typed(e, "windows", "name", str, required=True),
            kind=_typed(e, "windows", "kind", str, required=True),
            start_s=_typed(e, "windows", "start_s", float, required=True),
            end_s=_typed(e, "windows", "end_s", float, required=True))
        for e in doc.get("windows", []))

    try:
        return Scenario(
            name=_typed(sc, "scenario", "name", str, required=True),
            grid=_typed(sc, "scenario", "grid", str, required=True),
            unit_kind=_typed(sc, "scenario", "unit_kind", str, required=True),
            controller=controller,
            governor=governor,
            speed_policy=policy,
            network=network,
            profile=profile,
            island=island,
            setpoint_changes=changes,
            windows=windows,
            dt_s=_typed(sc, "scenario", "dt_s", float, 1e-3),
            duration_s=_typed(sc, "scenario", "duration_s", float, 10.0),
            rated_power_w=_typed(unit, "unit", "rated_power_w", float, 395e6),
            rated_speed_rpm=_typed(unit, "unit", "rated_speed_rpm", float,
                                   375.0),
            tau_m_s=_typed(unit, "unit", "tau_m_s", float, 7.9),
            damping_pu=_typed(unit, "unit", "damping_pu", float, 9.0),
            sync_freq_hz=_typed(unit, "unit", "sync_freq_hz", float, 1.0),
            converter_lag_s=_typed(unit, "unit", "converter_lag_s", float,
                                   0.05),
            p_floor_pu=_typed(unit, "unit", "p_floor_pu", float, 0.0),
            p_ceiling_pu=_typed(unit, "unit", "p_ceiling_pu", float, 1.064),
            strategy=_typed(sc, "scenario", "strategy", str,
                            "converter-power"),
            waterway_path=waterway)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read '{path}': {exc.strerror}") from exc
    return parse_config(text, base_dir=os.path.dirname(path))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(repr(v) for v in value) + "]"
    return json.dumps(value)


def serialize_config(scenario: Scenario) -> str:
    """Write a Scenario back out as scenario-file text.

    Parsing the result yields a Scenario equal to the input. Profiles
    are emitted as explicit breakpoint arrays regardless of how they
    were first written; the waterway stays a path reference, so a
    scenario built directly around an in-memory network (waterway_path
    None) serializes to the packaged default geometry.
    """
    s = scenario
    out = ["[scenario]"]

    def put(key, value):
        out.append(f"{key} = {_fmt(value)}")

    put("name", s.name)
    put("grid", s.grid)
    put("unit_kind", s.unit_kind)
    put("strategy", s.strategy)
    if s.waterway_path is not None:
        put("waterway", s.waterway_path)
    put("dt_s", s.dt_s)
    put("duration_s", s.duration_s)

    out.append("")
    out.append("[unit]")
    put("rated_power_w", s.rated_power_w)
    put("rated_speed_rpm", s.rated_speed_rpm)
    put("tau_m_s", s.tau_m_s)
    put("damping_pu", s.damping_pu)
    put("sync_freq_hz", s.sync_freq_hz)
    put("converter_lag_s", s.converter_lag_s)
    put("p_floor_pu", s.p_floor_pu)
    put("p_ceiling_pu", s.p_ceiling_pu)

    c = s.controller
    out.append("")
    out.append("[controller]")
    put("base_power_pu", c.base_power_pu)
    put("si_enabled", c.si_enabled)
    put("si_gain_s", c.si_gain_s)
    put("si_filter_s", c.si_filter_s)
    put("fcr_enabled", c.fcr_enabled)
    put("droop_pu", c.droop_pu)
    put("fcr_lag_s", c.fcr_lag_s)
    put("ffr_enabled", c.ffr_enabled)
    put("ffr_threshold_hz", c.ffr_threshold_hz)
    put("ffr_step_pu", c.ffr_step_pu)
    put("ffr_duration_s", c.ffr_duration_s)

    g = s.governor
    out.append("")
    out.append("[governor]")
    put("kp", g.kp)
    put("ki", g.ki)
    put("rate_limit_pu_s", g.rate_limit_pu_s)
    put("floor_pu", g.floor_pu)
    put("ceiling_pu", g.ceiling_pu)

    p = s.speed_policy
    out.append("")
    out.append("[speed_policy]")
    put("mode", p.mode)
    put("n_min_rpm", p.n_min_rpm)
    put("n_max_rpm", p.n_max_rpm)
    put("n_middle_rpm", p.n_middle_rpm)
    put("knee_pu", p.knee_pu)

    if s.profile is not None:
        out.append("")
        out.append("[profile]")
        put("base_freq_hz", s.profile.base_freq_hz)
        put("times_s", s.profile.times_s)
        put("freqs_hz", s.profile.freqs_hz)

    if s.island is not None:
        eq = s.island.equivalent
        out.append("")
        out.append("[island]")
        put("rated_power_w", eq.rated_power_w)
        put("tau_m_s", eq.tau_m_s)
        put("droop_pu", eq.droop_pu)
        put("governor_lag_s", eq.governor_lag_s)
        put("initial_loading_pu", s.island.initial_loading_pu)
        for step in s.island.load_steps:
            out.append("")
            out.append("[[island.load_steps]]")
            put("time_s", step.time_s)
            put("size_w", step.delta_w)

    for change in s.setpoint_changes:
        out.append("")
        out.append("[[setpoint_changes]]")
        put("time_s", change.time_s)
        put("power_pu", change.power_pu)

    for w in s.windows:
        out.append("")
        out.append("[[windows]]")
        put("name", w.name)
        put("kind", w.kind)
        put("start_s", w.start_s)
        put("end_s", w.end_s)

    return "\n".join(out) + "\n"
