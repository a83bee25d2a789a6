"""Vector plots of simulation results.

Stacked time panels, one per requested channel, written as SVG. Output
is deterministic: the same result produces byte-identical files, so
plots can sit under golden-file tests like any other artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .engine import SimulationResult  # noqa: E402

_LABELS = {
    "f_grid_hz": "grid frequency [Hz]",
    "p_unit_mw": "unit power [MW]",
    "n_rpm": "unit speed [min$^{-1}$]",
    "h1_m": "turbine head [m]",
    "q1_m3s": "turbine discharge [m$^3$/s]",
    "t1_pu": "turbine torque [pu]",
    "y1_pu": "guide vane opening [pu]",
}

DEFAULT_CHANNELS = ("f_grid_hz", "p_unit_mw", "n_rpm")


def _channel(result: SimulationResult, name: str):
    if name in SimulationResult._COLUMNS:
        return getattr(result, name)
    if name in result.extras:
        return result.extras[name]
    raise ValueError(f"unknown channel '{name}'")


def _deterministic_figure(n_panels: int):
    plt.rcParams["svg.hashsalt"] = "hydroinertia"
    fig, axes = plt.subplots(n_panels, 1, sharex=True,
                             figsize=(8.0, 2.2 * n_panels), squeeze=False)
    return fig, axes[:, 0]


def _save(fig, path: str):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plot(result: SimulationResult, channels=DEFAULT_CHANNELS,
              path: str = "result.svg") -> None:
    """One stacked panel per channel, time on the shared x axis."""
    if not channels:
        raise ValueError("no channels requested")
    series = [(name, _channel(result, name)) for name in channels]
    fig, axes = _deterministic_figure(len(series))
    for ax, (name, values) in zip(axes, series):
        ax.plot(result.t_s, values, linewidth=1.0)
        ax.set_ylabel(_LABELS.get(name, name))
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("time [s]")
    fig.suptitle(result.scenario.name)
    fig.align_ylabels(axes)
    _save(fig, path)


def emit_overlay(results, labels, channel: str, path: str) -> None:
    """All runs on one panel, for side-by-side comparisons of a sweep."""
    if not results:
        raise ValueError("no results to overlay")
    if len(results) != len(labels):
        raise ValueError("one label per result required")
    fig, axes = _deterministic_figure(1)
    ax = axes[0]
    for result, label in zip(results, labels):
        ax.plot(result.t_s, _channel(result, channel), linewidth=1.0,
                label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel(_LABELS.get(channel, channel))
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    _save(fig, path)
