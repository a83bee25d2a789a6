import numpy as np
import pytest

from hydroinertia.control import ControllerConfig, GovernorConfig, SpeedPolicy
from hydroinertia.engine import Scenario, run_scenario
from hydroinertia.hydraulics import make_default_network
from hydroinertia.machines import FrequencyProfile
from hydroinertia.plotting import emit_overlay, emit_plot


@pytest.fixture(scope="module")
def short_run():
    sc = Scenario(
        name="plot_probe", grid="infinite", unit_kind="variable_speed",
        controller=ControllerConfig(),
        governor=GovernorConfig(),
        speed_policy=SpeedPolicy(mode="optimal"),
        network=make_default_network(),
        profile=FrequencyProfile((0.0, 0.5), (50.0, 49.5)),
        duration_s=0.5)
    return run_scenario(sc)


class TestEmitPlot:

    def test_writes_wellformed_svg(self, short_run, tmp_path):
        path = tmp_path / "out.svg"
        emit_plot(short_run, path=str(path))
        blob = path.read_bytes()
        assert len(blob) > 1000
        assert blob.startswith(b"<?xml")
        assert b"</svg>" in blob

    def test_byte_identical_for_identical_results(self, short_run, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_plot(short_run, path=str(a))
        emit_plot(short_run, path=str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_extra_channel_panels(self, short_run, tmp_path):
        path = tmp_path / "five.svg"
        emit_plot(short_run,
                  channels=("f_grid_hz", "p_unit_mw", "n_rpm", "h1_m",
                            "y1_pu"),
                  path=str(path))
        assert path.stat().st_size > 1000

    def test_extras_channels_resolve(self, short_run, tmp_path):
        path = tmp_path / "extras.svg"
        emit_plot(short_run, channels=("si_pu",), path=str(path))
        assert path.exists()

    def test_unknown_channel_named(self, short_run, tmp_path):
        with pytest.raises(ValueError, match="unknown channel 'volts'"):
            emit_plot(short_run, channels=("volts",),
                      path=str(tmp_path / "x.svg"))

    def test_empty_channel_list_rejected(self, short_run, tmp_path):
        with pytest.raises(ValueError, match="no channels"):
            emit_plot(short_run, channels=(), path=str(tmp_path / "x.svg"))


class TestEmitOverlay:

    def test_overlay_two_runs(self, short_run, tmp_path):
        path = tmp_path / "overlay.svg"
        emit_overlay([short_run, short_run], ["a", "b"], "p_unit_mw",
                     str(path))
        assert path.read_bytes().startswith(b"<?xml")

    def test_label_count_must_match(self, short_run, tmp_path):
        with pytest.raises(ValueError, match="one label per result"):
            emit_overlay([short_run], ["a", "b"], "p_unit_mw",
                         str(tmp_path / "x.svg"))

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no results"):
            emit_overlay([], [], "p_unit_mw", str(tmp_path / "x.svg"))

    def test_overlay_deterministic(self, short_run, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        for path in (a, b):
            emit_overlay([short_run], ["only"], "n_rpm", str(path))
        assert a.read_bytes() == b.read_bytes()
