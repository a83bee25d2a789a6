"""Closed-form inertia arithmetic, checked against independent oracles.

Expected values are computed in-test from first principles (kinetic energy
of a rotating mass, power-weighted means) rather than by calling the code
under test with different arguments.
"""

import math

import pytest
from hypothesis import given, strategies as st

from hydroinertia import analytics
from hydroinertia.analytics import (
    FleetEntry,
    FrequencyExcursion,
    UnitRating,
    inertial_power_instant,
    kinetic_energy_delta,
    mean_power_contribution,
    mechanical_time_constant,
    reference_table_rows,
    rocof_from_imbalance,
    system_time_constant,
)

TWO_PI = 2.0 * math.pi


def oracle_mean_power_pu(tau_m, omega1, omega2, dt):
    # kinetic energy change of J = tau_m * P / omega1^2, divided by dt and P
    return 0.5 * (tau_m / dt) * (1.0 - (omega2 / omega1) ** 2)


class TestMechanicalTimeConstant:
    def test_frades2_unit(self):
        # 395 MW unit at 375 rpm with tau_m = 7.9 s implies this inertia
        omega = TWO_PI * 375.0 / 60.0
        inertia = 7.9 * 395e6 / omega**2
        rating = UnitRating(rated_power_w=395e6, rated_speed_rad_s=omega,
                            inertia_kg_m2=inertia)
        assert mechanical_time_constant(rating) == pytest.approx(7.9, rel=1e-12)

    def test_spec_order_of_magnitude(self):
        # directly from J * omega^2 / P with round numbers
        rating = UnitRating(rated_power_w=100e6, rated_speed_rad_s=100.0,
                            inertia_kg_m2=1e5)
        assert mechanical_time_constant(rating) == pytest.approx(10.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            UnitRating(rated_power_w=-1.0, rated_speed_rad_s=10.0, inertia_kg_m2=1.0)
        with pytest.raises(ValueError):
            UnitRating(rated_power_w=1.0, rated_speed_rad_s=0.0, inertia_kg_m2=1.0)


class TestSystemTimeConstant:
    def test_weighted_mean(self):
        fleet = [FleetEntry(tau_m_s=10.0, rated_power_w=100.0),
                 FleetEntry(tau_m_s=5.0, rated_power_w=300.0)]
        # (10*100 + 5*300) / 400 = 6.25
        assert system_time_constant(fleet) == pytest.approx(6.25, rel=1e-15)

    def test_single_unit_is_identity(self):
        fleet = [FleetEntry(tau_m_s=7.9, rated_power_w=395e6)]
        assert system_time_constant(fleet) == 7.9

    def test_empty_fleet_rejected(self):
        with pytest.raises(ValueError):
            system_time_constant([])

    @given(st.lists(st.tuples(st.floats(0.5, 20), st.floats(1e6, 5e9)),
                    min_size=1, max_size=8))
    def test_bounded_by_extremes(self, pairs):
        fleet = [FleetEntry(tau_m_s=t, rated_power_w=p) for t, p in pairs]
        taus = [t for t, _ in pairs]
        value = system_time_constant(fleet)
        assert min(taus) - 1e-12 <= value <= max(taus) + 1e-12


class TestRocofFromImbalance:
    def test_balanced_system_one_hz_per_s(self):
        # 15.8 % imbalance on a 7.9 s system at 50 Hz
        assert rocof_from_imbalance(0.158, 7.9, 50.0) == pytest.approx(1.0, rel=1e-12)

    def test_twenty_percent_step(self):
        assert rocof_from_imbalance(0.2, 7.9, 50.0) == pytest.approx(0.2 / 7.9 * 50.0,
                                                                     rel=1e-15)
        assert rocof_from_imbalance(0.2, 7.9, 50.0) == pytest.approx(1.2658, abs=5e-5)

    def test_sign_follows_imbalance(self):
        assert rocof_from_imbalance(-0.1, 7.9, 50.0) < 0.0


class TestInertialPowerInstant:
    def test_reference_magnitude(self):
        # 1 Hz/s on a 50 Hz base is 0.02 pu/s of speed
        assert inertial_power_instant(7.9, 0.02) == pytest.approx(-0.158, rel=1e-12)

    def test_sign_convention(self):
        # falling speed releases stored energy, so power contribution is positive
        assert inertial_power_instant(7.9, -0.02) > 0.0

    @given(st.floats(1.0, 20.0), st.floats(-0.1, 0.1))
    def test_linear_in_both_arguments(self, tau, rate):
        base = inertial_power_instant(tau, rate)
        assert inertial_power_instant(2.0 * tau, rate) == pytest.approx(2.0 * base,
                                                                        rel=1e-12)
        assert inertial_power_instant(tau, 3.0 * rate) == pytest.approx(3.0 * base,
                                                                        rel=1e-12)


class TestKineticEnergyDelta:
    def test_absorbing_excursion_is_negative(self):
        # one-second rise of 1 Hz electrical from 314.5 rad/s, J from the
        # 395 MW / 7.9 s unit; oracle is plain 0.5*J*(w1^2 - w2^2)
        inertia = 2.0225e6
        w1 = 314.5
        w2 = 314.5 + TWO_PI
        expected = 0.5 * inertia * (w1**2 - w2**2)
        exc = FrequencyExcursion(omega_start_rad_s=w1, omega_end_rad_s=w2,
                                 duration_s=1.0)
        value = kinetic_energy_delta(inertia, exc)
        assert value == pytest.approx(expected, rel=1e-15)
        assert value < 0.0

    def test_antisymmetric_under_reversal(self):
        exc = FrequencyExcursion(300.0, 310.0, 2.0)
        rev = FrequencyExcursion(310.0, 300.0, 2.0)
        assert kinetic_energy_delta(1e6, exc) == -kinetic_energy_delta(1e6, rev)

    @given(st.floats(1e4, 1e7), st.floats(250.0, 350.0), st.floats(-20.0, 20.0),
           st.floats(0.1, 10.0))
    def test_identity_with_mean_power(self, inertia, w1, dw, dt):
        # delta E / (dt * P) must equal the per-unit mean power when the
        # rating speed is the excursion start speed
        w2 = w1 + dw
        p_rated = 400e6
        exc = FrequencyExcursion(w1, w2, dt)
        rating = UnitRating(rated_power_w=p_rated, rated_speed_rad_s=w1,
                            inertia_kg_m2=inertia)
        lhs = kinetic_energy_delta(inertia, exc) / dt / p_rated
        rhs = mean_power_contribution(mechanical_time_constant(rating), exc)
        # the two forms differ by cancellation roundoff of order
        # eps * w1 / dw, which reaches ~3e-12 for the smallest excursions
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-15)


class TestMeanPowerContribution:
    def test_published_single_unit_row(self):
        # tau 7.9 s, +1 Hz over 1 s from 314.5 rad/s
        exc = FrequencyExcursion(314.5, 314.5 + TWO_PI, 1.0)
        value = mean_power_contribution(7.9, exc)
        assert value == pytest.approx(oracle_mean_power_pu(7.9, 314.5, 314.5 + TWO_PI, 1.0),
                                      rel=1e-15)
        # rounds to the published 16 % / 63 MW on a 395 MW unit
        assert round(abs(value) * 100.0) == 16
        assert round(abs(value) * 395.0) == 63

    def test_small_deviation_expansion(self):
        # +0.5 Hz over 1 s from 50 Hz electrical: close to tau * rate
        w1 = TWO_PI * 50.0
        exc = FrequencyExcursion(w1, w1 + TWO_PI * 0.5, 1.0)
        value = mean_power_contribution(7.9, exc)
        assert value == pytest.approx(-7.9 * 0.01, rel=2e-2)

    @given(st.floats(1.0, 20.0), st.floats(250.0, 350.0), st.floats(-30.0, 30.0),
           st.floats(0.2, 5.0))
    def test_linear_in_time_constant(self, tau, w1, dw, dt):
        exc = FrequencyExcursion(w1, w1 + dw, dt)
        one = mean_power_contribution(tau, exc)
        two = mean_power_contribution(2.0 * tau, exc)
        assert two == pytest.approx(2.0 * one, rel=1e-12, abs=1e-18)

    @given(st.floats(2.0, 16.0), st.floats(280.0, 340.0),
           st.floats(-0.04, 0.04).filter(lambda r: abs(r) > 1e-6),
           st.floats(0.25, 4.0))
    def test_agrees_with_instant_form_for_small_excursions(self, tau, w1, ratio, dt):
        # relative gap to the small-deviation form is |dw| / (2 w1), at most 2 %
        dw = ratio * w1
        exc = FrequencyExcursion(w1, w1 + dw, dt)
        mean = mean_power_contribution(tau, exc)
        inst = inertial_power_instant(tau, (dw / dt) / w1)
        assert mean == pytest.approx(inst, rel=0.0201)


class TestReferenceTable:
    def test_published_integer_values(self):
        rows = reference_table_rows()
        assert [r.label for r in rows] == [
            "Frades2 U1", "Frades2 U1", "Frades2 U1", "Frades2 U1",
            "Frades2 HSC U1+U2",
        ]
        assert [round(r.dp_mw) for r in rows] == [31, 63, 127, 63, 254]
        assert [round(r.dp_over_pn_pct) for r in rows] == [8, 16, 32, 16, 32]

    def test_row_inputs(self):
        rows = reference_table_rows()
        assert [r.rocof_hz_per_s for r in rows] == [0.5, 1.0, 2.0, 2.0, 2.0]
        assert [r.tau_m_s for r in rows] == [7.9, 7.9, 7.9, 3.95, 7.9]
        assert [r.sum_pn_mw for r in rows] == [395.0] * 4 + [790.0]

    def test_full_precision_kept_behind_rounding(self):
        rows = reference_table_rows()
        # second row at full precision, from the oracle
        w1 = analytics.REFERENCE_OMEGA_START_RAD_S
        expected = abs(oracle_mean_power_pu(7.9, w1, w1 + TWO_PI, 1.0)) * 395.0
        assert rows[1].dp_mw == pytest.approx(expected, rel=1e-15)

    def test_paired_units_sum_contributions(self):
        rows = reference_table_rows()
        # the two-unit row is exactly twice the matching single-unit row
        assert rows[4].dp_mw == pytest.approx(2.0 * rows[2].dp_mw, rel=1e-15)

    def test_csv_emission(self):
        text = analytics.reference_table_csv(reference_table_rows())
        lines = text.strip().splitlines()
        assert lines[0] == "label,sum_pn_mw,rocof_hz_per_s,tau_m_s,dp_over_pn_pct,dp_mw"
        assert len(lines) == 6
        first = lines[1].split(",")
        assert first[0] == "Frades2 U1"
        assert int(first[5]) == 31

    def test_text_report_alignment(self):
        text = analytics.format_reference_table(reference_table_rows())
        lines = text.splitlines()
        assert len(lines) >= 6
        assert "MW" in lines[0]
