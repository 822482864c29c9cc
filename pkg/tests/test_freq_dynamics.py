import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridfreq.freq_dynamics import (AggregateParams, FrequencyModelError,
                                    aggregate_params, check_limits,
                                    fleet_damping, frequency_metrics,
                                    second_order_char,
                                    simulate_step_response)
from gridfreq.system import ConverterFleet, FrequencyLimits

from conftest import make_unit


def single_nuclear_agg():
    unit = make_unit(uid="n", p_max=400.0, inertia_h=4.5, gain_k=0.98,
                     turbine_fraction=0.25, droop=0.04)
    fleet = ConverterFleet(vsm_capacity=0.0, droop_capacity=0.0)
    return aggregate_params([unit], [True], fleet, t_turbine=7.0)


class TestAggregation:
    def test_single_unit_constants(self):
        agg = single_nuclear_agg()
        assert agg.m == pytest.approx(8.82, rel=1e-12)
        assert agg.r_g == pytest.approx(24.5, rel=1e-12)
        assert agg.f_g == pytest.approx(6.125, rel=1e-12)
        assert agg.m_v == 0.0
        assert agg.d == pytest.approx(0.6, rel=1e-12)

    def test_mixed_fleet_base_includes_converters(self):
        units = [make_unit(uid="a", p_max=300.0),
                 make_unit(uid="b", bus="n2", p_max=100.0)]
        fleet = ConverterFleet(vsm_capacity=80.0, droop_capacity=20.0)
        agg = aggregate_params(units, [True, True], fleet, 7.0)
        assert agg.s_base == 500.0
        assert agg.m_v == pytest.approx(2 * 6.0 * 1.0 * 80.0 / 500.0)

    def test_offline_unit_excluded_from_gains_not_base(self):
        units = [make_unit(uid="a", p_max=300.0),
                 make_unit(uid="b", p_max=100.0)]
        fleet = ConverterFleet(vsm_capacity=0.0, droop_capacity=0.0)
        both = aggregate_params(units, [True, True], fleet, 7.0)
        one = aggregate_params(units, [True, False], fleet, 7.0)
        assert one.s_base == both.s_base
        k_b = 100.0 * 1.1 / 400.0
        assert both.m - one.m == pytest.approx(2 * 7.0 * k_b)

    def test_d_override(self):
        units = [make_unit(uid="a", p_max=300.0),
                 make_unit(uid="b", p_max=100.0)]
        fleet = ConverterFleet(vsm_capacity=0.0, droop_capacity=0.0)
        agg = aggregate_params(units, [True, False], fleet, 7.0,
                               d_override=1.5)
        assert agg.d == 1.5
        # default damping follows the online set
        agg2 = aggregate_params(units, [True, False], fleet, 7.0)
        assert agg2.d == pytest.approx(0.6 * 300.0 / 400.0)

    def test_fleet_damping_counts_everything(self):
        units = [make_unit(uid="a", p_max=300.0)]
        fleet = ConverterFleet(vsm_capacity=100.0, droop_capacity=50.0)
        d = fleet_damping(units, fleet, 450.0)
        expected = (0.6 * 300 + 0.6 * 100 + (1.0 / 0.05) * 50) / 450.0
        assert d == pytest.approx(expected, rel=1e-12)

    def test_mask_length_mismatch(self):
        with pytest.raises(FrequencyModelError):
            aggregate_params([make_unit()], [True, False],
                             ConverterFleet(0.0, 0.0), 7.0)


class TestSecondOrder:
    def test_frozen_characteristics(self):
        char = second_order_char(single_nuclear_agg())
        assert char.omega_n == pytest.approx(0.6376076927146315, rel=1e-12)
        assert char.zeta == pytest.approx(0.7099418721968989, rel=1e-12)
        assert char.t_nadir == pytest.approx(2.1531648853798036, rel=1e-12)
        assert not char.overdamped

    def test_nadir_time_is_trajectory_minimum(self):
        agg = single_nuclear_agg()
        char = second_order_char(agg)
        ts, df = simulate_step_response(agg, 0.05, horizon_s=30.0)
        assert abs(ts[np.argmin(df)] - char.t_nadir) < 2e-3

    def test_nonpositive_inertia_rejected(self):
        agg = AggregateParams(m=0.0, m_v=0.0, d=0.6, r_g=20.0, f_g=5.0,
                              t_turbine=7.0, s_base=100.0)
        with pytest.raises(FrequencyModelError):
            second_order_char(agg)


class TestMetrics:
    def test_frozen_metrics(self, limits):
        met = frequency_metrics(single_nuclear_agg(), 0.05, limits)
        assert met.rocof_hz_s == pytest.approx(0.2834467120181406,
                                               rel=1e-12)
        assert met.ss_dev_hz == pytest.approx(0.099601593625498, rel=1e-12)
        assert met.nadir_hz == pytest.approx(0.24311905901109543, rel=1e-9)

    def test_zero_disturbance(self, limits):
        met = frequency_metrics(single_nuclear_agg(), 0.0, limits)
        assert met.nadir_hz == met.rocof_hz_s == met.ss_dev_hz == 0.0

    def test_negative_disturbance_rejected(self, limits):
        with pytest.raises(FrequencyModelError):
            frequency_metrics(single_nuclear_agg(), -0.1, limits)

    def test_invalid_when_turbine_share_exceeds_droop(self, limits):
        agg = AggregateParams(m=8.0, m_v=0.0, d=0.6, r_g=5.0, f_g=6.0,
                              t_turbine=7.0, s_base=100.0)
        with pytest.raises(FrequencyModelError, match="invalid"):
            frequency_metrics(agg, 0.05, limits)

    @given(scale=st.floats(0.2, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_linearity_in_disturbance(self, scale):
        limits = FrequencyLimits()
        agg = single_nuclear_agg()
        base = frequency_metrics(agg, 0.02, limits)
        scaled = frequency_metrics(agg, 0.02 * scale, limits)
        assert scaled.nadir_hz == pytest.approx(base.nadir_hz * scale,
                                                rel=1e-9)
        assert scaled.rocof_hz_s == pytest.approx(base.rocof_hz_s * scale,
                                                  rel=1e-9)
        assert scaled.ss_dev_hz == pytest.approx(base.ss_dev_hz * scale,
                                                 rel=1e-9)

    def test_overdamped_branch_matches_simulation(self, limits):
        # heavy inertia with weak droop drives zeta above 1
        agg = AggregateParams(m=40.0, m_v=0.0, d=0.3, r_g=1.2, f_g=0.2,
                              t_turbine=7.0, s_base=100.0)
        char = second_order_char(agg)
        assert char.overdamped and char.zeta >= 1.0
        met = frequency_metrics(agg, 0.05, limits)
        _, df = simulate_step_response(agg, 0.05, horizon_s=60.0)
        assert met.nadir_hz == pytest.approx(-df.min(), rel=1e-6)


class TestSimulator:
    def test_initial_slope_matches_rocof(self, limits):
        agg = single_nuclear_agg()
        met = frequency_metrics(agg, 0.05, limits)
        ts, df = simulate_step_response(agg, 0.05, dt=1e-4)
        slope = (df[1] - df[0]) / (ts[1] - ts[0])
        assert -slope == pytest.approx(met.rocof_hz_s, rel=1e-3)

    def test_tail_matches_steady_state(self, limits):
        agg = single_nuclear_agg()
        met = frequency_metrics(agg, 0.05, limits)
        _, df = simulate_step_response(agg, 0.05, horizon_s=60.0)
        assert -df[-1] == pytest.approx(met.ss_dev_hz, rel=1e-3)

    def test_zero_step_is_flat(self):
        ts, df = simulate_step_response(single_nuclear_agg(), 0.0)
        assert np.all(df == 0.0)
        assert len(ts) == len(df)

    def test_argument_validation(self):
        agg = single_nuclear_agg()
        with pytest.raises(FrequencyModelError):
            simulate_step_response(agg, 0.05, dt=0.0)
        with pytest.raises(FrequencyModelError):
            simulate_step_response(agg, 0.05, horizon_s=5.0)

    def test_superposition(self):
        agg = single_nuclear_agg()
        _, df1 = simulate_step_response(agg, 0.02)
        _, df2 = simulate_step_response(agg, 0.04)
        assert np.allclose(2.0 * df1, df2, atol=1e-12)


class TestLimitGaps:
    def test_signs(self, limits):
        met = frequency_metrics(single_nuclear_agg(), 0.05, limits)
        gaps = check_limits(met, limits)
        assert gaps.nadir == pytest.approx(met.nadir_hz / 0.4 - 1.0)
        assert gaps.rocof == pytest.approx(met.rocof_hz_s / 0.5 - 1.0)
        assert gaps.ss == pytest.approx(met.ss_dev_hz / 0.2 - 1.0)
        assert gaps.ok == (gaps.nadir <= 0 and gaps.rocof <= 0
                           and gaps.ss <= 0)

    def test_zero_disturbance_gaps_negative(self, limits):
        met = frequency_metrics(single_nuclear_agg(), 0.0, limits)
        gaps = check_limits(met, limits)
        assert gaps.nadir == gaps.rocof == gaps.ss == -1.0
