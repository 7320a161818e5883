import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from donorspin.model import TWO_PI, SystemParams, charge_splitting
from donorspin.pulses import (Window, Ramp, Constant, Scaled, Squared,
                              Shifted, Sum, window, ramp, parse_envelope,
                              PulseSchedule, make_rz_schedule,
                              make_rx_sweep_schedule, make_naive_rx_schedule,
                              make_cphase_schedule, make_echo_rz_schedule,
                              sweep_drive_frequencies, SWEEP_TAU1,
                              SWEEP_DURATION)

P = SystemParams()


class TestWindow:
    def test_case_boundaries(self):
        assert window(0.0, 1.0, 10.0) == 0.0
        assert window(1.0, 1.0, 10.0) == 1.0
        assert window(10.0, 1.0, 10.0) == 0.0

    def test_half_rise(self):
        assert window(0.5, 1.0, 10.0) == pytest.approx(0.5)

    def test_outside_support(self):
        assert window(-0.1, 1.0, 10.0) == 0.0
        assert window(10.1, 1.0, 10.0) == 0.0

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            Window(0.0, 10.0)
        with pytest.raises(ValueError):
            Window(6.0, 10.0)

    @given(st.floats(-1, 11))
    def test_bounded(self, t):
        assert 0.0 <= window(t, 2.0, 10.0) <= 1.0

    def test_smooth_junctions(self):
        # continuously differentiable where the cosine ramps meet the flat top
        env = Window(2.0, 10.0)
        for tj in (2.0, 8.0):
            h = 1e-7
            left = (env.value(tj) - env.value(tj - h)) / h
            right = (env.value(tj + h) - env.value(tj)) / h
            assert abs(left - right) < 1e-5

    @given(st.floats(0.05, 9.95))
    @settings(max_examples=30)
    def test_derivative_matches_finite_difference(self, t):
        env = Window(2.0, 10.0)
        h = 1e-7
        fd = (env.value(t + h) - env.value(t - h)) / (2 * h)
        assert env.derivative(t) == pytest.approx(float(fd), abs=1e-4)


class TestRamp:
    def test_segment_endpoints(self):
        assert ramp(2.0, 2.0, 5.0, 7.0, -3.0, 10.0) == pytest.approx(5.0)
        assert ramp(7.0, 2.0, 5.0, 7.0, -3.0, 10.0) == pytest.approx(-3.0)

    def test_midpoint_linear(self):
        assert ramp(4.5, 2.0, 5.0, 7.0, -3.0, 10.0) == pytest.approx(1.0)

    def test_boundaries_zero(self):
        assert ramp(0.0, 2.0, 5.0, 7.0, -3.0, 10.0) == 0.0
        assert ramp(10.0, 2.0, 5.0, 7.0, -3.0, 10.0) == pytest.approx(0.0)

    def test_rejects_nonmonotone_breakpoints(self):
        with pytest.raises(ValueError):
            Ramp(5.0, 1.0, 2.0, 1.0, 10.0)


def test_envelope_serialization_roundtrip():
    env = Sum((Constant(1e4),
               Scaled(-2e4, Window(5e-9, 2e-8)),
               Shifted(5e-9, Squared(Window(1e-9, 1e-8))),
               Ramp(1e-9, 3.0, 2e-9, -1.0, 5e-9)))
    clone = parse_envelope(env.serialize())
    ts = np.linspace(-1e-9, 2.1e-8, 301)
    assert np.allclose(env.value(ts), clone.value(ts), atol=0)


def test_schedule_serialization_roundtrip():
    sched = make_rx_sweep_schedule(P, 0.73)
    clone = PulseSchedule.deserialize(sched.serialize())
    ts = np.linspace(0, sched.total_time, 257)
    for a, b in zip(sched.sample(ts), clone.sample(ts)):
        assert np.allclose(a, b, atol=0)
    assert clone.omega_E == sched.omega_E
    assert clone.total_time == sched.total_time


class TestRzSchedule:
    def test_long_pulse_parameters(self):
        sched = make_rz_schedule(P, 20e-9)
        assert float(sched.dE_envelope.value(10e-9)) == pytest.approx(-1e4)
        ts = np.linspace(0, 20e-9, 2001)
        assert float(sched.dE_envelope.value(ts).min()) == pytest.approx(-1e4)

    def test_short_pulse_is_shallow(self):
        sched = make_rz_schedule(P, 5e-9)
        # S = 1e4, tau = 2.5 ns
        assert float(sched.dE_envelope.value(2.5e-9)) == pytest.approx(0.0,
                                                                       abs=1e-6)

    def test_endpoints_at_idle(self):
        for T in (3e-9, 20e-9):
            sched = make_rz_schedule(P, T)
            assert float(sched.dE_envelope.value(0.0)) == pytest.approx(P.dE_idle)
            assert float(sched.dE_envelope.value(T)) == pytest.approx(P.dE_idle)
            assert sched.Ea_envelope.is_zero() and sched.Ba_envelope.is_zero()


class TestSweepSchedule:
    def test_lambda_zero_pure_adiabatic(self):
        sched = make_rx_sweep_schedule(P, 0.0)
        assert sched.Ea_envelope.is_zero() or \
            float(np.abs(sched.Ea_envelope.value(
                np.linspace(0, sched.total_time, 500))).max()) == 0.0

    def test_lambda_one_peaks(self):
        sched = make_rx_sweep_schedule(P, 1.0)
        ts = np.linspace(0, sched.total_time, 4001)
        assert float(sched.Ea_envelope.value(ts).max()) == pytest.approx(255.2,
                                                                         rel=1e-6)
        assert float(sched.Ba_envelope.value(ts).max()) == pytest.approx(
            33.26e-3, rel=1e-6)

    def test_sweep_crosses_zero_at_midpoint(self):
        sched = make_rx_sweep_schedule(P, 1.0)
        tm = SWEEP_TAU1 + SWEEP_DURATION / 2
        assert float(sched.dE_envelope.value(tm)) == pytest.approx(0.0,
                                                                   abs=1e-6)

    def test_rejects_bad_lambda(self):
        with pytest.raises(ValueError):
            make_rx_sweep_schedule(P, 1.2)
        with pytest.raises(ValueError):
            make_rx_sweep_schedule(P, -0.1)

    def test_drive_frequencies(self):
        wE, wB = sweep_drive_frequencies(P)
        assert wE == pytest.approx(charge_splitting(P, 0.0) - TWO_PI * 232.428e6)
        assert wB == pytest.approx(P.B0 * P.gamma_e - P.hyperfine_A / 4
                                   - TWO_PI * 217.096e6)

    def test_total_time(self):
        assert make_rx_sweep_schedule(P, 1.0).total_time == pytest.approx(120e-9)


class TestNaiveSchedule:
    def test_field_parked_at_zero(self):
        sched = make_naive_rx_schedule(P, 1.0)
        ts = np.linspace(SWEEP_TAU1, SWEEP_TAU1 + SWEEP_DURATION, 301)
        assert np.abs(sched.dE_envelope.value(ts)).max() < 1e-6

    def test_endpoints_at_idle(self):
        sched = make_naive_rx_schedule(P, 0.5)
        assert float(sched.dE_envelope.value(0.0)) == pytest.approx(P.dE_idle)
        assert float(sched.dE_envelope.value(sched.total_time)) == \
            pytest.approx(P.dE_idle)


class TestCphaseSchedule:
    def test_long_pulse_amplitude(self):
        sched = make_cphase_schedule(P, 600e-9)
        ts = np.linspace(0, 600e-9, 6001)
        assert float(sched.Ea_envelope.value(ts).max()) == pytest.approx(40.0,
                                                                         rel=1e-4)

    def test_short_pulse_amplitude_scaled(self):
        sched = make_cphase_schedule(P, 150e-9)
        ts = np.linspace(0, 150e-9, 3001)
        assert float(sched.Ea_envelope.value(ts).max()) == pytest.approx(
            10.0, rel=1e-3)

    def test_no_magnetic_drive(self):
        assert make_cphase_schedule(P, 400e-9).Ba_envelope.is_zero()

    def test_rejects_too_short(self):
        with pytest.raises(ValueError):
            make_cphase_schedule(P, 9e-9)

    def test_field_parked_at_gate_value(self):
        sched = make_cphase_schedule(P, 400e-9)
        ts = np.linspace(10e-9, 390e-9, 101)
        assert np.allclose(sched.dE_envelope.value(ts), 2000.0, atol=1e-6)


FACTORIES = [
    lambda: make_rz_schedule(P, 13.56e-9),
    lambda: make_rx_sweep_schedule(P, 0.8),
    lambda: make_naive_rx_schedule(P, 0.8),
    lambda: make_cphase_schedule(P, 494e-9),
    lambda: make_echo_rz_schedule(P, 30e-9),
]


@pytest.mark.parametrize("factory", FACTORIES)
def test_factory_schedule_invariants(factory):
    sched = factory()
    T = sched.total_time
    assert float(sched.dE_envelope.value(0.0)) == pytest.approx(P.dE_idle)
    assert float(sched.dE_envelope.value(T)) == pytest.approx(P.dE_idle)
    assert abs(float(sched.Ea_envelope.value(0.0))) < 1e-9
    assert abs(float(sched.Ea_envelope.value(T))) < 1e-9
    assert abs(float(sched.Ba_envelope.value(0.0))) < 1e-12
    assert abs(float(sched.Ba_envelope.value(T))) < 1e-12
    # continuity and bounded slope; cosine ramps peak at pi/2 x mean slope
    ts = np.linspace(0, T, 20000)
    vals = sched.dE_envelope.value(ts)
    slope_bound = (np.pi / 2) * (2 * abs(P.dE_idle) + 2 * 2000.0) / 5e-9
    assert np.abs(np.diff(vals) / np.diff(ts)).max() <= slope_bound * 1.01


def test_squared_window_turns_on_gradually():
    w = Window(2.0, 10.0)
    w2 = Squared(w)
    assert abs(float(w2.derivative(1e-9))) < 1e-6
    assert float(w2.derivative(0.05)) < 0.05 * float(w.derivative(0.05))


def test_sweep_ac_envelopes_flat_at_turn_on():
    sched = make_rx_sweep_schedule(P, 1.0)
    h = 1e-12
    for env in (sched.Ea_envelope, sched.Ba_envelope):
        rate = float(env.derivative(SWEEP_TAU1 + h))
        assert abs(rate) < 1e-3 * 255.2 / 1e-9
