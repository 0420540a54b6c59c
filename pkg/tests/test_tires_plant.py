import math

import numpy as np
import pytest

from latstab.plant import (CompanionModel, DegenerateSpeedError, VehicleParams,
                           VehicleState, compute_tire_forces, integrate,
                           tire_forces_linear, tire_forces_mf, understeer_gradient)
from latstab.tires import MfCoeffs, friction_circle, mf_curve, mf_lateral


@pytest.fixture
def p_high():
    return VehicleParams(mu=0.9)


@pytest.fixture
def p_low():
    return VehicleParams(mu=0.35)


class TestMfCurve:
    def test_odd_in_slip(self):
        c = MfCoeffs()
        for s in (0.01, 0.1, 0.5):
            assert mf_curve(s, c.b_lat, c.c_lat, 1000.0, c.e_lat) == pytest.approx(
                -mf_curve(-s, c.b_lat, c.c_lat, 1000.0, c.e_lat))
        assert mf_curve(0.0, c.b_lat, c.c_lat, 1000.0, c.e_lat) == 0.0

    def test_origin_slope_is_bcd(self):
        c = MfCoeffs()
        d = 3500.0
        h = 1e-7
        fd = (mf_curve(h, c.b_lat, c.c_lat, d, c.e_lat)
              - mf_curve(-h, c.b_lat, c.c_lat, d, c.e_lat)) / (2 * h)
        assert fd == pytest.approx(c.b_lat * c.c_lat * d, rel=1e-2)

    def test_lateral_slope_sign_convention(self):
        # lateral force opposes the slip angle: slope is -B*C*D
        c = MfCoeffs()
        mu, fz = 0.7, 5000.0
        h = 1e-7
        fd = (mf_lateral(h, mu, fz, c) - mf_lateral(-h, mu, fz, c)) / (2 * h)
        assert fd == pytest.approx(-c.b_lat * c.c_lat * mu * fz, rel=1e-2)

    def test_peak_never_exceeds_adhesion(self):
        c = MfCoeffs()
        mu, fz = 0.7, 5000.0
        alphas = np.radians(np.linspace(-30, 30, 601))
        forces = [abs(mf_lateral(a, mu, fz, c)) for a in alphas]
        assert max(forces) <= mu * fz + 1e-9
        # saturates near the peak factor at large slip
        assert max(forces) > 0.9 * mu * fz

    def test_friction_circle_cap(self):
        fx, fy = friction_circle(3000.0, 4000.0, 0.7, 5000.0)
        assert math.hypot(fx, fy) == pytest.approx(3500.0)
        assert fy / fx == pytest.approx(4000.0 / 3000.0)
        fx2, fy2 = friction_circle(100.0, 100.0, 0.7, 5000.0)
        assert (fx2, fy2) == (100.0, 100.0)


class TestTireForces:
    def test_zero_slip_zero_force(self, p_high):
        s = VehicleState.rolling(15.0, p_high)
        tf = tire_forces_mf(s, 0.0, p_high)
        assert all(abs(f) < 1e-12 for f in tf.fx)
        assert all(abs(f) < 1e-12 for f in tf.fy)
        assert all(k == 0.0 for k in tf.kappa)
        assert all(a == 0.0 for a in tf.alpha)

    def test_linear_front_axle_value(self, p_high):
        # alpha = 0.01 rad on the front axle: F_y = C_f * alpha in total
        s = VehicleState.rolling(20.0, p_high)
        s.vy = 0.2  # gives front slip angle atan(0.2/20) ~= 0.01
        s.w3 = s.w4 = 20.0 / p_high.r_w
        tf = tire_forces_linear(s, 0.0, p_high)
        alpha_f = math.atan2(0.2, 20.0)
        assert tf.alpha[0] == pytest.approx(alpha_f)
        front_total = tf.fy[0] + tf.fy[1]
        assert front_total == pytest.approx(p_high.c_f * alpha_f, rel=1e-6)

    def test_linear_saturates_at_adhesion(self, p_low):
        s = VehicleState.rolling(20.0, p_low)
        s.vy = 4.0
        tf = tire_forces_linear(s, 0.0, p_low)
        for fy, fz in zip(tf.fy, tf.fz):
            assert abs(fy) <= p_low.mu * fz + 1e-9

    def test_mf_linear_agree_at_small_slip(self, p_high):
        """With the linear stiffness fit to the empirical origin slope, the
        two models agree within 15% for slip below one degree."""
        c = p_high.mf
        from latstab.tires import linear_lateral
        for fz in (3000.0, 5000.0):
            slope = -c.b_lat * c.c_lat * p_high.mu * fz
            for alpha in np.radians([-1.0, -0.5, 0.3, 1.0]):
                f_mf = mf_lateral(alpha, p_high.mu, fz, c)
                f_lin = linear_lateral(alpha, slope, p_high.mu, fz)
                assert f_mf == pytest.approx(f_lin, rel=0.15)

    def test_friction_cap_under_combined_demand(self, p_low):
        s = VehicleState(vx=18.0, vy=-2.0, wr=0.4, w1=70.0, w2=40.0, w3=70.0, w4=40.0)
        tf = tire_forces_mf(s, 0.15, p_low)
        for fx, fy, fz in zip(tf.fx, tf.fy, tf.fz):
            assert math.hypot(fx, fy) <= p_low.mu * fz + 1e-9

    def test_degenerate_speed_raises(self, p_high):
        s = VehicleState(vx=0.05)
        with pytest.raises(DegenerateSpeedError):
            tire_forces_mf(s, 0.0, p_high)

    def test_loads_shift_during_cornering(self, p_high):
        s = VehicleState.rolling(20.0, p_high)
        s.vy = -0.5
        s.wr = 0.3
        tf = tire_forces_mf(s, 0.05, p_high)
        # left turn: outside (right) wheels gain load
        assert tf.fz[1] > tf.fz[0]
        assert tf.fz[3] > tf.fz[2]
        assert sum(tf.fz) == pytest.approx(p_high.m * 9.81, rel=1e-6)


class TestIntegrate:
    def test_straight_rolling_equilibrium(self, p_high):
        s = VehicleState.rolling(18.0, p_high)
        for _ in range(200):
            s = integrate(s, (0.0,) * 4, 0.0, p_high, 5e-4)
        assert s.vx == pytest.approx(18.0, abs=1e-9)
        assert s.vy == 0.0 and s.wr == 0.0 and s.y == 0.0
        assert s.w1 == pytest.approx(18.0 / p_high.r_w, abs=1e-9)

    def test_left_right_symmetry(self, p_high):
        s = VehicleState.rolling(15.0, p_high)
        for _ in range(500):
            s = integrate(s, (120.0,) * 4, 0.0, p_high, 5e-4)
        assert abs(s.y) < 1e-12
        assert abs(s.wr) < 1e-12
        assert abs(s.vy) < 1e-12
        assert s.vx > 15.0  # symmetric drive accelerates

    def test_kinematic_steering_oracle(self, p_high):
        """Low speed, small steer on grippy road settles at the kinematic
        yaw rate within 5%."""
        v = 20.0 / 3.6
        s = VehicleState.rolling(v, p_high)
        delta = math.radians(2.0)
        for _ in range(12000):
            s = integrate(s, (0.0,) * 4, delta, p_high, 5e-4)
        kinematic = v * delta / p_high.wheelbase
        assert s.wr == pytest.approx(kinematic, rel=0.05)

    def test_kinetic_energy_non_increasing_coastdown(self, p_high):
        s = VehicleState(vx=20.0, vy=1.5, wr=0.2,
                         w1=55.0, w2=55.0, w3=55.0, w4=55.0)
        def energy(st):
            body = 0.5 * p_high.m * (st.vx ** 2 + st.vy ** 2) + 0.5 * p_high.i_z * st.wr ** 2
            wheels = 0.5 * p_high.i_w * sum(w ** 2 for w in st.wheel_speeds())
            return body + wheels
        e_prev = energy(s)
        for _ in range(2000):
            s = integrate(s, (0.0,) * 4, 0.0, p_high, 5e-4)
            e = energy(s)
            assert e <= e_prev + 1e-9
            e_prev = e

    def test_step_size_guard(self, p_high):
        s = VehicleState.rolling(10.0, p_high)
        with pytest.raises(ValueError):
            integrate(s, (0.0,) * 4, 0.0, p_high, 2e-3)

    def test_determinism(self, p_low):
        def run():
            s = VehicleState.rolling(18.0, p_low)
            out = []
            for k in range(300):
                s = integrate(s, (50.0, 80.0, 50.0, 80.0), 0.03 * math.sin(k / 40), p_low, 5e-4)
                out.append(s.as_tuple())
            return out
        assert run() == run()


class TestCompanion:
    def test_one_step_agreement_with_plant_at_small_steer(self, p_high):
        """Open-loop one-tick predictions of the small-angle companion match
        the full plant within 2% of the state change at one-degree steer."""
        v = 18.0
        delta = math.radians(1.0)
        torques = (30.0, 30.0, 30.0, 30.0)
        plant = VehicleState.rolling(v, p_high)
        comp = CompanionModel(p_high, "mf")
        comp.reset(v)
        for _ in range(int(0.05 / 5e-4)):
            plant = integrate(plant, torques, delta, p_high, 5e-4)
        comp.advance(torques, delta, 0.05, 100)
        for plant_next, comp_next, before in zip(
                (plant.vx, plant.vy, plant.wr), comp.body_state, (v, 0.0, 0.0)):
            change = plant_next - before
            assert comp_next - before == pytest.approx(change, rel=0.02, abs=2e-4)

    def test_linear_companion_stiffer_than_mf_on_low_mu(self, p_low):
        """Below saturation the table-stiffness linear tire responds harder
        than the adhesion-scaled empirical curve on a slippery road (the
        fidelity gap the model comparison relies on)."""
        delta = math.radians(0.5)
        out = {}
        for kind in ("mf", "linear"):
            comp = CompanionModel(p_low, kind)
            comp.reset(18.0)
            for _ in range(10):
                comp.advance((0.0,) * 4, delta, 0.05, 100)
            out[kind] = comp.body_state[2]
        assert out["linear"] > out["mf"] > 0.0

    def test_rollout_restores_state(self, p_high):
        comp = CompanionModel(p_high, "mf")
        comp.reset(15.0)
        saved = comp.state
        comp.rollout(saved, [(10.0,) * 4] * 3, 0.02, 0.05, 4)
        assert comp.state == saved


def test_understeer_gradient_value(p_high):
    # frozen from the vehicle table: m(l_r|C_r| - l_f|C_f|)/(L |C_f||C_r|)
    assert understeer_gradient(p_high) == pytest.approx(-6.120406791913843e-4, rel=1e-12)
