import math

import numpy as np
import pytest

from qcsmc import analytic
from qcsmc.controller import control_modified
from qcsmc.core import ControlParams, SimConfig, State, Zero
from qcsmc.errors import DegenerateOrigin, NotCovered, NotInCa, NotInU, OutOfWindow
from qcsmc.simulator import simulate

G = 100.0


def fine_capture_time(x0, dt=1e-6, t_end=0.4):
    """Numeric oracle: capture time of a fine-step simulation."""
    return simulate(SimConfig(State(*x0), ControlParams(G), Zero(), dt=dt, t_end=t_end)).captured_at


class TestParabolicArc:
    def test_evaluate(self):
        arc = analytic.parabolic_arc(State(1.0, 2.0), G)
        x1, x2, u = arc.evaluate(0.01)
        assert (float(x1), float(x2), float(u)) == pytest.approx((1.015, 1.0, -100.0))

    def test_exit(self):
        arc = analytic.parabolic_arc(State(1.0, 2.0), G)
        assert arc.t_exit == pytest.approx(0.02)
        assert arc.end == State(1.02, 0.0)
        assert arc.at(arc.t_exit).x1 == pytest.approx(1.02)

    def test_third_quadrant_mirror(self):
        arc = analytic.parabolic_arc(State(-1.0, -2.0), G)
        assert arc.sign_branch == -1
        assert tuple(arc.at(0.01)) == pytest.approx((-1.015, -1.0))

    def test_stays_in_u(self):
        arc = analytic.parabolic_arc(State(0.3, 7.0), G)
        x1, x2, _ = arc.evaluate(np.linspace(0, arc.t_exit, 101))
        assert np.all(x1 * x2 >= -1e-15)

    def test_axis_start_branch(self):
        assert analytic.parabolic_arc(State(0.0, 5.0), G).sign_branch == 1

    def test_errors(self):
        with pytest.raises(NotInU):
            analytic.parabolic_arc(State(1.0, -2.0), G)
        with pytest.raises(DegenerateOrigin):
            analytic.parabolic_arc(State(0.0, 0.0), G)


class TestReachTimeU:
    @pytest.mark.parametrize(
        "x0,gamma,t", [((1.0, 2.0), 100.0, 0.02), ((5.0, 0.0), 100.0, 0.0), ((-1.0, -15.0), 150.0, 0.1)]
    )
    def test_examples(self, x0, gamma, t):
        assert analytic.reach_time_U(State(*x0), gamma) == pytest.approx(t)

    @pytest.mark.parametrize(
        "x2,D,expected", [(15.0, 100.0, (0.06, 0.3)), (15.0, 0.0, (0.1, 0.1)), (0.0, 100.0, (0.0, 0.0))]
    )
    def test_bounds(self, x2, D, expected):
        assert analytic.reach_time_U_bounds(State(1.0, x2), 150.0, D) == pytest.approx(expected)

    def test_bound_errors(self):
        from qcsmc.errors import GammaTooSmall

        with pytest.raises(NotInU):
            analytic.reach_time_U_bounds(State(1.0, -1.0), 150.0, 100.0)
        with pytest.raises(GammaTooSmall):
            analytic.reach_time_U_bounds(State(1.0, 1.0), 100.0, 100.0)


def first_period_time(arc):
    """Independent form of the arrival time: first root of cos(omega*T + phi) = 1."""
    return (2 * math.pi - arc.phi) / arc.omega


class TestHarmonicParams:
    def test_unit_example(self):
        arc = analytic.harmonic_params(State(1.0, -10.0), G)
        assert arc.B == pytest.approx(1.0)
        assert arc.omega == pytest.approx(10.0)
        assert arc.phi == pytest.approx(1.5 * math.pi)
        assert not arc.mirrored

    def test_second_example(self):
        arc = analytic.harmonic_params(State(2.0, -10.0), G)
        assert arc.B == pytest.approx(4.0 / 3.0)
        assert arc.omega == pytest.approx(math.sqrt(75.0))
        assert arc.phi == pytest.approx(4.0 * math.pi / 3.0)
        x1, x2, _ = arc.evaluate(0.0)
        assert (float(x1), float(x2)) == pytest.approx((2.0, -10.0), rel=1e-9)

    def test_axis_closure_point(self):
        arc = analytic.harmonic_params(State(1.02, 0.0), G)
        assert arc.B == pytest.approx(0.51)
        assert arc.omega == pytest.approx(14.0028, abs=1e-4)
        assert arc.phi == pytest.approx(math.pi)
        assert float(arc.evaluate(0.0)[2]) == pytest.approx(-G)

    def test_second_quadrant_mirrored(self):
        arc = analytic.harmonic_params(State(-1.0, 10.0), G)
        assert arc.mirrored
        x1, x2, u = arc.evaluate(0.0)
        assert (float(x1), float(x2), float(u)) == pytest.approx((-1.0, 10.0, 0.0), abs=1e-12)

    @pytest.mark.parametrize("x0", [State(0.1, -10.0), State(1.0, 2.0), State(0.0, 0.0)])
    def test_not_in_ca(self, x0):
        with pytest.raises(NotInCa):
            analytic.harmonic_params(x0, G)

    @pytest.mark.parametrize("x0", [(1.0, -10.0), (2.0, -10.0), (0.5, -0.1), (3.0, -24.0), (-0.7, 5.0)])
    def test_invariants(self, x0):
        arc = analytic.harmonic_params(State(*x0), G)
        assert arc.omega**2 * arc.B == pytest.approx(G, rel=1e-12)
        x1, x2, _ = arc.evaluate(0.0)
        assert (float(x1), float(x2)) == pytest.approx(x0, rel=1e-9)
        assert arc.t_reach == pytest.approx(first_period_time(arc), rel=1e-12)


class TestHarmonicEval:
    arc = analytic.harmonic_params(State(1.0, -10.0), G)

    def test_initial_value(self):
        s, u = analytic.harmonic_eval(self.arc, 0.0)
        assert (s.x1, s.x2) == pytest.approx((1.0, -10.0))
        assert u == pytest.approx(0.0, abs=1e-12)

    def test_endpoint(self):
        s, u = analytic.harmonic_eval(self.arc, math.pi / 20)
        assert abs(s.x1) <= 1e-9 and abs(s.x2) <= 1e-9
        assert u == pytest.approx(G, rel=1e-12)

    def test_midpoint_against_cosine_form(self):
        t = math.pi / 40
        s, u = analytic.harmonic_eval(self.arc, t)
        a = self.arc
        # x1 = -(gamma/omega^2) cos(omega t + phi) + B, x2 = (gamma/omega) sin(omega t + phi)
        assert s.x1 == pytest.approx(-(G / a.omega**2) * math.cos(a.omega * t + a.phi) + a.B)
        assert s.x2 == pytest.approx((G / a.omega) * math.sin(a.omega * t + a.phi))
        assert (s.x1, s.x2) == pytest.approx((1 - math.sqrt(2) / 2, -10 * math.sqrt(2) / 2))
        assert u == pytest.approx(G * math.cos(7 * math.pi / 4))

    def test_midpoint_against_fine_simulation(self):
        traj = simulate(SimConfig(State(1.0, -10.0), ControlParams(G), Zero(), dt=1e-6, t_end=0.1))
        k = int(round((math.pi / 40) / 1e-6))
        s, _ = analytic.harmonic_eval(self.arc, k * 1e-6)
        assert (traj.x1[k], traj.x2[k]) == pytest.approx((s.x1, s.x2), abs=1e-4)

    def test_out_of_window(self):
        with pytest.raises(OutOfWindow):
            analytic.harmonic_eval(self.arc, -1e-3)
        with pytest.raises(OutOfWindow):
            analytic.harmonic_eval(self.arc, 0.2)

    @pytest.mark.parametrize("x0", [(1.0, -10.0), (2.0, -10.0), (0.2, -6.0), (-1.0, 10.0), (-3.0, 1.0)])
    def test_closed_loop_residual(self, x0):
        # along the arc, dx2/dt must equal the modified law evaluated at the arc state
        arc = analytic.harmonic_params(State(*x0), G)
        t = np.linspace(0.0, arc.t_reach, 201)[:-1]
        x1, x2, u = arc.evaluate(t)
        dx1, dx2 = arc.evaluate_derivative(t)
        law = np.array([control_modified(State(a, b), ControlParams(G), 1e12).u for a, b in zip(x1, x2)])
        assert np.max(np.abs(dx2 - law)) < 1e-9 * G
        np.testing.assert_allclose(dx1, x2, atol=1e-9)
        np.testing.assert_allclose(u, dx2, atol=1e-9 * G)
        assert np.abs(u).max() <= G

    def test_derivative_matches_finite_difference(self):
        arc = analytic.harmonic_params(State(2.0, -10.0), G)
        t = np.linspace(0.01, arc.t_reach - 0.01, 50)
        h = 1e-7
        x1p, x2p, _ = arc.evaluate(t + h)
        x1m, x2m, _ = arc.evaluate(t - h)
        dx1, dx2 = arc.evaluate_derivative(t)
        np.testing.assert_allclose((x1p - x1m) / (2 * h), dx1, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose((x2p - x2m) / (2 * h), dx2, rtol=1e-6, atol=1e-5)


class TestReachTimeCa:
    @pytest.mark.parametrize(
        "x0,expected",
        [((1.0, -10.0), math.pi / 20), ((2.0, -10.0), (2 * math.pi / 3) / math.sqrt(75.0))],
    )
    def test_examples_with_oracle(self, x0, expected):
        t = analytic.reach_time_Ca(State(*x0), G)
        assert t == pytest.approx(expected, rel=1e-12)
        assert fine_capture_time(x0) == pytest.approx(t, abs=5e-6)

    def test_second_example_value(self):
        assert analytic.reach_time_Ca(State(2.0, -10.0), G) == pytest.approx(0.24184, abs=1e-5)

    def test_limit_on_x1_axis(self):
        expected = math.pi / math.sqrt(200.0)
        assert analytic.reach_time_Ca(State(1.0, -1e-9), G) == pytest.approx(expected, rel=1e-9)
        assert fine_capture_time((1.0, -1e-9)) == pytest.approx(expected, abs=5e-6)

    def test_limit_at_ca_boundary(self):
        # on x2^2 = 2 gamma |x1| the arc degenerates to braking at u = +gamma,
        # which takes |x2|/gamma = sqrt(2|x1|/gamma)
        t = analytic.reach_time_Ca(State(1.0, -math.sqrt(200.0) * (1 - 1e-12)), G)
        assert t == pytest.approx(math.sqrt(2.0 / G), rel=1e-5)

    def test_alternative_denominator(self):
        assert analytic.reach_time_Ca_printed(State(1.0, -10.0), G) is None
        alt = analytic.reach_time_Ca_printed(State(2.0, -10.0), G)
        assert alt == pytest.approx(2 * (2 * math.pi / 3) / 10.0)
        assert abs(alt - analytic.reach_time_Ca(State(2.0, -10.0), G)) > 0.1


class TestCompose:
    def test_u_start_total_time(self):
        arcs = analytic.compose_arcs(State(1.0, 2.0), G)
        assert [type(a).__name__ for a in arcs] == ["ParabolicArc", "HarmonicArc"]
        total = analytic.total_time(arcs)
        assert total == pytest.approx(0.02 + math.pi / math.sqrt(200 / 1.02), rel=1e-12)
        assert total == pytest.approx(0.24436, abs=1e-5)
        assert fine_capture_time((1.0, 2.0)) == pytest.approx(total, abs=5e-6)

    def test_junction_control_continuous(self):
        para, harm = analytic.compose_arcs(State(1.0, 2.0), G)
        assert float(para.evaluate(para.t_exit)[2]) == pytest.approx(float(harm.evaluate(0.0)[2]))

    def test_ca_start_single_arc(self):
        arcs = analytic.compose_arcs(State(1.0, -10.0), G)
        assert len(arcs) == 1
        assert analytic.total_time(arcs) == pytest.approx(0.15708, abs=1e-5)

    def test_not_covered(self):
        with pytest.raises(NotCovered, match="not in C_a"):
            analytic.compose_arcs(State(0.1, -10.0), G)

    def test_origin(self):
        assert analytic.compose_arcs(State(0.0, 0.0), G) == []
        traj = analytic.compose_trajectory(State(0.0, 0.0), G, 1e-3)
        assert traj.captured_at == 0.0 and len(traj) == 1

    @pytest.mark.parametrize("x0", [(1.0, 2.0), (-0.5, -4.0), (1.0, -10.0), (-2.0, 10.0)])
    def test_sampled_trajectory(self, x0):
        traj = analytic.compose_trajectory(State(*x0), G, 1e-4)
        assert (traj.x1[0], traj.x2[0]) == pytest.approx(x0, rel=1e-9)
        assert np.abs(traj.u).max() == pytest.approx(G, rel=1e-4)
        assert np.abs(traj.u).max() <= G * (1 + 1e-12)
        # x1 keeps its sign all the way in
        assert np.all(np.sign(traj.x1[traj.x1 != 0]) == np.sign(x0[0]))
        assert traj.captured_at == pytest.approx(analytic.total_time(analytic.compose_arcs(State(*x0), G)))
