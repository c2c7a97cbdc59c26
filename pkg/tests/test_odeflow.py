import numpy as np
import pytest

from flowforge.errors import DivergenceError, InputError
from flowforge.odeflow import (FlowProbe, OrderStudy, PairField, VectorField,
                               alternating_euler,
                               alternating_euler_with_jacobian, flow_distance,
                               grid_points, gronwall_bound, integrate,
                               integrate_with_jacobian,
                               perturbation_first_order,
                               perturbation_order_check)

HARMONIC = VectorField(2, lambda z, t: np.array([z[1], -z[0]]),
                       lambda z, t: np.array([[0.0, 1.0], [-1.0, 0.0]]))


class TestIntegrate:
    def test_constant_flow(self):
        vf = VectorField(2, lambda z, t: np.zeros(2))
        out = integrate(vf, np.array([1.0, 2.0]), 0.0, 5.0, 50)
        assert np.allclose(out, [1.0, 2.0], atol=0)

    def test_exponential(self):
        vf = VectorField(1, lambda z, t: z)
        out = integrate(vf, np.array([1.0]), 0.0, 1.0, 1000)
        assert out[0] == pytest.approx(np.e, abs=1e-9)

    def test_harmonic_period(self):
        out = integrate(HARMONIC, np.array([1.0, 0.0]), 0.0, 2 * np.pi, 2000)
        assert np.allclose(out, [1.0, 0.0], atol=1e-8)

    def test_step_halving_fourth_order(self):
        vf = VectorField(1, lambda z, t: np.sin(z) + np.array([t]))
        fine = integrate(vf, np.array([0.3]), 0.0, 2.0, 640)
        e1 = abs(integrate(vf, np.array([0.3]), 0.0, 2.0, 40)[0] - fine[0])
        e2 = abs(integrate(vf, np.array([0.3]), 0.0, 2.0, 80)[0] - fine[0])
        assert e1 / e2 >= 8.0

    def test_divergence_error(self):
        vf = VectorField(1, lambda z, t: z ** 2)
        with pytest.raises(DivergenceError) as err:
            integrate(vf, np.array([5.0]), 0.0, 10.0, 2000)
        assert err.value.step is not None

    def test_bad_steps(self):
        with pytest.raises(InputError):
            integrate(HARMONIC, np.zeros(2), 0.0, 1.0, 0)


class TestIntegrateWithJacobian:
    def test_zero_field_identity(self):
        vf = VectorField(2, lambda z, t: np.zeros(2),
                         lambda z, t: np.zeros((2, 2)))
        _, J = integrate_with_jacobian(vf, np.ones(2), 0.0, 3.0, 30)
        assert np.allclose(J, np.eye(2), atol=0)

    def test_scalar_linear(self):
        a = 0.7
        vf = VectorField(1, lambda z, t: a * z, lambda z, t: np.array([[a]]))
        _, J = integrate_with_jacobian(vf, np.array([2.0]), 0.0, 1.5, 600)
        assert J[0, 0] == pytest.approx(np.exp(a * 1.5), abs=1e-9)

    def test_harmonic_quarter_turn(self):
        _, J = integrate_with_jacobian(HARMONIC, np.array([1.0, 0.0]),
                                       0.0, np.pi / 2, 1000)
        assert np.allclose(J, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-8)

    def test_matches_finite_differences(self):
        vf = VectorField(
            2,
            lambda z, t: np.array([np.sin(z[1]) + 0.1 * z[0] ** 2, -z[0]]),
            lambda z, t: np.array([[0.2 * z[0], np.cos(z[1])], [-1.0, 0.0]]))
        z0 = np.array([0.4, -0.3])
        _, J = integrate_with_jacobian(vf, z0, 0.0, 1.0, 400)
        h = 1e-5
        fd = np.zeros((2, 2))
        for c in range(2):
            dz = np.zeros(2)
            dz[c] = h
            plus = integrate(vf, z0 + dz, 0.0, 1.0, 400)
            minus = integrate(vf, z0 - dz, 0.0, 1.0, 400)
            fd[:, c] = (plus - minus) / (2 * h)
        assert np.max(np.abs(J - fd)) / np.max(np.abs(J)) < 1e-4


SHM_PAIR = PairField(
    d=1,
    f=lambda x, v, t: v,
    g=lambda x, v, t: -x,
    f_x=lambda x, v, t: np.zeros((1, 1)),
    f_v=lambda x, v, t: np.eye(1),
    g_x=lambda x, v, t: -np.eye(1),
    g_v=lambda x, v, t: np.zeros((1, 1)))


class TestAlternatingEuler:
    def test_hand_computed_step(self):
        xs, vs = alternating_euler(SHM_PAIR, np.array([1.0]), np.array([0.0]),
                                   0.0, 0.1, 1)
        assert vs[1][0] == pytest.approx(-0.1)
        assert xs[1][0] == pytest.approx(0.99)

    def test_zero_field_constant(self):
        fld = PairField(1, lambda x, v, t: np.zeros(1),
                        lambda x, v, t: np.zeros(1))
        xs, vs = alternating_euler(fld, np.array([2.0]), np.array([-1.0]),
                                   0.0, 0.05, 40)
        assert np.allclose(xs, 2.0, atol=0) and np.allclose(vs, -1.0, atol=0)

    def test_converges_over_period(self):
        # over exactly one period the scheme converges to the start point
        errs = []
        for eta in (0.05, 0.025, 0.0125):
            n = int(round(2 * np.pi / eta))
            xs, vs = alternating_euler(SHM_PAIR, np.array([1.0]),
                                       np.array([0.0]), 0.0, 2 * np.pi / n, n)
            errs.append(np.hypot(xs[-1][0] - 1.0, vs[-1][0]))
        assert errs[0] > errs[1] > errs[2]
        assert errs[-1] < 1e-3

    def test_first_order_at_generic_time(self):
        # away from the full period the error is genuinely first order
        t_end = 5.0
        ref = integrate(HARMONIC, np.array([1.0, 0.0]), 0.0, t_end, 4000)
        errs, etas = [], []
        for eta in (0.02, 0.01, 0.005, 0.0025):
            n = int(round(t_end / eta))
            ee = t_end / n
            xs, vs = alternating_euler(SHM_PAIR, np.array([1.0]),
                                       np.array([0.0]), 0.0, ee, n)
            errs.append(np.hypot(xs[-1][0] - ref[0], vs[-1][0] - ref[1]))
            etas.append(ee)
        slope = np.polyfit(np.log(etas), np.log(errs), 1)[0]
        assert 0.8 <= slope <= 1.2

    def test_augmented_jacobian_matches_finite_differences(self):
        fld = PairField(
            1,
            f=lambda x, v, t: v - 0.3 * v ** 2 * x,
            g=lambda x, v, t: -x - 0.2 * x ** 2 - 0.1 * v * x,
            f_x=lambda x, v, t: np.array([[-0.3 * v[0] ** 2]]),
            f_v=lambda x, v, t: np.array([[1.0 - 0.6 * v[0] * x[0]]]),
            g_x=lambda x, v, t: np.array([[-1.0 - 0.4 * x[0] - 0.1 * v[0]]]),
            g_v=lambda x, v, t: np.array([[-0.1 * x[0]]]))
        z0 = np.array([0.4, 0.2])
        _, _, J = alternating_euler_with_jacobian(
            fld, z0[:1], z0[1:], 0.0, 0.02, 60)
        h = 1e-6
        fd = np.zeros((2, 2))
        for c in range(2):
            dz = np.zeros(2)
            dz[c] = h
            xp, vp = alternating_euler(fld, (z0 + dz)[:1], (z0 + dz)[1:],
                                       0.0, 0.02, 60)
            xm, vm = alternating_euler(fld, (z0 - dz)[:1], (z0 - dz)[1:],
                                       0.0, 0.02, 60)
            fd[:, c] = (np.r_[xp[-1], vp[-1]] - np.r_[xm[-1], vm[-1]]) / (2 * h)
        assert np.max(np.abs(J - fd)) < 1e-8


class TestFlowDistance:
    def test_identical(self):
        pts = grid_points(np.array([[-1, 1], [-1, 1]]), 3)
        pr = FlowProbe(pts, pts.copy(), np.tile(np.eye(2), (len(pts), 1, 1)))
        assert flow_distance(pr, pr) == (0.0, 0.0)

    def test_constant_translation(self):
        pts = grid_points(np.array([[-1, 1], [-1, 1]]), 3)
        jac = np.tile(np.eye(2), (len(pts), 1, 1))
        a = FlowProbe(pts, pts.copy(), jac.copy())
        b = FlowProbe(pts, pts + 0.3, jac.copy())
        c0, c1 = flow_distance(a, b)
        assert c0 == pytest.approx(0.3 * np.sqrt(2))
        assert c1 == pytest.approx(c0)

    def test_identity_vs_doubling(self):
        pts = grid_points(np.array([[-1, 1], [-1, 1]]), 5)
        a = FlowProbe(pts, pts.copy(), np.tile(np.eye(2), (len(pts), 1, 1)))
        b = FlowProbe(pts, 2 * pts, np.tile(2 * np.eye(2), (len(pts), 1, 1)))
        c0, c1 = flow_distance(a, b)
        assert c0 == pytest.approx(np.sqrt(2))
        assert c1 == pytest.approx(np.sqrt(2) + 1.0)

    def test_csv_output(self, tmp_path):
        pts = grid_points(np.array([[-1, 1], [-1, 1]]), 2)
        pr = FlowProbe(pts, 2 * pts, np.tile(np.eye(2), (len(pts), 1, 1)))
        path = tmp_path / "probe.csv"
        pr.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == ("point_0,point_1,value_0,value_1,"
                          "jac_00,jac_01,jac_10,jac_11")


class TestGronwall:
    def test_linear_growth(self):
        assert gronwall_bound(0.0, 1.0, 0.0, 3.0) == pytest.approx(3.0)

    def test_pure_exponential(self):
        assert gronwall_bound(1.0, 0.0, 1.0, 1.0) == pytest.approx(np.e)

    def test_initial_condition(self):
        assert gronwall_bound(2.0, 5.0, 0.7, 0.0) == pytest.approx(0.7)

    def test_negative_time_rejected(self):
        with pytest.raises(InputError):
            gronwall_bound(1.0, 1.0, 1.0, -0.1)


class TestPerturbation:
    def test_eps_zero_is_linear_flow(self):
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        out = perturbation_first_order(A, lambda z, t: z ** 2,
                                       np.array([1.0, 0.0]), 0.0, np.pi / 2,
                                       steps=500)
        assert np.allclose(out, [0.0, -1.0], atol=1e-9)

    def test_zero_perturbation(self):
        A = np.array([[-0.5]])
        out = perturbation_first_order(A, lambda z, t: np.zeros(1),
                                       np.array([2.0]), 0.7, 1.0, steps=400)
        assert out[0] == pytest.approx(2.0 * np.exp(-0.5), abs=1e-9)

    def test_constant_forcing(self):
        A = np.zeros((1, 1))
        out = perturbation_first_order(A, lambda z, t: np.ones(1),
                                       np.array([0.0]), 0.1, 2.0, steps=200)
        assert out[0] == pytest.approx(0.2, abs=1e-10)

    def test_degenerate_flag_for_state_free_perturbation(self):
        A = np.array([[-1.0]])
        study = perturbation_order_check(
            A, lambda z, t: np.ones(1), lambda z, t: np.zeros((1, 1)),
            np.array([[0.5, 1.0]]), [0.1, 0.05, 0.025], 1.0, steps=300)
        assert study.degenerate

    def test_quadratic_perturbation_slope(self):
        A = np.array([[-1.0]])
        study = perturbation_order_check(
            A, lambda z, t: z ** 2, lambda z, t: np.array([[2.0 * z[0]]]),
            np.array([[0.5, 1.0]]), [0.1, 0.05, 0.025], 1.0, steps=400)
        assert 1.8 <= study.slope <= 2.2


class TestOrderStudy:
    def test_fit_recovers_slope(self):
        x = np.array([0.1, 0.05, 0.025])
        study = OrderStudy.fit(x, 3 * x ** 2, 3 * x ** 2)
        assert study.slope == pytest.approx(2.0, abs=1e-9)
        assert not study.degenerate

    def test_degenerate_detection(self):
        x = np.array([0.1, 0.05, 0.025])
        study = OrderStudy.fit(x, np.zeros(3), np.zeros(3))
        assert study.degenerate and np.isnan(study.slope)
