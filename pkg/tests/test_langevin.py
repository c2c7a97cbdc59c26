import numpy as np
import pytest

from flowforge.errors import InputError, PreconditionError
from flowforge.langevin import (GaussianDensity, LangevinParams, block_exp,
                                convolution_hessian_check, drift_matrix,
                                gaussian_evolve, gaussian_kl_to_standard,
                                hessian_gap_integral_bound, jacobian_flow,
                                langevin_field, lyapunov_gaussian,
                                sde_simulate, variance_proxy,
                                variance_proxy_integrated)
from flowforge.odeflow import alternating_euler, PairField


class TestParams:
    def test_friction_range(self):
        LangevinParams(1, 1.0)
        for bad in (0.0, 2.0, -0.5, 2.5):
            with pytest.raises(InputError):
                LangevinParams(1, bad)

    def test_covariance_validation(self):
        with pytest.raises(InputError):
            GaussianDensity(np.zeros(2), np.array([[1.0, 0.5], [0.2, 1.0]]))
        with pytest.raises(InputError):
            GaussianDensity(np.zeros(2), -np.eye(2))


class TestBlockExp:
    def test_frictionless_rotation(self):
        E = block_exp(0.0, np.pi / 2)
        assert np.allclose(E, [[0.0, 1.0], [-1.0, 0.0]], atol=1e-14)

    def test_zero_time_identity(self):
        assert np.allclose(block_exp(1.3, 0.0), np.eye(2), atol=0)

    def test_norm_bound_gamma1(self):
        # spectral norm <= sqrt((2+g)/(2-g)) * exp(-g t / 2)
        E = block_exp(1.0, 10.0)
        assert np.linalg.norm(E, 2) <= np.sqrt(3.0) * np.exp(-5.0)

    @pytest.mark.parametrize("gamma", [0.3, 0.9, 1.7])
    def test_norm_bound_random_times(self, gamma):
        bound_c = np.sqrt((2 + gamma) / (2 - gamma))
        for t in np.linspace(0.0, 12.0, 25):
            nrm = np.linalg.norm(block_exp(gamma, t), 2)
            assert nrm <= bound_c * np.exp(-gamma * t / 2) + 1e-12

    def test_contraction(self):
        # the drift block is dissipative: the exponential never expands
        for gamma in (0.5, 1.0, 1.5):
            for t in np.linspace(0, 8, 17):
                assert np.linalg.norm(block_exp(gamma, t), 2) <= 1.0 + 1e-12

    def test_matches_series(self):
        from scipy.linalg import expm
        for gamma in (0.25, 1.0, 1.9):
            for t in (0.3, 2.0, 7.5):
                B = np.array([[0.0, 1.0], [-1.0, -gamma]])
                assert np.allclose(block_exp(gamma, t), expm(B * t), atol=1e-12)


class TestVarianceProxy:
    def test_identity_stationary(self):
        for t in (0.0, 1.0, 7.0):
            assert np.allclose(variance_proxy(np.eye(4), 1.0, t), np.eye(4),
                               atol=1e-14)

    def test_initial_condition(self):
        s0 = np.array([[2.0, 0.3], [0.3, 0.8]])
        assert np.allclose(variance_proxy(s0, 0.7, 0.0), s0, atol=1e-14)

    def test_decay_bound(self):
        kappa = 2.0
        s0 = kappa * np.eye(2)
        st = variance_proxy(s0, 1.0, 5.0)
        assert np.linalg.norm(st - np.eye(2), 2) <= (kappa - 1) * 3.0 * np.exp(-5.0)

    def test_matches_integrated_ode(self):
        rng = np.random.default_rng(0)
        for gamma in (0.5, 1.0, 1.5):
            for d in (1, 2):
                raw = rng.normal(size=(2 * d, 2 * d))
                s0 = raw @ raw.T / (2 * d) + 0.3 * np.eye(2 * d)
                integ = variance_proxy_integrated(s0, gamma, [0.5, 2.0, 10.0])
                for t, si in zip([0.5, 2.0, 10.0], integ):
                    closed = variance_proxy(s0, gamma, t)
                    assert np.linalg.norm(closed - si, 2) < 1e-8

    def test_inverse_sandwich(self):
        # I <= Sigma_t^{-1} <= (1 + (kappa-1)||e^{Bt}||^2) I
        kappa = 3.0
        s0 = np.eye(2) / kappa
        for gamma in (0.5, 1.0, 1.5):
            for t in np.linspace(0.0, 10.0, 21):
                st = variance_proxy(s0, gamma, t)
                eig = np.linalg.eigvalsh(np.linalg.inv(st))
                cap = 1 + (kappa - 1) * np.linalg.norm(block_exp(gamma, t), 2) ** 2
                assert eig.min() >= 1.0 - 1e-10
                assert eig.max() <= cap + 1e-10


class TestGaussianEvolve:
    def test_stationary(self):
        p = GaussianDensity.standard(4)
        q = gaussian_evolve(p, 1.0, 3.0)
        assert np.allclose(q.mean, 0.0, atol=0) and np.allclose(q.cov, np.eye(4),
                                                                atol=1e-14)

    def test_frictionless_mean_rotation(self):
        p = GaussianDensity(np.array([1.0, 0.0]), np.eye(2))
        q = gaussian_evolve(p, 1e-14, np.pi / 2)
        assert np.allclose(q.mean, [0.0, -1.0], atol=1e-7)

    def test_long_time_convergence(self):
        p = GaussianDensity(np.array([0.5, -0.2]), np.diag([0.4, 1.5]))
        q = gaussian_evolve(p, 1.0, 20.0)
        drop = np.linalg.norm(q.cov - np.eye(2), 2) \
            / np.linalg.norm(p.cov - np.eye(2), 2)
        assert drop < 1e-7

    def test_flow_map_transports_gaussian(self):
        # integrating the affine field along the path reproduces the
        # closed-form mean/covariance evolution
        from flowforge.odeflow import VectorField, integrate
        p0 = GaussianDensity(np.array([0.3, -0.1]), np.diag([0.6, 1.0]))
        gamma, t_end, steps = 1.0, 2.0, 400

        def rhs(z, t):
            pt = gaussian_evolve(p0, gamma, t)
            si = np.linalg.inv(pt.cov)
            C = drift_matrix(1, gamma)
            return C @ (z - si @ (z - pt.mean))

        vf = VectorField(2, rhs)
        rng = np.random.default_rng(1)
        probes = p0.sample(12, rng)
        out = np.array([integrate(vf, z, 0.0, t_end, steps) for z in probes])
        pt = gaussian_evolve(p0, gamma, t_end)
        # the map is affine, so transported exact moments must match:
        # fit the affine map from probes and push the exact moments through
        A, resid, *_ = np.linalg.lstsq(
            np.hstack([probes, np.ones((len(probes), 1))]), out, rcond=None)
        M, b = A[:2].T, A[2]
        mean_push = M @ p0.mean + b
        cov_push = M @ p0.cov @ M.T
        assert np.allclose(mean_push, pt.mean, atol=1e-6)
        assert np.allclose(cov_push, pt.cov, atol=1e-6)


class TestLangevinField:
    def test_zero_at_stationarity(self):
        fld = langevin_field(GaussianDensity.standard(2), 1.0)
        for z in (np.zeros(2), np.array([1.0, -2.0])):
            assert np.allclose(fld.rhs(z, 0.0), 0.0, atol=1e-14)

    def test_hand_example(self):
        p = GaussianDensity(np.zeros(2), 2 * np.eye(2))
        fld = langevin_field(p, 1.0)
        out = fld.rhs(np.array([1.0, 0.0]), 0.0)
        assert np.allclose(out, [0.0, -0.5], atol=1e-14)

    def test_jacobian_matches_fd(self):
        p = GaussianDensity(np.array([0.1, 0.2]), np.diag([0.5, 1.2]))
        fld = langevin_field(p, 0.8)
        z = np.array([0.3, -0.4])
        J = fld.jacobian(z, 0.0)
        h = 1e-6
        for c in range(2):
            dz = np.zeros(2)
            dz[c] = h
            fd = (fld.rhs(z + dz, 0.0) - fld.rhs(z - dz, 0.0)) / (2 * h)
            assert np.max(np.abs(J[:, c] - fd)) < 1e-7


class TestJacobianFlow:
    def test_kappa_one_identity(self):
        rep = jacobian_flow(np.eye(2), 1.0, 1.0, 10.0, steps=500)
        assert abs(rep.sv_min - 1.0) < 1e-10 and abs(rep.sv_max - 1.0) < 1e-10
        assert rep.cond_bound == pytest.approx(1.0)

    def test_kappa_two_bounds(self):
        rep = jacobian_flow(np.eye(2) / 2.0, 1.0, 2.0, 20.0, steps=2000)
        assert rep.cond_bound == pytest.approx(256.0)
        assert rep.lower == pytest.approx(1.0 / 16.0)
        assert rep.sv_min >= 1.0 / 16.0 and rep.sv_max <= 16.0
        assert rep.ok

    def test_precondition_failure(self):
        with pytest.raises(PreconditionError):
            jacobian_flow(2.0 * np.eye(2), 1.0, 2.0, 1.0, steps=10)

    def test_integral_bound_formula(self):
        assert hessian_gap_integral_bound(2.0, 1.0) == pytest.approx(
            2.0 * np.log(4.0))

    def test_hessian_gap_integral_numeric(self):
        # time integral of ||C H_s|| stays below the closed-form bound
        gamma, kappa = 1.0, 2.0
        s0 = np.eye(2) / kappa
        C = drift_matrix(1, gamma)
        ts = np.linspace(0.0, 40.0, 4001)
        vals = []
        for t in ts:
            st = variance_proxy(s0, gamma, t)
            H = np.linalg.inv(st) - np.eye(2)
            vals.append(np.linalg.norm(C @ H, 2))
        integral = np.trapezoid(vals, ts)
        assert integral <= hessian_gap_integral_bound(kappa, gamma)


class TestConvolutionSandwich:
    def test_standard_pair_tight(self):
        rep = convolution_hessian_check(np.eye(2), np.eye(2), np.eye(2),
                                        np.eye(2))
        assert np.allclose(rep.hessian, 0.5 * np.eye(2), atol=1e-14)
        assert rep.ok
        assert rep.lower_margin == pytest.approx(0.0, abs=1e-14)
        assert rep.upper_margin == pytest.approx(0.0, abs=1e-14)

    def test_degenerate_noise(self):
        rep = convolution_hessian_check(np.diag([1.0, 2.0]), np.zeros((2, 2)),
                                        2 * np.eye(2), np.eye(2))
        assert rep.ok

    def test_hand_example(self):
        rep = convolution_hessian_check(np.diag([1.0, 2.0]), np.eye(2),
                                        2 * np.eye(2), np.eye(2))
        assert np.allclose(rep.hessian, np.diag([1 / 2, 1 / 3]), atol=1e-14)
        assert rep.ok


class TestLyapunov:
    def test_stationary_zero(self):
        assert lyapunov_gaussian(GaussianDensity.standard(2)) == pytest.approx(
            0.0, abs=1e-14)

    def test_kl_closed_form(self):
        p = GaussianDensity(np.zeros(2), 0.5 * np.eye(2))
        assert gaussian_kl_to_standard(p) == pytest.approx(
            2 * 0.5 * (0.5 - 1 - np.log(0.5)), abs=1e-10)

    def test_decay_along_path(self):
        p0 = GaussianDensity(np.zeros(2), np.diag([0.5, 1.0]))
        l0 = lyapunov_gaussian(p0)
        for t in np.linspace(0.0, 30.0, 40):
            lt = lyapunov_gaussian(gaussian_evolve(p0, 1.0, t))
            assert lt <= l0 * np.exp(-t / 10.0) * (1 + 1e-6)


class TestSimulation:
    def test_stationary_covariance(self):
        n = 40000
        cloud = sde_simulate(lambda x: x, gamma=1.0, eta=0.01, steps=600,
                             n_particles=n, seed=42, d=1)
        cov = np.cov(cloud.T)
        assert np.max(np.abs(cov - np.eye(2))) < 3.0 / np.sqrt(n) + 0.02

    def test_matches_variance_proxy(self):
        n, eta, t_end = 60000, 0.002, 1.0
        p0 = GaussianDensity(np.zeros(2), np.diag([0.5, 1.0]))
        cloud = sde_simulate(lambda x: x, gamma=1.0, eta=eta,
                             steps=int(t_end / eta), n_particles=n, seed=3,
                             d=1, initial=p0)
        target = variance_proxy(p0.cov, 1.0, t_end)
        cov = np.cov(cloud.T)
        assert np.max(np.abs(cov - target)) < 3.0 / np.sqrt(n) + 10 * eta

    def test_noise_off_is_alternating_euler(self):
        # the position advances first, then the velocity sees the fresh
        # position: the alternating update with the roles swapped
        gamma, eta, steps = 0.5, 0.05, 40
        init = np.array([[1.0, 0.5]])
        cloud = sde_simulate(lambda x: x, gamma=gamma, eta=eta, steps=steps,
                             n_particles=1, seed=0, d=1, initial=init,
                             noise=False)
        fld = PairField(1, f=lambda vel, pos, t: -gamma * vel - pos,
                        g=lambda vel, pos, t: vel)
        vel_out, pos_out = alternating_euler(fld, init[0, 1:], init[0, :1],
                                             0.0, eta, steps)
        assert np.allclose(cloud[0], np.r_[pos_out[-1], vel_out[-1]],
                           atol=1e-12)

    def test_deterministic_given_seed(self):
        a = sde_simulate(lambda x: x, 1.0, 0.01, 50, 100, seed=9, d=2)
        b = sde_simulate(lambda x: x, 1.0, 0.01, 50, 100, seed=9, d=2)
        assert np.array_equal(a, b)

    def test_step_constraint(self):
        with pytest.raises(InputError):
            sde_simulate(lambda x: x, 1.0, 1.5, 10, 10, seed=0, d=1)
