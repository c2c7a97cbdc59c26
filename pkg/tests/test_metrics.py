import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowforge.errors import InputError
from flowforge.langevin import GaussianDensity
from flowforge.metrics import (SampleCloud, gaussian_kl, gaussian_w2,
                               sliced_w1, talagrand_check, w1_1d)


class TestW1OneDim:
    def test_identical(self):
        a = np.array([0.3, -1.0, 2.0])
        assert w1_1d(a, a.copy()) == 0.0

    def test_point_masses(self):
        assert w1_1d(np.zeros(10), np.ones(10)) == pytest.approx(1.0)

    def test_gaussian_mean_shift(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=100_000)
        b = rng.normal(loc=0.5, size=100_000)
        assert w1_1d(a, b) == pytest.approx(0.5, abs=0.02)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            w1_1d(np.array([]), np.array([1.0]))

    def test_unequal_sizes_quantile_rule(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=2000)
        b = rng.normal(loc=1.0, size=3000)
        assert w1_1d(a, b) == pytest.approx(1.0, abs=0.1)

    @given(st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_metric_properties(self, seed):
        rng = np.random.default_rng(seed)
        n = 64
        a = rng.normal(size=n)
        b = rng.normal(size=n) * 1.4
        c = rng.normal(size=n) + 0.3
        assert w1_1d(a, b) == w1_1d(b, a)
        assert w1_1d(a, b) <= w1_1d(a, c) + w1_1d(c, b) + 1e-12

    @given(st.floats(-5.0, 5.0), st.integers(0, 10 ** 6))
    @settings(max_examples=30, deadline=None)
    def test_shift_identity(self, shift, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=50)
        assert w1_1d(a, a + shift) == pytest.approx(abs(shift), abs=1e-12)

    def test_lipschitz_pushforward(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a = rng.normal(size=100)
            b = rng.normal(size=100) + rng.uniform(-1, 1)
            lcap = rng.uniform(0.1, 4.0)
            g = lambda z: lcap * np.tanh(z)  # noqa: E731
            assert w1_1d(g(a), g(b)) <= lcap * w1_1d(a, b) + 1e-12


class TestSlicedW1:
    def test_identical(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(500, 3))
        assert sliced_w1(a, a.copy(), n_directions=16, seed=1) == 0.0

    def test_translation_matches_projection_average(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(20_000, 2))
        u = np.array([0.8, -0.6])
        got = sliced_w1(a, a + u, n_directions=256, seed=3)
        from flowforge.metrics import unit_directions
        dirs = unit_directions(2, 256, 3)
        expected = np.mean(np.abs(dirs @ u))
        assert got == pytest.approx(expected, abs=0.01)

    def test_rotation_invariance(self):
        # rotating both clouds only reshuffles the projection directions;
        # tolerance covers the direction-sampling noise (3 sigma of the
        # difference of two 512-direction estimates with SD ~ 0.21)
        rng = np.random.default_rng(4)
        a = rng.normal(size=(20_000, 2)) @ np.diag([1.0, 0.3])
        b = rng.normal(size=(20_000, 2)) @ np.diag([0.5, 1.2])
        theta = 0.7
        R = np.array([[np.cos(theta), -np.sin(theta)],
                      [np.sin(theta), np.cos(theta)]])
        d1 = sliced_w1(a, b, n_directions=512, seed=5)
        d2 = sliced_w1(a @ R.T, b @ R.T, n_directions=512, seed=6)
        assert d1 == pytest.approx(d2, abs=0.045)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(200, 2))
        b = rng.normal(size=(200, 2))
        assert sliced_w1(a, b, seed=11) == sliced_w1(a, b, seed=11)

    def test_uniform_closeness_bound(self):
        rng = np.random.default_rng(8)
        cloud = rng.normal(size=(400, 3))
        eps1 = 0.2
        pert = rng.normal(size=(400, 3))
        pert *= eps1 / np.linalg.norm(pert, axis=1, keepdims=True)
        assert sliced_w1(cloud, cloud + pert, seed=9) <= eps1 + 1e-12


class TestGaussianClosedForms:
    def test_kl_self(self):
        p = GaussianDensity(np.array([0.4]), np.array([[1.7]]))
        assert gaussian_kl(p, p) == pytest.approx(0.0, abs=1e-14)

    def test_kl_halved_variance(self):
        p = GaussianDensity(np.zeros(1), np.array([[0.5]]))
        q = GaussianDensity.standard(1)
        assert gaussian_kl(p, q) == pytest.approx(
            0.5 * (0.5 - 1 - np.log(0.5)), abs=1e-12)

    def test_kl_block_additivity(self):
        p1 = GaussianDensity(np.array([0.2]), np.array([[0.6]]))
        p2 = GaussianDensity(np.array([-0.1]), np.array([[1.4]]))
        joint_p = GaussianDensity(np.r_[p1.mean, p2.mean],
                                  np.block([[p1.cov, np.zeros((1, 1))],
                                            [np.zeros((1, 1)), p2.cov]]))
        q1 = GaussianDensity.standard(1)
        joint_q = GaussianDensity.standard(2)
        assert gaussian_kl(joint_p, joint_q) == pytest.approx(
            gaussian_kl(p1, q1) + gaussian_kl(p2, q1), abs=1e-12)

    def test_w2_mean_shift(self):
        p = GaussianDensity(np.array([3.0, 0.0]), np.eye(2))
        q = GaussianDensity.standard(2)
        assert gaussian_w2(p, q) == pytest.approx(3.0, abs=1e-10)


class TestTalagrand:
    def test_standard_is_tight_zero(self):
        rep = talagrand_check(GaussianDensity.standard(2), n_samples=5000,
                              seed=0)
        assert rep.kl == pytest.approx(0.0, abs=1e-12)
        assert rep.ok

    def test_mean_shift_near_equality(self):
        mu = 0.8
        rep = talagrand_check(GaussianDensity(np.array([mu]), np.eye(1)),
                              n_samples=40_000, seed=1)
        assert rep.kl == pytest.approx(mu ** 2 / 2, abs=1e-12)
        assert rep.w1_sampled == pytest.approx(mu, abs=0.02)
        assert abs(rep.margin) < 0.1
        assert rep.ok

    def test_inflated_variance_positive_margin(self):
        rep = talagrand_check(GaussianDensity(np.zeros(2), 4 * np.eye(2)),
                              n_samples=20_000, seed=2)
        assert rep.kl == pytest.approx(2 * 0.5 * (4 - 1 - np.log(4)),
                                       abs=1e-12)
        assert rep.margin > 0
        assert rep.ok


class TestSampleCloud:
    def test_validation(self):
        with pytest.raises(InputError):
            SampleCloud(np.array([[1.0, 2.0]]))
        with pytest.raises(InputError):
            SampleCloud(np.array([[1.0], [np.inf]]))

    def test_csv(self, tmp_path):
        cloud = SampleCloud(np.array([[1.0, 2.0], [3.0, 4.0]]), seed=0)
        path = tmp_path / "cloud.csv"
        cloud.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "x_0,v_0"
        assert len(lines) == 3
