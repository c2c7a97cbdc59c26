"""Verification suites: each runs a parameter grid, records the measured
quantity next to its theoretical bound or expected slope, and reports
pass/fail per row so the output is self-auditing."""

from __future__ import annotations

import numpy as np

from . import henon, langevin, metrics, odeflow, pipeline
from .errors import ConfigError
from .multipoly import Polynomial


def _summary(name, rows, passed, **extra):
    out = {"suite": name, "rows": rows, "passed": bool(passed)}
    out.update(extra)
    return out


def suite_conditioning(kappas=(1.0, 2.0, 4.0), gammas=(0.5, 1.0, 1.5),
                       d=1, t1=20.0, steps=1500, seed=0):
    """Integrated Jacobian singular values against the closed-form bounds."""
    rows = []
    for kappa in kappas:
        for gamma in gammas:
            sigma0 = np.eye(2 * d) / kappa
            rep = langevin.jacobian_flow(sigma0, gamma, kappa, t1, steps=steps)
            rows.append({"kappa": kappa, "gamma": gamma,
                         "sv_min": rep.sv_min, "sv_max": rep.sv_max,
                         "lower_bound": rep.lower, "upper_bound": rep.upper,
                         "cond_bound": rep.cond_bound, "pass": rep.ok})
    return _summary("conditioning", rows, all(r["pass"] for r in rows))


def suite_variance(gammas=(0.5, 1.0, 1.5), ds=(1, 2),
                   ts=(0.5, 1.0, 2.0, 5.0, 10.0), tol=1e-8, seed=0):
    """Closed-form proxy vs fixed-step integration of the covariance ODE."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    rows = []
    ts = sorted(ts)
    for gamma in gammas:
        for d in ds:
            raw = rng.standard_normal((2 * d, 2 * d))
            sigma0 = raw @ raw.T / (2 * d) + 0.5 * np.eye(2 * d)
            integs = langevin.variance_proxy_integrated(sigma0, gamma, ts)
            for t, integ in zip(ts, integs):
                closed = langevin.variance_proxy(sigma0, gamma, t)
                diff = float(np.linalg.norm(closed - integ, 2))
                rows.append({"gamma": gamma, "d": d, "t": t,
                             "diff_norm": diff, "tol": tol,
                             "pass": diff <= tol})
    return _summary("variance", rows, all(r["pass"] for r in rows))


def default_quadratic_hamiltonian():
    """Generic quadratic test Hamiltonian in one spatial dimension."""
    return Polynomial(2, {(2, 0): 0.7, (0, 2): 0.5, (1, 1): 0.15})


def suite_henon_order(taus=(0.2, 0.1, 0.05, 0.025), gamma=1.0,
                      half_width=2.0, grid=3, rk_steps=1500,
                      lo=1.8, hi=2.2, seed=0):
    """Chunk-approximation order: C1 gap vs tau, expected slope 2."""
    H = default_quadratic_hamiltonian()
    box = np.array([[-half_width, half_width]] * 2)
    study = henon.verify_chunk_order(H, gamma, box, list(taus),
                                     grid=grid, rk_steps=rk_steps)
    rows = [{"tau": float(t), "c0": float(c0), "c1": float(c1)}
            for t, c0, c1 in zip(study.parameter, study.c0, study.c1)]
    ok = (not study.degenerate) and lo <= study.slope <= hi
    return _summary("henon-order", rows, ok, slope=study.slope,
                    expected_lo=lo, expected_hi=hi,
                    degenerate=study.degenerate)


def suite_euler_order(etas=(0.04, 0.02, 0.01, 0.005), tau=0.5, gamma=1.0,
                      half_width=1.5, grid=3, rk_steps=3000,
                      lo=0.8, hi=1.2, jac_tol=1e-8, seed=0):
    """Alternating-Euler order on the approximating system, plus the exact
    Jacobian-recurrence property against finite differences."""
    H = default_quadratic_hamiltonian()
    omega = henon.frequencies(1, max(H.degree(), 2))
    sys0 = henon.solve_coefficients(H, omega, gamma, tau)
    fld = henon.approximating_field(sys0)
    vf = fld.as_vector_field()
    box = np.array([[-half_width, half_width]] * 2)
    pts = odeflow.grid_points(box, grid)
    span = 2.0 * np.pi
    exact = odeflow.FlowProbe.from_map(
        lambda z: odeflow.integrate_with_jacobian(vf, z, 0.0, span, rk_steps),
        pts)
    c0s, c1s, eta_eff = [], [], []
    for eta in etas:
        n = max(1, int(round(span / eta)))
        ee = span / n
        eta_eff.append(ee)

        def emap(z, n=n, ee=ee):
            x, v, J = odeflow.alternating_euler_with_jacobian(
                fld, z[:1], z[1:], 0.0, ee, n)
            return np.concatenate([x, v]), J

        approx = odeflow.FlowProbe.from_map(emap, pts)
        c0, c1 = odeflow.flow_distance(approx, exact)
        c0s.append(c0)
        c1s.append(c1)
    study = odeflow.OrderStudy.fit(np.asarray(eta_eff), c0s, c1s, use="c1")

    # exact-recurrence property: augmented run equals finite differences
    h = 1e-6
    worst = 0.0
    for z in pts[:5]:
        _, _, J = odeflow.alternating_euler_with_jacobian(
            fld, z[:1], z[1:], 0.0, 0.02, 50)
        fd = np.zeros((2, 2))
        for col in range(2):
            dz = np.zeros(2)
            dz[col] = h
            xp, vp = odeflow.alternating_euler(
                fld, (z + dz)[:1], (z + dz)[1:], 0.0, 0.02, 50)
            xm, vm = odeflow.alternating_euler(
                fld, (z - dz)[:1], (z - dz)[1:], 0.0, 0.02, 50)
            fd[:, col] = (np.concatenate([xp[-1], vp[-1]])
                          - np.concatenate([xm[-1], vm[-1]])) / (2 * h)
        worst = max(worst, float(np.max(np.abs(J - fd))))
    rows = [{"eta": float(e), "c0": float(c0), "c1": float(c1)}
            for e, c0, c1 in zip(eta_eff, c0s, c1s)]
    ok = ((not study.degenerate) and lo <= study.slope <= hi
          and worst <= jac_tol)
    return _summary("euler-order", rows, ok, slope=study.slope,
                    expected_lo=lo, expected_hi=hi,
                    jacobian_recurrence_gap=worst, jac_tol=jac_tol)


def suite_perturbation_order(eps_list=(0.05, 0.025, 0.0125), t=1.0,
                             half_width=1.0, grid=3, steps=600,
                             lo=1.8, hi=2.2, seed=0):
    """First-order perturbation map vs the true flow: expected slope 2 on
    the cubic-perturbed harmonic oscillator."""
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def g(z, tt):
        return z ** 3

    def dg(z, tt):
        return np.diag(3.0 * z ** 2)

    box = np.array([[-half_width, half_width]] * 2)
    study = odeflow.perturbation_order_check(A, g, dg, box, list(eps_list),
                                             t, steps=steps, grid=grid)
    rows = [{"eps": float(e), "c0": float(c0), "c1": float(c1)}
            for e, c0, c1 in zip(study.parameter, study.c0, study.c1)]
    ok = (not study.degenerate) and lo <= study.slope <= hi
    return _summary("perturbation-order", rows, ok, slope=study.slope,
                    expected_lo=lo, expected_hi=hi,
                    degenerate=study.degenerate)


def suite_lyapunov(sigma_x=0.5, gamma=1.0, t_max=30.0, n_times=100,
                   slack=1e-6, seed=0):
    """Decay of the convergence functional along the analytic path."""
    p0 = pipeline.pad_source(None, np.array([[sigma_x]]))
    l0 = langevin.lyapunov_gaussian(p0)
    rows = []
    for t in np.linspace(0.0, t_max, n_times):
        pt = langevin.gaussian_evolve(p0, gamma, t)
        lt = langevin.lyapunov_gaussian(pt)
        bound = l0 * np.exp(-t / 10.0) * (1.0 + slack)
        rows.append({"t": float(t), "lyapunov": float(lt),
                     "bound": float(bound), "pass": lt <= bound})
    return _summary("lyapunov", rows, all(r["pass"] for r in rows),
                    lyapunov_initial=l0)


def _random_spd(rng, d, scale=1.0):
    raw = rng.standard_normal((d, d))
    return scale * (raw @ raw.T / d + 0.2 * np.eye(d))


def suite_convolution(n_trials=50, max_d=3, margin=-1e-10, seed=0):
    """Hessian sandwich for Gaussian convolutions on random instances;
    every third noise covariance is rank-deficient."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    rows = []
    for trial in range(n_trials):
        d = int(rng.integers(1, max_d + 1))
        sigma_p = _random_spd(rng, d)
        sigma1 = sigma_p + _random_spd(rng, d, 0.5)
        eig_min = float(np.min(np.linalg.eigvalsh(sigma_p)))
        shrink = _random_spd(rng, d, 0.2)
        shrink *= 0.5 * eig_min / max(np.linalg.norm(shrink, 2), 1e-12)
        sigma2 = sigma_p - shrink
        if trial % 3 == 0 and d > 1:
            u = rng.standard_normal((d, 1))
            sigma = u @ u.T
        else:
            sigma = _random_spd(rng, d)
        rep = langevin.convolution_hessian_check(sigma_p, sigma, sigma1,
                                                 sigma2, margin=margin)
        rows.append({"trial": trial, "d": d,
                     "lower_margin": rep.lower_margin,
                     "upper_margin": rep.upper_margin, "pass": rep.ok})
    return _summary("convolution", rows, all(r["pass"] for r in rows))


def suite_wasserstein(n_instances=100, n_mc=1_000_000, tol=1e-12, seed=0):
    """Metric and pushforward properties of the 1D distance, plus the
    truncation-radius tail bound against Monte Carlo."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    rows = []

    worst_sym, worst_tri, worst_shift = 0.0, 0.0, 0.0
    worst_lip, worst_unif = 0.0, 0.0
    for _ in range(n_instances):
        n = int(rng.integers(50, 200))
        a = rng.standard_normal(n) * rng.uniform(0.5, 2.0)
        b = rng.standard_normal(n) + rng.uniform(-1.0, 1.0)
        c = rng.standard_normal(n) * rng.uniform(0.5, 1.5)
        dab = metrics.w1_1d(a, b)
        worst_sym = max(worst_sym, abs(dab - metrics.w1_1d(b, a)))
        worst_tri = max(worst_tri, dab - (metrics.w1_1d(a, c)
                                          + metrics.w1_1d(c, b)))
        shift = float(rng.uniform(-2.0, 2.0))
        worst_shift = max(worst_shift,
                          abs(metrics.w1_1d(a, a + shift) - abs(shift)))
        # Lipschitz pushforward through an L-Lipschitz map
        lcap = float(rng.uniform(0.2, 3.0))
        ga = lcap * np.tanh(a)
        gb = lcap * np.tanh(b)
        worst_lip = max(worst_lip, metrics.w1_1d(ga, gb) - lcap * dab)
        # uniform-closeness pushforward in 2 dims
        cloud = rng.standard_normal((n, 2))
        eps1 = float(rng.uniform(0.01, 0.5))
        pert = rng.standard_normal((n, 2))
        pert *= eps1 / np.maximum(np.linalg.norm(pert, axis=1,
                                                 keepdims=True), 1e-12)
        sw = metrics.sliced_w1(cloud, cloud + pert, n_directions=16,
                               seed=int(rng.integers(0, 2 ** 31)))
        worst_unif = max(worst_unif, sw - eps1)
    rows.append({"property": "symmetry", "worst_violation": worst_sym,
                 "tol": 0.0, "pass": worst_sym == 0.0})
    rows.append({"property": "triangle", "worst_violation": worst_tri,
                 "tol": tol, "pass": worst_tri <= tol})
    rows.append({"property": "shift_identity", "worst_violation": worst_shift,
                 "tol": tol, "pass": worst_shift <= tol})
    rows.append({"property": "lipschitz_pushforward",
                 "worst_violation": worst_lip, "tol": tol,
                 "pass": worst_lip <= tol})
    rows.append({"property": "uniform_pushforward",
                 "worst_violation": worst_unif, "tol": tol,
                 "pass": worst_unif <= tol})

    # truncation tail bound vs Monte Carlo (3 sigma), dim 2
    dim = 2
    radius = pipeline.choose_radius(1e-3, dim)
    quad_val = pipeline.gaussian_tail_mass(radius, dim)
    z = rng.standard_normal((n_mc, dim))
    norms = np.linalg.norm(z, axis=1)
    contrib = 2.0 * np.where(norms > radius, norms, 0.0)
    mc = float(np.mean(contrib))
    mc_sd = float(np.std(contrib) / np.sqrt(n_mc))
    gap = abs(quad_val - mc)
    rows.append({"property": "radius_tail_mc", "worst_violation": gap,
                 "tol": 3.0 * mc_sd, "pass": gap <= 3.0 * mc_sd})
    return _summary("wasserstein", rows, all(r["pass"] for r in rows),
                    radius=radius, tail_quadrature=quad_val, tail_mc=mc)


SUITES = {
    "conditioning": suite_conditioning,
    "variance": suite_variance,
    "henon-order": suite_henon_order,
    "euler-order": suite_euler_order,
    "perturbation-order": suite_perturbation_order,
    "lyapunov": suite_lyapunov,
    "convolution": suite_convolution,
    "wasserstein": suite_wasserstein,
}


def run_suite(name, **params):
    if name not in SUITES:
        raise ConfigError(f"unknown suite {name!r}; available: "
                          + ", ".join(sorted(SUITES)))
    return SUITES[name](**params)
