"""End-to-end construction: pad the source with a Gaussian velocity block,
walk the analytic Gaussian path, solve one coefficient system per time
chunk, discretize every chunk into coupling blocks, and measure closeness
to the reference inverse flow."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate as sp_integrate

from .coupling import CouplingNetwork, discretize_chunk
from .errors import InputError, PreconditionError
from .henon import frequencies, solve_coefficients
from .langevin import (GaussianDensity, LangevinParams, conditioning_bounds,
                       drift_matrix, gaussian_evolve, lyapunov_gaussian)
from .metrics import sliced_w1, w1_1d
from .multipoly import Polynomial
from .odeflow import FlowProbe, flow_distance, grid_points


def choose_time(eps1, l0):
    """Horizon phi = -10 ln(eps1) + ln 2 + ln(L0), floored at 1."""
    if not 0.0 < eps1 < 1.0:
        raise InputError("eps1 must lie in (0, 1)")
    if l0 < 0.0:
        raise InputError("L0 must be non-negative")
    if l0 == 0.0:
        return 1.0
    return max(1.0, -10.0 * math.log(eps1) + math.log(2.0) + math.log(l0))


def gaussian_tail_mass(radius, dim):
    """2 E[||z|| 1{||z|| > R}] for a standard Gaussian in ``dim`` dimensions,
    by quadrature of the chi-distribution integral."""
    k = dim
    log_norm = - (k / 2.0 - 1.0) * math.log(2.0) - math.lgamma(k / 2.0)

    def integrand(r):
        return math.exp(k * math.log(r) - r * r / 2.0 + log_norm)

    val, _ = sp_integrate.quad(integrand, radius, np.inf)
    return 2.0 * val


def choose_radius(delta, dim, r_min=0.5, r_max=40.0, ratio=1.05):
    """Smallest radius on a geometric grid whose Gaussian tail mass bound is
    below delta."""
    if delta <= 0:
        raise InputError("delta must be positive")
    r = r_min
    while r <= r_max:
        if gaussian_tail_mass(r, dim) < delta:
            return r
        r *= ratio
    return r_max


def chunk_hamiltonian(p_t):
    """Quadratic log-density gap of a Gaussian against the standard one:

        H(z) = -1/2 (z - mu)^T Sigma^{-1} (z - mu) + 1/2 ||z||^2

    with constants dropped (only gradients matter downstream)."""
    n = p_t.dim
    sigma_inv = np.linalg.inv(p_t.cov)
    Q = 0.5 * (np.eye(n) - sigma_inv)
    b = sigma_inv @ p_t.mean
    terms = {}
    for i in range(n):
        for l in range(i, n):
            c = Q[i, l] if i == l else Q[i, l] + Q[l, i]
            if c != 0.0:
                mi = [0] * n
                mi[i] += 1
                mi[l] += 1
                terms[tuple(mi)] = terms.get(tuple(mi), 0.0) + c
        if b[i] != 0.0:
            mi = tuple(1 if a == i else 0 for a in range(n))
            terms[mi] = terms.get(mi, 0.0) + b[i]
    return Polynomial(n, terms)


def pad_source(mu_x, sigma_x):
    """Gaussian-pad a source: N(mu, Sigma_x) x N(0, I_d) on phase space."""
    sigma_x = np.atleast_2d(np.asarray(sigma_x, dtype=float))
    d = sigma_x.shape[0]
    mu_x = np.zeros(d) if mu_x is None else np.atleast_1d(np.asarray(mu_x, dtype=float))
    mean = np.concatenate([mu_x, np.zeros(d)])
    cov = np.block([[sigma_x, np.zeros((d, d))],
                    [np.zeros((d, d)), np.eye(d)]])
    return GaussianDensity(mean, cov)


def source_kappa(sigma_x):
    """kappa from the source covariance; checks the I <= Sigma_x^{-1} side."""
    eig = np.linalg.eigvalsh(np.linalg.inv(np.atleast_2d(sigma_x)))
    if eig.min() < 1.0 - 1e-9:
        raise PreconditionError(
            f"source violates I <= -hessian(ln p): min inverse-covariance "
            f"eigenvalue {eig.min():.6f} < 1")
    return float(max(eig.max(), 1.0))


def affine_reference_maps(p0, gamma, phi, steps=4000):
    """Reference flow maps of the transport field along the Gaussian path.

    The field is affine in z, so each flow map is affine; one matrix ODE
    integration yields it exactly up to integrator error. Returns
    ((M_inv, b_inv), (M_fwd, b_fwd)) for the time-(phi -> 0) and
    time-(0 -> phi) maps.
    """
    n = p0.dim
    d = n // 2
    C = drift_matrix(d, gamma)

    def field_parts(t):
        pt = gaussian_evolve(p0, gamma, t)
        sigma_inv = np.linalg.inv(pt.cov)
        return C @ (np.eye(n) - sigma_inv), C @ (sigma_inv @ pt.mean)

    def run(reverse):
        M = np.eye(n)
        b = np.zeros(n)
        h = phi / steps
        s = 0.0

        def rhs(Mv, bv, sv):
            if reverse:
                A, a = field_parts(phi - sv)
                return -A @ Mv, -A @ bv - a
            A, a = field_parts(sv)
            return A @ Mv, A @ bv + a

        for _ in range(steps):
            k1M, k1b = rhs(M, b, s)
            k2M, k2b = rhs(M + 0.5 * h * k1M, b + 0.5 * h * k1b, s + 0.5 * h)
            k3M, k3b = rhs(M + 0.5 * h * k2M, b + 0.5 * h * k2b, s + 0.5 * h)
            k4M, k4b = rhs(M + h * k3M, b + h * k3b, s + h)
            M = M + (h / 6.0) * (k1M + 2.0 * k2M + 2.0 * k3M + k4M)
            b = b + (h / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            s += h
        return M, b

    return run(True), run(False)


@dataclass
class BuildConfig:
    d: int
    sigma_x: np.ndarray
    gamma: float
    epsilon: float = 0.1
    tau: float = 0.25
    eta: Optional[float] = None
    phi: Optional[float] = None
    radius: Optional[float] = None
    mu_x: Optional[np.ndarray] = None
    seed: int = 0
    probe_grid: Optional[int] = None
    probe_half_width: float = 2.0
    ref_steps: int = 4000

    def __post_init__(self):
        self.sigma_x = np.atleast_2d(np.asarray(self.sigma_x, dtype=float))
        if self.sigma_x.shape != (self.d, self.d):
            raise InputError("sigma_x shape does not match d")
        LangevinParams(self.d, self.gamma)
        if self.tau <= 0:
            raise InputError("tau must be positive")
        if self.eta is not None and self.eta <= 0:
            raise InputError("eta must be positive")

    def effective_eta(self, tau):
        return self.eta if self.eta is not None else tau * tau

    def grid_per_axis(self):
        if self.probe_grid is not None:
            return self.probe_grid
        return 21 if self.d == 1 else 5


@dataclass
class BuildReport:
    phi: float
    kappa: float
    radius: float
    tau: float
    eta: float
    chunks: int
    blocks: int
    henon_residual_max: float
    c0_error: float
    c1_error: float
    sv_min: float
    sv_max: float
    cond_worst: float
    cond_bound: float
    roundtrip_error: float
    inverse_pair_error: float
    lyapunov_initial: float
    w1: Optional[dict] = None
    chunk_residuals: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        out = {k: v for k, v in self.__dict__.items()
               if k not in ("chunk_residuals",)}
        if self.chunk_residuals is not None:
            out["chunk_residuals"] = [float(r) for r in self.chunk_residuals]
        return out


def build_network(cfg):
    """Construct the coupling network approximating the time-(phi -> 0)
    transport map of the padded source, plus its quality report.

    Chunks are walked from t = phi downward; each chunk freezes the path
    Hamiltonian at its midpoint, solves one coefficient system, and is
    discretized by the alternating Euler factorization.
    """
    d = cfg.d
    p0 = pad_source(cfg.mu_x, cfg.sigma_x)
    kappa = source_kappa(cfg.sigma_x)
    lower, upper = conditioning_bounds(kappa, cfg.gamma)
    lip_bound = upper
    eps1 = cfg.epsilon / (2.0 * lip_bound + 1.0)
    l0 = lyapunov_gaussian(p0)
    phi = cfg.phi if cfg.phi is not None else choose_time(min(eps1, 0.5), l0)
    radius = cfg.radius if cfg.radius is not None else choose_radius(
        min(eps1, 0.1), 2 * d)
    n_chunks = max(1, int(round(phi / cfg.tau)))
    tau = phi / n_chunks
    eta = cfg.effective_eta(tau)

    omega = None
    blocks = []
    residuals = []
    for i in range(n_chunks):
        t_hi = phi - i * tau
        p_t = gaussian_evolve(p0, cfg.gamma, t_hi - 0.5 * tau)
        H = chunk_hamiltonian(p_t)
        if omega is None:
            omega = frequencies(d, max(H.degree(), 2))
        sys = solve_coefficients(H, omega, cfg.gamma, tau)
        residuals.append(sys.max_residual())
        blocks.extend(discretize_chunk(sys, eta))
    domain = np.array([[-radius, radius]] * (2 * d))
    net = CouplingNetwork(blocks, domain=domain)

    box = np.array([[-cfg.probe_half_width, cfg.probe_half_width]] * (2 * d))
    grid = cfg.grid_per_axis()
    pts = grid_points(box, grid)
    (M_inv, b_inv), (M_fwd, b_fwd) = affine_reference_maps(
        p0, cfg.gamma, phi, cfg.ref_steps)

    net_jac, _ = net.jacobian_many(pts)
    net_vals = net.pushforward(pts)
    net_probe = FlowProbe(pts, net_vals, net_jac)
    ref_vals = pts @ M_inv.T + b_inv
    ref_jac = np.broadcast_to(M_inv, (len(pts), 2 * d, 2 * d))
    ref_probe = FlowProbe(pts, ref_vals, np.array(ref_jac))
    c0, c1 = flow_distance(net_probe, ref_probe)

    sv = np.linalg.svd(net_jac, compute_uv=False)
    sv_min = float(np.min(sv[:, -1]))
    sv_max = float(np.max(sv[:, 0]))
    cond_worst = float(np.max(sv[:, 0] / sv[:, -1]))

    roundtrip = float(np.max(np.linalg.norm(
        net.pushforward(net_vals, "inverse") - pts, axis=1)))
    fwd_pts = pts @ M_fwd.T + b_fwd
    inverse_pair = float(np.max(np.linalg.norm(
        net.pushforward(fwd_pts) - pts, axis=1)))

    report = BuildReport(
        phi=phi, kappa=kappa, radius=radius, tau=tau, eta=eta,
        chunks=n_chunks, blocks=len(blocks),
        henon_residual_max=float(max(residuals, default=0.0)),
        c0_error=c0, c1_error=c1, sv_min=sv_min, sv_max=sv_max,
        cond_worst=cond_worst, cond_bound=upper / lower,
        roundtrip_error=roundtrip, inverse_pair_error=inverse_pair,
        lyapunov_initial=l0,
        chunk_residuals=np.asarray(residuals))
    return net, report


def truncated_gaussian_samples(n, dim, radius, rng):
    """Standard Gaussian conditioned on the ball of the given radius."""
    out = np.empty((0, dim))
    while len(out) < n:
        batch = rng.standard_normal((max(n, 1024), dim))
        keep = batch[np.linalg.norm(batch, axis=1) <= radius]
        out = np.vstack([out, keep])
    return out[:n]


def evaluate_w1(net, cfg, n_samples=100_000, seed=None, n_directions=64):
    """Push truncated-Gaussian samples through the network and compare with
    direct draws from the padded source: exact per-coordinate 1D W1 plus a
    sliced-W1 summary."""
    d = cfg.d
    p0 = pad_source(cfg.mu_x, cfg.sigma_x)
    radius = cfg.radius if cfg.radius is not None else (
        net.domain[0, 1] if net.domain is not None else choose_radius(0.01, 2 * d))
    seed = cfg.seed if seed is None else seed
    rng = np.random.Generator(np.random.Philox(key=seed))
    latent = truncated_gaussian_samples(n_samples, 2 * d, radius, rng)
    pushed = net.pushforward(latent)
    target = p0.sample(n_samples, rng)
    per_coord = [w1_1d(pushed[:, i], target[:, i]) for i in range(2 * d)]
    sw1 = sliced_w1(pushed, target, n_directions=n_directions, seed=seed + 1)
    return {"n_samples": n_samples, "radius": radius,
            "per_coordinate_w1": per_coord, "sliced_w1": float(sw1),
            "max_coordinate_w1": float(max(per_coord))}
