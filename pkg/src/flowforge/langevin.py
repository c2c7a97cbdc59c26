"""Closed-form Gaussian evolution under underdamped Langevin dynamics.

Conventions: phase space is z = (x, v) with x, v in R^d; the sign
convention is dx/dt = +v; friction gamma lies strictly inside (0, 2); the
stationary law is the standard Gaussian N(0, I_{2d}). The drift block is

    B = [[0, 1], [-1, -gamma]]

acting blockwise (Kronecker with I_d), and all 2d x 2d exponentials reduce
to exact 2 x 2 computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, InputError, PreconditionError
from .odeflow import DIVERGENCE_CUTOFF, VectorField


@dataclass(frozen=True)
class LangevinParams:
    d: int
    gamma: float

    def __post_init__(self):
        if self.d < 1:
            raise InputError("dimension must be >= 1")
        if not 0.0 < self.gamma < 2.0:
            raise InputError(
                f"friction gamma={self.gamma} outside (0, 2); gamma=2 is the "
                "critically damped boundary and is excluded")


@dataclass
class GaussianDensity:
    """Gaussian on phase space: mean (2d,) and SPD covariance (2d, 2d)."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        n = self.mean.shape[0]
        if self.cov.shape != (n, n):
            raise InputError("mean/covariance shape mismatch")
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-12:
            raise InputError("covariance not symmetric")
        if np.min(np.linalg.eigvalsh(self.cov)) <= 0:
            raise InputError("covariance not positive definite")

    @property
    def dim(self):
        return self.mean.shape[0]

    @classmethod
    def standard(cls, dim):
        return cls(np.zeros(dim), np.eye(dim))

    def sample(self, n, rng):
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((n, self.dim)) @ chol.T


def drift_block(gamma):
    return np.array([[0.0, 1.0], [-1.0, -gamma]])


def block_exp(gamma, t):
    """Exact matrix exponential of [[0, 1], [-1, -gamma]] * t for gamma < 2.

    The eigenvalues are the complex pair (-gamma +- i sqrt(4 - gamma^2))/2;
    the exponential is e^{-gamma t/2} (cos(w t) I + sin(w t)/w * N) with
    w = sqrt(4 - gamma^2)/2 and N the traceless part of the block.
    """
    if not np.isfinite(t):
        raise InputError("t must be finite")
    if not 0.0 <= gamma < 2.0:
        raise InputError("block_exp requires 0 <= gamma < 2")
    w = math.sqrt(4.0 - gamma * gamma) / 2.0
    N = np.array([[gamma / 2.0, 1.0], [-1.0, -gamma / 2.0]])
    return math.exp(-gamma * t / 2.0) * (
        math.cos(w * t) * np.eye(2) + (math.sin(w * t) / w) * N)


def phase_exp(d, gamma, t):
    """exp[(B kron I_d) t] on the (x, v) block layout."""
    return np.kron(block_exp(gamma, t), np.eye(d))


def drift_matrix(d, gamma):
    return np.kron(drift_block(gamma), np.eye(d))


def variance_proxy(sigma0, gamma, t):
    """Closed-form proxy evolution E (Sigma0 - I) E^T + I with E = e^{Bt}.

    Solves dSigma/dt = B Sigma + Sigma B^T + diag(0, 2 gamma I) and decays
    to the identity as t grows.
    """
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    n = sigma0.shape[0]
    if n % 2 != 0:
        raise InputError("phase-space covariance must have even dimension")
    if np.max(np.abs(sigma0 - sigma0.T)) > 1e-10:
        raise InputError("sigma0 not symmetric")
    E = phase_exp(n // 2, gamma, t)
    out = E @ (sigma0 - np.eye(n)) @ E.T + np.eye(n)
    return 0.5 * (out + out.T)


def variance_proxy_integrated(sigma0, gamma, times, steps_per_unit=400):
    """Independent check of the proxy: integrate the matrix ODE

        dSigma/dt = B Sigma + Sigma B^T + diag(0, 2 gamma I_d)

    with a fixed-step 4th-order scheme, sampling at the requested times in
    one ascending sweep. Accepts a scalar time or a sequence; returns one
    matrix or a list accordingly."""
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    scalar = np.isscalar(times)
    ts = [float(times)] if scalar else [float(t) for t in times]
    if sorted(ts) != ts:
        raise InputError("times must be ascending")
    n = sigma0.shape[0]
    d = n // 2
    B = drift_matrix(d, gamma)
    Q = np.zeros((n, n))
    Q[d:, d:] = 2.0 * gamma * np.eye(d)

    def rhs(S):
        return B @ S + S @ B.T + Q

    S = sigma0.copy()
    t_prev = 0.0
    out = []
    for t in ts:
        span = t - t_prev
        steps = max(1, int(np.ceil(span * steps_per_unit)))
        h = span / steps if steps else 0.0
        for _ in range(steps if span > 0 else 0):
            k1 = rhs(S)
            k2 = rhs(S + 0.5 * h * k1)
            k3 = rhs(S + 0.5 * h * k2)
            k4 = rhs(S + h * k3)
            S = S + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t_prev = t
        out.append(S.copy())
    return out[0] if scalar else out


def gaussian_evolve(p0, gamma, t):
    """Evolve a phase-space Gaussian for time t: the mean rotates and damps
    under e^{Bt}, the covariance follows the closed-form proxy."""
    d = p0.dim // 2
    E = phase_exp(d, gamma, t)
    return GaussianDensity(E @ p0.mean, variance_proxy(p0.cov, gamma, t))


def langevin_field(p_t, gamma):
    """Deterministic transport field C (grad ln p_t - grad ln p*) for a
    Gaussian p_t; affine in z with constant Jacobian C (I - Sigma^{-1})."""
    n = p_t.dim
    d = n // 2
    C = drift_matrix(d, gamma)
    sigma_inv = np.linalg.inv(p_t.cov)
    A = C @ (np.eye(n) - sigma_inv)
    offset = C @ (sigma_inv @ p_t.mean)

    return VectorField(n,
                       rhs=lambda z, t: A @ z + offset,
                       jacobian=lambda z, t: A)


@dataclass
class ConditioningReport:
    kappa: float
    gamma: float
    lower: float
    upper: float
    cond_bound: float
    sv_min: float
    sv_max: float
    times: np.ndarray = field(repr=False)
    ok: bool = True

    def to_dict(self):
        return {"kappa": self.kappa, "gamma": self.gamma,
                "lower": self.lower, "upper": self.upper,
                "cond_bound": self.cond_bound,
                "sv_min": self.sv_min, "sv_max": self.sv_max, "ok": bool(self.ok)}


def conditioning_bounds(kappa, gamma):
    """Closed-form singular-value bounds (A, 1/A) for the flow map Jacobian
    when I <= Sigma0^{-1} <= kappa I."""
    base = 1.0 + (2.0 + gamma) / (2.0 - gamma) * (kappa - 1.0)
    lower = base ** (-2.0 / gamma)
    return lower, 1.0 / lower


def hessian_gap_integral_bound(kappa, gamma):
    """Bound on the time integral of ||C H_s||: (2/gamma) ln(1 + (2+gamma)/(2-gamma)(kappa-1))."""
    return (2.0 / gamma) * math.log(
        1.0 + (2.0 + gamma) / (2.0 - gamma) * (kappa - 1.0))


def jacobian_flow(sigma0, gamma, kappa, t1, steps=2000, n_samples=80):
    """Integrate the Jacobian ODE dD/dt = C (I - Sigma_t^{-1}) D from D=I and
    report the singular-value range against the closed-form bounds.

    The hypothesis I <= Sigma0^{-1} <= kappa I is checked up front.
    """
    sigma0 = np.atleast_2d(np.asarray(sigma0, dtype=float))
    n = sigma0.shape[0]
    d = n // 2
    eig = np.linalg.eigvalsh(np.linalg.inv(sigma0))
    if eig.min() < 1.0 - 1e-10 or eig.max() > kappa + 1e-10:
        raise PreconditionError(
            f"inverse-covariance eigenvalues {eig} violate I <= Sigma0^-1 <= {kappa} I")
    C = drift_matrix(d, gamma)
    D = np.eye(n)
    h = t1 / steps
    sample_every = max(1, steps // max(1, n_samples))

    def rhs(Dm, t):
        sig = variance_proxy(sigma0, gamma, t)
        return C @ (np.eye(n) - np.linalg.inv(sig)) @ Dm

    sv_min, sv_max = 1.0, 1.0
    times = [0.0]
    t = 0.0
    for i in range(steps):
        k1 = rhs(D, t)
        k2 = rhs(D + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(D + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(D + h * k3, t + h)
        D = D + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (i + 1) * h
        if (i + 1) % sample_every == 0 or i == steps - 1:
            sv = np.linalg.svd(D, compute_uv=False)
            sv_min = min(sv_min, float(sv[-1]))
            sv_max = max(sv_max, float(sv[0]))
            times.append(t)
    lower, upper = conditioning_bounds(kappa, gamma)
    ok = (sv_min >= lower - 1e-10) and (sv_max <= upper + 1e-10)
    return ConditioningReport(kappa=kappa, gamma=gamma, lower=lower, upper=upper,
                              cond_bound=upper / lower, sv_min=sv_min,
                              sv_max=sv_max, times=np.asarray(times), ok=ok)


@dataclass
class SandwichReport:
    hessian: np.ndarray
    lower_margin: float
    upper_margin: float
    ok: bool

    def to_dict(self):
        return {"lower_margin": self.lower_margin,
                "upper_margin": self.upper_margin, "ok": bool(self.ok)}


def convolution_hessian_check(sigma_p, sigma, sigma1, sigma2, margin=-1e-10):
    """Check the convolution Hessian sandwich on a Gaussian instance.

    For p Gaussian with covariance ``sigma_p`` and q = N(0, sigma), the
    negated log-density Hessian of p*q is exactly (sigma_p + sigma)^{-1};
    with sigma2 <= sigma_p <= sigma1 the sandwich

        (sigma1 + sigma)^{-1}  <=  (sigma_p + sigma)^{-1}  <=  (sigma2 + sigma)^{-1}

    must hold. Margins are the smallest eigenvalues of the differences.
    """
    sigma_p = np.atleast_2d(np.asarray(sigma_p, dtype=float))
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    sigma1 = np.atleast_2d(np.asarray(sigma1, dtype=float))
    sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=float))
    hess = np.linalg.inv(sigma_p + sigma)
    lower = np.linalg.inv(sigma1 + sigma)
    upper = np.linalg.inv(sigma2 + sigma)
    low_margin = float(np.min(np.linalg.eigvalsh(hess - lower)))
    up_margin = float(np.min(np.linalg.eigvalsh(upper - hess)))
    ok = low_margin >= margin and up_margin >= margin
    return SandwichReport(hess, low_margin, up_margin, ok)


def lyapunov_matrix(d):
    """Quadratic-form matrix S = [[I/4, I/2], [I/2, 2I]] of the convergence
    functional (unit prefactor for the standard Gaussian target)."""
    I = np.eye(d)
    return np.block([[0.25 * I, 0.5 * I], [0.5 * I, 2.0 * I]])


def gaussian_kl_to_standard(p):
    n = p.dim
    sign, logdet = np.linalg.slogdet(p.cov)
    if sign <= 0:
        raise InputError("covariance not positive definite")
    return 0.5 * (np.trace(p.cov) + p.mean @ p.mean - n - logdet)


def lyapunov_gaussian(p):
    """Convergence functional: KL to the standard Gaussian plus the
    S-weighted second moment of grad ln(p / p*).

    For Gaussian p the gradient is u(z) = (I - Sigma^{-1})(z - mu) + mu, so
    the expectation reduces to a trace plus a mean term.
    """
    n = p.dim
    d = n // 2
    S = lyapunov_matrix(d)
    sigma_inv = np.linalg.inv(p.cov)
    A = np.eye(n) - sigma_inv
    kl = gaussian_kl_to_standard(p)
    quad = float(np.trace(A @ S @ A @ p.cov) + p.mean @ S @ p.mean)
    return kl + quad


def sde_simulate(grad_u, gamma, eta, steps, n_particles, seed, d,
                 initial=None, noise=True):
    """Euler-Maruyama simulation of the underdamped dynamics.

        x <- x + eta v
        v <- (1 - eta gamma) v - eta grad_u(x) + xi,   xi ~ N(0, 2 gamma eta I_d)

    Updates apply sequentially (the velocity sees the fresh position), so
    with the noise switched off the step is exactly one alternating Euler
    update of the deterministic drift.

    ``grad_u`` maps an (n, d) position block to its (n, d) gradient batch.
    ``initial`` is either a GaussianDensity on phase space or an (n, 2d)
    array; the default is the standard Gaussian. Draws come from a
    counter-based generator keyed by the seed, so runs are reproducible.
    The ``noise`` switch exists for deterministic-limit tests.
    """
    if eta <= 0 or eta * gamma >= 1:
        raise InputError("require 0 < eta and eta * gamma < 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    if initial is None:
        initial = GaussianDensity.standard(2 * d)
    if isinstance(initial, GaussianDensity):
        cloud = initial.sample(n_particles, rng)
    else:
        cloud = np.array(initial, dtype=float)
    x = cloud[:, :d].copy()
    v = cloud[:, d:].copy()
    scale = math.sqrt(2.0 * gamma * eta)
    for i in range(steps):
        x = x + eta * v
        v = (1.0 - eta * gamma) * v - eta * grad_u(x)
        if noise:
            v = v + scale * rng.standard_normal(v.shape)
        norms = np.linalg.norm(np.hstack([x, v]), axis=1)
        if not np.all(np.isfinite(norms)) or norms.max() > DIVERGENCE_CUTOFF:
            raise DivergenceError(f"particle cloud diverged at step {i}", step=i)
    return np.hstack([x, v])
