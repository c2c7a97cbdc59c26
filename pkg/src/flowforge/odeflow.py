"""Flow-map engine: fixed-step reference integration, variational
co-integration, the alternating Euler scheme and its exact Jacobian
recurrence, grid-based C0/C1 flow distances, and perturbation utilities.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, InputError

DIVERGENCE_CUTOFF = 1e12


@dataclass(frozen=True)
class VectorField:
    """Right-hand side ``rhs(z, t)`` with optional analytic ``jacobian(z, t)``."""

    dim: int
    rhs: Callable[[np.ndarray, float], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


@dataclass(frozen=True)
class PairField:
    """Split system dx/dt = f(x, v, t), dv/dt = g(x, v, t) with partial
    Jacobian callbacks (each d x d)."""

    d: int
    f: Callable
    g: Callable
    f_x: Optional[Callable] = None
    f_v: Optional[Callable] = None
    g_x: Optional[Callable] = None
    g_v: Optional[Callable] = None

    def as_vector_field(self):
        d = self.d

        def rhs(z, t):
            x, v = z[:d], z[d:]
            return np.concatenate([self.f(x, v, t), self.g(x, v, t)])

        jac = None
        if all(cb is not None for cb in (self.f_x, self.f_v, self.g_x, self.g_v)):
            def jac(z, t):
                x, v = z[:d], z[d:]
                return np.block([[self.f_x(x, v, t), self.f_v(x, v, t)],
                                 [self.g_x(x, v, t), self.g_v(x, v, t)]])

        return VectorField(2 * d, rhs, jac)


def _check_state(z, step):
    if not np.all(np.isfinite(z)) or np.linalg.norm(z) > DIVERGENCE_CUTOFF:
        raise DivergenceError(f"trajectory diverged at step {step}", step=step)


def integrate(field, z0, t0, t1, steps):
    """Classical fixed-step 4th-order integration of ``field`` from t0 to t1."""
    if steps < 1:
        raise InputError("steps must be >= 1")
    z = np.asarray(z0, dtype=float).copy()
    h = (t1 - t0) / steps
    t = t0
    rhs = field.rhs
    for i in range(steps):
        k1 = rhs(z, t)
        k2 = rhs(z + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(z + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(z + h * k3, t + h)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * h
        _check_state(z, i)
    return z


def integrate_with_jacobian(field, z0, t0, t1, steps):
    """Integrate the state together with the variational equation.

    The Jacobian block solves dJ/dt = DF(z_t, t) J from J(0) = I, so the
    returned matrix is the Jacobian of the time-(t0 -> t1) flow map at z0.
    """
    if field.jacobian is None:
        raise InputError("field has no jacobian callback")
    if steps < 1:
        raise InputError("steps must be >= 1")
    n = field.dim
    z = np.asarray(z0, dtype=float).copy()
    J = np.eye(n)
    h = (t1 - t0) / steps
    t = t0

    def rhs(state, tt):
        zz = state[:n]
        JJ = state[n:].reshape(n, n)
        dz = field.rhs(zz, tt)
        dJ = field.jacobian(zz, tt) @ JJ
        return np.concatenate([dz, dJ.ravel()])

    state = np.concatenate([z, J.ravel()])
    for i in range(steps):
        k1 = rhs(state, t)
        k2 = rhs(state + 0.5 * h * k1, t + 0.5 * h)
        k3 = rhs(state + 0.5 * h * k2, t + 0.5 * h)
        k4 = rhs(state + h * k3, t + h)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * h
        _check_state(state[:n], i)
    return state[:n], state[n:].reshape(n, n)


def alternating_euler(field, x0, v0, t0, eta, n):
    """Alternating Euler iteration: v advances first, the x update uses the
    fresh v.

        V_{i+1} = V_i + eta * g(X_i, V_i, t_i)
        X_{i+1} = X_i + eta * f(X_i, V_{i+1}, t_i)

    Returns arrays of all iterates, shapes (n+1, d) each.
    """
    if eta <= 0:
        raise InputError("eta must be positive")
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    xs = [x.copy()]
    vs = [v.copy()]
    for i in range(n):
        t = t0 + i * eta
        v = v + eta * field.g(x, v, t)
        x = x + eta * field.f(x, v, t)
        _check_state(np.concatenate([x, v]), i)
        xs.append(x.copy())
        vs.append(v.copy())
    return np.asarray(xs), np.asarray(vs)


def alternating_euler_with_jacobian(field, x0, v0, t0, eta, n):
    """Alternating Euler on the state augmented with its variational pair.

    The (alpha, beta) iterates follow the same alternating update driven by
    the partial Jacobians, which makes them the exact Jacobian of the
    discrete map (not an approximation of the continuous one).

    Returns (x, v, jacobian) at the final step, jacobian shape (2d, 2d).
    """
    if eta <= 0:
        raise InputError("eta must be positive")
    d = field.d
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    alpha = np.hstack([np.eye(d), np.zeros((d, d))])
    beta = np.hstack([np.zeros((d, d)), np.eye(d)])
    for i in range(n):
        t = t0 + i * eta
        beta_next = beta + eta * (field.g_x(x, v, t) @ alpha
                                  + field.g_v(x, v, t) @ beta)
        v_next = v + eta * field.g(x, v, t)
        alpha = alpha + eta * (field.f_x(x, v_next, t) @ alpha
                               + field.f_v(x, v_next, t) @ beta_next)
        beta = beta_next
        x = x + eta * field.f(x, v_next, t)
        v = v_next
        _check_state(np.concatenate([x, v]), i)
    return x, v, np.vstack([alpha, beta])


def grid_points(box, grid):
    """Uniform lattice over a box, corners included, deterministic row-major
    order. ``box`` is an array of (low, high) pairs, one per axis."""
    box = np.asarray(box, dtype=float)
    if grid < 2:
        raise InputError("grid must be >= 2 per axis")
    axes = [np.linspace(lo, hi, grid) for lo, hi in box]
    return np.array([pt for pt in itertools.product(*axes)])


def ball_box(radius, dim):
    return np.array([[-radius, radius]] * dim)


@dataclass
class FlowProbe:
    """Values (and optionally Jacobians) of a flow map on a fixed point set."""

    points: np.ndarray
    values: np.ndarray
    jacobians: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.points) != len(self.values):
            raise InputError("points/values length mismatch")
        if self.jacobians is not None and len(self.jacobians) != len(self.points):
            raise InputError("points/jacobians length mismatch")

    def to_csv(self, path):
        dim = self.points.shape[1]
        cols = ([f"point_{i}" for i in range(dim)]
                + [f"value_{i}" for i in range(dim)])
        data = [self.points, self.values]
        if self.jacobians is not None:
            cols += [f"jac_{r}{c}" for r in range(dim) for c in range(dim)]
            data.append(self.jacobians.reshape(len(self.points), -1))
        arr = np.hstack(data)
        header = ",".join(cols)
        np.savetxt(path, arr, delimiter=",", header=header, comments="")

    @classmethod
    def from_map(cls, map_fn, points):
        vals = []
        jacs = []
        have_jac = True
        for z in points:
            out = map_fn(np.asarray(z, dtype=float))
            if isinstance(out, tuple):
                val, jac = out
            else:
                val, jac = out, None
            vals.append(np.asarray(val, dtype=float))
            if jac is None:
                have_jac = False
            else:
                jacs.append(np.asarray(jac, dtype=float))
        return cls(np.asarray(points, dtype=float), np.asarray(vals),
                   np.asarray(jacs) if have_jac else None)


def probe_field(field, box, grid, t0, t1, steps):
    """Probe the time-(t0 -> t1) flow map of a field on a box lattice."""
    pts = grid_points(box, grid)
    if field.jacobian is not None:
        return FlowProbe.from_map(
            lambda z: integrate_with_jacobian(field, z, t0, t1, steps), pts)
    return FlowProbe.from_map(
        lambda z: integrate(field, z, t0, t1, steps), pts)


def flow_distance(probe_a, probe_b):
    """C0 and C1 distances between two probed maps on the same point set.

    c0 is the max Euclidean value gap; c1 adds the max spectral norm of the
    Jacobian difference (the C1 distance of the uniform-closeness notion).
    """
    if probe_a.points.shape != probe_b.points.shape:
        raise InputError("probes use different point sets")
    c0 = float(np.max(np.linalg.norm(probe_a.values - probe_b.values, axis=1),
                      initial=0.0))
    c1 = c0
    if probe_a.jacobians is not None and probe_b.jacobians is not None:
        diff = probe_a.jacobians - probe_b.jacobians
        spectral = np.linalg.svd(diff, compute_uv=False)[:, 0] if len(diff) else []
        c1 = c0 + float(np.max(spectral, initial=0.0))
    return c0, c1


def gronwall_bound(a, b, x0, t):
    """Upper bound (b*t + x0) * exp(a*t) for dx/dt <= a*x + b."""
    if t < 0:
        raise InputError("t must be non-negative")
    return (b * t + x0) * np.exp(a * t)


def _linear_perturbed_flow(A, g, dg, z0, eps, t, steps):
    """First-order map y0(t) + eps*y1(t) with optional Jacobian co-integration.

    y0' = A y0; y1' = A y1 + g(y0(t), t), y1(0) = 0. When ``dg`` is given the
    Jacobians beta0' = A beta0, beta1' = A beta1 + dg(y0) beta0 ride along.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    with_jac = dg is not None

    def rhs(state, tt):
        y0 = state[:n]
        y1 = state[n:2 * n]
        dy0 = A @ y0
        dy1 = A @ y1 + np.atleast_1d(g(y0, tt))
        if not with_jac:
            return np.concatenate([dy0, dy1])
        b0 = state[2 * n:2 * n + n * n].reshape(n, n)
        b1 = state[2 * n + n * n:].reshape(n, n)
        db0 = A @ b0
        db1 = A @ b1 + np.atleast_2d(dg(y0, tt)) @ b0
        return np.concatenate([dy0, dy1, db0.ravel(), db1.ravel()])

    state = np.concatenate([z0, np.zeros(n)])
    if with_jac:
        state = np.concatenate([state, np.eye(n).ravel(), np.zeros(n * n)])
    h = t / steps
    tt = 0.0
    for i in range(steps):
        k1 = rhs(state, tt)
        k2 = rhs(state + 0.5 * h * k1, tt + 0.5 * h)
        k3 = rhs(state + 0.5 * h * k2, tt + 0.5 * h)
        k4 = rhs(state + h * k3, tt + h)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tt = (i + 1) * h
        _check_state(state[:n], i)
    value = state[:n] + eps * state[n:2 * n]
    if not with_jac:
        return value, None
    b0 = state[2 * n:2 * n + n * n].reshape(n, n)
    b1 = state[2 * n + n * n:].reshape(n, n)
    return value, b0 + eps * b1


def perturbation_first_order(A, g, z0, eps, t, steps=400):
    """First-order-in-eps flow of dz/dt = A z + eps g(z, t)."""
    value, _ = _linear_perturbed_flow(A, g, None, z0, eps, t, steps)
    return value


@dataclass
class OrderStudy:
    """Log-log order fit of a sequence of distances against a parameter."""

    parameter: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    slope: float
    degenerate: bool

    # distances below integrator noise carry no order information
    DEGENERATE_FLOOR = 1e-8

    @classmethod
    def fit(cls, parameter, c0, c1, use="c1"):
        parameter = np.asarray(parameter, dtype=float)
        c0 = np.asarray(c0, dtype=float)
        c1 = np.asarray(c1, dtype=float)
        dist = c1 if use == "c1" else c0
        if np.any(dist <= cls.DEGENERATE_FLOOR):
            return cls(parameter, c0, c1, float("nan"), True)
        slope = float(np.polyfit(np.log(parameter), np.log(dist), 1)[0])
        return cls(parameter, c0, c1, slope, False)


def perturbation_order_check(A, g, dg, box, eps_list, t, steps=400, grid=3):
    """Fit the order in eps of the gap between the true perturbed flow and
    its first-order approximation; the expected slope is 2."""
    if len(eps_list) < 3:
        raise InputError("need at least 3 epsilon values")
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    pts = grid_points(box, grid)
    c0s, c1s = [], []
    for eps in eps_list:
        field = VectorField(
            n,
            rhs=lambda z, tt, e=eps: A @ z + e * np.atleast_1d(g(z, tt)),
            jacobian=(None if dg is None else
                      (lambda z, tt, e=eps: A + e * np.atleast_2d(dg(z, tt)))))
        if dg is not None:
            full = FlowProbe.from_map(
                lambda z: integrate_with_jacobian(field, z, 0.0, t, steps), pts)
        else:
            full = FlowProbe.from_map(
                lambda z: integrate(field, z, 0.0, t, steps), pts)
        approx = FlowProbe.from_map(
            lambda z, e=eps: _linear_perturbed_flow(A, g, dg, z, e, t, steps), pts)
        c0, c1 = flow_distance(full, approx)
        c0s.append(c0)
        c1s.append(c1)
    return OrderStudy.fit(eps_list, c0s, c1s, use="c1" if dg is not None else "c0")
