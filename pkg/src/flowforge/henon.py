"""Coefficient solving for the modulated-oscillator approximation.

Given a polynomial Hamiltonian H(x, v) and friction gamma, this module
produces polynomial coefficient functions J, F, G (with trigonometric
time dependence) so that the time-2pi flow of

    dx/dt   = v - tau * F(v, t) . x
    dv_j/dt = -Omega_j^2 x_j - tau * J_j(x, t) - tau * v_j G_j(x, t)

matches the time-(tau -> 0) flow of the damped Hamiltonian chunk to
second order in tau. The matching conditions reduce, per coordinate j and
per constraint multi-index k, to a small linear system over a product
sine/cosine basis whose inner products this module evaluates exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List

import numpy as np

from .errors import InputError, SolvabilityError
from .multipoly import (Polynomial, TimeVaryingPolynomial, TrigFunction,
                        basis_g, box_multi_indices, multi_indices)
from .odeflow import (FlowProbe, OrderStudy, PairField, VectorField,
                      flow_distance, grid_points, integrate_with_jacobian)


def frequencies(d, M):
    """Integer frequency ladder: Omega_1 = 1, Omega_j = (M^j - 1)/(M - 1).

    For M = 1 the limit Omega_j = j is used. Values beyond 2^62 raise, to
    keep exact integer trig arithmetic meaningful.
    """
    if d < 1 or M < 1:
        raise InputError("require d >= 1 and M >= 1")
    out = []
    for j in range(1, d + 1):
        if M == 1:
            w = j
        else:
            w = (M ** j - 1) // (M - 1)
        if w > 2 ** 62:
            raise InputError(f"frequency overflow at coordinate {j} (M={M})")
        out.append(w)
    return np.asarray(out, dtype=np.int64)


def unperturbed_solution(x0, v0, omega, t):
    """Componentwise harmonic solution of the decoupled oscillator."""
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    om = np.asarray(omega, dtype=float)
    x = x0 * np.cos(om * t) + v0 / om * np.sin(om * t)
    v = -om * x0 * np.sin(om * t) + v0 * np.cos(om * t)
    return x, v


def target_polynomials(hamiltonian, gamma, reverse=True):
    """Right-hand-side polynomials the matching integrals must reproduce.

    With the reversed (inverse-chunk) convention:
        r1_j = dH/dv_j,    r2_j = -(dH/dx_j + gamma dH/dv_j)
    The forward convention flips both signs.
    """
    if hamiltonian.dim % 2 != 0:
        raise InputError("Hamiltonian must live on phase space (even dimension)")
    d = hamiltonian.dim // 2
    sign = 1.0 if reverse else -1.0
    r1, r2 = [], []
    for j in range(d):
        hv = hamiltonian.partial(d + j)
        hx = hamiltonian.partial(j)
        r1.append(sign * hv)
        r2.append(-sign * (hx + gamma * hv))
    return r1, r2


@dataclass
class CoefficientSystem:
    """One assembled matching system: coordinate j, constraint index k."""

    j: int
    k: tuple
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    solution: np.ndarray = field(repr=False)
    residual: float = 0.0
    singular_values: np.ndarray = field(default=None, repr=False)
    rank: int = 0
    n_nontrivial: int = 0


@dataclass
class HenonSystem:
    """Solved coefficient functions plus the chunk parameters."""

    omega: np.ndarray
    gamma: float
    tau: float
    degree: int
    J: List[TimeVaryingPolynomial]
    F: List[TimeVaryingPolynomial]
    G: List[TimeVaryingPolynomial]
    systems: List[CoefficientSystem] = field(default_factory=list, repr=False)

    @property
    def d(self):
        return len(self.omega)

    def with_tau(self, tau):
        return replace(self, tau=tau)

    def max_residual(self):
        return max((s.residual for s in self.systems), default=0.0)

    def to_dict(self):
        return {"omega": [int(w) for w in self.omega],
                "gamma": self.gamma, "tau": self.tau, "degree": self.degree,
                "J": [p.to_dict() for p in self.J],
                "F": [p.to_dict() for p in self.F],
                "G": [p.to_dict() for p in self.G]}

    @classmethod
    def from_dict(cls, d):
        return cls(omega=np.asarray(d["omega"], dtype=np.int64),
                   gamma=d["gamma"], tau=d["tau"], degree=d["degree"],
                   J=[TimeVaryingPolynomial.from_dict(p) for p in d["J"]],
                   F=[TimeVaryingPolynomial.from_dict(p) for p in d["F"]],
                   G=[TimeVaryingPolynomial.from_dict(p) for p in d["G"]])


def _oscillator_tvps(d, omega):
    """The harmonic solutions as degree-1 polynomials in the 2d initial
    values with trigonometric coefficients."""
    X0, V0 = [], []
    for i in range(d):
        ex = tuple(1 if a == i else 0 for a in range(2 * d))
        ev = tuple(1 if a == d + i else 0 for a in range(2 * d))
        w = int(omega[i])
        X0.append(TimeVaryingPolynomial(2 * d, {
            ex: TrigFunction.cos(w),
            ev: TrigFunction.sin(w, 1.0 / w)}))
        V0.append(TimeVaryingPolynomial(2 * d, {
            ex: TrigFunction.sin(w, -float(w)),
            ev: TrigFunction.cos(w)}))
    return X0, V0


def _tvp_power(vec, exponents, dim):
    out = TimeVaryingPolynomial(dim, {tuple([0] * dim): TrigFunction.constant(1.0)})
    for i, e in enumerate(exponents):
        for _ in range(e):
            out = out * vec[i]
    return out


def _phase_key(p, q):
    return tuple(list(p) + list(q))


def _assemble_system(j, k, d, omega, X0, V0, rhs1, rhs2):
    """Build the 2 n(m) x 3 n(m) matching system for coordinate j and
    constraint multi-index k, where m = k + e_j.

    Rows pair each monomial x^p v^q with p + q = k (plus dummy all-zero
    rows for the out-of-box shift p_j = -1); columns hold the F, G, J
    basis coefficients over the product trig basis indexed by r <= m.
    """
    wj = int(omega[j])
    m = tuple(ki + 1 if i == j else ki for i, ki in enumerate(k))
    r_list = box_multi_indices(m)
    n_m = len(r_list)
    # rows: p' in [0, m], actual p = p' - e_j; dummy when p'_j = 0
    p_rows = box_multi_indices(m)
    nontrivial = [i for i, pp in enumerate(p_rows) if pp[j] >= 1]
    has_fg = k[j] >= 1
    kmj = tuple(ki - 1 if i == j else ki for i, ki in enumerate(k)) if has_fg else None

    sin_j = TrigFunction.sin(wj)
    cos_j = TrigFunction.cos(wj)

    def monomial_trigs(base, w1, s1, w2, s2):
        """Per-(p,q) trig weights of base multiplied by the two row factors."""
        t1, t2 = {}, {}
        for key, tf in base.terms.items():
            t1[key] = (tf * w1) * s1
            t2[key] = (tf * w2) * s2
        return t1, t2

    weights = {}
    if has_fg:
        base_f = _tvp_power(V0, kmj, 2 * d) * X0[j]
        weights["F"] = monomial_trigs(base_f, cos_j, 1.0, sin_j, float(wj))
        base_g = _tvp_power(X0, kmj, 2 * d) * V0[j]
        weights["G"] = monomial_trigs(base_g, sin_j, -1.0 / wj, cos_j, 1.0)
    base_j = _tvp_power(X0, k, 2 * d)
    weights["J"] = monomial_trigs(base_j, sin_j, -1.0 / wj, cos_j, 1.0)

    n_rows = 2 * n_m
    A = np.zeros((n_rows, 3 * n_m))
    for ci, kind in enumerate(("F", "G", "J")):
        if kind in ("F", "G") and not has_fg:
            continue
        w1, w2 = weights[kind]
        for ri, r in enumerate(r_list):
            g = basis_g(m, r, omega)
            col = ci * n_m + ri
            for row_i, pp in enumerate(p_rows):
                if pp[j] < 1:
                    continue
                p = tuple(x - 1 if i == j else x for i, x in enumerate(pp))
                q = tuple(ki - pi for ki, pi in zip(k, p))
                key = _phase_key(p, q)
                if key in w1:
                    A[row_i, col] = (g * w1[key]).integral()
                if key in w2:
                    A[n_m + row_i, col] = (g * w2[key]).integral()
    h = np.zeros(n_rows)
    for row_i, pp in enumerate(p_rows):
        if pp[j] < 1:
            continue
        p = tuple(x - 1 if i == j else x for i, x in enumerate(pp))
        q = tuple(ki - pi for ki, pi in zip(k, p))
        key = _phase_key(p, q)
        h[row_i] = rhs1.terms.get(key, 0.0)
        h[n_m + row_i] = rhs2.terms.get(key, 0.0)
    return A, h, r_list, m, len(nontrivial) * 2, has_fg


def solve_coefficients(hamiltonian, omega, gamma, tau, reverse=True,
                       residual_tol=1e-8):
    """Solve every per-(j, k) matching system and assemble J, F, G.

    The solution is minimum-norm least squares; a residual above
    ``residual_tol`` or a rank below the nontrivial row count raises
    ``SolvabilityError`` carrying (j, k) and the singular values.
    """
    omega = np.asarray(omega, dtype=np.int64)
    d = len(omega)
    if hamiltonian.dim != 2 * d:
        raise InputError(
            f"Hamiltonian dimension {hamiltonian.dim} != 2*d for d={d}")
    r1, r2 = target_polynomials(hamiltonian, gamma, reverse=reverse)
    M = max([p.degree() for p in r1 + r2] + [0])
    X0, V0 = _oscillator_tvps(d, omega)
    J = [TimeVaryingPolynomial.zero(d) for _ in range(d)]
    F = [TimeVaryingPolynomial.zero(d) for _ in range(d)]
    G = [TimeVaryingPolynomial.zero(d) for _ in range(d)]
    systems = []
    for j in range(d):
        for k in multi_indices(d, M):
            A, h, r_list, m, n_nontriv, has_fg = _assemble_system(
                j, k, d, omega, X0, V0, r1[j], r2[j])
            n_m = len(r_list)
            sol, *_ = np.linalg.lstsq(A, h, rcond=None)
            residual = float(np.max(np.abs(A @ sol - h), initial=0.0))
            sv = np.linalg.svd(A, compute_uv=False)
            rank = int(np.sum(sv > sv[0] * 1e-10)) if sv.size and sv[0] > 0 else 0
            if rank < n_nontriv or residual > residual_tol:
                raise SolvabilityError(
                    f"matching system (j={j}, k={k}) unsolvable: rank {rank} "
                    f"of {n_nontriv} nontrivial rows, residual {residual:.3e}",
                    j=j, k=k, singular_values=sv)
            systems.append(CoefficientSystem(
                j=j, k=tuple(k), matrix=A, rhs=h, solution=sol,
                residual=residual, singular_values=sv, rank=rank,
                n_nontrivial=n_nontriv))
            alpha = sol[:n_m]
            beta = sol[n_m:2 * n_m]
            gamma_c = sol[2 * n_m:]
            jf = TrigFunction.zero()
            for c, r in zip(gamma_c, r_list):
                if abs(c) > 0:
                    jf = jf + basis_g(m, r, omega) * float(c)
            if not jf.is_zero():
                J[j] = J[j] + TimeVaryingPolynomial(d, {tuple(k): jf})
            if has_fg:
                kmj = tuple(ki - 1 if i == j else ki for i, ki in enumerate(k))
                ff = TrigFunction.zero()
                gf = TrigFunction.zero()
                for c, r in zip(alpha, r_list):
                    if abs(c) > 0:
                        ff = ff + basis_g(m, r, omega) * float(c)
                for c, r in zip(beta, r_list):
                    if abs(c) > 0:
                        gf = gf + basis_g(m, r, omega) * float(c)
                if not ff.is_zero():
                    F[j] = F[j] + TimeVaryingPolynomial(d, {kmj: ff})
                if not gf.is_zero():
                    G[j] = G[j] + TimeVaryingPolynomial(d, {kmj: gf})
    return HenonSystem(omega=omega, gamma=gamma, tau=tau, degree=M,
                       J=J, F=F, G=G, systems=systems)


def block_form_matrix_d1(k):
    """Cross-check assembler for one-dimensional systems (unit frequency).

    Builds the matching matrix from its structured factorization -- inner
    product matrices of the shifted basis, a cyclic row shift, and three
    binomial diagonals -- instead of the generic monomial expansion. Rows
    are ordered p = -1..k within each constraint family, columns by basis
    index r = 0..k+1 within each coefficient family.
    """
    from math import comb

    k = int(k)
    m = k + 1
    n = m + 1  # rows p in [-1, k], columns r in [0, m]
    omega = (1,)

    def inner(r, p):
        return (basis_g((m,), (r,), omega) * basis_g((m,), (p,), omega)).integral()

    X = np.zeros((n, n))
    Y = np.zeros((n, n))
    for i_p, p in enumerate(range(-1, k + 1)):
        for r in range(n):
            X[i_p, r] = inner(r, p + 1)
            Y[i_p, r] = (-1.0) ** (p + 1) * inner(r, m - (p + 1))
    P = np.zeros((n, n))
    for i_p, p in enumerate(range(-1, k + 1)):
        src = p - 1 if p - 1 >= -1 else k
        P[i_p, src + 1] = 1.0

    def binom_diag(shift_top, shift_p):
        return np.diag([float(comb(k + shift_top, p + shift_p))
                        if 0 <= p + shift_p <= k + shift_top else 0.0
                        for p in range(-1, k + 1)])

    D1 = binom_diag(-1, 0)
    D2 = binom_diag(-1, -1)
    D3 = binom_diag(0, 0)
    top = D2 @ P @ P - D1
    bot = -D2 @ P + D1 @ np.linalg.inv(P)
    return np.block([[top @ Y, top @ X, -(D3 @ P) @ X],
                     [bot @ Y, bot @ X, D3 @ X]])


def matching_integrals(sys):
    """Symbolically expand the two matching integrals with the solved
    coefficients; used as an independent reconstruction check against the
    target polynomials."""
    d = sys.d
    X0, V0 = _oscillator_tvps(d, sys.omega)
    I1, I2 = [], []
    for j in range(d):
        wj = int(sys.omega[j])
        sin_j, cos_j = TrigFunction.sin(wj), TrigFunction.cos(wj)
        acc1 = TimeVaryingPolynomial.zero(2 * d)
        acc2 = TimeVaryingPolynomial.zero(2 * d)
        for idx, tf in sys.J[j].terms.items():
            base = _tvp_power(X0, idx, 2 * d)
            acc1 = acc1 + base * ((tf * sin_j) * (-1.0 / wj))
            acc2 = acc2 + base * (tf * cos_j)
        for idx, tf in sys.F[j].terms.items():
            base = _tvp_power(V0, idx, 2 * d) * X0[j]
            acc1 = acc1 + base * (tf * cos_j)
            acc2 = acc2 + base * ((tf * sin_j) * float(wj))
        for idx, tf in sys.G[j].terms.items():
            base = _tvp_power(X0, idx, 2 * d) * V0[j]
            acc1 = acc1 + base * ((tf * sin_j) * (-1.0 / wj))
            acc2 = acc2 + base * (tf * cos_j)
        I1.append(Polynomial(2 * d, {mi: tf.integral()
                                     for mi, tf in acc1.terms.items()}))
        I2.append(Polynomial(2 * d, {mi: tf.integral()
                                     for mi, tf in acc2.terms.items()}))
    return I1, I2


def approximating_field(sys):
    """The modulated-oscillator system as a PairField with exact partials."""
    d = sys.d
    tau = sys.tau
    om2 = np.asarray(sys.omega, dtype=float) ** 2
    dF = [[sys.F[j].partial(l) for l in range(d)] for j in range(d)]
    dJ = [[sys.J[j].partial(l) for l in range(d)] for j in range(d)]
    dG = [[sys.G[j].partial(l) for l in range(d)] for j in range(d)]

    def f(x, v, t):
        Fv = np.array([sys.F[j].eval(v, t) for j in range(d)])
        return v - tau * Fv * x

    def g(x, v, t):
        Jx = np.array([sys.J[j].eval(x, t) for j in range(d)])
        Gx = np.array([sys.G[j].eval(x, t) for j in range(d)])
        return -om2 * x - tau * Jx - tau * v * Gx

    def f_x(x, v, t):
        Fv = np.array([sys.F[j].eval(v, t) for j in range(d)])
        return np.diag(-tau * Fv)

    def f_v(x, v, t):
        out = np.eye(d)
        for j in range(d):
            for l in range(d):
                out[j, l] -= tau * x[j] * dF[j][l].eval(v, t)
        return out

    def g_x(x, v, t):
        out = np.diag(-om2)
        for j in range(d):
            for l in range(d):
                out[j, l] -= tau * (dJ[j][l].eval(x, t)
                                    + v[j] * dG[j][l].eval(x, t))
        return out

    def g_v(x, v, t):
        Gx = np.array([sys.G[j].eval(x, t) for j in range(d)])
        return np.diag(-tau * Gx)

    return PairField(d=d, f=f, g=g, f_x=f_x, f_v=f_v, g_x=g_x, g_v=g_v)


def chunk_field(hamiltonian, gamma, reverse=True):
    """Vector field of the damped Hamiltonian system with H frozen in time.

    ``reverse=True`` gives the field whose time-tau flow equals the
    time-(tau -> 0) inverse flow of the forward system.
    """
    if hamiltonian.dim % 2 != 0:
        raise InputError("Hamiltonian must live on phase space")
    d = hamiltonian.dim // 2
    sign = -1.0 if reverse else 1.0
    hx = [hamiltonian.partial(i) for i in range(d)]
    hv = [hamiltonian.partial(d + i) for i in range(d)]
    hxx = [[hx[i].partial(l) for l in range(2 * d)] for i in range(d)]
    hvv = [[hv[i].partial(l) for l in range(2 * d)] for i in range(d)]

    def rhs(z, t):
        dx = sign * np.array([p(z) for p in hv])
        dv = -sign * np.array([p(z) for p in hx]) \
            - sign * gamma * np.array([p(z) for p in hv])
        return np.concatenate([dx, dv])

    def jac(z, t):
        top = sign * np.array([[hvv[i][l](z) for l in range(2 * d)]
                               for i in range(d)])
        bot = -sign * np.array([[hxx[i][l](z) + gamma * hvv[i][l](z)
                                 for l in range(2 * d)] for i in range(d)])
        return np.vstack([top, bot])

    return VectorField(2 * d, rhs, jac)


def verify_chunk_order(hamiltonian, gamma, box, tau_list, grid=3,
                       rk_steps=2000, reverse=True):
    """Order study: C1 gap between the 2pi flow of the approximating system
    and the tau flow of the (reversed) frozen chunk, fitted over tau."""
    if len(tau_list) < 4:
        raise InputError("tau list must have at least 4 values")
    d = hamiltonian.dim // 2
    M = max(hamiltonian.degree(), 1)
    omega = frequencies(d, M)
    sys0 = solve_coefficients(hamiltonian, omega, gamma, tau_list[0],
                              reverse=reverse)
    target = chunk_field(hamiltonian, gamma, reverse=reverse)
    pts = grid_points(box, grid)
    c0s, c1s = [], []
    for tau in tau_list:
        fld = approximating_field(sys0.with_tau(tau)).as_vector_field()
        approx = FlowProbe.from_map(
            lambda z: integrate_with_jacobian(fld, z, 0.0, 2.0 * np.pi, rk_steps),
            pts)
        exact = FlowProbe.from_map(
            lambda z: integrate_with_jacobian(target, z, 0.0, tau,
                                              max(200, rk_steps // 4)), pts)
        c0, c1 = flow_distance(approx, exact)
        c0s.append(c0)
        c1s.append(c1)
    return OrderStudy.fit(np.asarray(tau_list, dtype=float), c0s, c1s, use="c1")
