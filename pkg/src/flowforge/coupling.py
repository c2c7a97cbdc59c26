"""Affine coupling blocks and networks with exact inverses and Jacobians.

A block updates the coordinates in its active set by an elementwise affine
transform whose scale and shift are polynomials of the passive coordinates;
passive coordinates pass through unchanged. The Jacobian is triangular in
the (passive, active) ordering, so log-determinants are sums of logs of
the scale outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import InputError, SingularBlockError
from .langevin import ConditioningReport
from .multipoly import Polynomial
from .odeflow import grid_points

SCALE_FLOOR = 1e-12


class CouplingBlock:
    """Elementwise affine update of the active coordinates.

    Parameters
    ----------
    dim : total phase-space dimension.
    active : indices updated by the block.
    scale, shift : one Polynomial per active coordinate, each a function of
        the passive coordinates (in their index order).
    time_index : optional tag recording the discrete time the block encodes.
    """

    def __init__(self, dim, active, scale, shift, time_index=None):
        self.dim = int(dim)
        self.active = np.asarray(sorted(int(a) for a in active), dtype=int)
        self.passive = np.asarray(
            [i for i in range(dim) if i not in set(self.active.tolist())],
            dtype=int)
        if len(scale) != len(self.active) or len(shift) != len(self.active):
            raise InputError("need one scale and one shift per active coordinate")
        npass = len(self.passive)
        for p in list(scale) + list(shift):
            if p.dim != npass:
                raise InputError(
                    f"scale/shift polynomials must use {npass} passive variables")
        self.scale = list(scale)
        self.shift = list(shift)
        self.time_index = time_index
        self._dscale = [p.gradient() for p in self.scale]
        self._dshift = [p.gradient() for p in self.shift]

    # ------------------------------------------------------------- forward
    def forward(self, z):
        return self.forward_many(np.asarray(z, dtype=float)[None, :])[0]

    def forward_many(self, Z):
        Z = np.asarray(Z, dtype=float)
        if Z.shape[1] != self.dim:
            raise InputError(f"points have dimension {Z.shape[1]}, expected {self.dim}")
        P = Z[:, self.passive]
        out = Z.copy()
        for i, a in enumerate(self.active):
            out[:, a] = Z[:, a] * self.scale[i].eval_many(P) \
                + self.shift[i].eval_many(P)
        return out

    # ------------------------------------------------------------- inverse
    def inverse(self, z):
        return self.inverse_many(np.asarray(z, dtype=float)[None, :])[0]

    def inverse_many(self, Z):
        Z = np.asarray(Z, dtype=float)
        P = Z[:, self.passive]
        out = Z.copy()
        for i, a in enumerate(self.active):
            s = self.scale[i].eval_many(P)
            bad = np.abs(s) < SCALE_FLOOR
            if np.any(bad):
                raise SingularBlockError(
                    f"scale vanished on coordinate {a}",
                    coordinate=int(a))
            out[:, a] = (Z[:, a] - self.shift[i].eval_many(P)) / s
        return out

    # ------------------------------------------------------------ jacobian
    def jacobian(self, z):
        """Full Jacobian matrix and log|det| at a point."""
        J, logdet = self.jacobian_many(np.asarray(z, dtype=float)[None, :])
        return J[0], float(logdet[0])

    def jacobian_many(self, Z):
        Z = np.asarray(Z, dtype=float)
        n = Z.shape[0]
        P = Z[:, self.passive]
        J = np.zeros((n, self.dim, self.dim))
        for p in self.passive:
            J[:, p, p] = 1.0
        logdet = np.zeros(n)
        for i, a in enumerate(self.active):
            s = self.scale[i].eval_many(P)
            J[:, a, a] = s
            with np.errstate(divide="ignore"):
                logdet += np.where(np.abs(s) > 0, np.log(np.abs(s)), -np.inf)
            for pi, p in enumerate(self.passive):
                ds = self._dscale[i][pi].eval_many(P)
                dt = self._dshift[i][pi].eval_many(P)
                J[:, a, p] = Z[:, a] * ds + dt
        return J, logdet

    def min_scale(self, box, grid=9):
        """Smallest |scale| over a lattice on the passive box; certifies the
        domain of invertibility empirically."""
        pts = grid_points(np.asarray(box)[self.passive], grid)
        return min(float(np.min(np.abs(p.eval_many(pts)))) for p in self.scale)

    def to_dict(self):
        return {"dim": self.dim,
                "mask": [int(a) for a in self.active],
                "scale": [p.to_dict() for p in self.scale],
                "shift": [p.to_dict() for p in self.shift],
                "step_time": self.time_index}

    @classmethod
    def from_dict(cls, d):
        return cls(d["dim"], d["mask"],
                   [Polynomial.from_dict(p) for p in d["scale"]],
                   [Polynomial.from_dict(p) for p in d["shift"]],
                   d.get("step_time"))


@dataclass
class CouplingNetwork:
    """Ordered block sequence applied left to right; the inverse runs the
    reversed sequence of block inverses."""

    blocks: List[CouplingBlock]
    domain: Optional[np.ndarray] = None

    def __post_init__(self):
        dims = {b.dim for b in self.blocks}
        if len(dims) > 1:
            raise InputError(f"blocks disagree on dimension: {sorted(dims)}")

    @property
    def dim(self):
        return self.blocks[0].dim if self.blocks else (
            len(self.domain) if self.domain is not None else 0)

    def __len__(self):
        return len(self.blocks)

    def forward(self, z):
        return self.pushforward(np.asarray(z, dtype=float)[None, :])[0]

    def inverse(self, z):
        return self.pushforward(np.asarray(z, dtype=float)[None, :],
                                direction="inverse")[0]

    def pushforward(self, samples, direction="forward"):
        Z = np.asarray(samples, dtype=float)
        if direction == "forward":
            for idx, b in enumerate(self.blocks):
                try:
                    Z = b.forward_many(Z)
                except SingularBlockError as err:
                    err.block_index = idx
                    raise
        elif direction == "inverse":
            for idx in range(len(self.blocks) - 1, -1, -1):
                try:
                    Z = self.blocks[idx].inverse_many(Z)
                except SingularBlockError as err:
                    err.block_index = idx
                    raise
        else:
            raise InputError(f"unknown direction {direction!r}")
        return Z

    def jacobian(self, z):
        """Accumulated Jacobian product and total log|det| at a point."""
        J, logdet = self.jacobian_many(np.asarray(z, dtype=float)[None, :])
        return J[0], float(logdet[0])

    def jacobian_many(self, Z):
        Z = np.asarray(Z, dtype=float)
        n, dim = Z.shape
        acc = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
        logdet = np.zeros(n)
        for b in self.blocks:
            Jb, ld = b.jacobian_many(Z)
            acc = np.einsum("nij,njk->nik", Jb, acc)
            logdet += ld
            Z = b.forward_many(Z)
        return acc, logdet

    def conditioning(self, box, grid=5):
        """Singular-value range of the accumulated Jacobian over a lattice."""
        pts = grid_points(box, grid)
        J, _ = self.jacobian_many(pts)
        sv = np.linalg.svd(J, compute_uv=False)
        sv_min = float(np.min(sv[:, -1]))
        sv_max = float(np.max(sv[:, 0]))
        worst = float(np.max(sv[:, 0] / sv[:, -1]))
        return ConditioningReport(
            kappa=float("nan"), gamma=float("nan"), lower=sv_min, upper=sv_max,
            cond_bound=worst, sv_min=sv_min, sv_max=sv_max,
            times=np.array([]), ok=True)

    def save(self, path):
        payload = {"dim": self.dim,
                   "domain": None if self.domain is None
                   else np.asarray(self.domain).tolist(),
                   "blocks": [b.to_dict() for b in self.blocks]}
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        dom = payload.get("domain")
        return cls([CouplingBlock.from_dict(b) for b in payload["blocks"]],
                   None if dom is None else np.asarray(dom, dtype=float))


def network_pushforward(net, samples, direction="forward"):
    return net.pushforward(samples, direction)


def network_conditioning(net, box, grid=5):
    return net.conditioning(box, grid)


def _freeze_vec(tvps, t):
    return [p.freeze(t) for p in tvps]


def euler_step_to_blocks(sys, eta, n):
    """Factor one alternating Euler step of the approximating system into a
    velocity block followed by a position block.

    With s = eta * n and coefficients frozen at s:

        v block:  scale = 1 - eta*tau*G(x, s),  shift = -eta*Omega^2.x - eta*tau*J(x, s)
        x block:  scale = 1 - eta*tau*F(v, s),  shift = eta*v

    Composing the two reproduces the alternating Euler update exactly (the
    x update sees the fresh v).
    """
    if eta <= 0:
        raise InputError("eta must be positive")
    d = sys.d
    tau = sys.tau
    s = eta * n
    om2 = np.asarray(sys.omega, dtype=float) ** 2
    Jf = _freeze_vec(sys.J, s)
    Ff = _freeze_vec(sys.F, s)
    Gf = _freeze_vec(sys.G, s)
    v_scale, v_shift = [], []
    for j in range(d):
        v_scale.append(Polynomial.constant(d, 1.0) - (eta * tau) * Gf[j])
        shift = (-eta * tau) * Jf[j] - Polynomial.monomial(
            d, tuple(1 if i == j else 0 for i in range(d)), eta * om2[j])
        v_shift.append(shift)
    block_v = CouplingBlock(2 * d, active=range(d, 2 * d),
                            scale=v_scale, shift=v_shift, time_index=s)
    x_scale, x_shift = [], []
    for i in range(d):
        x_scale.append(Polynomial.constant(d, 1.0) - (eta * tau) * Ff[i])
        x_shift.append(Polynomial.monomial(
            d, tuple(1 if l == i else 0 for l in range(d)), eta))
    block_x = CouplingBlock(2 * d, active=range(d),
                            scale=x_scale, shift=x_shift, time_index=s)
    return block_v, block_x


def discretize_chunk(sys, eta):
    """All blocks of one chunk: alternating Euler over [0, 2*pi) with the
    step rounded down so an integer number of steps covers the period."""
    n_steps = int(np.ceil(2.0 * np.pi / eta))
    eta_eff = 2.0 * np.pi / n_steps
    blocks = []
    for n in range(n_steps):
        bv, bx = euler_step_to_blocks(sys, eta_eff, n)
        blocks.extend([bv, bx])
    return blocks
