"""Multivariate polynomials with plain or trigonometric coefficients.

Three value types build on each other:

* ``Polynomial`` -- sparse multivariate polynomial, terms keyed by
  multi-index tuples, double coefficients.
* ``TrigFunction`` -- finite combination ``sum_m a_m cos(m s) + b_m sin(m s)``
  with integer frequencies, closed under products and exactly integrable
  over one period.
* ``TimeVaryingPolynomial`` -- polynomial whose coefficients are
  TrigFunctions; freezing the time argument yields a Polynomial.

All values are immutable after construction and all operations are pure.
Coefficients below ``PRUNE_TOL`` are dropped after arithmetic so canonical
forms stay sparse.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import FitError, InputError

PRUNE_TOL = 1e-14


def multi_indices(dim, max_degree):
    """All multi-indices of length ``dim`` with total degree <= ``max_degree``,
    in graded lexicographic order."""
    out = []
    for total in range(max_degree + 1):
        for combo in itertools.product(range(total + 1), repeat=dim):
            if sum(combo) == total:
                out.append(combo)
    return out


def box_multi_indices(hi):
    """Multi-indices r with 0 <= r <= hi componentwise, graded-lex ordered."""
    idx = [tuple(t) for t in itertools.product(*[range(h + 1) for h in hi])]
    idx.sort(key=lambda r: (sum(r), r))
    return idx


class Polynomial:
    """Sparse real polynomial in ``dim`` variables.

    Terms map multi-index tuples to coefficients; zero coefficients are
    never stored.
    """

    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        clean = {}
        for mi, c in (terms or {}).items():
            mi = tuple(int(e) for e in mi)
            if len(mi) != self.dim:
                raise InputError(
                    f"multi-index {mi} has length {len(mi)}, expected {self.dim}")
            if any(e < 0 for e in mi):
                raise InputError(f"negative exponent in multi-index {mi}")
            c = float(c)
            if abs(c) > PRUNE_TOL:
                clean[mi] = clean.get(mi, 0.0) + c
        self.terms = {mi: c for mi, c in clean.items() if abs(c) > PRUNE_TOL}

    # ---------------------------------------------------------------- ctors
    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, {tuple([0] * dim): c})

    @classmethod
    def monomial(cls, dim, mi, c=1.0):
        return cls(dim, {tuple(mi): c})

    @classmethod
    def variable(cls, dim, i):
        mi = tuple(1 if j == i else 0 for j in range(dim))
        return cls(dim, {mi: 1.0})

    # ------------------------------------------------------------ algebra
    def _check(self, other):
        if self.dim != other.dim:
            raise InputError(
                f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        self._check(other)
        terms = dict(self.terms)
        for mi, c in other.terms.items():
            terms[mi] = terms.get(mi, 0.0) + c
        return Polynomial(self.dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.dim, {mi: -c for mi, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Polynomial(
                self.dim, {mi: c * other for mi, c in self.terms.items()})
        self._check(other)
        terms = {}
        for mi1, c1 in self.terms.items():
            for mi2, c2 in other.terms.items():
                mi = tuple(a + b for a, b in zip(mi1, mi2))
                terms[mi] = terms.get(mi, 0.0) + c1 * c2
        return Polynomial(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise InputError("polynomial powers must be non-negative integers")
        out = Polynomial.constant(self.dim, 1.0)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def __eq__(self, other):
        return (isinstance(other, Polynomial) and self.dim == other.dim
                and self.terms == other.terms)

    def __repr__(self):
        if not self.terms:
            return f"Polynomial({self.dim}, 0)"
        bits = [f"{c:+.6g}*z^{list(mi)}" for mi, c in sorted(self.terms.items())]
        return f"Polynomial({self.dim}, {' '.join(bits)})"

    # --------------------------------------------------------------- calculus
    def partial(self, var):
        """Exact partial derivative with respect to variable ``var``."""
        if not 0 <= var < self.dim:
            raise InputError(f"variable index {var} out of range for dim {self.dim}")
        terms = {}
        for mi, c in self.terms.items():
            e = mi[var]
            if e == 0:
                continue
            dmi = tuple(x - 1 if i == var else x for i, x in enumerate(mi))
            terms[dmi] = terms.get(dmi, 0.0) + c * e
        return Polynomial(self.dim, terms)

    def gradient(self):
        return [self.partial(i) for i in range(self.dim)]

    def degree(self):
        return max((sum(mi) for mi in self.terms), default=0)

    # --------------------------------------------------------------- eval
    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise InputError(f"point has shape {z.shape}, expected ({self.dim},)")
        total = 0.0
        for mi, c in self.terms.items():
            term = c
            for zi, e in zip(z, mi):
                if e:
                    term *= zi ** e
            total += term
        return total

    def eval_many(self, pts):
        """Evaluate at a batch of points, shape (n, dim) -> (n,)."""
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[0])
        for mi, c in self.terms.items():
            term = np.full(pts.shape[0], c)
            for i, e in enumerate(mi):
                if e == 1:
                    term = term * pts[:, i]
                elif e > 1:
                    term = term * pts[:, i] ** e
            out += term
        return out

    # --------------------------------------------------------------- io
    def to_dict(self):
        return {"dim": self.dim,
                "terms": [{"idx": list(mi), "c": c}
                          for mi, c in sorted(self.terms.items(),
                                              key=lambda t: (sum(t[0]), t[0]))]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["dim"], {tuple(t["idx"]): t["c"] for t in d["terms"]})


def poly_eval(p, z):
    return p(z)


def poly_partial(p, var):
    return p.partial(var)


class TrigFunction:
    """Finite trigonometric combination ``sum_m a_m cos(m s) + b_m sin(m s)``.

    Frequencies are non-negative integers; the representation is closed
    under sums and products, and the integral over [0, 2*pi] is read off
    the frequency-zero cosine coefficient.
    """

    __slots__ = ("modes",)

    def __init__(self, modes=None):
        clean = {}
        for m, (a, b) in (modes or {}).items():
            m = int(m)
            if m < 0:
                m, b = -m, -b
            a0, b0 = clean.get(m, (0.0, 0.0))
            clean[m] = (a0 + float(a), b0 + float(b))
        out = {}
        for m, (a, b) in clean.items():
            if m == 0:
                b = 0.0
            if abs(a) > PRUNE_TOL or abs(b) > PRUNE_TOL:
                out[m] = (a, b)
        self.modes = out

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def constant(cls, c):
        return cls({0: (c, 0.0)})

    @classmethod
    def cos(cls, m, c=1.0):
        return cls({abs(int(m)): (c, 0.0)})

    @classmethod
    def sin(cls, m, c=1.0):
        m = int(m)
        if m < 0:
            return cls({-m: (0.0, -c)})
        return cls({m: (0.0, c)})

    def is_zero(self):
        return not self.modes

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = TrigFunction.constant(other)
        merged = dict(self.modes)
        for m, (a, b) in other.modes.items():
            a0, b0 = merged.get(m, (0.0, 0.0))
            merged[m] = (a0 + a, b0 + b)
        return TrigFunction(merged)

    __radd__ = __add__

    def __neg__(self):
        return TrigFunction({m: (-a, -b) for m, (a, b) in self.modes.items()})

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = TrigFunction.constant(other)
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return TrigFunction(
                {m: (a * other, b * other) for m, (a, b) in self.modes.items()})
        # product-to-sum in one pass; negative frequencies fold back
        acc = {}

        def bump(m, da, db):
            if m < 0:
                m, db = -m, -db
            a0, b0 = acc.get(m, (0.0, 0.0))
            acc[m] = (a0 + da, b0 + db)

        for m, (a1, b1) in self.modes.items():
            for n, (a2, b2) in other.modes.items():
                bump(m - n, 0.5 * (a1 * a2 + b1 * b2), 0.5 * (b1 * a2 - a1 * b2))
                bump(m + n, 0.5 * (a1 * a2 - b1 * b2), 0.5 * (a1 * b2 + b1 * a2))
        return TrigFunction(acc)

    __rmul__ = __mul__

    def __call__(self, s):
        if isinstance(s, (int, float)):
            return self.eval_scalar(s)
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for m, (a, b) in self.modes.items():
            out = out + a * np.cos(m * s) + b * np.sin(m * s)
        return float(out) if out.ndim == 0 else out

    def eval_scalar(self, s):
        total = 0.0
        for m, (a, b) in self.modes.items():
            ms = m * s
            total += a * math.cos(ms) + b * math.sin(ms)
        return total

    def integral(self):
        """Exact integral over [0, 2*pi]."""
        return 2.0 * math.pi * self.modes.get(0, (0.0, 0.0))[0]

    def max_frequency(self):
        return max(self.modes, default=0)

    def __repr__(self):
        if not self.modes:
            return "TrigFunction(0)"
        bits = []
        for m in sorted(self.modes):
            a, b = self.modes[m]
            if abs(a) > 0:
                bits.append(f"{a:+.6g}cos({m}s)" if m else f"{a:+.6g}")
            if abs(b) > 0:
                bits.append(f"{b:+.6g}sin({m}s)")
        return "TrigFunction(" + " ".join(bits) + ")"

    def to_dict(self):
        return {"modes": [{"m": m, "cos": a, "sin": b}
                          for m, (a, b) in sorted(self.modes.items())]}

    @classmethod
    def from_dict(cls, d):
        return cls({e["m"]: (e["cos"], e["sin"]) for e in d["modes"]})


def trig_product(f, g):
    return f * g


def trig_inner_product(f, g):
    """Exact value of the period inner product ``integral_0^{2pi} f g ds``."""
    return (f * g).integral()


def basis_g(k, p, omega):
    """Product basis function ``prod_i cos(omega_i s)^p_i sin(omega_i s)^(k_i-p_i)``.

    Returns the zero function when ``p`` falls outside the box [0, k].
    """
    k = tuple(int(x) for x in k)
    p = tuple(int(x) for x in p)
    omega = tuple(int(x) for x in omega)
    if len(k) != len(p) or len(k) != len(omega):
        raise InputError("k, p, omega must have equal lengths")
    if any(w <= 0 for w in omega):
        raise InputError("frequencies must be positive integers")
    if any(pi < 0 or pi > ki for pi, ki in zip(p, k)):
        return TrigFunction.zero()
    out = TrigFunction.constant(1.0)
    for ki, pi, wi in zip(k, p, omega):
        for _ in range(pi):
            out = out * TrigFunction.cos(wi)
        for _ in range(ki - pi):
            out = out * TrigFunction.sin(wi)
    return out


class TimeVaryingPolynomial:
    """Polynomial in ``dim`` variables whose coefficients are TrigFunctions."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim, terms=None):
        self.dim = int(dim)
        out = {}
        for mi, tf in (terms or {}).items():
            mi = tuple(int(e) for e in mi)
            if len(mi) != self.dim:
                raise InputError(
                    f"multi-index {mi} has length {len(mi)}, expected {self.dim}")
            if not tf.is_zero():
                out[mi] = tf
        self.terms = out

    @classmethod
    def zero(cls, dim):
        return cls(dim, {})

    @classmethod
    def from_polynomial(cls, p):
        return cls(p.dim, {mi: TrigFunction.constant(c)
                           for mi, c in p.terms.items()})

    def __add__(self, other):
        if self.dim != other.dim:
            raise InputError("dimension mismatch")
        terms = dict(self.terms)
        for mi, tf in other.terms.items():
            terms[mi] = terms[mi] + tf if mi in terms else tf
        return TimeVaryingPolynomial(self.dim, terms)

    def __mul__(self, other):
        if isinstance(other, (int, float, TrigFunction)):
            return TimeVaryingPolynomial(
                self.dim, {mi: tf * other for mi, tf in self.terms.items()})
        if self.dim != other.dim:
            raise InputError("dimension mismatch")
        terms = {}
        for mi1, t1 in self.terms.items():
            for mi2, t2 in other.terms.items():
                mi = tuple(a + b for a, b in zip(mi1, mi2))
                prod = t1 * t2
                terms[mi] = terms[mi] + prod if mi in terms else prod
        return TimeVaryingPolynomial(self.dim, terms)

    __rmul__ = __mul__

    def freeze(self, t):
        """Fix the time argument, producing a plain Polynomial."""
        return Polynomial(self.dim,
                          {mi: tf.eval_scalar(t) for mi, tf in self.terms.items()})

    def eval(self, z, t):
        total = 0.0
        for mi, tf in self.terms.items():
            term = tf.eval_scalar(t)
            if term == 0.0:
                continue
            for i, e in enumerate(mi):
                if e == 1:
                    term *= z[i]
                elif e > 1:
                    term *= z[i] ** e
            total += term
        return total

    def partial(self, var):
        if not 0 <= var < self.dim:
            raise InputError(f"variable index {var} out of range")
        terms = {}
        for mi, tf in self.terms.items():
            e = mi[var]
            if e == 0:
                continue
            dmi = tuple(x - 1 if i == var else x for i, x in enumerate(mi))
            scaled = tf * float(e)
            terms[dmi] = terms[dmi] + scaled if dmi in terms else scaled
        return TimeVaryingPolynomial(self.dim, terms)

    def degree(self):
        return max((sum(mi) for mi in self.terms), default=0)

    def to_dict(self):
        return {"dim": self.dim,
                "terms": [{"idx": list(mi), "trig": tf.to_dict()}
                          for mi, tf in sorted(self.terms.items(),
                                               key=lambda t: (sum(t[0]), t[0]))]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["dim"], {tuple(t["idx"]): TrigFunction.from_dict(t["trig"])
                              for t in d["terms"]})


@dataclass(frozen=True)
class PolyFit:
    polynomial: Polynomial
    max_residual: float
    cond: float


def poly_fit_on_grid(samples, degree):
    """Least-squares polynomial fit of scattered samples.

    Parameters
    ----------
    samples : list of (point, value) pairs; points share a common dimension.
    degree : maximum total degree of the fitted polynomial.

    Returns a ``PolyFit`` with the fitted polynomial, the maximum absolute
    residual over the samples and the design-matrix condition number.
    """
    if not samples:
        raise InputError("no samples")
    pts = np.asarray([np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in samples])
    vals = np.asarray([v for _, v in samples], dtype=float)
    dim = pts.shape[1]
    monos = multi_indices(dim, degree)
    if len(samples) < len(monos):
        raise InputError(
            f"need at least {len(monos)} samples for degree {degree} in "
            f"dimension {dim}, got {len(samples)}")
    design = np.ones((len(samples), len(monos)))
    for col, mi in enumerate(monos):
        for i, e in enumerate(mi):
            if e:
                design[:, col] *= pts[:, i] ** e
    sv = np.linalg.svd(design, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if sv[-1] <= 1e-12 * sv[0]:
        raise FitError(f"rank-deficient design matrix (cond={cond:.3e})", cond=cond)
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    residual = float(np.max(np.abs(design @ coef - vals)))
    poly = Polynomial(dim, {mi: c for mi, c in zip(monos, coef)})
    return PolyFit(poly, residual, cond)
