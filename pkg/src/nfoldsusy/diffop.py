"""Ordinary differential operators with expression coefficients.

An operator is stored in normal form sum_k a_k(q) d^k with all
derivatives to the right of the coefficients.  The momentum convention
p = -i d/dq is fixed globally: constructors and accessors that speak in
powers of p fold the required (-i)^k factors in and out, so user-level
formulas can be written exactly as in the physics notation.
"""

from __future__ import annotations

import math

from . import expr as ex
from .errors import NFoldError


def _binom(n, k):
    return math.comb(n, k)


class DiffOp:
    """Immutable operator sum_k coeffs[k] * d^k."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = [c if isinstance(c, ex.Expr) else ex.Const(c)
                  for c in coeffs]
        while len(coeffs) > 1 and _is_structural_zero(coeffs[-1]):
            coeffs.pop()
        if not coeffs:
            coeffs = [ex.ZERO]
        object.__setattr__(self, "coeffs", tuple(coeffs))

    def __setattr__(self, *a):
        raise AttributeError("DiffOp is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_p_coeffs(cls, ws):
        """Build sum_k ws[k] * p^k with p = -i d/dq."""
        return cls([ex.mul(ex.Const((-1j) ** k), w)
                    for k, w in enumerate(ws)])

    @classmethod
    def identity(cls):
        return cls([ex.ONE])

    @classmethod
    def zero(cls):
        return cls([ex.ZERO])

    @classmethod
    def momentum(cls):
        return cls([ex.ZERO, ex.Const(-1j)])

    @classmethod
    def multiplication(cls, f):
        return cls([f])

    @classmethod
    def schrodinger(cls, potential):
        """H = p^2/2 + V(q) = -(1/2) d^2 + V(q)."""
        return cls([potential, ex.ZERO, ex.Const(-0.5)])

    # -- basic structure -----------------------------------------------------

    @property
    def order(self):
        """Structural order (index of the last kept coefficient)."""
        return len(self.coeffs) - 1

    def coeff(self, k):
        return self.coeffs[k] if k <= self.order else ex.ZERO

    def p_coeff(self, k):
        """Coefficient of p^k, i.e. coeffs[k] * i^k."""
        return ex.mul(ex.Const(1j ** k), self.coeff(k))

    def is_zero_op(self, dom, tol=1e-9, n_samples=32):
        return all(ex.is_zero(c, dom, n_samples=n_samples, tol=tol)
                   for c in self.coeffs)

    def max_coeff_sample(self, dom, n_samples=32):
        """Largest |coefficient| over sample points; diagnostic helper."""
        worst = 0.0
        for c in self.coeffs:
            t = ex.is_zero(c, dom, n_samples=max(8, n_samples), tol=1.0)
            worst = max(worst, t.max_abs)
        return worst

    # -- algebra -------------------------------------------------------------

    def __add__(self, other):
        other = _as_op(other)
        n = max(self.order, other.order)
        return DiffOp([ex.add(self.coeff(k), other.coeff(k))
                       for k in range(n + 1)])

    def __sub__(self, other):
        other = _as_op(other)
        n = max(self.order, other.order)
        return DiffOp([ex.add(self.coeff(k),
                              ex.mul(ex.Const(-1), other.coeff(k)))
                       for k in range(n + 1)])

    def __neg__(self):
        return DiffOp([ex.mul(ex.Const(-1), c) for c in self.coeffs])

    def __mul__(self, scalar):
        scalar = scalar if isinstance(scalar, ex.Expr) else ex.Const(scalar)
        return DiffOp([ex.mul(scalar, c) for c in self.coeffs])

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose(self, other)

    def __eq__(self, other):
        return isinstance(other, DiffOp) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        from .parser import to_text
        parts = []
        for k, c in enumerate(self.coeffs):
            head = f"({to_text(c)})"
            parts.append(head if k == 0 else
                         head + ("*d" if k == 1 else f"*d^{k}"))
        return "DiffOp[" + " + ".join(parts) + "]"


def _is_structural_zero(c):
    return isinstance(c, ex.Const) and c.value == 0


def _as_op(x):
    if isinstance(x, DiffOp):
        return x
    if isinstance(x, ex.Expr):
        return DiffOp([x])
    if isinstance(x, (int, float, complex)):
        return DiffOp([ex.Const(x)])
    raise TypeError(f"cannot interpret {x!r} as an operator")


def compose(a: DiffOp, b: DiffOp) -> DiffOp:
    """Operator product a(b(.)) in normal form via the Leibniz rule:
    d^k (g .) = sum_j C(k,j) g^(j) d^(k-j)."""
    a, b = _as_op(a), _as_op(b)
    n = a.order + b.order
    out = [[] for _ in range(n + 1)]
    for l, bl in enumerate(b.coeffs):
        if _is_structural_zero(bl):
            continue
        # derivatives of b_l reused across all a_k
        derivs = [bl]
        for _ in range(a.order):
            derivs.append(ex.differentiate(derivs[-1]))
        for k, ak in enumerate(a.coeffs):
            if _is_structural_zero(ak):
                continue
            for j in range(k + 1):
                term = ex.mul(ex.Const(_binom(k, j)), ak, derivs[j])
                out[k - j + l].append(term)
    return DiffOp([ex.add(*terms) if terms else ex.ZERO for terms in out])


def adjoint(a: DiffOp) -> DiffOp:
    """Formal adjoint under the L2 inner product: each a_k d^k maps to
    (-d)^k conj(a_k), boundary terms ignored."""
    a = _as_op(a)
    n = a.order
    out = [[] for _ in range(n + 1)]
    for k, ak in enumerate(a.coeffs):
        if _is_structural_zero(ak):
            continue
        cbar = ex.conjugate(ak)
        derivs = [cbar]
        for _ in range(k):
            derivs.append(ex.differentiate(derivs[-1]))
        # (-d)^k (c .) = (-1)^k sum_j C(k,j) c^(j) d^(k-j)
        for j in range(k + 1):
            term = ex.mul(ex.Const((-1) ** k * _binom(k, j)), derivs[j])
            out[k - j].append(term)
    return DiffOp([ex.add(*terms) if terms else ex.ZERO for terms in out])


def apply(a: DiffOp, f: ex.Expr) -> ex.Expr:
    """Image of the function f under the operator: sum_k a_k f^(k)."""
    a = _as_op(a)
    terms = []
    d = f
    for k, ak in enumerate(a.coeffs):
        if k > 0:
            d = ex.differentiate(d)
        if _is_structural_zero(ak):
            continue
        terms.append(ex.mul(ak, d))
    return ex.add(*terms)


def commutator(a: DiffOp, b: DiffOp) -> DiffOp:
    return compose(a, b) - compose(b, a)


def anticommutator(a: DiffOp, b: DiffOp) -> DiffOp:
    return compose(a, b) + compose(b, a)


def power(a: DiffOp, n: int) -> DiffOp:
    if n < 0:
        raise NFoldError("negative operator powers are not defined")
    result = DiffOp.identity()
    for _ in range(n):
        result = compose(result, a)
    return result
