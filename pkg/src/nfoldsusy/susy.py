"""Assembly and verification of systems with polynomial supercharges.

A system is the triple (H-, H+, P) with H± = p²/2 + V±(q) and P an
N-th order polynomial in p with unit leading coefficient.  It carries
N-fold supersymmetry exactly when both intertwining residuals

    R1 = P H- - H+ P,        R2 = P† H+ - H- P†

vanish as operators.  This module also provides the complete
non-trivial 2-fold family, the converse construction from a
quasi-solvable pair (P, H), the finite-determinant identities that tie
P†P to the characteristic polynomial of the finite matrix representing
H- on ker P, and equality of the two characteristic determinants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import diffop as dop
from . import expr as ex
from .charpoly import charpoly_coeffs, detm_coeffs
from .diffop import DiffOp
from .errors import ModelError, NFoldError


def _as_matrix(s):
    """Accept an SMatrix-like object or a plain array."""
    if hasattr(s, "matrix"):
        return np.asarray(s.matrix, dtype=complex)
    return np.asarray(s, dtype=complex)


def schrodinger_potential(h: DiffOp, dom: ex.Domain = None) -> ex.Expr:
    """Extract V from an operator in the form p²/2 + V(q).

    Structural checks only unless a domain is given, in which case the
    first-order coefficient is also sample-tested to vanish.
    """
    if h.order != 2:
        raise ModelError("Hamiltonian must be second order")
    lead = h.coeff(2)
    if not (isinstance(lead, ex.Const) and lead.value == -0.5):
        raise ModelError("Hamiltonian must have leading term p^2/2")
    if dom is not None and not ex.is_zero(h.coeff(1), dom, n_samples=16):
        raise ModelError("Hamiltonian has a first-order term")
    return h.coeff(0)


@dataclass(frozen=True)
class ResidualReport:
    """Per-coefficient zero tests for one residual operator."""

    tests: tuple

    @property
    def ok(self):
        return all(t.ok for t in self.tests)

    @property
    def max_abs(self):
        return max((t.max_abs for t in self.tests), default=0.0)

    @property
    def witness(self):
        bad = [t for t in self.tests if not t.ok]
        if not bad:
            return None
        worst = max(bad, key=lambda t: t.max_abs)
        return (worst.witness_q, worst.witness_value)

    def to_dict(self):
        d = {"ok": self.ok, "max_abs": self.max_abs}
        if self.witness is not None:
            q, v = self.witness
            d["witness"] = {"q": q, "value": [v.real, v.imag]}
        return d


@dataclass(frozen=True)
class VerificationReport:
    forward: ResidualReport
    backward: ResidualReport

    @property
    def ok(self):
        return self.forward.ok and self.backward.ok

    def to_dict(self):
        return {"ok": self.ok,
                "intertwining_forward": self.forward.to_dict(),
                "intertwining_backward": self.backward.to_dict()}


@dataclass(frozen=True)
class SuperSystem:
    """(H-, H+, P) with the order of P and the working domain.

    ``p`` has unit leading p-coefficient; both Hamiltonians are kept in
    Schrödinger form.  ``verification`` is attached by constructors that
    check the algebra on the way out.
    """

    n: int
    hminus: DiffOp
    hplus: DiffOp
    p: DiffOp
    dom: ex.Domain
    verification: VerificationReport = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ModelError("order must be a positive integer")
        if self.p.order != self.n:
            raise ModelError(
                f"supercharge order {self.p.order} != declared {self.n}")

    @property
    def vminus(self):
        return schrodinger_potential(self.hminus)

    @property
    def vplus(self):
        return schrodinger_potential(self.hplus)

    def with_report(self, report):
        return SuperSystem(self.n, self.hminus, self.hplus, self.p,
                           self.dom, report)


def make_system(n, vminus, vplus, p, dom) -> SuperSystem:
    return SuperSystem(n, DiffOp.schrodinger(vminus),
                       DiffOp.schrodinger(vplus), p, dom)


# ---------------------------------------------------------------------------
# intertwining


def intertwining_residual(sys: SuperSystem):
    """Residual operators (P H- - H+ P,  P† H+ - H- P†).

    Both are the zero operator exactly when the system closes the
    supersymmetry algebra; the second uses the conjugating formal
    adjoint, so it additionally probes the reality structure of the
    potentials.
    """
    r1 = dop.compose(sys.p, sys.hminus) - dop.compose(sys.hplus, sys.p)
    padj = dop.adjoint(sys.p)
    r2 = dop.compose(padj, sys.hplus) - dop.compose(sys.hminus, padj)
    return r1, r2


def verify(sys: SuperSystem, tol=1e-9, n_samples=64,
           seed=0) -> VerificationReport:
    r1, r2 = intertwining_residual(sys)
    f = ResidualReport(tuple(ex.is_zero(c, sys.dom, n_samples, tol, seed)
                             for c in r1.coeffs))
    b = ResidualReport(tuple(ex.is_zero(c, sys.dom, n_samples, tol, seed)
                             for c in r2.coeffs))
    return VerificationReport(f, b)


# ---------------------------------------------------------------------------
# the complete non-trivial 2-fold family


def two_fold_build(w1: ex.Expr, c: complex, dom: ex.Domain) -> SuperSystem:
    """Build the general non-trivial 2-fold system from the first-order
    supercharge coefficient w1 and the free constant c.

    The subleading coefficient and both potentials follow in closed form:

        w0  = w1²/4 + (w1''/w1 - w1'²/(2 w1²) - i c/w1²)/2 - i w1'/2
        V±  = -w1²/8 + (w1''/w1 - w1'²/(2 w1²) - i c/w1²)/4 ± i w1'/2

    w1 identically zero is rejected (that branch collapses to a trivial
    system whose supercharge is the Hamiltonian itself), as is a w1 with
    zeros on the sampling set, since the formulas divide by it.
    """
    pts = dom.sample_points(32)
    scale = 0.0
    values = []
    for q in pts:
        v = ex.evaluate(w1, q)
        values.append((q, v))
        scale = max(scale, abs(v))
    if scale < 1e-14:
        raise ModelError("w1 is identically zero on the domain: "
                         "the 2-fold family degenerates")
    bad = [q for q, v in values if abs(v) < 1e-8 * (1.0 + scale)]
    if bad:
        raise ModelError(
            "w1 vanishes at sampling points (singular division): "
            + ", ".join(f"{q:.6g}" for q in bad[:8]))

    w1p = ex.differentiate(w1)
    w1pp = ex.differentiate(w1p)
    bracket = (ex.div(w1pp, w1)
               - ex.div(ex.pow_(w1p, 2), 2 * ex.pow_(w1, 2))
               - ex.div(ex.Const(1j * c), ex.pow_(w1, 2)))
    w0 = (ex.pow_(w1, 2) / 4 + bracket / 2
          - ex.Const(0.5j) * w1p)
    common = -ex.pow_(w1, 2) / 8 + bracket / 4
    vminus = common - ex.Const(0.5j) * w1p
    vplus = common + ex.Const(0.5j) * w1p
    p2 = DiffOp.from_p_coeffs([w0, w1, ex.ONE])
    sys = make_system(2, vminus, vplus, p2, dom)
    return sys.with_report(verify(sys))


def two_fold_uniqueness(sys: SuperSystem, n_samples=16, tol=1e-8) -> bool:
    """True when the supercharge is NOT unique for the given potentials,
    i.e. when w1'' - 2i w1 w1' - 2i V-' is proportional to w1'.

    A vanishing w1' with a non-vanishing left side is reported as not
    proportional (unique).
    """
    if sys.n != 2:
        raise NFoldError("uniqueness criterion applies to 2-fold systems")
    w1 = sys.p.p_coeff(1)
    w1p = ex.differentiate(w1)
    lhs = (ex.differentiate(w1p)
           - ex.Const(2j) * w1 * w1p
           - ex.Const(2j) * ex.differentiate(sys.vminus))
    pts = sys.dom.sample_points(n_samples)
    num, den = [], []
    for q in pts:
        try:
            num.append(ex.evaluate(lhs, q))
            den.append(ex.evaluate(w1p, q))
        except ex.EvaluationError:
            continue
    if not num:
        raise ModelError("all sample points singular")
    num = np.array(num)
    den = np.array(den)
    nscale = np.abs(num).max()
    dscale = np.abs(den).max()
    if dscale < tol * (1.0 + nscale):
        # w1' vanishes identically: proportional only if lhs does too
        return bool(nscale < tol)
    mask = np.abs(den) > 1e-6 * dscale
    ratios = num[mask] / den[mask]
    mean = ratios.mean()
    spread = np.abs(ratios - mean).max()
    if spread > tol * (1.0 + abs(mean)):
        return False
    # points where the denominator vanishes must have vanishing numerator
    small = ~mask
    return bool(np.all(np.abs(num[small]) <= tol * (1.0 + nscale)))


# ---------------------------------------------------------------------------
# converse construction: quasi-solvable pair -> supersymmetric pair


def quasi_to_susy(p: DiffOp, h: DiffOp, dom: ex.Domain) -> SuperSystem:
    """From an annihilator P of an H-invariant function space, build the
    partner Hamiltonian K = p²/2 + V + i c' where c is the coefficient of
    p^(N-1) in the normalized P.

    The returned system carries a verification report; a pair that is
    not quasi-solvable shows up as a non-zero backward/forward residual
    rather than as an exception.
    """
    n = p.order
    if n < 1:
        raise ModelError("supercharge must have positive order")
    lead = p.p_coeff(n)
    samples = dom.sample_points(8)
    vals = [ex.evaluate(lead, q) for q in samples]
    spread = max(abs(v - vals[0]) for v in vals)
    if spread > 1e-9 * (1.0 + abs(vals[0])):
        raise ModelError("leading coefficient of P is not constant")
    if abs(vals[0]) < 1e-14:
        raise ModelError("leading coefficient of P vanishes")
    pn = p * ex.Const(1.0 / vals[0])
    v = schrodinger_potential(h, dom)
    c_sub = pn.p_coeff(n - 1)
    u = v + ex.Const(1j) * ex.differentiate(c_sub)
    sys = SuperSystem(n, h, DiffOp.schrodinger(u), pn, dom)
    return sys.with_report(verify(sys))


# ---------------------------------------------------------------------------
# determinant identities


def detm_operator(s_matrix, hamiltonian: DiffOp) -> DiffOp:
    """det(2(E I - S)) with the Hamiltonian substituted for E; powers are
    expanded by repeated operator composition."""
    coeffs = detm_coeffs(_as_matrix(s_matrix))  # descending in E
    result = DiffOp.zero()
    for c in coeffs:
        result = dop.compose(result, hamiltonian)
        result = result + DiffOp([ex.Const(c)])
    return result


def mother_identity_residual(sys: SuperSystem, s_minus, testfns,
                             n_points=32) -> float:
    """Max relative residual of [P†P - det M-(H-)] over the test functions.

    Zero (to tolerance) certifies the unique-supercharge closed form of
    the anticommutator of the supercharges; an O(1) residual signals a
    lower-order correction supercharge.
    """
    lhs_op = dop.compose(dop.adjoint(sys.p), sys.p)
    rhs_op = detm_operator(s_minus, sys.hminus)
    pts = sys.dom.sample_points(n_points)
    worst = 0.0
    for f in testfns:
        lf = dop.apply(lhs_op, f)
        rf = dop.apply(rhs_op, f)
        memo = {}
        lvals, rvals = [], []
        for q in pts:
            try:
                lvals.append(ex.evaluate(lf, q, memo))
                rvals.append(ex.evaluate(rf, q, memo))
            except ex.EvaluationError:
                continue
        if not lvals:
            continue
        lvals = np.array(lvals)
        rvals = np.array(rvals)
        scale = max(np.abs(lvals).max(), np.abs(rvals).max(), 1e-30)
        worst = max(worst, float(np.abs(lvals - rvals).max() / scale))
    return worst


def detm_equality(s_minus, s_plus, tol=1e-8) -> bool:
    """Coefficient-wise equality of det(2(E I - S-)) and det(2(E I - S+))."""
    a = _as_matrix(s_minus)
    b = _as_matrix(s_plus)
    if a.shape != b.shape:
        raise NFoldError(f"matrix size mismatch: {a.shape} vs {b.shape}")
    ca = detm_coeffs(a)
    cb = detm_coeffs(b)
    scale = np.maximum(1.0, np.maximum(np.abs(ca), np.abs(cb)))
    return bool(np.all(np.abs(ca - cb) <= tol * scale))


# ---------------------------------------------------------------------------
# deterministic damped test functions


def damped_test_functions(dom: ex.Domain, count: int):
    """Smooth test functions decaying inside the sampling window, used
    for operator-identity checks by pointwise evaluation."""
    lo, hi = dom.window()
    mid = 0.5 * (lo + hi)
    width = hi - lo
    fns = []
    u = 0.0
    for k in range(count):
        u = (u + 0.6180339887498949) % 1.0
        center = mid + (u - 0.5) * 0.3 * width
        sigma = width / 8.0 * (0.6 + 0.8 * ((k % 5) / 4.0))
        gauss = ex.exp(-ex.pow_((ex.Q - center) / sigma, 2))
        if k % 3 == 1:
            fns.append(gauss * (1 + ex.Q * (2.0 / width)))
        elif k % 3 == 2:
            fns.append(gauss * ex.sin(ex.Q * (6.0 / width) + float(k)))
        else:
            fns.append(gauss)
    return fns
