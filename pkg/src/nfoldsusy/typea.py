"""Product-form supercharge models built from a pair of functions (W, E).

The supercharge factorizes as P = (D + i(N-1)E)...(D + iE) D with
D = p - iW, the partner potentials are

    V± = (W² + v±)/2,
    v± = -(N-1) E W + (N-1)(2N-1)/6 E² - (N²-1)/6 E'
         ± N (W' - (N-1)/2 E'),

and the model is admissible exactly when the combined closure condition
(see :func:`condition_residual`) vanishes.  For admissible models the
kernels of P and of its adjoint have the closed-form bases

    φ-_n = h^(n-1) U^(-1),      φ+_n = h^(n-1) V U,

with U = exp(∫W), V = exp(-(N-1)∫E) and h any solution of h'' = E h'
with h' not identically zero.  The finite matrices representing H∓ on
those bases follow from an inductive elimination that divides by lower
partial products of the supercharge; their entries are constants, which
is certified numerically by evaluating at two distinct regular points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diffop as dop
from . import expr as ex
from .charpoly import charpoly_coeffs, detm_coeffs, matrix_roots
from .diffop import DiffOp
from .errors import CollocationError, EvaluationError, ModelError, SMatrixError
from .susy import SuperSystem, make_system, verify


@dataclass(frozen=True)
class TypeAModel:
    """Inputs (n, w, e, dom, c1, c2) plus everything derived from them.

    ``u`` and ``vfun`` are the exponential integrating factors; ``h``
    solves h'' = E h' and parametrizes the kernel bases; ``p`` is the
    expanded supercharge in normal form.
    """

    n: int
    w: ex.Expr
    e: ex.Expr
    dom: ex.Domain
    c1: complex
    c2: complex
    vminus: ex.Expr
    vplus: ex.Expr
    p: DiffOp
    u: ex.Expr
    uinv: ex.Expr
    vfun: ex.Expr
    h: ex.Expr

    @property
    def hminus(self):
        return DiffOp.schrodinger(self.vminus)

    @property
    def hplus(self):
        return DiffOp.schrodinger(self.vplus)

    def partial_supercharge(self, m: int) -> DiffOp:
        """P_m = (D + i(m-1)E)...(D + iE) D, with P_0 the identity."""
        if not 0 <= m <= self.n:
            raise ValueError(f"partial order {m} outside 0..{self.n}")
        result = DiffOp.identity()
        for k in range(m):
            result = dop.compose(_factor(self.w, self.e, k), result)
        return result

    def plus_partial(self, m: int) -> DiffOp:
        """Annihilator of the first m plus-branch kernel functions:
        the conjugation (U²V) P_m (U²V)^(-1) expanded in first-order
        factors p + i(W - (N-1-k)E), k = m-1..0.

        Note the shift involves the full order N, so for m < N this is
        not the adjoint of P_m; it coincides with adjoint(P) at m = N
        for the models with real potentials.
        """
        if not 0 <= m <= self.n:
            raise ValueError(f"partial order {m} outside 0..{self.n}")
        result = DiffOp.identity()
        for k in range(m):
            shift = self.w - ex.Const(self.n - 1 - k) * self.e
            factor = DiffOp.from_p_coeffs(
                [ex.mul(ex.Const(1j), shift), ex.ONE])
            result = dop.compose(factor, result)
        return result


def _factor(w, e, k):
    # D + i k E = p - i(W - kE)
    shift = w if k == 0 else w - ex.Const(k) * e
    return DiffOp.from_p_coeffs([ex.mul(ex.Const(-1j), shift), ex.ONE])


def potentials(w, e, n):
    """The pair (V-, V+) for given W, E and order n."""
    wp = ex.differentiate(w)
    ep = ex.differentiate(e)
    common = (-(n - 1) * e * w
              + ex.Const((n - 1) * (2 * n - 1) / 6) * ex.pow_(e, 2)
              - ex.Const((n * n - 1) / 6) * ep)
    asym = ex.Const(n) * (wp - ex.Const((n - 1) / 2) * ep)
    vminus = (ex.pow_(w, 2) + common - asym) / 2
    vplus = (ex.pow_(w, 2) + common + asym) / 2
    return vminus, vplus


def build(w: ex.Expr, e: ex.Expr, n: int, dom: ex.Domain,
          c1: complex = 1.0, c2: complex = 0.0,
          h: ex.Expr = None) -> TypeAModel:
    """Assemble the model for (W, E, order n) on the domain.

    ``h`` defaults to c1 ∫ exp(∫E) + c2 with both integrals anchored at
    the domain reference point; a caller may supply any other solution
    of h'' = E h' (the scaled families do, to keep their coupling
    grading intact).  Admissibility is not checked here; use
    :func:`condition_residual`.
    """
    if n < 1:
        raise ModelError("order must be >= 1")
    if h is None and c1 == 0:
        raise ModelError("c1 = 0 makes h' vanish identically; the kernel "
                         "basis would degenerate")
    vminus, vplus = potentials(w, e, n)
    p = DiffOp.identity()
    for k in range(n):
        p = dop.compose(_factor(w, e, k), p)
    w_int = ex.integral(w, dom.q0)
    u = ex.exp(w_int)
    uinv = ex.exp(ex.mul(ex.Const(-1), w_int))
    vfun = ex.exp(ex.mul(ex.Const(-(n - 1)), ex.integral(e, dom.q0)))
    if h is None:
        h = (ex.Const(c1)
             * ex.integral(ex.exp(ex.integral(e, dom.q0)), dom.q0)
             + ex.Const(c2))
    return TypeAModel(n, w, e, dom, complex(c1), complex(c2),
                      vminus, vplus, p, u, uinv, vfun, h)


def as_supersystem(model: TypeAModel, verified=False) -> SuperSystem:
    sys = make_system(model.n, model.vminus, model.vplus, model.p, model.dom)
    if verified:
        sys = sys.with_report(verify(sys))
    return sys


def condition_residual(model: TypeAModel) -> ex.Expr:
    """Left side of the combined closure condition

        G'' - E G' - 2(N-1)/3 [ (E'+E²)'' - E (E'+E²)' ],
        G = (W - E/2)' + E (W - E/2).

    The model is admissible iff this vanishes on the domain.
    """
    w, e, n = model.w, model.e, model.n
    base = w - e / 2
    g = ex.differentiate(base) + e * base
    gp = ex.differentiate(g)
    gpp = ex.differentiate(gp)
    b = ex.differentiate(e) + ex.pow_(e, 2)
    bp = ex.differentiate(b)
    bpp = ex.differentiate(bp)
    return (gpp - e * gp
            - ex.Const(2 * (n - 1) / 3) * (bpp - e * bp))


def kernel_basis(model: TypeAModel, branch: str):
    """Closed-form basis of ker P (branch '-') or ker P† (branch '+')."""
    _check_branch(branch)
    if model.c1 == 0 and isinstance(model.h, ex.Const):
        raise ModelError("h is constant: kernel basis degenerates")
    fns = []
    for k in range(model.n):
        hpow = ex.pow_(model.h, k) if k else ex.ONE
        if branch == "minus":
            fns.append(ex.mul(hpow, model.uinv))
        else:
            fns.append(ex.mul(hpow, model.vfun, model.u))
    return tuple(fns)


def _check_branch(branch):
    if branch not in ("minus", "plus"):
        raise ValueError("branch must be 'minus' or 'plus'")


# ---------------------------------------------------------------------------
# finite matrices


@dataclass(frozen=True)
class SMatrix:
    """Finite matrix of the Hamiltonian restricted to a supercharge
    kernel, with its characteristic data.

    ``charpoly`` is monic in descending powers of the energy;
    ``detm`` carries the extra 2^N of the determinant convention.
    ``constancy`` is the relative entry drift between the two
    evaluation points used for the constancy certificate.
    """

    branch: str
    matrix: np.ndarray
    charpoly: np.ndarray
    detm: np.ndarray
    roots: np.ndarray
    qstar: float
    constancy: float
    fit_residual: float = None
    condition_number: float = None
    gvalue: float = None

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def max_root_imag(self):
        if len(self.roots) == 0:
            return 0.0
        return float(np.abs(self.roots.imag).max())

    def real_roots(self, tol=1e-8):
        scale = 1.0 + np.abs(self.roots).max() if len(self.roots) else 1.0
        if self.max_root_imag > tol * scale:
            raise SMatrixError(
                f"roots have imaginary parts up to {self.max_root_imag:.3e}")
        return np.sort(self.roots.real)

    def detm_value(self, energy):
        return complex(np.polyval(self.detm, energy))

    def to_dict(self):
        d = {
            "branch": self.branch,
            "size": int(self.size),
            "matrix": [[[v.real, v.imag] for v in row]
                       for row in self.matrix],
            "charpoly": [[v.real, v.imag] for v in self.charpoly],
            "roots": [[v.real, v.imag] for v in self.roots],
            "qstar": self.qstar,
            "constancy": self.constancy,
        }
        if self.fit_residual is not None:
            d["fit_residual"] = self.fit_residual
        if self.condition_number is not None:
            d["condition_number"] = self.condition_number
        if self.gvalue is not None:
            d["gvalue"] = self.gvalue
        return d


def _finish_matrix(branch, s, qstar, drift, fit_residual=None,
                   condition_number=None, gvalue=None):
    cp = charpoly_coeffs(s)
    return SMatrix(branch, s, cp, detm_coeffs(s), matrix_roots(s),
                   qstar, drift, fit_residual, condition_number, gvalue)


def _candidate_points(model, qstar, branch, evaluator):
    """Candidate q* values: the default 0.37-of-span heuristic plus a
    low-discrepancy spread, ranked so that points where the kernel
    functions have moderate magnitude come first.  Evaluating where
    |φ| is ~1 keeps the column elimination away from catastrophic
    cancellation (the basis is exponentially large/small elsewhere)."""
    lo, hi = model.dom.window()
    span = hi - lo
    first = qstar if qstar is not None else (
        model.dom.q0 + 0.37 * (hi - model.dom.q0))
    pts = [first]
    u = 0.0
    for _ in range(12):
        u = (u + 0.6180339887498949) % 1.0
        pts.append(lo + (0.08 + 0.84 * u) * span)
    top = kernel_basis(model, branch)[-1]
    ranked = []
    for rank, q in enumerate(pts):
        if not lo < q < hi:
            continue
        if any(abs(q - s) < 0.02 * span for s in model.dom.singular):
            continue
        try:
            m = abs(evaluator(top, q))
        except EvaluationError:
            continue
        if m == 0:
            continue
        badness = abs(math.log10(m))
        if qstar is not None and rank == 0:
            badness = -1.0  # an explicit q* request goes first
        ranked.append((badness, rank, q))
    ranked.sort()
    return [q for _, _, q in ranked]


def _matrix_at(model, branch, point, evaluator):
    """One evaluation of the inductive elimination at a single point.

    Returns None when a denominator vanishes there (caller retries at a
    shifted point).
    """
    n = model.n
    basis = kernel_basis(model, branch)
    if branch == "minus":
        ham = model.hminus
        partial = [model.partial_supercharge(m) for m in range(n)]
    else:
        ham = model.hplus
        partial = [model.plus_partial(m) for m in range(n)]

    hphi = [dop.apply(ham, f) for f in basis]
    try:
        t_h = np.array([[evaluator(dop.apply(partial[o], hphi[j]), point)
                         for j in range(n)] for o in range(n)])
        t_b = np.array([[evaluator(dop.apply(partial[o], basis[j]), point)
                         for j in range(n)] for o in range(n)])
    except EvaluationError:
        return None

    s = np.zeros((n, n), dtype=complex)
    scale = max(1.0, np.abs(t_b).max())
    for col in range(n - 1, -1, -1):
        den = t_b[col][col]
        if abs(den) < 1e-13 * scale:
            return None
        for row in range(n):
            acc = t_h[col][row]
            for j in range(col + 1, n):
                acc -= s[row, j] * t_b[col][j]
            s[row, col] = acc / den
    return s


def s_matrix(model: TypeAModel, branch: str = "minus",
             qstar: float = None) -> SMatrix:
    """Matrix of H∓ on the kernel basis via the inductive column
    elimination, with a two-point constancy certificate.

    Entries are constant only for admissible models, so a failed
    certificate doubles as a model-validity check.
    """
    _check_branch(branch)
    evaluator = ex.Evaluator()
    successes = []
    for q in _candidate_points(model, qstar, branch, evaluator):
        s = _matrix_at(model, branch, q, evaluator)
        if s is None:
            continue
        successes.append((q, s))
        if len(successes) == 2:
            break
    if len(successes) < 2:
        raise SMatrixError(
            "could not find two regular evaluation points with "
            "non-vanishing denominators")
    (q1, s1), (q2, s2) = successes
    scale = 1.0 + np.abs(s1).max()
    drift = float(np.abs(s2 - s1).max() / scale)
    if drift > 1e-8:
        raise SMatrixError(
            f"entry constancy certificate failed: drift {drift:.3e} "
            f"between q* = {q1:.6g} and {q2:.6g} "
            "(model inadmissible or numerically degenerate)")
    return _finish_matrix(branch, s1, q1, drift)


def s_matrix_collocation(sys, basis, points, branch: str = "minus") -> SMatrix:
    """Least-squares extraction of the finite matrix from
    H φ_n = sum_m S[n,m] φ_m sampled at the given points.

    Requires at least 2N points; an ill-conditioned collocation matrix
    or a large fit residual (basis not invariant under H) is an error.
    """
    _check_branch(branch)
    if isinstance(sys, SuperSystem):
        ham = sys.hminus if branch == "minus" else sys.hplus
    elif isinstance(sys, TypeAModel):
        ham = sys.hminus if branch == "minus" else sys.hplus
    else:
        ham = sys
    n = len(basis)
    points = list(points)
    if len(points) < 2 * n:
        raise CollocationError(f"need at least {2*n} points, got {len(points)}")
    evaluator = ex.Evaluator()
    a = np.array([[evaluator(f, q) for f in basis] for q in points])
    cond = float(np.linalg.cond(a))
    if cond > 1e10:
        raise CollocationError(
            f"collocation matrix ill-conditioned (cond = {cond:.3e})",
            condition_number=cond)
    s_rows = []
    residual = 0.0
    col_scale = np.abs(a).max()
    for f in basis:
        rhs = np.array([evaluator(dop.apply(ham, f), q) for q in points])
        row, res, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        fit = a @ row - rhs
        residual = max(residual,
                       float(np.abs(fit).max()
                             / max(col_scale, np.abs(rhs).max(), 1e-30)))
        s_rows.append(row)
    if residual > 1e-6:
        raise CollocationError(
            f"basis is not invariant under the Hamiltonian "
            f"(fit residual {residual:.3e})", condition_number=cond,
            residual=residual)
    s = np.array(s_rows)
    return _finish_matrix(branch, s, float(points[0]), 0.0,
                          fit_residual=residual, condition_number=cond)
