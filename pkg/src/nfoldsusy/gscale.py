"""Coupling-constant families W(q) = w(gq)/g, E(q) = g e(gq).

In this scaling the potentials become harmonic with frequency |w'(0)|
as g -> 0, and the finite-matrix entries carry the grading

    S[n,m](g) = g^(m-n) * (polynomial in g²),

which is what makes the algebraic levels convergent power series in g².
This module builds the per-coupling models (with the kernel function h
normalized so the grading is preserved), checks the harmonic limit,
certifies the parity/polynomial structure by sampling and fitting, and
verifies the split of H φ into the leading and g²-suppressed parts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import diffop as dop
from .errors import ModelError, SMatrixError
from .typea import TypeAModel, build, kernel_basis, s_matrix

_SQRT_EPS = 1e-12


def _scaled_inputs(w, e, g):
    gq = ex.mul(ex.Const(g), ex.Q)
    w_scaled = ex.mul(ex.Const(1.0 / g), ex.substitute(w, gq))
    e_scaled = ex.mul(ex.Const(g), ex.substitute(e, gq))
    return w_scaled, e_scaled


def _scaled_h(e, e_scaled, g):
    """Kernel function h(q) = eta(gq)/g for the scaled model.

    For e regular at the origin this is the integral of exp(∫₀ E) from
    0, which automatically has h(0) = 0, h'(0) = 1.  A singular e (such
    as 1/x) admits no such normalization; the natural primitive from the
    closed-form table is used instead, keeping the same g-grading.
    """
    try:
        ex.evaluate(e, 0.0)
        regular = True
    except ex.EvaluationError:
        regular = False
    if regular:
        return ex.integral(ex.exp(ex.integral(e_scaled, 0.0)), 0.0)
    primitive = ex._antiderivative(e)
    if primitive is None:
        raise ModelError(
            "e is singular at 0 and has no closed-form antiderivative; "
            "cannot fix the h normalization of the scaled family")
    gq = ex.mul(ex.Const(g), ex.Q)
    return ex.integral(ex.exp(ex.substitute(primitive, gq)), 0.0)


def scale(w: ex.Expr, e: ex.Expr, g: float, n: int,
          dom: ex.Domain) -> TypeAModel:
    """One member of the scaled family at coupling g."""
    if g == 0:
        raise ModelError("coupling g must be non-zero")
    if not (ex.is_integral_free(w) and ex.is_integral_free(e)):
        raise ModelError("scaled families need integral-free w and e")
    w0 = ex.evaluate(w, 0.0)
    if abs(w0) > _SQRT_EPS:
        raise ModelError(f"w(0) = {w0:.3e} must vanish for the scaling "
                         "to have a harmonic limit")
    w_scaled, e_scaled = _scaled_inputs(w, e, g)
    h = _scaled_h(e, e_scaled, g)
    return build(w_scaled, e_scaled, n, dom, h=h)


@dataclass(frozen=True)
class ScaledFamily:
    """A scaled model family with its coupling sample list."""

    w: ex.Expr
    e: ex.Expr
    n: int
    dom: ex.Domain
    gs: tuple
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "gs", tuple(float(g) for g in self.gs))
        if any(g == 0 for g in self.gs):
            raise ModelError("coupling samples must be non-zero")
        if abs(self.wprime0) < _SQRT_EPS:
            raise ModelError("w'(0) must not vanish")

    @property
    def wprime0(self):
        return ex.evaluate(ex.differentiate(self.w), 0.0).real

    @property
    def primary_branch(self):
        """Branch whose kernel functions stay normalizable at small g:
        minus for w'(0) > 0, plus otherwise."""
        return "minus" if self.wprime0 > 0 else "plus"

    def model_at(self, g: float) -> TypeAModel:
        g = float(g)
        if g not in self._cache:
            self._cache[g] = scale(self.w, self.e, g, self.n, self.dom)
        return self._cache[g]

    def sample_points(self, count=12):
        return self.dom.sample_points(count)


def default_g_samples(k: int = 4):
    """The symmetric sample set {±0.1 j : j = 1..k}."""
    out = []
    for j in range(1, k + 1):
        out.extend([0.1 * j, -0.1 * j])
    return tuple(out)


# ---------------------------------------------------------------------------
# harmonic limit


@dataclass(frozen=True)
class HarmonicLimitReport:
    max_deviation: float
    linear_coefficient: float
    halving_ratio: float
    basis_spread: float

    def to_dict(self):
        return {"max_deviation": self.max_deviation,
                "linear_coefficient": self.linear_coefficient,
                "halving_ratio": self.halving_ratio,
                "basis_spread": self.basis_spread}


def _limit_points(family, half_width, count):
    """Sample points confined to |q| <= half_width (clipped to the
    domain): the harmonic-limit statement is pointwise in q, so the
    window must not grow with the domain."""
    dom = family.dom
    lo = max(dom.a, -half_width)
    hi = min(dom.b, half_width)
    q0 = dom.q0 if lo < dom.q0 < hi else 0.5 * (lo + hi)
    clipped = ex.Domain(lo, hi, "dirichlet", q0, dom.singular)
    return clipped.sample_points(count)


def _e_regular_at_zero(family):
    try:
        ex.evaluate(family.e, 0.0)
        return True
    except ex.EvaluationError:
        return False


def _potential_deviation(family, g, points):
    """Max over sample points of |V(q) - w'(0)² q²/2| after removing the
    energy-origin constant.  Both branches are measured for regular e;
    with e singular at the origin only the primary-branch potential has
    a harmonic limit (the partner keeps a centrifugal core)."""
    model = family.model_at(g)
    omega2 = family.wprime0 ** 2
    if _e_regular_at_zero(family):
        vs = (model.vminus, model.vplus)
    else:
        vs = (model.vminus if family.primary_branch == "minus"
              else model.vplus,)
    worst = 0.0
    evaluator = ex.Evaluator()
    for v in vs:
        devs = np.array([evaluator(v, q) - 0.5 * omega2 * q * q
                         for q in points])
        devs -= devs.mean()
        worst = max(worst, float(np.abs(devs).max()))
    return worst


def harmonic_limit_check(family: ScaledFamily, g: float = 1e-3,
                         n_points: int = 16,
                         half_width: float = 3.0) -> HarmonicLimitReport:
    """Quantify how the family collapses to the harmonic oscillator.

    Deviations are measured up to an additive constant (the energy
    origin is a convention).  The linear coefficient is fitted from the
    deviations at g and g/2, whose ratio is also reported; the kernel
    functions are compared against their Gaussian leading forms
    q^(n-1) exp(∓w'(0) q²/2).
    """
    points = _limit_points(family, half_width, n_points)
    dev_g = _potential_deviation(family, g, points)
    dev_h = _potential_deviation(family, g / 2, points)
    ratio = dev_h / dev_g if dev_g > 0 else 0.0
    coeff = dev_g / g

    spread = None
    if _e_regular_at_zero(family):
        # leading forms q^(n-1) exp(∓w'(0)q²/2) assume the h'(0) = 1
        # normalization, which singular e does not admit
        model = family.model_at(g)
        w0 = family.wprime0
        branch = family.primary_branch
        sign = -1.0 if branch == "minus" else 1.0
        gauss = ex.exp(ex.Const(sign * w0 / 2) * ex.pow_(ex.Q, 2))
        spread = 0.0
        evaluator = ex.Evaluator()
        for idx, f in enumerate(kernel_basis(model, branch)):
            ratios = []
            for q in points:
                if abs(q) < 1e-3:
                    continue
                denom = (q ** idx) * evaluator(gauss, q)
                ratios.append(evaluator(f, q) / denom)
            ratios = np.array(ratios)
            mid = ratios.mean()
            spread = max(spread,
                         float(np.abs(ratios - mid).max() / abs(mid)))
    return HarmonicLimitReport(dev_g, coeff, ratio, spread)


# ---------------------------------------------------------------------------
# coupling-structure certificate


@dataclass(frozen=True)
class EntryFit:
    row: int
    col: int
    parity_error: float
    fit_residual: float
    fitted_degree: int
    coefficients: tuple

    def to_dict(self):
        return {"row": self.row, "col": self.col,
                "parity_error": self.parity_error,
                "fit_residual": self.fit_residual,
                "fitted_degree": self.fitted_degree,
                "coefficients": [[c.real, c.imag]
                                 for c in self.coefficients]}


@dataclass(frozen=True)
class CertificateReport:
    branch: str
    ok: bool
    parity_tol: float
    fit_tol: float
    entries: tuple
    detm_fit_residual: float
    failing_entry: tuple = None
    error: str = None

    def to_dict(self):
        d = {"branch": self.branch, "ok": self.ok,
             "parity_tol": self.parity_tol, "fit_tol": self.fit_tol,
             "detm_fit_residual": self.detm_fit_residual,
             "entries": [e.to_dict() for e in self.entries]}
        if self.failing_entry is not None:
            d["failing_entry"] = list(self.failing_entry)
        if self.error is not None:
            d["error"] = self.error
        return d


def _even_poly_fit(us, ys, tol, max_deg):
    """Least-squares fit of samples ys(u) to a polynomial in u of degree
    at most ``max_deg``, reporting the smallest adequate degree.  The
    caller keeps max_deg at least two below the sample count so the fit
    is genuinely overdetermined rather than an interpolation."""
    max_deg = min(max_deg, len(us) - 2)
    if max_deg < 0:
        raise ModelError("not enough coupling samples for a fit")
    scale = max(1.0, float(np.abs(ys).max()))
    best = None
    for deg in range(max_deg + 1):
        vand = np.vander(us, deg + 1, increasing=True)
        coeffs, *_ = np.linalg.lstsq(vand, ys, rcond=None)
        residual = float(np.abs(vand @ coeffs - ys).max() / scale)
        if best is None or residual < best[0] * 0.999:
            best = (residual, deg, tuple(coeffs))
        if residual <= tol:
            return residual, deg, tuple(coeffs)
    return best


def g_structure_certificate(family: ScaledFamily, branch: str = None,
                            parity_tol: float = 1e-9,
                            fit_tol: float = 1e-8,
                            degree_bound: int = None) -> CertificateReport:
    """Certify the coupling grading of the finite matrices.

    Checks, over the family's symmetric coupling samples:

    * parity: S[n,m](-g) = (-1)^(m-n) S[n,m](g);
    * polynomiality: g^(n-m) S[n,m](g) fits a polynomial in g² within
      ``fit_tol`` (the fitted minimal degree is reported, bounded by the
      sample count);
    * consequently the coefficients of det(2(E I - S)) fit polynomials
      in g² as well (the worst residual is reported).

    The branch defaults to the one selected by the sign of w'(0).
    """
    if branch is None:
        branch = family.primary_branch
    gs = sorted(set(family.gs))
    pos = [g for g in gs if g > 0]
    for g in pos:
        if not any(abs(gg + g) < 1e-15 for gg in gs):
            raise ModelError(f"coupling samples must come in ± pairs "
                             f"(missing -{g})")
    if degree_bound is None:
        degree_bound = family.n
    if len(pos) < 2:
        raise ModelError("need at least two distinct |g| values")

    try:
        mats = {g: s_matrix(family.model_at(g), branch).matrix for g in gs}
    except (SMatrixError, ModelError) as exc:
        # a family whose members stop being admissible (broken scaling
        # form) fails the entry-constancy certificate inside s_matrix
        return CertificateReport(branch, False, parity_tol, fit_tol,
                                 (), float("nan"), error=str(exc))
    n = family.n
    scale = max(1.0, max(float(np.abs(m).max()) for m in mats.values()))

    entries = []
    ok = True
    failing = None
    for row in range(n):
        for col in range(n):
            parity_err = 0.0
            for g in pos:
                sp = mats[g][row, col]
                sm = mats[-g][row, col]
                expected = (-1) ** (col - row) * sp
                parity_err = max(parity_err, abs(sm - expected) / scale)
            ys = np.array([mats[g][row, col] * g ** (row - col)
                           for g in pos])
            us = np.array([g * g for g in pos])
            residual, degree, coeffs = _even_poly_fit(us, ys, fit_tol,
                                                        degree_bound)
            entry = EntryFit(row, col, parity_err, residual, degree, coeffs)
            entries.append(entry)
            if parity_err > parity_tol or residual > fit_tol:
                ok = False
                if failing is None:
                    failing = (row, col)

    worst_detm = 0.0
    from .charpoly import detm_coeffs
    detms = {g: detm_coeffs(mats[g]) for g in pos}
    coeff_count = n + 1
    us = np.array([g * g for g in pos])
    for j in range(coeff_count):
        ys = np.array([detms[g][j] for g in pos])
        residual, _, _ = _even_poly_fit(us, ys, fit_tol, degree_bound)
        worst_detm = max(worst_detm, residual)
    if worst_detm > fit_tol:
        ok = False

    return CertificateReport(branch, ok, parity_tol, fit_tol,
                             tuple(entries), worst_detm, failing)


# ---------------------------------------------------------------------------
# leading/suppressed split of H φ


def f_split_parts(family: ScaledFamily, g: float, n_index: int):
    """The leading and g²-suppressed pieces (F0, F1) of H- φ-_n, built
    term by term in the scaled variable x = gq, expressed through
    w(gq) = g W, e(gq) = E/g, eta(gq) = g h."""
    model = family.model_at(g)
    n_tot = model.n
    if not 1 <= n_index <= n_tot:
        raise ValueError(f"state index {n_index} outside 1..{n_tot}")
    k = n_index
    w_at = ex.mul(ex.Const(g), model.w)          # w(gq)
    wp_at = ex.differentiate(model.w)            # w'(gq)
    e_at = ex.mul(ex.Const(1.0 / g), model.e)    # e(gq)
    ep_at = ex.mul(ex.Const(1.0 / g ** 2),
                   ex.differentiate(model.e))    # e'(gq)
    eta = ex.mul(ex.Const(g), model.h)           # eta(gq)
    etap = ex.differentiate(model.h)             # eta'(gq)
    etapp = ex.mul(ex.Const(1.0 / g),
                   ex.derivative(model.h, 2))    # eta''(gq)

    def eta_pow(p):
        return ex.pow_(eta, p) if p != 0 else ex.ONE

    f0 = ex.add(
        ex.mul(ex.Const(k - 1), w_at, etap, eta_pow(k - 2)),
        ex.mul(ex.Const(0.5), wp_at, eta_pow(k - 1)),
        ex.mul(ex.Const(-(n_tot - 1) / 2), e_at, w_at, eta_pow(k - 1)),
        ex.mul(ex.Const(-n_tot / 2), wp_at, eta_pow(k - 1)),
    )
    f1 = ex.add(
        ex.mul(ex.Const(-(k - 1) / 2), etapp, eta_pow(k - 2)),
        ex.mul(ex.Const(-(k - 1) * (k - 2) / 2), ex.pow_(etap, 2),
               eta_pow(k - 3)),
        ex.mul(ex.Const((n_tot - 1) * (2 * n_tot - 1) / 12),
               ex.pow_(e_at, 2), eta_pow(k - 1)),
        ex.mul(ex.Const(-(n_tot ** 2 - 1) / 12), ep_at, eta_pow(k - 1)),
        ex.mul(ex.Const(n_tot * (n_tot - 1) / 4), ep_at, eta_pow(k - 1)),
    )
    return f0, f1


def f_split_residual(family: ScaledFamily, g: float, n_index: int,
                     f0: ex.Expr, f1: ex.Expr,
                     n_points: int = 16) -> float:
    """Relative residual of H- φ-_n against g^(1-n) U^(-1)(F0 + g² F1)
    for the given split pieces."""
    model = family.model_at(g)
    rhs = ex.mul(ex.Const(g ** (1 - n_index)), model.uinv,
                 ex.add(f0, ex.mul(ex.Const(g * g), f1)))
    phi = kernel_basis(model, "minus")[n_index - 1]
    lhs = dop.apply(model.hminus, phi)
    evaluator = ex.Evaluator()
    points = family.sample_points(n_points)
    lv = np.array([evaluator(lhs, q) for q in points])
    rv = np.array([evaluator(rhs, q) for q in points])
    scale = max(float(np.abs(lv).max()), float(np.abs(rv).max()), 1e-30)
    return float(np.abs(lv - rv).max() / scale)


def f_split_check(family: ScaledFamily, g: float, n_index: int,
                  n_points: int = 16) -> float:
    """Residual of H- φ-_n = g^(1-n) U^(-1) (F0 + g² F1) with the two
    displayed pieces; zero certifies the leading/suppressed split."""
    f0, f1 = f_split_parts(family, g, n_index)
    return f_split_residual(family, g, n_index, f0, f1, n_points)
