"""Independent grid-based checks: 1D Schrödinger eigensolver, matching
of algebraic levels against numeric ones, the bosonic/fermionic pairing
map through the supercharge, and the kernel-counting index.

The eigensolver uses second-order central differences.  Dirichlet
problems become symmetric tridiagonal matrices (solved by bisection and
inverse iteration); periodic problems gain corner entries and go to a
dense symmetric solver.  Every solve is repeated at half resolution so
a Richardson extrapolation and an error estimate come for free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as sla

from . import diffop as dop
from . import expr as ex
from .charpoly import detm_coeffs
from .errors import GridError, ModelError
from .susy import SuperSystem


@dataclass(frozen=True)
class GridSpec:
    """Discretization request: grid size, truncation radius for
    infinite domains (auto-chosen when None so that the potential at
    the cut exceeds the top requested level by ``margin``), and the
    inset used to cut off singular finite endpoints."""

    dom: ex.Domain
    n: int = 4096
    truncation: float = None
    margin: float = 5.0
    endpoint_inset: float = 1e-3

    def __post_init__(self):
        if self.n < 64:
            raise GridError("grid needs at least 64 points")
        if self.dom.kind == "periodic" and self.truncation is not None:
            raise GridError("periodic domains are never truncated")


@dataclass(frozen=True)
class MatchRow:
    root: float
    level_index: int = None
    level: float = None
    diff: float = None
    extrapolated_diff: float = None

    @property
    def matched(self):
        return self.level_index is not None

    def to_dict(self):
        d = {"root": self.root, "matched": self.matched}
        if self.matched:
            d.update(level_index=int(self.level_index), level=self.level,
                     diff=self.diff, extrapolated_diff=self.extrapolated_diff)
        else:
            d["note"] = "unmatched - check normalizability"
        return d


@dataclass(frozen=True)
class MatchTable:
    rows: tuple
    tol: float

    @property
    def all_matched(self):
        return all(r.matched for r in self.rows)

    @property
    def unmatched(self):
        return tuple(r for r in self.rows if not r.matched)

    def to_dict(self):
        return {"tol": self.tol, "all_matched": self.all_matched,
                "rows": [r.to_dict() for r in self.rows]}


@dataclass(frozen=True)
class SpectrumReport:
    """Lowest-k spectrum on the grid with Richardson control data.

    ``eigenvalues`` are the raw values at resolution n; ``extrapolated``
    combines them with the half-resolution solve; ``error_estimate`` is
    the per-level Richardson error.  ``vectors`` holds grid-normalized
    eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    extrapolated: np.ndarray
    error_estimate: np.ndarray
    vectors: np.ndarray
    q: np.ndarray
    dq: float
    spec: GridSpec
    normalizable: tuple
    matching: MatchTable = None

    def with_matching(self, table):
        return replace(self, matching=table)

    def to_dict(self, include_matching=True):
        d = {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "extrapolated": [float(v) for v in self.extrapolated],
            "error_estimate": [float(v) for v in self.error_estimate],
            "normalizable": list(self.normalizable),
            "grid_points": int(len(self.q)),
            "grid_interval": [float(self.q[0]), float(self.q[-1])],
        }
        if include_matching and self.matching is not None:
            d["matching"] = self.matching.to_dict()
        return d


def potential_on_grid(v: ex.Expr, qs) -> np.ndarray:
    """Evaluate the potential, enforcing reality to 1e-10 of its scale."""
    evaluator = ex.Evaluator()
    vals = np.array([evaluator(v, q) for q in qs])
    scale = max(1.0, float(np.abs(vals.real).max()))
    worst = float(np.abs(vals.imag).max())
    if worst > 1e-10 * scale:
        raise GridError(
            f"potential is not real on the grid (|Im| up to {worst:.3e})")
    return vals.real.copy()


def _dirichlet_interval(v, spec):
    """Concrete finite interval for a Dirichlet problem, insetting
    singular finite endpoints and truncating infinite sides."""
    dom = spec.dom
    lo, hi = dom.a, dom.b
    if math.isfinite(lo) and any(abs(s - lo) < 1e-12 for s in dom.singular):
        lo += spec.endpoint_inset
    if math.isfinite(hi) and any(abs(s - hi) < 1e-12 for s in dom.singular):
        hi -= spec.endpoint_inset
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi

    radius = spec.truncation if spec.truncation is not None else 6.0
    for _ in range(16):
        cur_lo = lo if math.isfinite(lo) else dom.q0 - radius
        cur_hi = hi if math.isfinite(hi) else dom.q0 + radius
        if spec.truncation is not None:
            return cur_lo, cur_hi
        try:
            e_top = _solve_interval(v, cur_lo, cur_hi, 512, 8,
                                    "dirichlet", vectors=False)[-1]
        except GridError:
            radius *= 1.4
            continue
        need = spec.margin * max(e_top, 0.0) + 1.0
        ok = True
        evaluator = ex.Evaluator()
        if not math.isfinite(lo) and evaluator(v, cur_lo).real < need:
            ok = False
        if not math.isfinite(hi) and evaluator(v, cur_hi).real < need:
            ok = False
        if ok:
            return cur_lo, cur_hi
        radius *= 1.4
    raise GridError("could not find a truncation radius dominating the "
                    "requested levels")


def _solve_interval(v, lo, hi, n, k, kind, vectors=True):
    if kind == "dirichlet":
        dq = (hi - lo) / (n + 1)
        qs = lo + dq * np.arange(1, n + 1)
        diag = 1.0 / dq ** 2 + potential_on_grid(v, qs)
        off = np.full(n - 1, -0.5 / dq ** 2)
        if vectors:
            w, vecs = sla.eigh_tridiagonal(diag, off, select="i",
                                           select_range=(0, k - 1))
            return w, vecs, qs, dq
        w = sla.eigh_tridiagonal(diag, off, select="i",
                                 select_range=(0, k - 1),
                                 eigvals_only=True)
        return w
    # periodic: uniform grid identifying hi with lo, corner couplings
    dq = (hi - lo) / n
    qs = lo + dq * np.arange(n)
    h = np.zeros((n, n))
    np.fill_diagonal(h, 1.0 / dq ** 2 + potential_on_grid(v, qs))
    idx = np.arange(n)
    h[idx, (idx + 1) % n] = -0.5 / dq ** 2
    h[idx, (idx - 1) % n] = -0.5 / dq ** 2
    if vectors:
        w, vecs = sla.eigh(h, subset_by_index=[0, k - 1], driver="evr")
        return w, vecs, qs, dq
    w = sla.eigh(h, eigvals_only=True, subset_by_index=[0, k - 1],
                 driver="evr")
    return w


def _vector_normalizable(column, dq, truncated_lo, truncated_hi):
    """Tail-decay verdict for a grid eigenvector near truncation walls."""
    n = len(column)
    edge = max(4, n // 20)
    peak = float(np.abs(column).max())
    ok = True
    if truncated_lo:
        ok = ok and float(np.abs(column[:edge]).max()) < 1e-4 * peak
    if truncated_hi:
        ok = ok and float(np.abs(column[-edge:]).max()) < 1e-4 * peak
    return ok


def grid_spectrum(v: ex.Expr, spec: GridSpec, k: int) -> SpectrumReport:
    """Lowest k levels of p²/2 + V on the discretized domain.

    The same problem is solved at n and n//2 points; the report carries
    the raw values, the Richardson extrapolation and the error estimate
    |E_n - E_{n/2}|/3.  Levels too close to the kinetic cutoff of the
    stencil are refused.
    """
    if k < 1:
        raise GridError("need at least one level")
    if k > spec.n // 8:
        raise GridError(f"requesting {k} levels needs a grid larger than "
                        f"{spec.n} points")
    kind = spec.dom.kind
    if kind == "periodic":
        lo, hi = spec.dom.a, spec.dom.b
    else:
        lo, hi = _dirichlet_interval(v, spec)
    w, vecs, qs, dq = _solve_interval(v, lo, hi, spec.n, k, kind)
    w_half = _solve_interval(v, lo, hi, spec.n // 2, k, kind, vectors=False)
    extrapolated = w + (w - w_half) / 3.0
    err = np.abs(w - w_half) / 3.0
    cutoff = 2.0 / dq ** 2
    if w[-1] > 0.1 * cutoff:
        raise GridError(
            f"level {k - 1} at {w[-1]:.3g} is not resolved by the grid "
            f"(kinetic cutoff {cutoff:.3g})")
    vecs = vecs / np.sqrt(dq)  # unit L2 norm on the grid measure
    truncated_lo = kind == "dirichlet" and not math.isfinite(spec.dom.a)
    truncated_hi = kind == "dirichlet" and not math.isfinite(spec.dom.b)
    if kind == "periodic":
        verdicts = tuple(True for _ in range(k))
    else:
        verdicts = tuple(
            _vector_normalizable(vecs[:, j], dq, truncated_lo, truncated_hi)
            for j in range(k))
    return SpectrumReport(w, extrapolated, err, vecs, qs, dq, spec, verdicts)


def match_spectra(roots, report: SpectrumReport, tol: float) -> MatchTable:
    """Injective greedy matching of algebraic roots to numeric levels.

    Pairs are consumed globally by increasing |difference|; a root with
    no remaining level within ``tol`` is flagged rather than failing, as
    an algebraic level need not be physical.
    """
    roots = np.asarray(roots)
    if np.iscomplexobj(roots):
        scale = 1.0 + float(np.abs(roots).max()) if len(roots) else 1.0
        if len(roots) and float(np.abs(roots.imag).max()) > 1e-8 * scale:
            raise ModelError("algebraic roots are not real")
        roots = roots.real
    levels = report.eigenvalues
    pairs = sorted(
        ((abs(r - levels[j]), i, j)
         for i, r in enumerate(roots) for j in range(len(levels))),
        key=lambda t: t[0])
    root_used = {}
    level_used = set()
    for d, i, j in pairs:
        if i in root_used or j in level_used or d > tol:
            continue
        root_used[i] = j
        level_used.add(j)
    rows = []
    for i, r in enumerate(roots):
        j = root_used.get(i)
        if j is None:
            rows.append(MatchRow(float(r)))
        else:
            rows.append(MatchRow(float(r), j, float(levels[j]),
                                 float(abs(r - levels[j])),
                                 float(abs(r - report.extrapolated[j]))))
    return MatchTable(tuple(rows), tol)


# ---------------------------------------------------------------------------
# pairing through the supercharge


def _grid_derivative(vec, dq, periodic):
    if periodic:
        return (np.roll(vec, -1) - np.roll(vec, 1)) / (2 * dq)
    out = np.empty_like(vec)
    out[1:-1] = (vec[2:] - vec[:-2]) / (2 * dq)
    # Dirichlet: the function continues with value 0 beyond the walls
    out[0] = vec[1] / (2 * dq)
    out[-1] = -vec[-2] / (2 * dq)
    return out


def _apply_on_grid(op: dop.DiffOp, vec, qs, dq, periodic):
    evaluator = ex.Evaluator()
    result = np.zeros(len(vec), dtype=complex)
    d = vec.astype(complex)
    for order, coeff in enumerate(op.coeffs):
        if order > 0:
            d = _grid_derivative(d, dq, periodic)
        if isinstance(coeff, ex.Const):
            if coeff.value == 0:
                continue
            result += coeff.value * d
        else:
            cvals = np.array([evaluator(coeff, q) for q in qs])
            result += cvals * d
    return result


@dataclass(frozen=True)
class PairingResult:
    kernel_case: bool
    eigen_residual: float = None
    norm_residual: float = None

    def to_dict(self):
        if self.kernel_case:
            return {"kernel_case": True}
        return {"kernel_case": False,
                "eigen_residual": self.eigen_residual,
                "norm_residual": self.norm_residual}


def pairing_check(sys: SuperSystem, report: SpectrumReport, s_minus,
                  level_index: int, root_tol: float = 1e-6) -> PairingResult:
    """Push one numeric eigenstate of H- through the supercharge.

    For a level E away from the algebraic roots this returns the
    eigen-residual ||(H+ - E) P psi|| / ||P psi|| and the norm identity
    residual | ||P psi||² - det M-(E) | / |det M-(E)|.  A level that is
    an algebraic root is in the supercharge kernel and is signalled
    instead of checked.
    """
    e_val = float(report.eigenvalues[level_index])
    s = np.asarray(s_minus.matrix if hasattr(s_minus, "matrix") else s_minus,
                   dtype=complex)
    roots = np.linalg.eigvals(s)
    scale = 1.0 + float(np.abs(roots).max())
    if float(np.abs(roots - e_val).min()) < root_tol * scale + 10 * float(
            report.error_estimate[level_index]):
        return PairingResult(kernel_case=True)
    periodic = sys.dom.kind == "periodic"
    psi = report.vectors[:, level_index].astype(complex)
    qs, dq = report.q, report.dq
    p_psi = _apply_on_grid(sys.p, psi, qs, dq, periodic)
    h_p_psi = _apply_on_grid(sys.hplus, p_psi, qs, dq, periodic)
    # trim stencil-contaminated edges on truncated domains
    m = 0 if periodic else max(2, len(psi) // 200)
    sl = slice(m, len(psi) - m) if m else slice(None)
    norm_p = math.sqrt(float(np.sum(np.abs(p_psi[sl]) ** 2) * dq))
    resid = h_p_psi - e_val * p_psi
    eigen_residual = math.sqrt(
        float(np.sum(np.abs(resid[sl]) ** 2) * dq)) / norm_p
    detm = complex(np.polyval(detm_coeffs(s), e_val))
    norm_residual = abs(norm_p ** 2 - detm.real) / abs(detm)
    return PairingResult(False, eigen_residual, norm_residual)


# ---------------------------------------------------------------------------
# normalizability and the kernel-counting index


def normalizability(f: ex.Expr, dom: ex.Domain) -> bool:
    """Three-valued square-integrability verdict (True/False/None).

    Each domain end is classified by the growth of the partial integrals
    of |f|² over geometrically growing (or shrinking, at a finite
    singular endpoint) windows; None means the ratio test was
    inconclusive.
    """
    verdict = True
    for side in ("lo", "hi"):
        v = _end_verdict(f, dom, side)
        if v is False:
            return False
        if v is None:
            verdict = None
    return verdict


def _window_integral(f, a, b, evaluator, samples=12):
    ts = np.linspace(a, b, samples)
    try:
        vals = np.array([abs(evaluator(f, t)) ** 2 for t in ts])
    except ex.EvaluationError:
        return None
    if not np.all(np.isfinite(vals)):
        return None
    return float(np.trapezoid(vals, ts))


def _end_verdict(f, dom, side):
    evaluator = ex.Evaluator()
    a, b = dom.a, dom.b
    endpoint = a if side == "lo" else b
    sign = -1.0 if side == "lo" else 1.0
    if dom.kind == "periodic" or (
            math.isfinite(endpoint)
            and not any(abs(s - endpoint) < 1e-12 for s in dom.singular)):
        # regular compact end: integrable iff finite there
        probe = endpoint - sign * 1e-6 * max(1.0, abs(endpoint)) \
            if math.isfinite(endpoint) else dom.q0
        try:
            evaluator(f, probe)
        except ex.EvaluationError:
            return None
        return True

    ratios = []
    if math.isfinite(endpoint):
        # singular finite endpoint: shrink windows toward it
        base = min(0.5 * (dom.b - dom.a) if math.isfinite(dom.b - dom.a)
                   else 1.0, 1.0)
        windows = [(endpoint + sign * base * 2.0 ** (-j - 1),
                    endpoint + sign * base * 2.0 ** (-j))
                   for j in range(4, 14)]
    else:
        start = dom.q0 + sign * 4.0
        windows = [(start + sign * 2.0 * j, start + sign * 2.0 * (j + 1))
                   for j in range(10)]
    prev = None
    for w_lo, w_hi in windows:
        lo, hi = sorted((w_lo, w_hi))
        cur = _window_integral(f, lo, hi, evaluator)
        if cur is None:
            # overflow while walking outward means runaway growth
            return False if not math.isfinite(endpoint) else None
        if prev is not None and prev > 0:
            ratios.append(cur / prev)
        prev = cur
    if not ratios:
        return None
    tail = ratios[-3:]
    if all(r <= 0.8 for r in tail):
        return True
    if all(r >= 1.25 for r in tail):
        return False
    if all(r <= 0.98 for r in tail):
        return True
    return None


@dataclass(frozen=True)
class IndexResult:
    """Kernel-counting index with per-state verdicts.

    ``value`` is (normalizable states annihilated by the supercharge)
    minus (normalizable states annihilated by its adjoint); a None
    verdict marks the result as uncertain instead of guessing.
    """

    value: int
    minus_verdicts: tuple
    plus_verdicts: tuple
    uncertain: bool

    def to_dict(self):
        return {"index": self.value, "uncertain": self.uncertain,
                "kernel_states_minus": list(self.minus_verdicts),
                "kernel_states_plus": list(self.plus_verdicts)}


def witten_index(model) -> IndexResult:
    """Count normalizable kernel basis members on each side.

    The absolute value is bounded by the supercharge order since each
    side contributes at most its kernel dimension.
    """
    from .typea import kernel_basis
    minus = [normalizability(f, model.dom)
             for f in kernel_basis(model, "minus")]
    plus = [normalizability(f, model.dom)
            for f in kernel_basis(model, "plus")]
    uncertain = any(v is None for v in minus + plus)
    value = sum(1 for v in minus if v) - sum(1 for v in plus if v)
    return IndexResult(value, tuple(minus), tuple(plus), uncertain)
