"""Symbolic one-variable expressions with complex scalar constants.

The node set is deliberately small: constants, the variable ``q``, sums,
products, integer/real powers, quotients, ``sin``/``cos``/``exp``/``log``,
and a definite integral taken from a stored reference point.  Every node
supports exact differentiation and pointwise numerical evaluation; there
is no general simplification, only constant folding in the constructors
plus the single collapse ``exp(log(f)) -> f``.

Zero testing is done by sampling on a :class:`Domain`, never by rewriting.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from scipy import integrate as _sciint

from .errors import EvaluationError, QuadratureError

_GOLDEN = 0.6180339887498949  # 1/phi, drives the low-discrepancy sampler


# ---------------------------------------------------------------------------
# node classes


class Expr:
    """Base class for expression nodes.  Instances are immutable."""

    __slots__ = ("_hash",)

    def children(self):
        return ()

    # -- arithmetic sugar so builder code reads like the formulas ----------

    def __add__(self, other):
        return add(self, _coerce(other))

    def __radd__(self, other):
        return add(_coerce(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(-1), _coerce(other)))

    def __rsub__(self, other):
        return add(_coerce(other), mul(Const(-1), self))

    def __mul__(self, other):
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        return div(_coerce(other), self)

    def __pow__(self, exponent):
        return pow_(self, exponent)

    def __neg__(self):
        return mul(Const(-1), self)

    def __eq__(self, other):
        return (self is other
                or (type(self) is type(other)
                    and hash(self) == hash(other)
                    and self._key() == other._key()))

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__, self._key()))
            object.__setattr__(self, "_hash", h)
            return h

    def _key(self):
        return self.children()

    def __repr__(self):
        from .parser import to_text
        return f"Expr({to_text(self)})"


def _coerce(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, complex)):
        return Const(value)
    raise TypeError(f"cannot interpret {value!r} as an expression")


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", complex(value))

    def __setattr__(self, *a):
        raise AttributeError("Const is immutable")

    def _key(self):
        return (self.value,)


class Var(Expr):
    """The independent variable.  All expressions share the single name q."""

    __slots__ = ()

    def _key(self):
        return ("q",)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))

    def __setattr__(self, *a):
        raise AttributeError("Add is immutable")

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))

    def __setattr__(self, *a):
        raise AttributeError("Mul is immutable")

    def children(self):
        return self.factors


class Pow(Expr):
    """Power with a constant (integer or real) exponent."""

    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        if isinstance(exponent, complex) and exponent.imag == 0:
            exponent = exponent.real
        if not isinstance(exponent, (int, float)):
            raise TypeError("exponent must be an integer or real number")
        if isinstance(exponent, float) and exponent.is_integer():
            exponent = int(exponent)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def __setattr__(self, *a):
        raise AttributeError("Pow is immutable")

    def children(self):
        return (self.base,)

    def _key(self):
        return (self.base, self.exponent)


class Div(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num, den):
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, *a):
        raise AttributeError("Div is immutable")

    def children(self):
        return (self.num, self.den)


class _Func(Expr):
    __slots__ = ("arg",)
    name = "?"

    def __init__(self, arg):
        object.__setattr__(self, "arg", arg)

    def __setattr__(self, *a):
        raise AttributeError("function nodes are immutable")

    def children(self):
        return (self.arg,)


class Sin(_Func):
    __slots__ = ()
    name = "sin"


class Cos(_Func):
    __slots__ = ()
    name = "cos"


class Exp(_Func):
    __slots__ = ()
    name = "exp"


class Log(_Func):
    __slots__ = ()
    name = "log"


class Integral(Expr):
    """Definite integral of ``integrand`` from ``lower`` to the variable.

    Evaluation uses the closed-form antiderivative when the integrand is
    in the stored table (constants, powers of linear arguments, sin, cos,
    exp of linear argument, and sums/constant multiples of those) and
    adaptive quadrature otherwise.
    """

    __slots__ = ("integrand", "lower", "_anti")

    def __init__(self, integrand, lower=0.0):
        object.__setattr__(self, "integrand", integrand)
        object.__setattr__(self, "lower", float(lower))
        object.__setattr__(self, "_anti", _antiderivative(integrand))

    def __setattr__(self, *a):
        raise AttributeError("Integral is immutable")

    def children(self):
        return (self.integrand,)

    def _key(self):
        return (self.integrand, self.lower)


Q = Var()
ZERO = Const(0)
ONE = Const(1)
I = Const(1j)


# ---------------------------------------------------------------------------
# constant-folding constructors


def _split_const(t):
    """Split a term into (constant coefficient, remaining factor)."""
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        rest = t.factors[1:]
        body = rest[0] if len(rest) == 1 else Mul(rest)
        return t.factors[0].value, body
    return 1 + 0j, t


def add(*terms):
    """Sum with flattening, constant folding and collection of
    structurally identical terms (so f - f cancels to zero)."""
    flat = []
    for t in terms:
        t = _coerce(t)
        if isinstance(t, Add):
            flat.extend(t.terms)
        else:
            flat.append(t)
    const = 0j
    groups = {}
    for t in flat:
        if isinstance(t, Const):
            const += t.value
            continue
        c, body = _split_const(t)
        if body in groups:
            groups[body] += c
        else:
            groups[body] = c
    rest = []
    for body, c in groups.items():
        if c == 0:
            continue
        rest.append(body if c == 1 else mul(Const(c), body))
    if const != 0:
        rest.append(Const(const))
    if not rest:
        return ZERO
    if len(rest) == 1:
        return rest[0]
    return Add(rest)


def mul(*factors):
    flat = []
    const = 1 + 0j
    for f in factors:
        f = _coerce(f)
        if isinstance(f, Mul):
            flat.extend(f.factors)
        else:
            flat.append(f)
    rest = []
    for f in flat:
        if isinstance(f, Const):
            const *= f.value
        else:
            rest.append(f)
    if const == 0:
        return ZERO
    if const != 1:
        rest.insert(0, Const(const))
    if not rest:
        return ONE
    if len(rest) == 1:
        return rest[0]
    return Mul(rest)


def pow_(base, exponent):
    if isinstance(exponent, Const):
        exponent = exponent.value
    if isinstance(exponent, complex):
        if exponent.imag != 0:
            raise TypeError("exponent must be real")
        exponent = exponent.real
    if isinstance(exponent, float) and exponent.is_integer():
        exponent = int(exponent)
    base = _coerce(base)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    if (isinstance(base, Pow) and isinstance(base.exponent, int)
            and isinstance(exponent, int)):
        return pow_(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def div(num, den):
    num = _coerce(num)
    den = _coerce(den)
    if isinstance(den, Const):
        if den.value == 0:
            raise ZeroDivisionError("constant zero denominator")
        return mul(num, Const(1 / den.value))
    if isinstance(num, Const) and num.value == 0:
        return ZERO
    return Div(num, den)


def sin(arg):
    arg = _coerce(arg)
    if isinstance(arg, Const):
        return Const(cmath.sin(arg.value))
    return Sin(arg)


def cos(arg):
    arg = _coerce(arg)
    if isinstance(arg, Const):
        return Const(cmath.cos(arg.value))
    return Cos(arg)


def exp(arg):
    arg = _coerce(arg)
    if isinstance(arg, Const):
        return Const(cmath.exp(arg.value))
    if isinstance(arg, Log):
        return arg.arg
    return Exp(arg)


def log(arg):
    arg = _coerce(arg)
    if isinstance(arg, Const):
        return Const(cmath.log(arg.value))
    return Log(arg)


def integral(integrand, lower=0.0):
    integrand = _coerce(integrand)
    if isinstance(integrand, Const) and integrand.value == 0:
        return ZERO
    return Integral(integrand, lower)


# ---------------------------------------------------------------------------
# differentiation


def differentiate(f: Expr) -> Expr:
    """Exact symbolic derivative with respect to the variable."""
    if isinstance(f, Const):
        return ZERO
    if isinstance(f, Var):
        return ONE
    if isinstance(f, Add):
        return add(*[differentiate(t) for t in f.terms])
    if isinstance(f, Mul):
        terms = []
        for i, fac in enumerate(f.factors):
            dfac = differentiate(fac)
            if dfac is ZERO:
                continue
            terms.append(mul(*f.factors[:i], dfac, *f.factors[i + 1:]))
        return add(*terms)
    if isinstance(f, Pow):
        return mul(Const(f.exponent), pow_(f.base, f.exponent - 1),
                   differentiate(f.base))
    if isinstance(f, Div):
        return div(add(mul(differentiate(f.num), f.den),
                       mul(Const(-1), f.num, differentiate(f.den))),
                   pow_(f.den, 2))
    if isinstance(f, Sin):
        return mul(cos(f.arg), differentiate(f.arg))
    if isinstance(f, Cos):
        return mul(Const(-1), sin(f.arg), differentiate(f.arg))
    if isinstance(f, Exp):
        return mul(f, differentiate(f.arg))
    if isinstance(f, Log):
        return div(differentiate(f.arg), f.arg)
    if isinstance(f, Integral):
        return f.integrand
    raise TypeError(f"no derivative rule for {type(f).__name__}")


def derivative(f: Expr, order: int) -> Expr:
    for _ in range(order):
        f = differentiate(f)
    return f


# ---------------------------------------------------------------------------
# conjugation and substitution


def conjugate(f: Expr) -> Expr:
    """Structural complex conjugate.

    Valid as the pointwise conjugate for evaluation at real points
    (principal branches of log and fractional powers assumed away from
    the negative real axis).
    """
    if isinstance(f, Const):
        return Const(f.value.conjugate())
    if isinstance(f, Var):
        return f
    if isinstance(f, Add):
        return add(*[conjugate(t) for t in f.terms])
    if isinstance(f, Mul):
        return mul(*[conjugate(t) for t in f.factors])
    if isinstance(f, Pow):
        return pow_(conjugate(f.base), f.exponent)
    if isinstance(f, Div):
        return div(conjugate(f.num), conjugate(f.den))
    if isinstance(f, Sin):
        return sin(conjugate(f.arg))
    if isinstance(f, Cos):
        return cos(conjugate(f.arg))
    if isinstance(f, Exp):
        return exp(conjugate(f.arg))
    if isinstance(f, Log):
        return log(conjugate(f.arg))
    if isinstance(f, Integral):
        return integral(conjugate(f.integrand), f.lower)
    raise TypeError(f"no conjugation rule for {type(f).__name__}")


def substitute(f: Expr, replacement: Expr) -> Expr:
    """Replace the variable by ``replacement``.

    Integral nodes are rejected: composing a stored definite integral
    with an inner function is not representable in the node set.
    """
    if isinstance(f, Integral):
        raise ValueError("cannot substitute into an integral node")
    if isinstance(f, Var):
        return replacement
    if isinstance(f, Const):
        return f
    if isinstance(f, Add):
        return add(*[substitute(t, replacement) for t in f.terms])
    if isinstance(f, Mul):
        return mul(*[substitute(t, replacement) for t in f.factors])
    if isinstance(f, Pow):
        return pow_(substitute(f.base, replacement), f.exponent)
    if isinstance(f, Div):
        return div(substitute(f.num, replacement),
                   substitute(f.den, replacement))
    if isinstance(f, (Sin, Cos, Exp, Log)):
        return type(f)(substitute(f.arg, replacement))
    raise TypeError(f"no substitution rule for {type(f).__name__}")


def is_integral_free(f: Expr) -> bool:
    if isinstance(f, Integral):
        return False
    return all(is_integral_free(c) for c in f.children())


# ---------------------------------------------------------------------------
# antiderivative table


def _linear_coeffs(f):
    """Return (a, b) with f = a*q + b for constants a, b, else None."""
    if isinstance(f, Const):
        return (0j, f.value)
    if isinstance(f, Var):
        return (1 + 0j, 0j)
    if isinstance(f, Add):
        a = b = 0j
        for t in f.terms:
            ab = _linear_coeffs(t)
            if ab is None:
                return None
            a += ab[0]
            b += ab[1]
        return (a, b)
    if isinstance(f, Mul):
        const = 1 + 0j
        lin = None
        for t in f.factors:
            if isinstance(t, Const):
                const *= t.value
            elif lin is None:
                lin = t
            else:
                return None
        if lin is None:
            return (0j, const)
        ab = _linear_coeffs(lin)
        if ab is None:
            return None
        return (const * ab[0], const * ab[1])
    if isinstance(f, Div):
        if isinstance(f.den, Const):
            ab = _linear_coeffs(f.num)
            if ab is None:
                return None
            return (ab[0] / f.den.value, ab[1] / f.den.value)
        return None
    return None


def _linear_expr(a, b):
    return add(mul(Const(a), Q), Const(b))


def _antiderivative(f):
    """Closed-form primitive of ``f`` or None.  No integration constant."""
    if isinstance(f, Const):
        return mul(f, Q)
    if isinstance(f, Var):
        return mul(Const(0.5), pow_(Q, 2))
    if isinstance(f, Add):
        parts = [_antiderivative(t) for t in f.terms]
        if any(p is None for p in parts):
            return None
        return add(*parts)
    if isinstance(f, Mul):
        const = 1 + 0j
        rest = []
        for t in f.factors:
            if isinstance(t, Const):
                const *= t.value
            else:
                rest.append(t)
        if len(rest) == 1:
            inner = _antiderivative(rest[0])
            if inner is None:
                return None
            return mul(Const(const), inner)
        return None
    if isinstance(f, Pow):
        ab = _linear_coeffs(f.base)
        if ab is None or ab[0] == 0:
            return None
        a = ab[0]
        n = f.exponent
        base = f.base
        if n == -1:
            return div(log(base), Const(a))
        return div(pow_(base, n + 1), Const(a * (n + 1)))
    if isinstance(f, Div):
        if isinstance(f.den, Const):
            inner = _antiderivative(f.num)
            if inner is None:
                return None
            return div(inner, f.den)
        if isinstance(f.num, Const):
            ab = _linear_coeffs(f.den)
            if ab is not None and ab[0] != 0:
                return mul(div(f.num, Const(ab[0])), log(f.den))
        return None
    if isinstance(f, (Sin, Cos, Exp)):
        ab = _linear_coeffs(f.arg)
        if ab is None or ab[0] == 0:
            return None
        a = Const(ab[0])
        if isinstance(f, Sin):
            return div(mul(Const(-1), cos(f.arg)), a)
        if isinstance(f, Cos):
            return div(sin(f.arg), a)
        return div(f, a)
    return None


# ---------------------------------------------------------------------------
# evaluation


def _finite(v, node, q):
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise EvaluationError(
            f"singular sub-expression {type(node).__name__}", q)
    return v


def _quad_path(integrand, lower, q, memo, tracker):
    """Adaptive quadrature of integrand along the straight path lower -> q."""
    span = q - lower
    if span == 0:
        return 0j

    def f(t):
        return _eval(integrand, lower + t * span, memo, tracker) * span

    re, re_err = _sciint.quad(lambda t: f(t).real, 0.0, 1.0,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    im, im_err = _sciint.quad(lambda t: f(t).imag, 0.0, 1.0,
                              epsabs=1e-13, epsrel=1e-12, limit=200)
    value = complex(re, im)
    err = re_err + im_err
    if err > 1e-8 * max(1.0, abs(value)):
        raise QuadratureError(
            f"quadrature did not converge (error estimate {err:.2e})", q)
    return value


def _eval(node, q, memo, tracker):
    key = (id(node), q)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]

    if isinstance(node, Const):
        v = node.value
    elif isinstance(node, Var):
        v = complex(q)
    elif isinstance(node, Add):
        v = 0j
        for t in node.terms:
            v += _eval(t, q, memo, tracker)
        v = _finite(v, node, q)
    elif isinstance(node, Mul):
        v = 1 + 0j
        for t in node.factors:
            v *= _eval(t, q, memo, tracker)
        v = _finite(v, node, q)
    elif isinstance(node, Pow):
        b = _eval(node.base, q, memo, tracker)
        if b == 0 and node.exponent < 0:
            raise EvaluationError("zero base with negative exponent", q)
        try:
            v = _finite(b ** node.exponent, node, q)
        except (OverflowError, ValueError) as exc:
            raise EvaluationError(f"power evaluation failed: {exc}", q)
    elif isinstance(node, Div):
        den = _eval(node.den, q, memo, tracker)
        if den == 0:
            raise EvaluationError("division by zero", q)
        v = _finite(_eval(node.num, q, memo, tracker) / den, node, q)
    elif isinstance(node, Sin):
        v = _finite(cmath.sin(_eval(node.arg, q, memo, tracker)), node, q)
    elif isinstance(node, Cos):
        v = _finite(cmath.cos(_eval(node.arg, q, memo, tracker)), node, q)
    elif isinstance(node, Exp):
        try:
            v = _finite(cmath.exp(_eval(node.arg, q, memo, tracker)), node, q)
        except OverflowError:
            raise EvaluationError("exp overflow", q)
    elif isinstance(node, Log):
        a = _eval(node.arg, q, memo, tracker)
        if a == 0:
            raise EvaluationError("log of zero", q)
        v = _finite(cmath.log(a), node, q)
    elif isinstance(node, Integral):
        if node._anti is not None:
            v = (_eval(node._anti, q, memo, tracker)
                 - _eval(node._anti, node.lower, memo, tracker))
        else:
            v = _quad_path(node.integrand, node.lower, q, memo, tracker)
        v = _finite(v, node, q)
    else:
        raise TypeError(f"no evaluation rule for {type(node).__name__}")

    memo[key] = (node, v)
    if tracker is not None:
        m = abs(v)
        if m > tracker[0]:
            tracker[0] = m
    return v


def evaluate(f: Expr, q, memo=None):
    """Evaluate ``f`` at the (real or complex) point ``q``.

    Raises :class:`EvaluationError` when a sub-expression is singular at
    the point and :class:`QuadratureError` when an integral node fails
    to converge.  ``memo`` may be passed to share work across repeated
    evaluations of expressions with common subtrees.
    """
    if memo is None:
        memo = {}
    return _eval(f, complex(q), memo, None)


class Evaluator:
    """Reusable evaluation cache for a family of related expressions."""

    def __init__(self):
        self._memo = {}

    def __call__(self, f, q):
        return _eval(f, complex(q), self._memo, None)


# ---------------------------------------------------------------------------
# domain and sampling


@dataclass(frozen=True)
class Domain:
    """Interval with boundary kind, reference point and declared singular
    points.  The reference point anchors integral nodes and serves as the
    default expansion/evaluation origin."""

    a: float
    b: float
    kind: str = "dirichlet"
    q0: float = 0.0
    singular: tuple = ()

    def __post_init__(self):
        if self.kind not in ("dirichlet", "periodic"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if not self.a < self.b:
            raise ValueError("domain requires a < b")
        if self.kind == "periodic" and not (
                math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("periodic domain must be finite")
        if not (self.a < self.q0 < self.b):
            raise ValueError("reference point must lie inside the domain")
        object.__setattr__(self, "singular", tuple(self.singular))

    @property
    def span(self):
        lo, hi = self.window()
        return hi - lo

    def window(self, half_width=8.0):
        """Finite sampling window: the interval itself when finite,
        otherwise ``half_width`` on each infinite side of q0."""
        lo = self.a if math.isfinite(self.a) else self.q0 - half_width
        hi = self.b if math.isfinite(self.b) else self.q0 + half_width
        return lo, hi

    def sample_points(self, n, seed=0, pad=0.02, avoid=()):
        """Deterministic low-discrepancy points in the domain interior.

        Points closer than 2% of the window to a declared singular point
        (or to an extra ``avoid`` point) are skipped and replaced by
        later members of the sequence.
        """
        lo, hi = self.window()
        width = hi - lo
        inset = pad * width
        lo += inset
        width -= 2 * inset
        bad = tuple(self.singular) + tuple(avoid)
        radius = 0.02 * width
        points = []
        j = 0
        u = (seed * _GOLDEN) % 1.0
        while len(points) < n:
            j += 1
            if j > 50 * n + 100:
                raise EvaluationError(
                    "could not place sample points away from singularities")
            u = (u + _GOLDEN) % 1.0
            x = lo + u * width
            if any(abs(x - s) < radius for s in bad):
                continue
            points.append(x)
        return points


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of a sampled zero test, with the worst point as witness."""

    ok: bool
    max_abs: float
    scale: float
    witness_q: float = 0.0
    witness_value: complex = 0j

    def __bool__(self):
        return self.ok


def is_zero(f: Expr, dom: Domain, n_samples: int = 64,
            tol: float = 1e-9, seed: int = 0) -> ZeroTest:
    """Sampled zero test: true iff max |f| over the sample points is below
    ``tol * (1 + s)`` where s is the largest magnitude reached by any
    sub-expression during evaluation.

    Points where some sub-expression is singular are skipped; if every
    point is singular an :class:`EvaluationError` is raised.
    """
    if n_samples < 8:
        raise ValueError("need at least 8 sample points")
    memo = {}
    tracker = [0.0]
    worst = (-1.0, 0.0, 0j)
    evaluated = 0
    for x in dom.sample_points(n_samples, seed=seed):
        try:
            v = _eval(f, complex(x), memo, tracker)
        except EvaluationError:
            continue
        evaluated += 1
        if abs(v) > worst[0]:
            worst = (abs(v), x, v)
    if evaluated == 0:
        raise EvaluationError("all sample points singular")
    scale = tracker[0]
    ok = worst[0] < tol * (1.0 + scale)
    return ZeroTest(ok, worst[0], scale, worst[1], worst[2])
