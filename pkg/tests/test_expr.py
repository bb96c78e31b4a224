import cmath
import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from nfoldsusy import expr as ex
from nfoldsusy.errors import EvaluationError, ParseError
from nfoldsusy.parser import parse, to_text

DOM = ex.Domain(-5.0, 5.0, "dirichlet", 0.0)
POS = ex.Domain(0.1, 10.0, "dirichlet", 1.0, singular=(0.0,))


def ev(f, q):
    return ex.evaluate(f, q)


class TestParse:
    def test_sin_plus_half_i(self):
        e = parse("sin(q) + (1/2)*i")
        assert ev(e, math.pi / 2) == pytest.approx(1 + 0.5j)

    def test_cubic(self):
        e = parse("q^3 + q")
        assert ev(e, 2.0) == pytest.approx(10.0)

    def test_exp_int_of_inverse_q_is_identity(self):
        # int_1^q dx/x = log q, so exp of it equals q; checked against an
        # independent quadrature of 1/x
        e = parse("exp(Int(E))", bindings={"E": parse("1/q")}, ref_point=1.0)
        for q in (2.0, 3.0):
            val, _ = quad(lambda x: 1.0 / x, 1.0, q)
            assert ev(e, q) == pytest.approx(cmath.exp(val), rel=1e-10)
            assert ev(e, q) == pytest.approx(q, rel=1e-10)

    def test_syntax_error_has_position(self):
        with pytest.raises(ParseError) as err:
            parse("sin(q")
        assert err.value.position is not None

    def test_unknown_identifier(self):
        with pytest.raises(ParseError, match="unknown identifier"):
            parse("q + omega")

    def test_scientific_literals(self):
        assert ev(parse("1e-3 + 2.5e2*q"), 1.0) == pytest.approx(250.001)

    def test_nonconstant_exponent_rejected(self):
        with pytest.raises(ParseError, match="constant"):
            parse("q^q")


class TestDifferentiate:
    def test_sin(self):
        d = ex.differentiate(parse("sin(q)"))
        assert ev(d, 0.7) == pytest.approx(math.cos(0.7))

    def test_cubic(self):
        d = ex.differentiate(parse("q^3 + q"))
        for q in (0.0, 1.5, -2.0):
            assert ev(d, q) == pytest.approx(3 * q * q + 1)

    def test_exp_of_integral_chain_rule(self):
        # d/dq exp(int W) = W exp(int W) for W = q
        u = ex.exp(ex.integral(ex.Q, 0.0))
        d = ex.differentiate(u)
        for q in (0.3, 1.2):
            assert ev(d, q) == pytest.approx(q * math.exp(q * q / 2))


# one representative per node family, all differentiable on (0.2, 4)
_PRIMITIVES = [
    parse("3 + 2*i"),
    ex.Q,
    parse("q^3 - 2*q + 1"),
    parse("q^(-2)"),
    parse("q^0.5"),
    parse("sin(2*q + 1)"),
    parse("cos(q)*exp(q/2)"),
    parse("log(q + 3)"),
    parse("(q + 2)/(q^2 + 1)"),
    ex.exp(ex.integral(parse("sin(q)"), 1.0)),
    ex.integral(ex.exp(ex.sin(ex.Q)), 1.0),   # no closed-form primitive
]


@pytest.mark.parametrize("f", _PRIMITIVES, ids=lambda f: to_text(f)[:30])
def test_derivative_matches_finite_difference(f):
    d = ex.differentiate(f)
    pts = ex.Domain(0.2, 4.0, "dirichlet", 1.0).sample_points(32)
    h = 1e-5
    for q in pts:
        fd = (ev(f, q + h) - ev(f, q - h)) / (2 * h)
        scale = 1.0 + abs(fd)
        assert abs(ev(d, q) - fd) < 1e-6 * scale


class TestEvaluate:
    def test_sin_at_half_pi(self):
        assert ev(parse("sin(q)"), math.pi / 2) == pytest.approx(1.0)

    def test_singularity_error(self):
        with pytest.raises(EvaluationError):
            ev(parse("1/q"), 0.0)

    def test_exp_integral_of_sin(self):
        # int_0^pi sin = 2 by independent quadrature
        val, _ = quad(math.sin, 0.0, math.pi)
        e = ex.exp(ex.integral(parse("sin(q)"), 0.0))
        assert ev(e, math.pi) == pytest.approx(math.exp(val))
        assert ev(e, math.pi) == pytest.approx(math.e ** 2)

    def test_complex_point(self):
        assert ev(parse("q^2"), 1 + 1j) == pytest.approx((1 + 1j) ** 2)

    def test_log_of_zero(self):
        with pytest.raises(EvaluationError):
            ev(parse("log(q)"), 0.0)


class TestIntegralNode:
    def test_closed_form_table(self):
        # polynomial integrand evaluates without quadrature error
        f = ex.integral(parse("3*q^2 + 2/q"), 1.0)
        want, _ = quad(lambda x: 3 * x * x + 2 / x, 1.0, 2.5)
        assert ev(f, 2.5) == pytest.approx(want, rel=1e-10)

    def test_difference_equals_quadrature(self):
        # table-free integrand: endpoint difference vs direct quadrature
        f = ex.integral(ex.exp(ex.sin(ex.Q)), 1.0)
        a, b = 0.5, 3.0
        want, _ = quad(lambda x: math.exp(math.sin(x)), a, b)
        got = ev(f, b) - ev(f, a)
        assert got.real == pytest.approx(want, abs=1e-10)
        assert abs(got.imag) < 1e-12

    def test_derivative_is_integrand(self):
        f = ex.integral(parse("cos(q)"), 0.0)
        d = ex.differentiate(f)
        assert ev(d, 1.3) == pytest.approx(math.cos(1.3))

    def test_exp_log_collapse(self):
        # exp(log(g q)) folds to g q, keeping scaled integrands in the table
        e = ex.exp(ex.log(ex.Const(2.0) * ex.Q))
        assert isinstance(e, ex.Mul)
        assert ev(e, 3.0) == pytest.approx(6.0)


class TestIsZero:
    def test_pythagorean_identity(self):
        f = parse("sin(q)^2 + cos(q)^2 - 1")
        assert ex.is_zero(f, DOM)

    def test_q_minus_q(self):
        assert ex.is_zero(ex.Q - ex.Q, DOM)

    def test_inverse_q_closure_condition(self):
        # E''' + E E'' + 2 E'^2 - 2 E^2 E' vanishes for E = 1/q:
        # (-6 + 2 + 2 + 2)/q^4 = 0, verified analytically term by term
        e = parse("1/q")
        f = (ex.derivative(e, 3) + e * ex.derivative(e, 2)
             + 2 * ex.differentiate(e) ** 2
             - 2 * e ** 2 * ex.differentiate(e))
        assert ex.is_zero(f, POS)

    def test_witness_on_failure(self):
        t = ex.is_zero(parse("0.001*q"), DOM)
        assert not t.ok
        assert abs(t.witness_value) == pytest.approx(abs(0.001 * t.witness_q))

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            ex.is_zero(ex.ZERO, DOM, n_samples=4)

    def test_all_singular(self):
        dom = ex.Domain(-5.0, 5.0, "dirichlet", 0.0)
        # overflows at every sampled point (inset keeps |q| >= 0.2)
        f = parse("exp(1e6*q^2)")
        with pytest.raises(EvaluationError, match="all sample points"):
            ex.is_zero(f, dom)

    def test_scale_relative_tolerance(self):
        # a small absolute residue fails against an O(1) expression but is
        # absorbed when the internal magnitudes reach 1e12
        small = parse("q - q + 1e-3")
        big = parse("1e12*sin(q) - 1e12*cos(1.5707963267948966 - q) + 1e-3")
        assert not ex.is_zero(small, DOM)
        assert ex.is_zero(big, DOM)


class TestConjugateSubstitute:
    @pytest.mark.parametrize("text", [
        "sin(q) + i*cos(q)", "(2 + 3*i)*q^3", "exp(i*q)/(q + 2)",
        "log(q + 5)",
    ])
    def test_conjugate_pointwise(self, text):
        f = parse(text)
        g = ex.conjugate(f)
        for q in (0.3, 1.7, -0.9):
            assert ev(g, q) == pytest.approx(ev(f, q).conjugate())

    def test_conjugate_integral(self):
        f = ex.integral(parse("i*sin(q)"), 0.0)
        g = ex.conjugate(f)
        assert ev(g, 2.0) == pytest.approx(ev(f, 2.0).conjugate())

    def test_substitute_scales_argument(self):
        f = parse("sin(q) + q^2")
        g = ex.substitute(f, ex.Const(2.0) * ex.Q)
        assert ev(g, 1.1) == pytest.approx(ev(f, 2.2))

    def test_substitute_rejects_integrals(self):
        with pytest.raises(ValueError):
            ex.substitute(ex.integral(ex.Q, 0.0), 2 * ex.Q)


class TestDomain:
    def test_validation(self):
        with pytest.raises(ValueError):
            ex.Domain(1.0, -1.0, "dirichlet", 0.0)
        with pytest.raises(ValueError):
            ex.Domain(0.0, 1.0, "dirichlet", 5.0)
        with pytest.raises(ValueError):
            ex.Domain(-math.inf, math.inf, "periodic", 0.0)
        with pytest.raises(ValueError):
            ex.Domain(0.0, 1.0, "moebius", 0.5)

    def test_sample_points_avoid_singular(self):
        dom = ex.Domain(-2.0, 2.0, "dirichlet", 1.0, singular=(0.0,))
        for q in dom.sample_points(64):
            assert abs(q) > 1e-3
            assert -2.0 < q < 2.0

    def test_sample_points_deterministic(self):
        assert DOM.sample_points(16) == DOM.sample_points(16)
        assert DOM.sample_points(16, seed=1) != DOM.sample_points(16, seed=2)


# ---------------------------------------------------------------------------
# hypothesis: round trips through the printer


@st.composite
def expressions(draw, depth=3):
    if depth == 0:
        branch = draw(st.integers(0, 2))
        if branch == 0:
            return ex.Q
        if branch == 1:
            return ex.Const(draw(st.integers(-5, 5)))
        re_ = draw(st.floats(-3, 3, allow_nan=False))
        im = draw(st.floats(-3, 3, allow_nan=False))
        return ex.Const(complex(round(re_, 3), round(im, 3)))
    op = draw(st.integers(0, 6))
    a = draw(expressions(depth=depth - 1))
    if op == 0:
        return a + draw(expressions(depth=depth - 1))
    if op == 1:
        return a * draw(expressions(depth=depth - 1))
    if op == 2:
        return a - draw(expressions(depth=depth - 1))
    if op == 3:
        return ex.sin(a)
    if op == 4:
        return ex.cos(a)
    if op == 5:
        return ex.pow_(a, draw(st.integers(1, 3)))
    return a / (ex.pow_(ex.Q, 2) + ex.Const(draw(st.integers(1, 4))))


@given(expressions())
@settings(max_examples=60, deadline=None)
def test_parse_print_round_trip(e):
    text = to_text(e)
    back = parse(text)
    pts = DOM.sample_points(32)
    for q in pts:
        lhs = ex.evaluate(e, q)
        rhs = ex.evaluate(back, q)
        assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))
