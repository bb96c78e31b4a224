"""Recursive-descent parser and printer for the expression grammar.

Grammar (whitespace insensitive)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # exponent must fold to a constant
    atom   := NUMBER | 'i' | 'q' | FUNC '(' expr ')' | IDENT | '(' expr ')'

``FUNC`` is one of ``sin cos exp log Int``; ``i`` is the imaginary unit.
Other identifiers resolve through the ``bindings`` mapping; an unbound
identifier is a parse error.  ``Int(f)`` builds a definite integral of f
from ``ref_point`` to the variable.
"""

from __future__ import annotations

import re

from . import expr as ex
from .errors import ParseError

_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)

_FUNCTIONS = {
    "sin": ex.sin,
    "cos": ex.cos,
    "exp": ex.exp,
    "log": ex.log,
}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, bindings, ref_point):
        self.tokens = _tokenize(text)
        self.k = 0
        self.bindings = bindings or {}
        self.ref_point = ref_point

    def peek(self):
        return self.tokens[self.k]

    def next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.next()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end'!r}",
                             pos)

    def parse(self):
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected trailing input {text!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.next()
            return -self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            pos = self.peek()[2]
            self.next()
            exponent = self.unary()
            if not isinstance(exponent, ex.Const):
                raise ParseError("exponent must be a constant", pos)
            if exponent.value.imag != 0:
                raise ParseError("exponent must be real", pos)
            return ex.pow_(base, exponent.value.real)
        return base

    def atom(self):
        kind, text, pos = self.next()
        if kind == "num":
            value = float(text)
            if value.is_integer() and "." not in text and "e" not in text.lower():
                value = int(text)
            return ex.Const(value)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "ident":
            if text == "q":
                return ex.Q
            if text == "i":
                return ex.I
            if text == "Int":
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return ex.integral(inner, self.ref_point)
            if text in _FUNCTIONS:
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return _FUNCTIONS[text](inner)
            if text in self.bindings:
                return self.bindings[text]
            raise ParseError(f"unknown identifier {text!r}", pos)
        raise ParseError(f"unexpected token {text or 'end'!r}", pos)


def parse(text: str, bindings=None, ref_point: float = 0.0) -> ex.Expr:
    """Parse ``text`` into an expression tree.

    ``bindings`` maps extra identifiers to expressions; ``ref_point`` is
    the lower endpoint bound into any ``Int(...)`` node.
    """
    return _Parser(text, bindings, ref_point).parse()


# ---------------------------------------------------------------------------
# printing (inverse of parse up to constant formatting)

_PREC_ADD, _PREC_MUL, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4


def _fmt_real(x):
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _fmt_const(value):
    re_, im = value.real, value.imag
    if im == 0:
        return (_fmt_real(re_), _PREC_ATOM if re_ >= 0 else _PREC_MUL)
    if re_ == 0:
        if im == 1:
            return ("i", _PREC_ATOM)
        if im == -1:
            return ("-i", _PREC_MUL)
        return (f"{_fmt_real(im)}*i", _PREC_MUL)
    sign = "+" if im >= 0 else "-"
    im_text = "i" if abs(im) == 1 else f"{_fmt_real(abs(im))}*i"
    return (f"({_fmt_real(re_)} {sign} {im_text})", _PREC_ATOM)


def _render(e, parent_prec):
    text, prec = _text_prec(e)
    if prec < parent_prec:
        return f"({text})"
    return text


def _text_prec(e):
    if isinstance(e, ex.Const):
        return _fmt_const(e.value)
    if isinstance(e, ex.Var):
        return ("q", _PREC_ATOM)
    if isinstance(e, ex.Add):
        out = _render(e.terms[0], _PREC_ADD)
        for t in e.terms[1:]:
            part = _render(t, _PREC_ADD + 1)
            if part.startswith("-"):
                out += " - " + part[1:]
            else:
                out += " + " + part
        return (out, _PREC_ADD)
    if isinstance(e, ex.Mul):
        factors = e.factors
        if (isinstance(factors[0], ex.Const) and factors[0].value == -1
                and len(factors) > 1):
            inner = ex.mul(*factors[1:])
            return ("-" + _render(inner, _PREC_MUL + 1), _PREC_MUL)
        parts = [_render(t, _PREC_MUL + (1 if i else 0))
                 for i, t in enumerate(factors)]
        return ("*".join(parts), _PREC_MUL)
    if isinstance(e, ex.Div):
        return (f"{_render(e.num, _PREC_MUL)}/{_render(e.den, _PREC_MUL + 1)}",
                _PREC_MUL)
    if isinstance(e, ex.Pow):
        exp_text = _fmt_real(float(e.exponent))
        if e.exponent < 0 or not float(e.exponent).is_integer():
            exp_text = f"({exp_text})"
        return (f"{_render(e.base, _PREC_ATOM)}^{exp_text}", _PREC_POW)
    if isinstance(e, ex.Integral):
        return (f"Int({to_text(e.integrand)})", _PREC_ATOM)
    if isinstance(e, ex._Func):
        return (f"{e.name}({to_text(e.arg)})", _PREC_ATOM)
    raise TypeError(f"cannot print {type(e).__name__}")


def to_text(e: ex.Expr) -> str:
    """Render an expression in the input grammar.

    The reference point of integral nodes is contextual (it is not part
    of the syntax), so round-tripping requires parsing with the same
    ``ref_point``.
    """
    return _text_prec(e)[0]
