"""Plain key = value model files.

A file describes one model: its kind (``typeA``, ``twofold`` or
``custom``), the defining expressions, the domain (bounds, boundary
kind, reference point, declared singular points), grid parameters, and
an optional coupling-family block.  Lines starting with ``#`` are
comments; values after ``=`` are expression text, numbers or
comma-separated lists depending on the key.

Example::

    name = periodic
    kind = typeA
    N = 2
    W = sin(q) + 0.5*i
    E = i
    domain = 0 .. 12.566370614359172
    boundary = periodic
    refpoint = 1.047
    grid_n = 4096
    levels = 6
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import expr as ex
from .errors import ModelError, ParseError
from .parser import parse
from .spectral import GridSpec
from .susy import SuperSystem, make_system, two_fold_build
from .typea import TypeAModel, build
from .diffop import DiffOp

_COMMON_KEYS = {"name", "kind", "domain", "boundary", "refpoint",
                "singular", "grid_n", "truncation", "levels"}
_KIND_KEYS = {
    "typeA": {"n", "w", "e", "gfamily_w", "gfamily_e", "gfamily_g"},
    "twofold": {"w1", "c"},
    "custom": {"n", "vminus", "vplus", "p"},
}
_REQUIRED = {
    "typeA": {"n", "w", "e"},
    "twofold": {"w1", "c"},
    "custom": {"n", "vminus", "vplus", "p"},
}


def _parse_bound(text):
    text = text.strip()
    if text in ("inf", "+inf"):
        return math.inf
    if text == "-inf":
        return -math.inf
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad domain bound {text!r}")


def _parse_const(text, what):
    e = parse(text)
    if not isinstance(e, ex.Const):
        raise ParseError(f"{what} must be a constant, got {text!r}")
    return e.value


@dataclass(frozen=True)
class ModelFile:
    """Parsed model description; expression fields stay as text and are
    parsed against the declared reference point on demand."""

    name: str
    kind: str
    fields: dict
    dom: ex.Domain
    grid_n: int
    truncation: float
    levels: int

    def expr(self, key):
        return parse(self.fields[key], ref_point=self.dom.q0)

    @property
    def n(self):
        return int(self.fields["n"])

    def grid_spec(self, n=None):
        return GridSpec(self.dom, n or self.grid_n,
                        truncation=self.truncation)

    # -- model construction -------------------------------------------------

    def build_typea(self) -> TypeAModel:
        if self.kind != "typeA":
            raise ModelError(f"model kind {self.kind!r} has no product-form "
                             "construction")
        return build(self.expr("w"), self.expr("e"), self.n, self.dom)

    def build_system(self) -> SuperSystem:
        """The (H-, H+, P) triple for any kind, without verification."""
        if self.kind == "typeA":
            from .typea import as_supersystem
            return as_supersystem(self.build_typea())
        if self.kind == "twofold":
            return two_fold_build(self.expr("w1"),
                                  _parse_const(self.fields["c"], "C"),
                                  self.dom)
        coeffs = [parse(part.strip(), ref_point=self.dom.q0)
                  for part in self.fields["p"].split(";")]
        p = DiffOp.from_p_coeffs(coeffs)
        return make_system(p.order, self.expr("vminus"),
                           self.expr("vplus"), p, self.dom)

    def family(self):
        if self.kind != "typeA" or "gfamily_w" not in self.fields:
            raise ModelError(f"model {self.name!r} has no coupling-family "
                             "block")
        from .gscale import ScaledFamily, default_g_samples
        gs_text = self.fields.get("gfamily_g", "")
        if gs_text.strip():
            gs = tuple(float(t) for t in gs_text.split(","))
        else:
            gs = default_g_samples()
        return ScaledFamily(parse(self.fields["gfamily_w"]),
                            parse(self.fields["gfamily_e"]),
                            self.n, self.dom, gs)


def parse_model_text(text: str) -> ModelFile:
    fields = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key in fields:
            raise ParseError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value

    kind = fields.pop("kind", None)
    if kind not in _KIND_KEYS:
        raise ParseError(f"kind must be one of {sorted(_KIND_KEYS)}, "
                         f"got {kind!r}")
    name = fields.pop("name", "unnamed")

    known = _COMMON_KEYS | _KIND_KEYS[kind] | {"n"}
    for key in fields:
        if key not in known:
            raise ParseError(f"unknown key {key!r} for kind {kind}")
    missing = _REQUIRED[kind] - set(fields)
    if missing:
        raise ParseError(f"missing keys for kind {kind}: {sorted(missing)}")

    dom_text = fields.pop("domain", "-inf .. inf")
    if ".." not in dom_text:
        raise ParseError("domain must be written as 'a .. b'")
    a_text, _, b_text = dom_text.partition("..")
    a, b = _parse_bound(a_text), _parse_bound(b_text)
    boundary = fields.pop("boundary", "dirichlet")
    refpoint = float(fields.pop("refpoint", "0") or 0)
    singular_text = fields.pop("singular", "")
    singular = tuple(float(t) for t in singular_text.split(",")
                     if t.strip()) if singular_text.strip() else ()
    try:
        dom = ex.Domain(a, b, boundary, refpoint, singular)
    except ValueError as exc:
        raise ParseError(str(exc))

    grid_n = int(fields.pop("grid_n", "4096"))
    trunc_text = fields.pop("truncation", "")
    truncation = float(trunc_text) if trunc_text.strip() else None
    levels = int(fields.pop("levels", "6"))

    mf = ModelFile(name, kind, fields, dom, grid_n, truncation, levels)
    # parse all expression fields now so malformed files fail on load
    for key in fields:
        if key in ("n", "gfamily_g"):
            continue
        if key == "p":
            for part in fields[key].split(";"):
                parse(part.strip(), ref_point=dom.q0)
        elif key == "c":
            _parse_const(fields[key], "C")
        else:
            parse(fields[key], ref_point=dom.q0)
    if "n" in fields and int(fields["n"]) < 1:
        raise ParseError("N must be >= 1")
    return mf


def load_model_file(path) -> ModelFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model_text(fh.read())
