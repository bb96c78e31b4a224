"""Toolkit for one-dimensional quantum mechanics with polynomial
supercharges: build partner Hamiltonians, verify the intertwining
algebra, extract the algebraically solvable part of the spectrum from
finite matrices, and cross-check everything against an independent
grid eigensolver."""

from .expr import (Const, Domain, Expr, I, ONE, Q, ZERO, add, conjugate,
                   cos, differentiate, div, evaluate, exp, integral,
                   is_zero, log, mul, pow_, sin, substitute)
from .parser import parse, to_text
from .diffop import DiffOp, anticommutator, commutator
from .susy import (SuperSystem, detm_equality, intertwining_residual,
                   mother_identity_residual, quasi_to_susy, two_fold_build,
                   two_fold_uniqueness)
from .typea import (SMatrix, TypeAModel, build, condition_residual,
                    kernel_basis, s_matrix, s_matrix_collocation)
from .spectral import (GridSpec, SpectrumReport, grid_spectrum,
                       match_spectra, pairing_check, witten_index)
from .gscale import (ScaledFamily, f_split_check, g_structure_certificate,
                     harmonic_limit_check, scale)

__version__ = "0.1.0"

__all__ = [
    "Const", "DiffOp", "Domain", "Expr", "GridSpec", "I", "ONE", "Q",
    "SMatrix", "ScaledFamily", "SpectrumReport", "SuperSystem",
    "TypeAModel", "ZERO", "add", "anticommutator", "build", "commutator",
    "condition_residual", "conjugate", "cos", "detm_equality",
    "differentiate", "div", "evaluate", "exp", "f_split_check",
    "g_structure_certificate", "grid_spectrum", "harmonic_limit_check",
    "integral", "intertwining_residual", "is_zero", "kernel_basis", "log",
    "match_spectra", "mother_identity_residual", "mul", "pairing_check",
    "parse", "pow_", "quasi_to_susy", "s_matrix", "s_matrix_collocation",
    "scale", "sin", "substitute", "to_text", "two_fold_build",
    "two_fold_uniqueness", "witten_index",
]
