"""Characteristic polynomials of small complex matrices.

Coefficients come from the Faddeev-LeVerrier recursion (exact in
rational arithmetic, numerically benign for the small sizes used here);
roots come from the companion matrix, which is what ``numpy.roots``
builds internally.
"""

from __future__ import annotations

import numpy as np


def charpoly_coeffs(matrix) -> np.ndarray:
    """Monic characteristic polynomial det(E I - A), coefficients in
    descending powers of E: [1, c1, ..., cN]."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    coeffs = [1 + 0j]
    m = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        am = a @ m
        ck = -np.trace(am) / k
        coeffs.append(ck)
        m = am + ck * np.eye(n, dtype=complex)
    return np.array(coeffs)


def detm_coeffs(matrix) -> np.ndarray:
    """Coefficients (descending) of det(2(E I - S)) = 2^N det(E I - S)."""
    a = np.asarray(matrix, dtype=complex)
    return (2.0 ** a.shape[0]) * charpoly_coeffs(a)


def detm_value(matrix, energy) -> complex:
    return complex(np.polyval(detm_coeffs(matrix), energy))


def roots_from_coeffs(coeffs) -> np.ndarray:
    """Polynomial roots via companion-matrix eigenvalues, sorted by real
    part then imaginary part."""
    r = np.roots(np.asarray(coeffs, dtype=complex))
    return r[np.lexsort((r.imag, r.real))]


def matrix_roots(matrix) -> np.ndarray:
    return roots_from_coeffs(charpoly_coeffs(matrix))
