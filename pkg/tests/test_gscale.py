import math

import numpy as np
import pytest

from nfoldsusy import expr as ex
from nfoldsusy import gscale, susy, typea
from nfoldsusy.errors import ModelError
from nfoldsusy.gscale import ScaledFamily, default_g_samples
from nfoldsusy.parser import parse

from conftest import HALF_LINE, REAL_LINE


@pytest.fixture(scope="module")
def sextic_family():
    return ScaledFamily(parse("q^3 + q"), parse("1/q"), 2, HALF_LINE,
                        default_g_samples())


@pytest.fixture(scope="module")
def harmonic_family():
    return ScaledFamily(ex.Q, ex.ZERO, 3, REAL_LINE, default_g_samples())


@pytest.fixture(scope="module")
def quartic_family():
    # w = x + x², e = 0: the admissible family with genuine O(g) terms
    return ScaledFamily(parse("q + q^2"), ex.ZERO, 2, REAL_LINE,
                        default_g_samples())


class _CorruptedScaling(ScaledFamily):
    """e -> e + g x breaks the admissibility of the scaled members."""

    def model_at(self, g):
        g = float(g)
        if g not in self._cache:
            e_bad = self.e + ex.Const(g) * ex.Q
            self._cache[g] = gscale.scale(self.w, e_bad, g, self.n, self.dom)
        return self._cache[g]


class _BrokenNormalization(ScaledFamily):
    """A g-independent h keeps admissibility but destroys the grading."""

    def model_at(self, g):
        g = float(g)
        if g not in self._cache:
            w_s, e_s = gscale._scaled_inputs(self.w, self.e, g)
            h = ex.mul(ex.Const(0.5), ex.pow_(ex.Q, 2))
            self._cache[g] = typea.build(w_s, e_s, self.n, self.dom, h=h)
        return self._cache[g]


class TestScale:
    def test_linear_w_is_coupling_free(self):
        m1 = gscale.scale(ex.Q, ex.ZERO, 0.3, 2, REAL_LINE)
        m2 = gscale.scale(ex.Q, ex.ZERO, 0.7, 2, REAL_LINE)
        for q in (-1.0, 0.5, 2.0):
            assert ex.evaluate(m1.w, q) == pytest.approx(q)
            assert ex.evaluate(m2.w, q) == pytest.approx(q)

    def test_cubic_w_scales_as_g_squared(self):
        g = 0.4
        m = gscale.scale(parse("q^3 + q"), parse("1/q"), g, 2, HALF_LINE)
        for q in (0.5, 1.3, 2.0):
            assert ex.evaluate(m.w, q) == pytest.approx(g * g * q ** 3 + q)
            assert ex.evaluate(m.e, q) == pytest.approx(1.0 / q)

    def test_trigonometric_family_limit(self):
        # w = sin x, e = i: potentials approach q²/2 ± n/2 as g -> 0
        g = 1e-3
        m = gscale.scale(parse("sin(q)"), ex.I, g, 2, REAL_LINE)
        for q in (-1.0, 0.7, 2.0):
            v = ex.evaluate(m.vminus, q)
            assert v.real == pytest.approx(0.5 * q * q - 1.0, abs=5e-3)
            assert abs(v.imag) < 5e-3

    def test_w_not_vanishing_rejected(self):
        with pytest.raises(ModelError, match="w\\(0\\)"):
            gscale.scale(parse("q + 1"), ex.ZERO, 0.1, 2, REAL_LINE)

    def test_zero_coupling_rejected(self):
        with pytest.raises(ModelError, match="non-zero"):
            gscale.scale(ex.Q, ex.ZERO, 0.0, 2, REAL_LINE)

    def test_integral_inputs_rejected(self):
        with pytest.raises(ModelError, match="integral-free"):
            gscale.scale(ex.integral(ex.Q, 0.0), ex.ZERO, 0.1, 2, REAL_LINE)

    def test_scaled_h_keeps_grading(self, sextic_family):
        # for e = 1/x the natural primitive gives h = g q²/2
        m = sextic_family.model_at(0.25)
        for q in (0.7, 1.6):
            assert ex.evaluate(m.h, q) == pytest.approx(0.25 * q * q / 2)


class TestFamilyValidity:
    @pytest.mark.parametrize("g", [0.1, -0.3])
    def test_members_admissible_and_closed(self, sextic_family, g):
        model = sextic_family.model_at(g)
        assert ex.is_zero(typea.condition_residual(model), HALF_LINE)
        assert susy.verify(typea.as_supersystem(model)).ok

    def test_sample_couplings_validated(self):
        with pytest.raises(ModelError):
            ScaledFamily(ex.Q, ex.ZERO, 2, REAL_LINE, (0.1, 0.0))

    def test_wprime_zero_rejected(self):
        with pytest.raises(ModelError, match="w'"):
            ScaledFamily(parse("q^2"), ex.ZERO, 2, REAL_LINE, (0.1, -0.1))


class TestHarmonicLimit:
    def test_harmonic_family_is_exact(self, harmonic_family):
        report = gscale.harmonic_limit_check(harmonic_family)
        assert report.max_deviation < 1e-12
        assert report.basis_spread < 1e-12

    def test_sextic_family_deviation(self, sextic_family):
        report = gscale.harmonic_limit_check(sextic_family, g=1e-3)
        assert report.max_deviation < 1e-2
        assert report.basis_spread is None  # no h'(0)=1 normalization

    def test_quartic_linear_scaling(self, quartic_family):
        report = gscale.harmonic_limit_check(quartic_family, g=1e-3)
        assert report.max_deviation < 0.1
        # halving g halves the deviation for a family with O(g) terms
        assert report.halving_ratio == pytest.approx(0.5, abs=0.1)
        assert report.basis_spread < 50e-3

    def test_sextic_quadratic_scaling(self, sextic_family):
        report = gscale.harmonic_limit_check(sextic_family, g=1e-3)
        assert report.halving_ratio == pytest.approx(0.25, abs=0.1)


class TestCertificate:
    def test_harmonic_trivially_constant(self, harmonic_family):
        cert = gscale.g_structure_certificate(harmonic_family)
        assert cert.ok
        for entry in cert.entries:
            assert entry.fitted_degree == 0 or entry.fit_residual < 1e-10

    def test_sextic_structure_and_coefficients(self, sextic_family):
        cert = gscale.g_structure_certificate(sextic_family)
        assert cert.ok
        assert cert.branch == "minus"
        assert cert.detm_fit_residual < 1e-8
        by_pos = {(e.row, e.col): e for e in cert.entries}
        # hand-derived entries: S = [[-1, -4g], [-g²/2, 1]], so the
        # graded polynomials are P01 = -4 and P10 = -u/2 in u = g²
        assert by_pos[(0, 0)].coefficients[0] == pytest.approx(-1.0)
        assert by_pos[(1, 1)].coefficients[0] == pytest.approx(1.0)
        assert by_pos[(0, 1)].coefficients[0] == pytest.approx(-4.0)
        p10 = by_pos[(1, 0)]
        assert p10.fitted_degree == 1
        assert p10.coefficients[0] == pytest.approx(0.0, abs=1e-10)
        assert p10.coefficients[1] == pytest.approx(-0.5)
        for entry in cert.entries:
            assert entry.parity_error < 1e-9
            assert entry.fit_residual < 1e-8

    def test_sextic_three_state(self):
        family = ScaledFamily(parse("q^3 + q"), parse("1/q"), 3, HALF_LINE,
                              default_g_samples())
        cert = gscale.g_structure_certificate(family)
        assert cert.ok

    def test_roots_even_in_coupling(self, sextic_family):
        r_pos = np.sort(typea.s_matrix(sextic_family.model_at(0.2))
                        .real_roots())
        r_neg = np.sort(typea.s_matrix(sextic_family.model_at(-0.2))
                        .real_roots())
        assert np.abs(r_pos - r_neg).max() < 1e-8

    def test_corrupted_scaling_fails(self):
        family = _CorruptedScaling(parse("q^3 + q"), parse("1/q"), 2,
                                   HALF_LINE, default_g_samples())
        cert = gscale.g_structure_certificate(family)
        assert not cert.ok
        assert cert.error is not None

    def test_broken_normalization_fails_parity(self):
        family = _BrokenNormalization(parse("q^3 + q"), parse("1/q"), 2,
                                      HALF_LINE, default_g_samples())
        cert = gscale.g_structure_certificate(family)
        assert not cert.ok
        assert cert.failing_entry is not None

    def test_missing_pair_rejected(self):
        family = ScaledFamily(parse("q^3 + q"), parse("1/q"), 2, HALF_LINE,
                              (0.1, -0.1, 0.2))
        with pytest.raises(ModelError, match="pairs"):
            gscale.g_structure_certificate(family)


class TestFSplit:
    @pytest.mark.parametrize("n_index", [1, 2, 3])
    def test_harmonic(self, harmonic_family, n_index):
        assert gscale.f_split_check(harmonic_family, 0.3, n_index) < 1e-9

    @pytest.mark.parametrize("n_index", [1, 2])
    def test_sextic(self, sextic_family, n_index):
        assert gscale.f_split_check(sextic_family, 0.2, n_index) < 1e-8

    def test_sign_flip_detected(self, sextic_family):
        # flipping the suppressed piece must produce an O(1) mismatch
        f0, f1 = gscale.f_split_parts(sextic_family, 0.2, 2)
        flipped = gscale.f_split_residual(sextic_family, 0.2, 2, f0,
                                          ex.mul(ex.Const(-1), f1))
        assert flipped > 1e-3

    def test_quartic(self, quartic_family):
        for n_index in (1, 2):
            assert gscale.f_split_check(quartic_family, 0.2, n_index) < 1e-8
