import math

import numpy as np
import pytest

from nfoldsusy import diffop as dop
from nfoldsusy import expr as ex
from nfoldsusy import susy, typea
from nfoldsusy.errors import CollocationError, ModelError, SMatrixError
from nfoldsusy.parser import parse

from conftest import (HALF_LINE, PERIODIC_CELL, REAL_LINE, harmonic_model,
                      periodic_model, sextic_model)


class TestPotentials:
    @pytest.mark.parametrize("omega", [1.0, 2.0])
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_harmonic(self, omega, n):
        # E = 0 collapses the construction to V± = (w²q² ± n*w)/2
        model = harmonic_model(n, omega)
        for q in (-1.5, 0.0, 2.0):
            want_minus = 0.5 * (omega * q) ** 2 - 0.5 * n * omega
            want_plus = 0.5 * (omega * q) ** 2 + 0.5 * n * omega
            assert ex.evaluate(model.vminus, q) == pytest.approx(want_minus)
            assert ex.evaluate(model.vplus, q) == pytest.approx(want_plus)

    @pytest.mark.parametrize("n", [2, 3])
    def test_periodic_matches_reported_form(self, n):
        # V± = sin(q)²/2 ± (n/2) cos q, up to the energy origin
        model = periodic_model(n)
        qs = PERIODIC_CELL.sample_points(16)

        def check(v, sign):
            vals = np.array([ex.evaluate(v, q) for q in qs])
            want = np.array([0.5 * math.sin(q) ** 2
                             + sign * 0.5 * n * math.cos(q) for q in qs])
            offset = (vals - want)[0]
            assert abs(offset.imag) < 1e-12
            assert np.abs(vals - want - offset).max() < 1e-12

        check(model.vminus, -1)
        check(model.vplus, +1)

    @pytest.mark.parametrize("n", [2, 3])
    def test_sextic_closed_form(self, n):
        # for W = aq³ + bq + lam/q and E = 1/q all 1/q² pieces of the
        # construction cancel except lam(lam+1), leaving (by hand)
        #   2 V- = w² + lam(lam+1)/q² + (2 lam - n + 1)(a q² + b)
        #          - n (3 a q² + b),       w = a q³ + b q
        a, b, lam = 0.2, 1.0, -2.0
        model = sextic_model(n)
        for q in (0.5, 1.0, 2.2, 3.7):
            w = a * q ** 3 + b * q
            two_v = (w * w + lam * (lam + 1) / q ** 2
                     + (2 * lam - n + 1) * (a * q * q + b)
                     - n * (3 * a * q * q + b))
            got = ex.evaluate(model.vminus, q)
            assert got.imag == pytest.approx(0.0, abs=1e-14)
            assert got.real == pytest.approx(two_v / 2, rel=1e-12)

    def test_supercharge_is_monic_in_p(self):
        model = periodic_model(3)
        lead = model.p.p_coeff(3)
        assert ex.is_zero(lead - ex.ONE, PERIODIC_CELL)


class TestConditionResidual:
    def test_periodic_admissible(self, periodic2):
        assert ex.is_zero(typea.condition_residual(periodic2), PERIODIC_CELL)

    def test_sextic_admissible(self, sextic2):
        assert ex.is_zero(typea.condition_residual(sextic2), HALF_LINE)

    def test_linear_pair_inadmissible(self):
        model = typea.build(ex.Q, ex.Q, 3, REAL_LINE)
        t = ex.is_zero(typea.condition_residual(model), REAL_LINE)
        assert not t.ok
        assert abs(t.witness_value) > 1e-6


class TestKernelBasis:
    def test_harmonic_closed_form(self, harmonic3):
        # h = q and U^(-1) = e^{-q²/2}
        basis = typea.kernel_basis(harmonic3, "minus")
        for k, f in enumerate(basis):
            for q in (0.4, 1.3, -2.1):
                want = q ** k * math.exp(-q * q / 2)
                assert ex.evaluate(f, q) == pytest.approx(want)

    def test_first_order_ground_state(self):
        model = harmonic_model(1)
        f = typea.kernel_basis(model, "minus")[0]
        for q in (0.0, 1.0, -1.7):
            assert ex.evaluate(f, q) == pytest.approx(math.exp(-q * q / 2))

    @pytest.mark.parametrize("branch", ["minus", "plus"])
    def test_periodic_annihilation(self, periodic2, branch):
        basis = typea.kernel_basis(periodic2, branch)
        op = (periodic2.p if branch == "minus"
              else dop.adjoint(periodic2.p))
        for f in basis:
            img = dop.apply(op, f)
            assert ex.is_zero(img, PERIODIC_CELL, n_samples=64)

    @pytest.mark.parametrize("branch", ["minus", "plus"])
    def test_sextic_annihilation(self, sextic2, branch):
        basis = typea.kernel_basis(sextic2, branch)
        op = (sextic2.p if branch == "minus" else dop.adjoint(sextic2.p))
        for f in basis:
            assert ex.is_zero(dop.apply(op, f), HALF_LINE, n_samples=64)

    def test_degenerate_h_rejected(self):
        with pytest.raises(ModelError, match="c1"):
            typea.build(ex.Q, ex.ZERO, 2, REAL_LINE, c1=0.0)

    def test_partial_product_nonzero_image(self, periodic2):
        # P_m phi_{m+1} = m! (-i)^m (h')^m U^(-1)
        h_prime = ex.differentiate(periodic2.h)
        basis = typea.kernel_basis(periodic2, "minus")
        for m in (1,):
            img = dop.apply(periodic2.partial_supercharge(m), basis[m])
            want = (ex.Const(math.factorial(m) * (-1j) ** m)
                    * ex.pow_(h_prime, m) * periodic2.uinv)
            for q in PERIODIC_CELL.sample_points(32):
                lhs = ex.evaluate(img, q)
                rhs = ex.evaluate(want, q)
                assert abs(lhs - rhs) <= 1e-8 * (1 + abs(rhs))

    def test_partial_product_nonzero_image_sextic(self):
        model = sextic_model(3)
        h_prime = ex.differentiate(model.h)
        basis = typea.kernel_basis(model, "minus")
        for m in (1, 2):
            img = dop.apply(model.partial_supercharge(m), basis[m])
            want = (ex.Const(math.factorial(m) * (-1j) ** m)
                    * ex.pow_(h_prime, m) * model.uinv)
            for q in HALF_LINE.sample_points(32):
                lhs = ex.evaluate(img, q)
                rhs = ex.evaluate(want, q)
                assert abs(lhs - rhs) <= 1e-8 * (1 + abs(rhs))


class TestSMatrix:
    def test_harmonic_two_state_matrix(self, harmonic2):
        s = typea.s_matrix(harmonic2)
        want = np.diag([-0.5, 0.5]).astype(complex)
        assert np.abs(s.matrix - want).max() < 1e-12

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_harmonic_roots_analytic(self, n):
        model = harmonic_model(n)
        s = typea.s_matrix(model)
        want = np.array([k + 0.5 - n / 2 for k in range(n)])
        assert np.abs(np.sort(s.real_roots()) - want).max() < 1e-10

    def test_periodic_two_state_invariants(self, periodic2):
        # individual entries depend on the affine normalization of h;
        # the characteristic polynomial does not.  Worked out by hand
        # with h(0) = 0: S = [[-1/2, -i/2], [0, 1/2]], so det(EI - S)
        # = E² - 1/4.
        s = typea.s_matrix(periodic2)
        assert np.abs(s.charpoly - np.array([1.0, 0.0, -0.25])).max() < 1e-12
        assert np.sort(s.real_roots()) == pytest.approx([-0.5, 0.5])

    def test_sextic_two_state_invariants(self, sextic2):
        # hand elimination with h = q²/2 gives S = [[-b, -4a], [-5/2, b]],
        # so det(EI - S) = E² - b² - 10a = E² - 3 at a = 0.2, b = 1;
        # entries move under the bundled h normalization, the polynomial
        # does not
        a, b = 0.2, 1.0
        s = typea.s_matrix(sextic2)
        want = np.array([1.0, 0.0, -(b * b + 10 * a)])
        assert np.abs(s.charpoly - want).max() < 1e-10
        roots = np.sort(s.real_roots())
        assert roots == pytest.approx([-math.sqrt(3), math.sqrt(3)])

    def test_constancy_certificate_rejects_inadmissible(self):
        model = typea.build(ex.Q, ex.Q, 2, REAL_LINE)
        with pytest.raises(SMatrixError, match="constancy"):
            typea.s_matrix(model)

    def test_root_invariance(self, sextic2):
        base = np.sort(typea.s_matrix(sextic2).real_roots())
        # different evaluation point
        moved = np.sort(typea.s_matrix(sextic2, qstar=2.3).real_roots())
        assert np.abs(base - moved).max() < 1e-8
        # different reference point (rescales U by a constant)
        dom2 = ex.Domain(0.0, math.inf, "dirichlet", 2.0, singular=(0.0,))
        model2 = typea.build(parse("0.2*q^3 + q - 2/q"), parse("1/q"),
                             2, dom2)
        again = np.sort(typea.s_matrix(model2).real_roots())
        assert np.abs(base - again).max() < 1e-8
        # different kernel constants with c1 != 0
        model3 = typea.build(parse("0.2*q^3 + q - 2/q"), parse("1/q"),
                             2, HALF_LINE, c1=2.5, c2=-0.7)
        shifted = np.sort(typea.s_matrix(model3).real_roots())
        assert np.abs(base - shifted).max() < 1e-8

    def test_detm_value_convention(self, harmonic2):
        # det M(E) = det(2(E I - S)) = 2^N (E² - 1/4) for the two-state
        # harmonic matrix
        s = typea.s_matrix(harmonic2)
        assert s.detm_value(1.5) == pytest.approx(4 * (1.5 ** 2 - 0.25))


class TestCollocation:
    def test_agrees_with_elimination(self, harmonic2):
        basis = typea.kernel_basis(harmonic2, "minus")
        pts = np.linspace(-2.0, 2.0, 9)
        s_col = typea.s_matrix_collocation(
            typea.as_supersystem(harmonic2), basis, pts)
        s_ind = typea.s_matrix(harmonic2)
        assert np.abs(s_col.matrix - s_ind.matrix).max() < 1e-8

    def test_non_invariant_basis_rejected(self):
        ham = dop.DiffOp.schrodinger(ex.pow_(ex.Q, 4))
        basis = [parse("exp(-q^2/2)")]
        with pytest.raises(CollocationError, match="not invariant"):
            typea.s_matrix_collocation(ham, basis, np.linspace(-2, 2, 7))

    def test_sextic_agreement(self, sextic2):
        basis = typea.kernel_basis(sextic2, "minus")
        pts = np.linspace(0.5, 2.8, 10)
        s_col = typea.s_matrix_collocation(sextic2, basis, pts)
        s_ind = typea.s_matrix(sextic2)
        assert np.abs(s_col.matrix - s_ind.matrix).max() < 1e-7

    def test_needs_enough_points(self, harmonic2):
        basis = typea.kernel_basis(harmonic2, "minus")
        with pytest.raises(CollocationError, match="points"):
            typea.s_matrix_collocation(
                typea.as_supersystem(harmonic2), basis, [0.1, 0.5, 1.0])


class TestAssembledSystems:
    @pytest.mark.parametrize("maker,n,dom", [
        (harmonic_model, 4, REAL_LINE),
        (periodic_model, 3, PERIODIC_CELL),
        (sextic_model, 3, HALF_LINE),
    ])
    def test_intertwining_of_admissible_models(self, maker, n, dom):
        model = maker(n)
        assert ex.is_zero(typea.condition_residual(model), dom)
        assert susy.verify(typea.as_supersystem(model)).ok

    def test_adjoint_similarity_relation(self, periodic2):
        # adjoint(P) = U² Vfun P Vfun^(-1) U^(-2), probed on 8 damped
        # functions
        model = periodic2
        lhs_op = dop.adjoint(model.p)
        factor = model.u * model.u * model.vfun
        fns = susy.damped_test_functions(PERIODIC_CELL, 8)
        for f in fns:
            inner = dop.apply(model.p, f / factor)
            rhs = factor * inner
            lhs = dop.apply(lhs_op, f)
            for q in PERIODIC_CELL.sample_points(8):
                a = ex.evaluate(lhs, q)
                b = ex.evaluate(rhs, q)
                assert abs(a - b) <= 1e-7 * (1 + abs(a))

    def test_branch_determinants_agree(self, sextic2):
        s_minus = typea.s_matrix(sextic2, "minus")
        s_plus = typea.s_matrix(sextic2, "plus")
        assert susy.detm_equality(s_minus, s_plus)
