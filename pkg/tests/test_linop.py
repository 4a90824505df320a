import numpy as np
import pytest

from dspstab.linop import (BandedOp, SymbolData, DiffusionFitError, analyze_symbol, apply, check_dissipativity,
                           check_hyp_inv, check_unit_roots, count_unit_roots, extract_diffusion,
                           flux_gradient, flux_gradient_fd, limit_symbol, linearize, linearize_at,
                           op_difference_apply, spectral_probe, symbol_from_coeffs)
from dspstab.scheme import evolve
from dspstab.seqcore import TailedSeq, mass

NU, D = 0.5, 0.8


def mlf_coeffs(fprime):
    """Limit stencil a_{-1}, a_0, a_1 of the linearized mLF scheme, derived by hand."""
    return np.array([NU * (D + fprime / 2), 1 - 2 * NU * D, NU * (D - fprime / 2)])


@pytest.mark.parametrize("state,side", [(1.0, "left"), (-1.0, "right"), (0.3, "right")])
def test_limit_coefficients_by_hand(scheme, state, side):
    sym = limit_symbol(scheme, state, side)
    np.testing.assert_allclose(sym.coeffs, mlf_coeffs(state), atol=1e-15)
    assert sym.alpha == pytest.approx(NU * state)
    assert abs(sym.alpha - sym.alpha_check) <= 1e-8


def test_exact_and_difference_gradients_agree(scheme):
    states = np.array([np.linspace(-1.4, 1.4, 9), np.linspace(1.4, -1.4, 9)])
    g_exact = flux_gradient(scheme, states)
    g_fd = flux_gradient_fd(scheme, states)
    assert np.max(np.abs(g_exact - g_fd)) <= 1e-8


def test_operator_limits_and_sums(op, profile):
    np.testing.assert_allclose(op.a_left, mlf_coeffs(1.0), atol=1e-15)
    np.testing.assert_allclose(op.a_right, mlf_coeffs(-1.0), atol=1e-15)
    # conservation form: every column sums to one
    np.testing.assert_allclose(op.column_sums(op.lo - 5, op.hi + 5), 1.0, atol=1e-14)
    # rows sum to 1 + S_j - S_{j+1} with S_j the row sum of the flux derivatives
    S = op.b_rows(op.lo, op.hi + 1).sum(axis=1)
    np.testing.assert_allclose(op.row_sums(), 1 + S[:-1] - S[1:], atol=1e-14)


def test_apply_matches_dense_matrix(op):
    rng = np.random.default_rng(3)
    h = TailedSeq(-5, rng.standard_normal(11))
    Lh = apply(op, h)
    M = op.dense(-20, 21)
    np.testing.assert_allclose(Lh.window(-20, 21), M @ h.window(-20, 21), atol=1e-15)
    assert abs(mass(Lh) - mass(h)) <= 1e-14


def test_apply_is_the_derivative_of_the_scheme(scheme, profile, op):
    h = TailedSeq(-3, [0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.1])
    Lh = apply(op, h)
    errs = []
    for eps in (1e-4, 1e-5, 1e-6):
        fd = (evolve(scheme, profile.seq + h * eps) - profile.seq) * (1 / eps)
        errs.append((fd - Lh).max_abs())
    # first order in eps until rounding takes over
    assert errs[1] < errs[0] / 5
    assert errs[2] < 1e-5


def test_apply_rejects_tails(op):
    with pytest.raises(ValueError):
        apply(op, TailedSeq.constant(1.0))


def test_operator_difference_has_zero_mass(scheme, family, op):
    op_d = linearize(scheme, family.profile(0.25))
    h = TailedSeq(-2, [0.1, 0.4, -0.3, 0.2, 0.5])
    d = op_difference_apply(op_d, op, h)
    assert abs(mass(d)) <= 1e-14
    assert (d - (apply(op_d, h) - apply(op, h))).max_abs() <= 1e-14


def test_linearize_rejects_unconverged_profile(scheme, profile):
    with pytest.raises(ValueError):
        linearize(scheme, profile, tol=1e-20)


def test_reference_symbols(symbols):
    left, right = symbols
    for sym in symbols:
        assert sym.dissipative
        assert sym.mu == 1
        # beta = D nu - (nu f'(u))^2 / 2
        assert abs(sym.beta - (D * NU - (NU * 1.0) ** 2 / 2)) <= 1e-6
    np.testing.assert_allclose(np.sort(np.abs(right.unit_roots)), [0.15 / 0.65, 1.0], atol=1e-12)
    np.testing.assert_allclose(np.sort(np.abs(left.unit_roots)), [1.0, 0.65 / 0.15], atol=1e-12)
    assert check_unit_roots(left).passed and check_unit_roots(right).passed


def test_dissipativity_fails_for_unit_modulus_at_pi():
    sym = symbol_from_coeffs([0.5, 0.0, 0.5], 1, 1)      # F(e^{i pi}) = -1
    rep = check_dissipativity(sym)
    assert not rep.passed and rep.value == pytest.approx(1.0)


def fourth_order(c):
    """F(k) = 1 - c (k - 2 + 1/k)^2, so log F(e^{i xi}) = -c xi^4 + O(xi^6)."""
    return symbol_from_coeffs([-c, 4 * c, 1 - 6 * c, 4 * c, -c], 2, 2)


@pytest.mark.parametrize("alpha,beta", [(0.0, 0.7), (0.3, 0.7 + 0.2j)])
def test_synthetic_quartic_symbol(alpha, beta):
    sym = SymbolData("right", np.zeros(3), 1, 1, alpha,
                     symbol=lambda k: np.exp(-1j * alpha * np.angle(k) - beta * np.angle(k) ** 4))
    sym = analyze_symbol(sym)
    assert sym.dissipative and sym.mu == 2
    assert abs(sym.beta - beta) <= 1e-6


def test_fourth_order_stencil():
    # |F| = 1 - c xi^4 sits within 1e-12 of one at the first points of the default
    # 4096-point grid, so the default margin rejects it; a coarser grid resolves it
    assert not check_dissipativity(fourth_order(0.05)).passed
    sym = analyze_symbol(fourth_order(0.05), n_grid=1024)
    assert sym.dissipative and sym.mu == 2
    assert abs(sym.beta - 0.05) <= 1e-6


def test_multiple_unit_root_fails_hyp9():
    # kappa^2 (F - 1) = -c (kappa - 1)^4 has a fourfold root at 1
    assert not check_unit_roots(fourth_order(0.05)).passed


def test_no_diffusion_order():
    # pure shift: F(k) = k, |F| = 1 on the whole circle
    with pytest.raises(DiffusionFitError):
        extract_diffusion(symbol_from_coeffs([0.0, 0.0, 1.0], 1, 1), mu_max=2)


def test_count_unit_roots_degree():
    roots = count_unit_roots(symbol_from_coeffs([0.15, 0.2, 0.65], 1, 1))
    assert len(roots) == 2


def test_hyp_inv(op, symbols):
    assert check_hyp_inv(op, *symbols).passed
    degenerate = symbol_from_coeffs([0.0, 0.5, 0.5], 1, 1)
    rep = check_hyp_inv(op, symbols[0], degenerate)
    assert not rep.passed and rep.value == 0.0


def test_hyp_inv_reports_offending_index(op):
    a = op.a_var.copy()
    a[4, -1] = 0.0
    bad = BandedOp(op.p, op.q, op.lo, a, op.a_left, op.a_right)
    rep = check_hyp_inv(bad)
    assert not rep.passed and rep.detail["index"] == op.lo + 4


def test_spectral_probe(op, eigen):
    rho = spectral_probe(op, eigen.seq)
    assert 0.5 < rho < 1.0
    # without deflation the eigenvalue 1 of V dominates
    assert spectral_probe(op, None) == pytest.approx(1.0, abs=1e-3)


def test_constant_state_operator_is_its_limit(scheme):
    op = linearize_at(scheme, TailedSeq.constant(-1.0))
    np.testing.assert_allclose(op.rows(-5, 5), np.tile(mlf_coeffs(-1.0), (10, 1)), atol=1e-15)
