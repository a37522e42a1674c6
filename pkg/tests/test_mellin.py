from fractions import Fraction as F
from math import gamma, pi, sqrt

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from degentrace import mellin as m


# exact bookkeeping ---------------------------------------------------------
@pytest.mark.parametrize("n, k, zm, case", [
    (1, 2, F(3, 4), m.SIMPLE_ODD), (2, 2, F(3, 2), m.SIMPLE_EVEN),
    (3, 3, F(2), m.INTEGER_ODD_LOG), (4, 2, F(3), m.INTEGER_EVEN), (3, 2, F(9, 4), m.SIMPLE_ODD),
])
def test_z_min_and_case(n, k, zm, case):
    assert m.z_min(n, k) == zm
    assert m.classify_case(n, k) == case


def test_classify_rejects_bad_input():
    with pytest.raises(ValueError):
        m.classify_case(1, 1)


def _sympy_B(n, k, l):
    z = sp.Symbol("z")
    expr = 1
    for i in range(l):
        w = z - i
        fac = (w - 1)
        for j in range(1, 2 * k + 1):
            fac *= j - 2 * k * w + n * (k + 1) - 1
        expr *= fac
    return z, sp.Poly(sp.expand(expr), z)


@pytest.mark.parametrize("n, k, l", [(1, 2, 1), (1, 2, 3), (3, 3, 3), (4, 2, 4), (2, 2, 2)])
def test_root_multiplicity_vs_sympy(n, k, l):
    z, poly = _sympy_B(n, k, l)
    roots = sp.roots(poly)
    for r, mult in roots.items():
        r = F(int(sp.fraction(r)[0]), int(sp.fraction(r)[1]))
        assert m.root_multiplicity(r, n, k, l) == mult
        assert m.B_l(r, n, k, l) == 0
    assert m.root_multiplicity(F(1, 7), n, k, l) == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(2, 4), st.integers(1, 3), st.fractions(-3, 6, max_denominator=12))
def test_B_l_vanishes_exactly_on_roots(n, k, l, z):
    assert (m.B_l(z, n, k, l) == 0) == (m.root_multiplicity(z, n, k, l) > 0)


def test_B_l_is_product_of_shifts():
    z = F(5, 7)
    assert m.B_l(z, 2, 3, 3) == m.b_weighted(z, 2, 3) * m.b_weighted(z - 1, 2, 3) * m.b_weighted(z - 2, 2, 3)


@pytest.mark.parametrize("z0, n, k, l", [(F(2), 3, 3, 3), (F(3, 4), 1, 2, 1), (F(3), 4, 2, 4)])
def test_inverse_laurent_vs_sympy_series(z0, n, k, l):
    z, poly = _sympy_B(n, k, l)
    eps = sp.Symbol("eps")
    mult, coeffs = m.inverse_B_laurent(z0, n, k, l, terms=2)
    ser = sp.series(1 / poly.as_expr().subs(z, sp.Rational(z0.numerator, z0.denominator) + eps),
                    eps, 0, 2 - mult).removeO()
    for i, c in enumerate(coeffs):
        ref = ser.coeff(eps, -mult + i)
        assert F(int(sp.fraction(ref)[0]), int(sp.fraction(ref)[1])) == c


def test_rational_limit_simple_pole():
    assert m.rational_limit(F(3, 4), 1, 2, 1, 1) == F(1, 6)


def test_b0_derived_from_differentiation():
    q, z = sp.symbols("q z", positive=True)
    k = 2
    expr = sp.diff(q ** (2 * k * (1 - z)), q, 2 * k) / q ** (2 * k * (1 - z) - 2 * k)
    for zv in (F(1, 3), F(3, 4), F(5, 2)):
        val = sp.nsimplify(expr.subs(z, sp.Rational(zv.numerator, zv.denominator)))
        assert m.b0(zv, k) == (1 - zv) * F(int(sp.fraction(val)[0]), int(sp.fraction(val)[1]))
    # the z-free product is identically zero, b0 only vanishes on the grid j/(2k)
    assert m.b0(F(1, 4), 2) == 0 and m.b0(F(1, 3), 2) != 0
    assert m.b0_zfree(F(1, 3), 2) == 0


def test_pole_catalog_orders():
    cat = m.pole_catalog(3, 3, 3)
    assert cat[0].z == 2 and cat[0].order == 2
    for pole in cat:
        assert pole.order == m.root_multiplicity(pole.z, 3, 3, m.minimal_l(pole.z))
    assert [p.z for p in m.regular_poles(4, 2)] == [1, 2]
    assert m.regular_poles(1, 2) == []


# closed forms vs quadrature -----------------------------------------------------
@pytest.mark.parametrize("n, alpha", [(1, 0.75), (1, 0.9), (3, 2.0), (3, 2.5), (5, 3.2)])
def test_E_closed_vs_quadrature(n, alpha):
    assert m.E_closed(n, alpha) == pytest.approx(m.E_numeric(n, alpha), rel=1e-8)


def test_E_reference_magnitude():
    ref = 2 ** -0.5 * gamma(1.25) * gamma(0.5) / gamma(0.75)
    assert abs(m.E_closed(1, 0.75)) == pytest.approx(ref, rel=1e-14)
    assert m.E_numeric(1, 0.75) < 0


def test_E_unsigned_variant_disagrees():
    for n in (1, 3, 5):
        a = n / 2 + 0.3
        assert abs(m.E_closed_unsigned(n, a) - m.E_numeric(n, a)) > 0.1 * abs(m.E_numeric(n, a))


@pytest.mark.parametrize("n, alpha", [(2, 1.5), (2, 2.5), (4, 2.5), (4, 3.5)])
def test_E_even_vanishes(n, alpha):
    assert m.E_closed(n, alpha) == 0.0
    assert abs(m.E_numeric(n, alpha)) < 1e-9


def test_E_strip_enforced():
    with pytest.raises(ValueError):
        m.E_numeric(1, 0.4)


@pytest.mark.parametrize("p, n", [(2, 1), (3, 1), (4, 3), (2, 3), (4, 7)])
def test_s_identity_vs_quadrature(p, n):
    assert float(m.s_identity(p, n)) == pytest.approx(m.s_identity_numeric(p, n), abs=1e-8)


def test_s_identity_exact_zero_and_variant():
    assert m.s_identity(2, 2) == 0 and isinstance(m.s_identity(2, 2), F)
    assert m.s_identity_from_zero(2, 3) != m.s_identity(2, 3)
    with pytest.raises(ValueError):
        m.s_identity(2, 4)


@pytest.mark.parametrize("k, l, c", [(2, 1, 1.0), (3, 1, 1.0), (2, 1, 3.0)])
def test_q_identity(k, l, c):
    lhs, rhs = m.q_identity_check(m.bump_weight_expr(c), k, l)
    assert rhs == pytest.approx(c * gamma(2 * k * l))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_q_identity_zero_weight():
    lhs, rhs = m.q_identity_check(m.bump_weight_expr(0.0), 2, 1)
    assert lhs == 0 and rhs == 0


def test_log_constants_finite():
    for side in "+-":
        assert np.isfinite(m.a_tilde(side, 2, 1))
    assert np.isfinite(m.a_nk(1, 2))


# Mellin transforms -----------------------------------------------------------------
def test_mellin_of_gaussian():
    f = lambda t: np.exp(-t * t)  # noqa: E731
    for z in (0.75, 1.5, 2.0 + 1.0j):
        ref = complex(sp.N(sp.gamma(sp.sympify(z) / 2) / 2, 16))
        assert m.mellin_transform(f, "+", z) == pytest.approx(ref, rel=1e-9)
    pair = m.MellinPair(f)
    h = 1e-5
    fd = (pair.value("+", 1.5 + h) - pair.value("+", 1.5 - h)) / (2 * h)
    assert pair.derivative("+", 1.5) == pytest.approx(fd, rel=1e-6)


def test_mellin_keeps_imaginary_part():
    f = lambda t: np.exp(-t * t) * (1 + 1j * t)  # noqa: E731
    v = m.mellin_transform(f, "+", 1.0)
    assert v.imag == pytest.approx(0.5, rel=1e-9)
    assert v.real == pytest.approx(sqrt(pi) / 2, rel=1e-9)


def test_analytic_residue_independent_of_l():
    a1 = m.analytic_residue(1, 2, "+", 1)
    a3 = m.analytic_residue(1, 2, "+", 3)
    assert a1 == pytest.approx(a3, rel=1e-10)


def test_integer_even_constants():
    c = m.singular_constants(4, 2)
    assert c["case"] == m.INTEGER_EVEN and c["z"] == 3
    assert c["c-"] == pytest.approx(0.0625)


@pytest.mark.parametrize("n, k", [(1, 2), (2, 2), (3, 2)])
def test_gamma_constants_match_rational_route(n, k):
    # simple z_min: K ~ -(r+ M+ + r- M-) with r from the exact rational factor
    c = m.singular_constants(n, k)
    assert c["c+"] == pytest.approx(-m.analytic_residue(n, k, "+"), rel=1e-10, abs=1e-14)
    assert c["c-"] == pytest.approx(-m.analytic_residue(n, k, "-"), rel=1e-10, abs=1e-14)


def test_log_constants_match_rational_route():
    c = m.singular_constants(3, 3)
    assert c["d+"] == pytest.approx(m.analytic_residue(3, 3, "+"), rel=1e-10)
    assert c["d-"] == pytest.approx(m.analytic_residue(3, 3, "-"), rel=1e-10)
