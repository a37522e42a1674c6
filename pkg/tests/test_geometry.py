from math import gamma, pi

import numpy as np
import pytest
from scipy import integrate

from degentrace.geometry import (HomogeneousPotential, NonHomogeneousError, angular_factor,
                                 check_homogeneity, is_admissible, sphere_surface,
                                 taylor_defect)


@pytest.mark.parametrize("n, ref", [(1, 2.0), (2, 2 * pi), (3, 4 * pi), (4, 2 * pi ** 2)])
def test_sphere_surface(n, ref):
    assert sphere_surface(n) == pytest.approx(ref, rel=1e-14)


def test_reference_potential(quartic_sextic):
    p = quartic_sextic
    assert p.e_c == 0.0 and p.v2k.terms == {(4,): -1.0}
    assert p.symbol(np.array([0.5]), np.array([0.2])) == pytest.approx(0.04 - 0.0625 + 0.015625)
    assert angular_factor(p) == pytest.approx(2.0)
    rep = is_admissible(p, 0.05)
    assert rep and rep.failed == []


def test_shifted_maximum_reads_local_form():
    # V(x) = 2 - (x-1)^4 + (x-1)^6 written out in monomials
    from numpy.polynomial import polynomial as P
    coefs = P.polyadd(P.polyadd([2.0], -P.polypow([-1.0, 1.0], 4)), P.polypow([-1.0, 1.0], 6))
    table = [((i,), c) for i, c in enumerate(coefs) if c != 0]
    p = HomogeneousPotential.from_table(table, n=1, k=2, x0=[1.0])
    assert p.e_c == pytest.approx(2.0)
    assert p.v2k.terms[(4,)] == pytest.approx(-1.0)
    d = taylor_defect(p)
    assert max(d) < 2.0


def test_isolation_failure_is_tagged(quartic_sextic):
    # side critical points at x^2 = 2/3 sit at V = -4/27
    rep = is_admissible(quartic_sextic, 0.2)
    assert not rep and rep.failed == ["c"]
    assert rep.extra_critical_points


def test_minimum_is_not_definite():
    p = HomogeneousPotential.from_table([((4,), 1.0)], n=1, k=2)
    rep = is_admissible(p, 0.05)
    assert "a" in rep.failed


def test_small_box_not_compact(quartic_sextic):
    rep = is_admissible(quartic_sextic, 0.05, box=([-0.5], [0.5]))
    assert rep.failed == ["b"]


def test_claimed_form_must_be_homogeneous():
    with pytest.raises(NonHomogeneousError):
        HomogeneousPotential.from_table([((4,), -1.0)], n=1, k=2, v2k_table=[((4,), -1.0), ((5,), 1.0)])


def test_homogeneity_measure():
    p = HomogeneousPotential.from_table([((4, 0), -1.0), ((2, 2), -0.5), ((0, 4), -2.0)], n=2, k=2)
    assert check_homogeneity(p.v2k, 4, 2) < 1e-13


def test_angular_factor_two_dimensions_vs_quad():
    p = HomogeneousPotential.from_table([((4, 0), -1.0), ((0, 4), -1.0)], n=2, k=2)
    ref, _ = integrate.quad(lambda t: (np.cos(t) ** 4 + np.sin(t) ** 4) ** -0.5, 0, 2 * pi,
                            epsabs=1e-13, epsrel=1e-13, limit=200)
    assert angular_factor(p) == pytest.approx(ref, rel=1e-10)


def test_angular_factor_radial_forms():
    # -(|x|^2)^k has |V| = 1 on the sphere
    p3 = HomogeneousPotential.from_table(
        [((6, 0, 0), -1.0), ((0, 6, 0), -1.0), ((0, 0, 6), -1.0),
         ((4, 2, 0), -3.0), ((4, 0, 2), -3.0), ((2, 4, 0), -3.0), ((0, 4, 2), -3.0),
         ((2, 0, 4), -3.0), ((0, 2, 4), -3.0), ((2, 2, 2), -6.0)], n=3, k=3)
    assert angular_factor(p3, tol=1e-9) == pytest.approx(4 * pi, rel=1e-8)
    # scaling V_2k by c scales the factor by c^(-n/2k)
    p1 = HomogeneousPotential.from_table([((4,), -3.0)], n=1, k=2)
    assert angular_factor(p1) == pytest.approx(2 * 3.0 ** -0.25)
    assert 2 * pi ** 1.5 / gamma(1.5) == pytest.approx(4 * pi)
