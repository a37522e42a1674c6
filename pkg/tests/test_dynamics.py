from math import pi

import numpy as np
import pytest
from scipy import integrate

from degentrace import dynamics as d
from degentrace.geometry import HomogeneousPotential


def _unit_dirs(count, dim, seed=7):
    w = np.random.default_rng(seed).standard_normal((count, dim))
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def test_phase_space_point():
    z = d.PhaseSpacePoint([1.0, 2.0], [3.0, 4.0])
    assert np.array_equal(d.PhaseSpacePoint.from_z(z.z).xi, [3.0, 4.0])
    with pytest.raises(ValueError):
        d.PhaseSpacePoint([np.nan], [0.0])


def test_flow_conserves_energy_and_reverses(quartic_sextic):
    p = quartic_sextic
    z0 = np.array([0.3, 0.1])
    res = d.integrate_flow(p, z0, 2.0)
    assert res.energy_drift < 1e-10
    back = d.integrate_flow(p, res.point.z, -2.0)
    assert np.allclose(back.point.z, z0, atol=1e-9)
    with pytest.raises(ValueError):
        d.integrate_flow(p, z0, 1.0, tol=0.0)


def test_flow_is_symplectic(quartic_sextic):
    J = d.flow_jacobian(quartic_sextic, np.array([0.4, -0.2]), 0.7)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-10)


def test_equilibrium_linearization_is_shear(quartic_sextic):
    for t in (0.05, 0.2):
        jet = d.flow_jet_oracle(quartic_sextic, t, 1)
        for w in _unit_dirs(3, 2):
            assert np.allclose(jet(w), d.linearized_flow(t, 1) @ w, atol=1e-12)


@pytest.mark.parametrize("t", [0.05, 0.1, 0.15, 0.2, 0.25])
def test_closed_jet_vs_transport(quartic_sextic, t):
    closed = d.flow_jet_closed(quartic_sextic, t)
    oracle = d.flow_jet_oracle(quartic_sextic, t)
    for w in _unit_dirs(3, 2):
        a, b = closed(w), oracle(w)
        assert np.max(np.abs(a - b)) <= 1e-6 * np.max(np.abs(a))


def test_closed_jet_homogeneous_and_degree(quartic_sextic):
    jet = d.flow_jet_closed(quartic_sextic, 0.2)
    w = np.array([0.3, -0.8])
    assert np.allclose(jet(2.0 * w), 8.0 * jet(w), rtol=1e-13)
    # the position component is quintic in t, the momentum component quartic
    assert jet.t_degrees() == [5, 4]


def test_intermediate_jet_vanishes(quartic_sextic):
    jet = d.flow_jet_oracle(quartic_sextic, 0.2, 2)
    for w in _unit_dirs(3, 2):
        assert np.max(np.abs(jet(w))) < 1e-10


def test_closed_jet_two_dimensions():
    p = HomogeneousPotential.from_table([((4, 0), -1.0), ((2, 2), -0.5), ((0, 4), -2.0)], n=2, k=2)
    closed, oracle = d.flow_jet_closed(p, 0.15), d.flow_jet_oracle(p, 0.15)
    for w in _unit_dirs(3, 4):
        assert np.allclose(closed(w), oracle(w), rtol=1e-8, atol=1e-12)


def test_period_bound(quartic_sextic):
    bound, info = d.period_lower_bound(quartic_sextic, full_output=True)
    # max |V''| on {V <= 0, |x| <= 1} is at x = 1: |-12 + 30| = 18
    assert info["M"] == pytest.approx(1.05 * 18.0, rel=1e-6)
    assert bound == pytest.approx(2 * pi / (1.05 * 18.0), rel=1e-6)
    with pytest.raises(ValueError):
        d.period_lower_bound(quartic_sextic, safety=0.5)


def _period_quadrature(E):
    # T(E) = int dx / sqrt(E - V) between turning points, with x = mid - half cos(theta)
    r = np.roots([1, 0, -1, 0, 0, 0, -E])
    r = np.sort(r[np.abs(r.imag) < 1e-12].real)
    a, b = (r[-2], r[-1]) if E < 0 else (r[0], r[-1])
    mid, half = 0.5 * (a + b), 0.5 * (b - a)

    def f(th):
        x = mid - half * np.cos(th)
        return half * np.sin(th) / np.sqrt(max(E + x ** 4 - x ** 6, 1e-300))
    val, _ = integrate.quad(f, 0.0, pi, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val


def test_periodic_orbits_vs_quadrature(quartic_sextic):
    orbits = d.find_periodic_orbits(quartic_sextic, [-0.02, 0.02], 40.0, 4, seed=0)
    assert {o["energy"] for o in orbits} == {-0.02, 0.02}
    bound = d.period_lower_bound(quartic_sextic)
    for o in orbits:
        assert o["period"] == pytest.approx(_period_quadrature(o["energy"]), rel=1e-7)
        assert o["period"] >= bound


def test_generating_function_hamilton_jacobi(quartic_sextic):
    p = quartic_sextic
    x, xi, t, h = np.array([0.3]), np.array([0.2]), 0.15, 1e-4
    S = lambda tt, xx: d.generating_function(p, tt, xx, xi, tol=1e-13)  # noqa: E731
    St = (S(t + h, x) - S(t - h, x)) / (2 * h)
    Sx = (S(t, x + h) - S(t, x - h)) / (2 * h)
    assert St == pytest.approx(-p.symbol(x, Sx), abs=1e-7)
    assert S(0.0, x) == pytest.approx(float(x @ xi))


def test_generating_function_refuses_long_times(quartic_sextic):
    with pytest.raises(d.FlowError):
        d.generating_function(quartic_sextic, 1.0, [0.1], [0.1])


def test_s2k_structure(quartic_sextic):
    out = d.verify_s2k_structure(quartic_sextic, [0.05, 0.1, 0.2], [0.02, 0.04, 0.06, 0.08, 0.1, 0.12])
    assert out["max_deviation"] <= 1e-4
    assert len(out["rows"]) == 3
