from math import pi

import numpy as np
import pytest
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

from degentrace import mellin
from degentrace import spectral as s
from degentrace.polynomial import Polynomial

BUMP_MASS = 0.4439938161680794  # int_{-1}^{1} exp(-1/(1-u^2)) du


@pytest.fixture(scope="module")
def phi():
    f = s.make_test_function(0.3)
    f(0.0)
    return f


def test_phi_at_zero(phi):
    assert phi(0.0) == pytest.approx(0.3 * BUMP_MASS / (2 * pi), rel=1e-12)


@pytest.mark.parametrize("e", [1.0, 17.3, 250.0, 900.0])
def test_phi_vs_cosine_quadrature(phi, e):
    ref, _ = integrate.quad(lambda t: float(phi.phi_hat(t).real), -0.3, 0.3, weight="cos", wvar=e,
                            epsabs=1e-15, limit=400)
    assert phi(e) == pytest.approx(ref / (2 * pi), abs=1e-10)  # spline tolerance
    assert phi.phi_exact(e) == pytest.approx(ref / (2 * pi), abs=1e-13)


def test_phi_hat_support(phi):
    assert np.all(phi.phi_hat(np.array([-0.31, 0.3, 0.5])) == 0.0)
    with pytest.raises(ValueError):
        s.SchwartzPair(0.0)


def test_decay_bound_dominates(phi):
    for e in (5.0, 40.0, 200.0):
        tail = np.abs(phi.phi_exact(np.linspace(e, 4 * e, 400)))
        assert np.all(tail <= phi.decay_bound(e))
    assert phi.decay_bound(0.0) == pytest.approx(phi.l1_norm_hat() / (2 * pi))


def test_subprincipal_shift(phi):
    shifted = s.subprincipal_shift(phi, 2.5)
    e = np.array([-3.0, 0.0, 4.0])
    assert np.allclose(shifted.phi_exact(e), phi.phi_exact(e + 2.5), atol=1e-14)


def test_grid_params_validation():
    with pytest.raises(ValueError):
        s.GridParams(dx_factor=5)
    with pytest.raises(ValueError):
        s.GridParams(boundary_tol=0.0)


def test_quartic_oscillator_levels():
    # -d^2/dx^2 + x^4: standard reference levels
    ref = [1.0603620904841828, 3.7996730298013941, 7.4556979379867383]
    w = s.eigenvalues_in_window(Polynomial([((4,), 1.0)], 1), 1.0, (0.5, 8.0), full_output=True)
    assert np.allclose(w.values, ref, atol=2e-5)
    assert np.all(np.abs(w.values - ref) <= 2 * w.estimates + 1e-12)


def test_reference_spectrum_vs_second_order_solver(quartic_sextic):
    h, window = 1 / 60, (-0.05, 0.05)
    w = s.eigenvalues_in_window(quartic_sextic, h, window, full_output=True)
    a, b = w.meta["domain"]

    def fd(N):
        x = np.linspace(a, b, N + 2)[1:-1]
        dx = (b - a) / (N + 1)
        return eigh_tridiagonal(2 * h * h / dx ** 2 + quartic_sextic.full(x),
                                -h * h / dx ** 2 * np.ones(N - 1), select="v",
                                select_range=window, eigvals_only=True)
    ref = (4 * fd(80000) - fd(40000)) / 3
    assert len(ref) == len(w.values) == 8
    assert np.allclose(w.values, ref, atol=1e-8)


def test_wall_too_close_is_refused(quartic_sextic):
    with pytest.raises(s.DomainTooSmallError):
        s.eigenvalues_in_window(quartic_sextic, 1 / 60, (-0.05, 0.05),
                                s.GridParams(domain=(-0.6, 0.6)))


def test_gamma_trace(phi):
    eigs = np.array([-0.01, 0.0, 0.02])
    assert s.gamma_trace(0.0, 0.1, phi, eigs) == pytest.approx(np.sum(phi.phi_exact(eigs / 0.1)))
    assert s.gamma_trace(0.0, 0.1, phi, []) == 0.0


def test_weyl_count_quartic():
    # area under sqrt(1 - x^4) on [-1, 1] / pi
    ref, _ = integrate.quad(lambda x: np.sqrt(1 - x ** 4), -1, 1)
    assert s.weyl_count(Polynomial([((4,), 1.0)], 1), 1.0, (-2, 2)) == pytest.approx(ref / pi, rel=1e-4)


def test_predicted_leading_reference(quartic_sextic):
    T = 0.8 * 0.3324440428
    f = s.make_test_function(T)
    val, info = s.predicted_leading(quartic_sextic, f, 0.01, full_output=True)
    assert info["exponent"] == -0.25
    # independent Mellin transform of phi (even, so M+ = M-)
    Mq, _ = integrate.quad(lambda v: v ** -0.25 * f.phi_exact(v), 0, 400, limit=800, epsabs=1e-12)
    Mq += integrate.quad(lambda v: v ** -0.25 * f.phi_exact(v), 400, 4000, limit=2000)[0]
    rp = mellin.analytic_residue(1, 2, "+")
    rm = mellin.analytic_residue(1, 2, "-")
    coef = 2.0 * 2.0 / (2 * pi) * (-(rp + rm) * Mq)
    assert info["coefficient"] == pytest.approx(coef, rel=1e-6)
    assert val == pytest.approx(coef * 0.01 ** -0.25)


def test_scaling_fit_synthetic():
    hs = np.geomspace(1 / 400, 1 / 60, 10)
    samples = [s.SpectralSample(h, (), 0.3 * h ** -0.25) for h in hs]
    a, c, res = s.scaling_fit(samples)
    assert a == pytest.approx(-0.25) and c == pytest.approx(0.3) and res < 1e-12
    logs = [s.SpectralSample(h, (), -0.2 * h ** -1 * abs(np.log(h))) for h in hs]
    a, c, _ = s.scaling_fit(logs, "power-log")
    assert a == pytest.approx(-1.0) and c == pytest.approx(-0.2)
    with pytest.raises(s.FitRefused):
        s.scaling_fit(samples[:5])
    with pytest.raises(s.FitRefused):
        s.scaling_fit([s.SpectralSample(h, (), 1.0) for h in np.geomspace(0.01, 0.02, 9)])


def test_sample_grid_matches_single_samples(quartic_sextic, phi):
    hs = [1 / 60, 1 / 50]
    grid = s.sample_grid(quartic_sextic, hs, phi, (-0.05, 0.05), workers=2)
    one = s.make_sample(quartic_sextic, hs[1], phi, (-0.05, 0.05))
    assert grid[1].eigenvalues == one.eigenvalues and grid[1].gamma == one.gamma
    assert 0 < grid[0].meta["out_of_window_bound"] < np.inf


def test_prediction_scales_with_form(quartic_sextic, phi):
    _, base = s.predicted_leading(quartic_sextic, phi, 0.01, full_output=True)
    _, scaled = s.predicted_leading(quartic_sextic.scaled_form(3.0), phi, 0.01, full_output=True)
    assert scaled["coefficient"] == pytest.approx(base["coefficient"] * 3.0 ** -0.25, rel=1e-12)


def test_sample_gamma_is_recomputable(quartic_sextic, phi):
    smp = s.make_sample(quartic_sextic, 1 / 70, phi, (-0.05, 0.05))
    assert smp.gamma == s.gamma_trace(quartic_sextic.e_c, smp.h, phi, smp.eigenvalues)
    assert list(smp.eigenvalues) == sorted(smp.eigenvalues)


def test_refinement_within_estimates(quartic_sextic):
    h, window = 1 / 80, (-0.05, 0.05)
    a = s.eigenvalues_in_window(quartic_sextic, h, window, s.GridParams(dx_factor=10), True)
    b = s.eigenvalues_in_window(quartic_sextic, h, window, s.GridParams(dx_factor=20), True)
    assert len(a.values) == len(b.values)
    assert np.all(np.abs(a.values - b.values) <= a.estimates + 1e-13)
