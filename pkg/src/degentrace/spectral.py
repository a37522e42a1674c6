"""Eigenvalues of -h^2 d^2/dx^2 + V near E_c and the smoothed trace gamma(E_c, h, phi)."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import factorial, pi

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import eig_banded, solve_banded

from . import geometry, mellin
from ._accel import phase_sum
from .profiles import bump
from .quadrature import panel_rule


class SpectralError(RuntimeError):
    pass


class DomainTooSmallError(SpectralError):
    """An eigenfunction carries too much mass near the hard wall."""


# ----------------------------------------------------------------------
class SchwartzPair:
    """phi and its Fourier transform phi_hat, supported in (-T, T).

    Conventions: phi(e) = (1/2pi) int phi_hat(t) exp(i t e) dt, so phi(0) is
    the mean of phi_hat over its support times T/pi.  ``shift`` c realizes
    e -> phi(e + c) (phi_hat picks up exp(i c t)).
    """

    def __init__(self, T, shift=0.0, panels=64, nodes=16, max_deriv=24):
        if T <= 0:
            raise ValueError("T must be positive")
        self.T = float(T)
        self.shift = float(shift)
        self._nodes = nodes
        self._rules = {}
        self._base_panels = panels
        # L1 norms of phi_hat^(m) feed the decay bound |phi(e)| <= C_m / (2 pi |e|^m)
        grid = np.linspace(-1.0, 1.0, 40001)[1:-1]
        dx = grid[1] - grid[0]
        self._l1 = np.array([np.sum(np.abs(bump(grid, m))) * dx * self.T ** (1 - m)
                             for m in range(max_deriv + 1)])
        self._spline = None
        self._spline_range = 0.0

    # evaluators ---------------------------------------------------------
    def phi_hat(self, t):
        t = np.asarray(t, float)
        val = bump(t / self.T)
        return val * np.exp(1j * self.shift * t) if self.shift else val

    def _rule(self, emax):
        # keep the phase advance per 16-node panel below ~4 radians
        panels = self._base_panels
        while 2 * self.T * emax / panels > 4.0:
            panels *= 2
        if panels not in self._rules:
            u, w = panel_rule(np.linspace(-1.0, 1.0, panels + 1), self._nodes)
            self._rules[panels] = (self.T * u, self.T * w * bump(u) / (2 * pi))
        return self._rules[panels]

    def _direct(self, e):
        e = np.atleast_1d(np.asarray(e, float)) + self.shift
        if e.size == 0:
            return e.copy()
        t, w = self._rule(float(np.max(np.abs(e))))
        return phase_sum(e.ravel(), t, w, 1.0).real.reshape(e.shape)

    def _build_spline(self, emax):
        step = 0.05 / self.T
        m = int(np.ceil(2 * emax / step))
        grid = np.linspace(-emax, emax, m + 1)
        spl = CubicSpline(grid, self._direct(grid))
        mid = 0.5 * (grid[1:] + grid[:-1])
        err = np.max(np.abs(spl(mid) - self._direct(mid)))
        if err > 1e-10:
            raise SpectralError(f"phi interpolation error {err:.2e}")
        self._spline, self._spline_range = spl, emax

    def phi(self, e):
        """phi on R; cached cubic-spline samples inside the tabulated band, direct sum outside."""
        e0 = np.asarray(e, float)
        e = np.atleast_1d(e0)
        if self._spline is None:
            self._build_spline(200.0 / self.T)
        out = np.empty_like(e)
        inside = np.abs(e) <= self._spline_range
        out[inside] = self._spline(e[inside])
        if np.any(~inside):
            out[~inside] = self._direct(e[~inside])
        return out.reshape(e0.shape) if e0.ndim else out[0]

    __call__ = phi

    def phi_exact(self, e):
        """Direct quadrature of the inversion integral (no interpolation)."""
        e0 = np.asarray(e, float)
        out = self._direct(e0)
        return out.reshape(e0.shape) if e0.ndim else out[0]

    def decay_bound(self, e):
        """Certified bound for |phi| at every point of modulus >= |e| (before shifting)."""
        e = abs(float(e)) - abs(self.shift)
        if e <= 0:
            return self._l1[0] / (2 * pi)
        m = np.arange(self._l1.size)
        return float(np.min(self._l1 / e ** m)) / (2 * pi)

    def l1_norm_hat(self):
        return float(self._l1[0])


def make_test_function(T):
    """phi_hat(t) = exp(-1/(1-(t/T)^2)) on (-T, T), phi its inverse transform."""
    return SchwartzPair(T)


def subprincipal_shift(phi, c):
    """The pair for e -> phi(e + c)."""
    return SchwartzPair(phi.T, phi.shift + c)


# ----------------------------------------------------------------------
@dataclass
class GridParams:
    """Finite-difference settings: step = h / dx_factor, hard walls at [a, b]."""

    dx_factor: float = 10.0
    domain: tuple = None
    wall_margin: float = 10.0
    boundary_tol: float = 1e-10
    reject_rel: float = 1e-3

    def __post_init__(self):
        if self.dx_factor < 10:
            raise ValueError("grid must resolve h/10")
        if self.boundary_tol <= 0 or self.reject_rel <= 0:
            raise ValueError("tolerances must be positive")


def _potential(p):
    return p.full if hasattr(p, "full") else p


def hard_wall_domain(p, window, margin=10.0, x0=0.0, h=None, agmon=18.0, step=1e-3,
                     limit=100.0):
    """Hard-wall interval [a, b] around x0.

    The walls sit where V >= window top + margin * half-width, pushed further
    out if needed until the Agmon distance int sqrt(V - top) dx / h from the
    classically allowed region reaches ``agmon`` (window states then carry
    about exp(-2 agmon) of their mass at the wall).
    """
    V = _potential(p)
    lo, hi = window
    level = hi + margin * 0.5 * (hi - lo)
    ends = []
    for sgn in (-1.0, 1.0):
        x, dist = x0, 0.0
        while True:
            v = float(np.atleast_1d(V(np.array([x])))[0])
            if v > hi and h is not None:
                dist += np.sqrt(v - hi) * step / h
            if v >= level and (h is None or dist >= agmon):
                break
            x += sgn * step
            if abs(x - x0) > limit:
                raise SpectralError("potential does not confine the window")
        ends.append(x)
    return tuple(ends)


def _band(Vx, h, dx):
    """Lower band storage of the 4th-order central-difference -h^2 f'' + V f."""
    c = h * h / (12.0 * dx * dx)
    ab = np.zeros((3, Vx.size))
    ab[0] = 30.0 * c + Vx
    ab[1, :-1] = -16.0 * c
    ab[2, :-2] = c
    return ab


def _banded_eigs(ab, window):
    # eigenvalues only: asking LAPACK for vectors allocates an N x N matrix
    return eig_banded(ab, lower=True, eigvals_only=True, select="v", select_range=window)


def _inverse_iteration(ab, lam, iters=3, seed=0):
    """Eigenvector for the (simple) eigenvalue lam by shifted banded solves."""
    N = ab.shape[1]
    full = np.zeros((5, N))
    full[2] = ab[0] - lam * (1 + 1e-12) - 1e-14
    full[1, 1:] = ab[1, :-1]
    full[3, :-1] = ab[1, :-1]
    full[0, 2:] = ab[2, :-2]
    full[4, :-2] = ab[2, :-2]
    v = np.random.default_rng(seed).standard_normal(N)
    for _ in range(iters):
        v = solve_banded((2, 2), full, v)
        v /= np.linalg.norm(v)
    return v


@dataclass
class WindowSpectrum:
    values: np.ndarray
    estimates: np.ndarray
    meta: dict = field(default_factory=dict)


def eigenvalues_in_window(p, h, window, grid=None, full_output=False):
    """Eigenvalues of -h^2 d^2/dx^2 + V (n = 1) in ``window``.

    Two solves at steps dx and dx/2 are combined by Richardson extrapolation for
    the fourth-order scheme; the difference to the fine value is the estimate.
    Eigenvalues whose estimate exceeds ``reject_rel * h`` are dropped.
    """
    if getattr(p, "n", 1) != 1:
        raise ValueError("only n = 1 is supported")
    if h <= 0:
        raise ValueError("h must be positive")
    grid = grid or GridParams()
    lo, hi = map(float, window)
    x0 = float(np.atleast_1d(getattr(p, "x0", 0.0))[0])
    a, b = grid.domain or hard_wall_domain(p, window, grid.wall_margin, x0, h)
    V = _potential(p)
    pad = 0.25 * (hi - lo) + 10 * h
    results = []
    for fac in (grid.dx_factor, 2 * grid.dx_factor):
        dx = h / fac
        N = int(np.ceil((b - a) / dx))
        dx = (b - a) / N
        x = a + dx * np.arange(1, N)
        ab = _band(np.asarray(V(x), float), h, dx)
        results.append((_banded_eigs(ab, (lo - pad, hi + pad)), ab, x))
    (wc, _, _), (wf, abf, xf) = results
    if wc.size != wf.size:
        raise SpectralError(f"eigenvalue count differs between resolutions ({wc.size} vs {wf.size})")
    rich = (16.0 * wf - wc) / 15.0
    est = np.abs(rich - wf)
    keep = (rich >= lo) & (rich <= hi)
    # boundary mass: outer 2% of the domain on each side
    edge = max(2, int(0.02 * xf.size))
    for j in np.nonzero(keep)[0]:
        vec = _inverse_iteration(abf, wf[j])
        mass = (np.sum(vec[:edge] ** 2) + np.sum(vec[-edge:] ** 2)) / np.sum(vec ** 2)
        if mass > grid.boundary_tol:
            raise DomainTooSmallError(
                f"state {j} (E={rich[j]:.6g}) has boundary mass {mass:.2e} on [{a:.4g}, {b:.4g}]")
    good = keep & (est <= grid.reject_rel * h)
    vals, ests = rich[good], est[good]
    meta = {"grid_points": int(xf.size), "domain": (float(a), float(b)),
            "dx": float((b - a) / (xf.size + 1)), "rejected": int(np.sum(keep & ~good)),
            "max_estimate": float(ests.max()) if ests.size else 0.0}
    if full_output:
        return WindowSpectrum(vals, ests, meta)
    return vals


# ----------------------------------------------------------------------
def gamma_trace(E_c, h, phi, eigs):
    """sum_j phi((lambda_j - E_c) / h) over the supplied window eigenvalues."""
    eigs = np.asarray(eigs, float)
    if eigs.size == 0:
        return 0.0
    return float(np.sum(phi((eigs - E_c) / h)))


def weyl_count(p, E, domain, points=20001):
    """(1/2 pi h) x phase-space area below E, without the 1/h: int sqrt((E-V)_+) dx / pi."""
    x = np.linspace(domain[0], domain[1], points)
    V = np.asarray(_potential(p)(x), float)
    return float(np.trapz(np.sqrt(np.clip(E - V, 0.0, None)), x)) / pi


def out_of_window_bound(p, E_c, h, phi, window, domain, shells=400):
    """Bound on sum over eigenvalues outside ``window`` of |phi((lambda - E_c)/h)|.

    Counts per energy shell use the Weyl area with a factor 2 and one extra
    state per shell; the spectrum lies above min V.  Shell values use the
    decay bound of phi at the shell edge nearest E_c.
    """
    lo, hi = window
    x = np.linspace(domain[0], domain[1], 20001)
    vmin = float(np.min(_potential(p)(x)))
    total = 0.0
    width = max(hi - lo, 10 * h)
    # above the window
    e0 = hi
    for _ in range(shells):
        e1 = e0 + width
        cnt = 2.0 * (weyl_count(p, e1, domain) - weyl_count(p, e0, domain)) / h + 1.0
        b = phi.decay_bound((e0 - E_c) / h)
        total += cnt * b
        if b * cnt < 1e-30:
            break
        e0 = e1
    # below the window, down to min V
    e1 = lo
    while e1 > vmin:
        e0 = max(e1 - width, vmin)
        cnt = 2.0 * (weyl_count(p, e1, domain) - weyl_count(p, e0, domain)) / h + 1.0
        total += cnt * phi.decay_bound((E_c - e1) / h)
        e1 = e0
    return total


# ----------------------------------------------------------------------
def predicted_leading(p, phi, h, full_output=False):
    """Leading term of gamma(E_c, h, phi) at a degenerate maximum.

    angular_factor x surface/(2 pi)^n (1/(2 pi)^n in the even-integer branch)
    x <T_{n,k}, phi> x h^(-n/2 + n/2k), times log h in the odd-integer branch.
    """
    n, k = p.n, p.k
    case = mellin.classify_case(n, k)
    ang = geometry.angular_factor(p)
    pref = 1.0 if case == mellin.INTEGER_EVEN else geometry.sphere_surface(n)
    pref /= (2 * pi) ** n
    dist = mellin.leading_distribution(n, k, phi)
    expo = -n + n / 2 + n / (2 * k)
    coef = ang * pref * dist
    val = coef * h ** expo
    if case == mellin.INTEGER_ODD_LOG:
        val *= np.log(h)
    if full_output:
        return val, {"coefficient": coef, "exponent": expo, "case": case,
                     "angular_factor": ang, "distribution": dist}
    return val


# ----------------------------------------------------------------------
@dataclass
class SpectralSample:
    h: float
    eigenvalues: tuple
    gamma: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eigenvalues = tuple(sorted(float(e) for e in self.eigenvalues))


def make_sample(p, h, phi, window, grid=None):
    spec = eigenvalues_in_window(p, h, window, grid, full_output=True)
    g = gamma_trace(p.e_c, h, phi, spec.values)
    meta = dict(spec.meta)
    meta["out_of_window_bound"] = out_of_window_bound(p, p.e_c, h, phi, window, meta["domain"])
    return SpectralSample(h, tuple(spec.values), g, meta)


def sample_grid(p, hs, phi, window, grid=None, workers=4):
    """Independent solves over an h grid.

    Only the eigenvalue solves go to the thread pool (LAPACK releases the GIL).
    Everything touching phi stays on the calling thread, because the numba
    workqueue layer cannot be entered from several threads at once.
    """
    with ThreadPoolExecutor(max_workers=workers) as ex:
        specs = list(ex.map(lambda h: eigenvalues_in_window(p, h, window, grid, full_output=True),
                            hs))
    out = []
    for h, spec in zip(hs, specs):
        meta = dict(spec.meta)
        meta["out_of_window_bound"] = out_of_window_bound(p, p.e_c, h, phi, window, meta["domain"])
        out.append(SpectralSample(h, tuple(spec.values), gamma_trace(p.e_c, h, phi, spec.values),
                                  meta))
    return out


class FitRefused(ValueError):
    pass


def scaling_fit(samples, model="power"):
    """Fit |gamma| ~ c h^a (times |log h| for 'power-log'); returns (a, c, rms residual).

    c carries the common sign of gamma.
    """
    if model not in ("power", "power-log"):
        raise ValueError(f"unknown model {model!r}")
    h = np.array([s.h for s in samples], float)
    g = np.array([s.gamma for s in samples], float)
    if h.size < 8 or h.max() / h.min() < 6.0 - 1e-9:
        raise FitRefused("need at least 8 samples spanning a factor 6 in h")
    if not (np.all(g > 0) or np.all(g < 0)):
        raise FitRefused("gamma changes sign across the grid")
    y = np.log(np.abs(g))
    if model == "power-log":
        y = y - np.log(np.abs(np.log(h)))
    X = np.column_stack([np.ones_like(h), np.log(h)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return float(coef[1]), float(np.sign(g[0]) * np.exp(coef[0])), res
