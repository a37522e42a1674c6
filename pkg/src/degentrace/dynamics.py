"""Hamiltonian flow of p(x, xi) = |xi|^2 + V(x) near the degenerate maximum."""

from dataclasses import dataclass
from math import factorial, pi

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from .geometry import HomogeneousPotential


class FlowError(RuntimeError):
    """Integration or shooting failure (step underflow, blow-up, caustic)."""


@dataclass
class PhaseSpacePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.xi))):
            raise ValueError("non-finite phase-space coordinates")

    @property
    def z(self):
        return np.concatenate([self.x, self.xi])

    @classmethod
    def from_z(cls, z):
        z = np.asarray(z, dtype=float)
        n = z.size // 2
        return cls(z[:n], z[n:])


def hamiltonian_field(p, z):
    """H_p = (2 xi, -grad V(x))."""
    if not isinstance(z, PhaseSpacePoint):
        z = PhaseSpacePoint.from_z(z)
    return np.concatenate([2.0 * z.xi, -p.full.gradient(z.x)])


def _rhs(p):
    n = p.n

    def f(_t, y):
        return np.concatenate([2.0 * y[n:], -p.full.gradient(y[:n])])
    return f


@dataclass
class FlowResult:
    point: PhaseSpacePoint
    energy_drift: float
    nfev: int


def integrate_flow(p, z0, t, tol=1e-12):
    """Phi_t(z0) by an adaptive 8th-order Runge-Kutta scheme (DOP853).

    The energy drift |p(Phi_t z0) - p(z0)| is reported with the result.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not isinstance(z0, PhaseSpacePoint):
        z0 = PhaseSpacePoint.from_z(z0)
    y0 = z0.z
    if t == 0:
        return FlowResult(PhaseSpacePoint(z0.x.copy(), z0.xi.copy()), 0.0, 0)
    sol = solve_ivp(_rhs(p), (0.0, t), y0, method="DOP853", rtol=tol, atol=tol * 1e-2)
    if sol.status != 0:
        raise FlowError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    yT = sol.y[:, -1]
    e0 = p.symbol(z0.x, z0.xi)
    e1 = p.symbol(yT[:p.n], yT[p.n:])
    return FlowResult(PhaseSpacePoint.from_z(yT), float(abs(e1 - e0)), sol.nfev)


def linearized_flow(t, n):
    """d Phi_t at the equilibrium: (u, v) -> (u + 2 t v, v)."""
    I = np.eye(n)
    return np.block([[I, 2.0 * t * I], [np.zeros((n, n)), I]])


# ----------------------------------------------------------------------
# flow jets
@dataclass
class FlowJet:
    """Order-m term of the flow: w -> d^m Phi_t(z0)(w, ..., w) in R^(2n).

    ``poly`` (closed form only) holds the components as sympy expressions in
    the direction variables and the time symbol ``t``.
    """

    order: int
    t: float
    n: int
    evaluator: object
    poly: list = None
    symbols: tuple = None

    def __call__(self, w):
        return np.asarray(self.evaluator(np.asarray(w, dtype=float)), dtype=float)

    def t_degrees(self):
        """Polynomial degree in t of each component (closed form only)."""
        tsym = self.symbols[-1]
        return [sp.Poly(c, tsym).degree() if c != 0 else -1 for c in self.poly]


def _sym_form(p):
    xs = sp.symbols(f"x1:{p.n + 1}", real=True)
    expr = 0
    for e, c in p.v2k.terms.items():
        mon = sp.Rational(c).limit_denominator(10 ** 12)
        for xi, ei in zip(xs, e):
            mon *= xi ** ei
        expr += mon
    return xs, expr


def flow_jet_closed(p, t):
    """Closed-form jet of order 2k-1 at the equilibrium.

    With g = grad V_2k, the degree-(2k-1) part of Phi_t(z0 + w) for w = (x, xi) is

        int_0^t ( -2 (t - s) g(x + 2 s xi),  -g(x + 2 s xi) ) ds,

    (variation of constants around the free shear); the jet is (2k-1)! times
    this.  The s-integral is done exactly on polynomials.
    """
    n, k = p.n, p.k
    xs, V = _sym_form(p)
    xis = sp.symbols(f"xi1:{n + 1}", real=True)
    s, tt = sp.symbols("s t", real=True)
    grad = [sp.diff(V, xi) for xi in xs]
    shift = {x: x + 2 * s * xi for x, xi in zip(xs, xis)}
    comps_x, comps_xi = [], []
    m = 2 * k - 1
    for g in grad:
        gs = sp.expand(g.xreplace(shift))
        comps_x.append(sp.expand(factorial(m) * sp.integrate(-2 * (tt - s) * gs, (s, 0, tt))))
        comps_xi.append(sp.expand(factorial(m) * sp.integrate(-gs, (s, 0, tt))))
    comps = comps_x + comps_xi
    syms = tuple(xs) + tuple(xis) + (tt,)
    fn = sp.lambdify(syms, comps, "numpy")

    def ev(w):
        return np.array(fn(*w, t), dtype=float)
    return FlowJet(m, t, n, ev, comps, syms)


def _series_mul(a, b, m):
    out = np.zeros(m + 1)
    for i in range(m + 1):
        out[i] = np.dot(a[:i + 1], b[i::-1])
    return out


def _series_grad(polys, xser, m):
    """Truncated series of each gradient component at the series point ``xser``."""
    n = len(xser)
    res = []
    for g in polys:
        acc = np.zeros(m + 1)
        for e, c in g.terms.items():
            term = np.zeros(m + 1)
            term[0] = 1.0
            for d in range(n):
                for _ in range(e[d]):
                    term = _series_mul(term, xser[d], m)
            acc += c * term
        res.append(acc)
    return res


def jet_transport(p, base, direction, t, order, tol=1e-13):
    """Taylor coefficients in eps of Phi_t(base + eps*direction), up to ``order``.

    Returns an array of shape (order + 1, 2n): row j is the eps^j coefficient.
    """
    n, m = p.n, order
    grads = p.full.gradient_polys()
    base = np.asarray(base, float)
    direction = np.asarray(direction, float)

    def f(_t, y):
        c = y.reshape(m + 1, 2 * n)
        xser = [c[:, d] for d in range(n)]
        g = _series_grad(grads, xser, m)
        out = np.empty_like(c)
        out[:, :n] = 2.0 * c[:, n:]
        for d in range(n):
            out[:, n + d] = -g[d]
        return out.ravel()

    c0 = np.zeros((m + 1, 2 * n))
    c0[0] = base
    if m >= 1:
        c0[1] = direction
    if t == 0:
        return c0
    sol = solve_ivp(f, (0.0, t), c0.ravel(), method="DOP853", rtol=tol, atol=tol * 1e-3)
    if sol.status != 0:
        raise FlowError(f"jet transport failed: {sol.message}")
    return sol.y[:, -1].reshape(m + 1, 2 * n)


def flow_jet_oracle(p, t, order=None):
    """Jet of the given order at the equilibrium by integrating truncated Taylor series.

    The order-m term of Phi_t(z0 + w) is m! times the eps^m coefficient of
    Phi_t(z0 + eps w); it is homogeneous of degree m in w.
    """
    m = 2 * p.k - 1 if order is None else order
    if m > 2 * p.k - 1:
        raise ValueError("order above 2k-1")
    base = np.concatenate([p.x0, np.zeros(p.n)])

    def ev(w):
        return factorial(m) * jet_transport(p, base, w, t, m)[m]
    return FlowJet(m, t, p.n, ev)


def flow_jacobian(p, z, t):
    """d Phi_t at an arbitrary point by order-1 jet transport (2n directions)."""
    z = np.asarray(z, float)
    cols = [jet_transport(p, z, e, t, 1)[1] for e in np.eye(2 * p.n)]
    return np.column_stack(cols)


# ----------------------------------------------------------------------
def period_lower_bound(p, safety=1.05, per_axis=None, full_output=False):
    """2 pi / M with M = max(2, safety * max ||Hess V||) over {x in box : V(x) <= E_c}."""
    if safety < 1:
        raise ValueError("safety factor must be >= 1")
    lo, hi = p.box
    if per_axis is None:
        per_axis = {1: 20001, 2: 401}.get(p.n, 41)
    grids = [np.linspace(lo[i], hi[i], per_axis) for i in range(p.n)]
    pts = np.stack(np.meshgrid(*grids, indexing="ij"), -1).reshape(-1, p.n)
    pts = pts[p.full(pts) <= p.e_c]
    if pts.shape[0] == 0:
        raise ValueError("empty energy-surface projection sample")
    H = p.hessian_norms(pts) if hasattr(p, "hessian_norms") else _hess_norms(p, pts)
    i = int(np.argmax(H))
    L = float(H[i])
    # local refinement: shrink a neighbourhood of the best sample
    best = pts[i]
    step = (hi - lo) / (per_axis - 1)
    for _ in range(30):
        cand = best + step * np.stack(np.meshgrid(*[[-1, 0, 1]] * p.n, indexing="ij"), -1).reshape(-1, p.n)
        cand = cand[p.full(cand) <= p.e_c]
        if cand.shape[0]:
            h = _hess_norms(p, cand)
            j = int(np.argmax(h))
            if h[j] > L:
                L, best = float(h[j]), cand[j]
        step = step / 2
    M = max(2.0, safety * L)
    bound = 2 * pi / M
    if full_output:
        return bound, {"L": L, "M": M, "argmax": best.tolist(), "samples": int(pts.shape[0])}
    return bound


def _hess_norms(p, pts):
    H = p.full.hessian(pts)
    if p.n == 1:
        return np.abs(H[:, 0, 0])
    return np.max(np.abs(np.linalg.eigvalsh(H)), axis=-1)


# ----------------------------------------------------------------------
def _rhs_action_var(p):
    n = p.n

    def f(_t, y):
        x, xi = y[:n], y[n:2 * n]
        J = y[2 * n + 1:].reshape(2 * n, n)  # d(x, xi)/dy
        Hs = p.full.hessian(x)
        dJ = np.vstack([2.0 * J[n:], -Hs @ J[:n]])
        return np.concatenate([2.0 * xi, -p.full.gradient(x),
                               [xi @ xi - p.full(x)], dJ.ravel()])
    return f


@dataclass
class ShootingResult:
    S: float
    y: np.ndarray
    final_momentum: np.ndarray
    iterations: int


def generating_function(p, t, x, xi, tol=1e-12, horizon=None, full_output=False, maxiter=30):
    """S(t, x, xi) with S(0, x, xi) = <x, xi> and dS/dt = -p.

    Finds the initial position y whose trajectory from (y, xi) is at x at
    time t, then adds the action int (|xi(s)|^2 - V(x(s))) ds to <y, xi>.
    """
    n = p.n
    x = np.atleast_1d(np.asarray(x, float))
    xi = np.atleast_1d(np.asarray(xi, float))
    if horizon is None:
        horizon = period_lower_bound(p)
    if abs(t) > horizon:
        raise FlowError(f"|t|={abs(t)} beyond the caustic-free horizon {horizon:.4g}")
    if t == 0:
        res = ShootingResult(float(x @ xi), x.copy(), xi.copy(), 0)
        return res if full_output else res.S
    y = x - 2.0 * t * xi
    f = _rhs_action_var(p)
    J0 = np.vstack([np.eye(n), np.zeros((n, n))]).ravel()
    for it in range(1, maxiter + 1):
        y0 = np.concatenate([y, xi, [0.0], J0])
        sol = solve_ivp(f, (0.0, t), y0, method="DOP853", rtol=tol, atol=tol * 1e-3)
        if sol.status != 0:
            raise FlowError(sol.message)
        yt = sol.y[:, -1]
        miss = yt[:n] - x
        J = yt[2 * n + 1:].reshape(2 * n, n)[:n]
        if np.linalg.norm(miss) <= 10 * tol * max(1.0, np.linalg.norm(x)):
            res = ShootingResult(float(y @ xi + yt[2 * n]), y, yt[n:2 * n].copy(), it)
            return res if full_output else res.S
        if abs(np.linalg.det(J)) < 1e-8:
            raise FlowError("singular shooting Jacobian (caustic)")
        try:
            y = y - np.linalg.solve(J, miss)
        except np.linalg.LinAlgError as exc:
            raise FlowError("singular shooting Jacobian (caustic)") from exc
    raise FlowError("shooting did not converge")


def psi(p, t, x, xi, tol=1e-13):
    """Psi = S - <x, xi> + t E_c."""
    x = np.atleast_1d(np.asarray(x, float))
    xi = np.atleast_1d(np.asarray(xi, float))
    return generating_function(p, t, x, xi, tol) - float(x @ xi) + t * p.e_c


def _homogeneous_coefficient(values, radii, degree, extra=3):
    """Coefficient of r^degree in values(r) = sum_j c_j r^(degree + 2j).

    Only same-parity powers appear because the samples are symmetrized in r.
    """
    r = np.asarray(radii, float)
    y = np.asarray(values, float) / r ** degree
    X = np.vander(r * r, extra + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef[0]


def verify_s2k_structure(p, t_grid, radius_grid, directions=None, delta_rel=1e-3, tol=1e-13):
    """Check the degree-2k part of Psi against -t V_2k(x) + t^2 <xi, grad V_2k(x)>.

    For each t and unit direction e, the xi-free part is read off
    Psi(t, x0 + r e, 0) and the xi-linear part off a centred difference in xi.
    Averaging over +-r keeps only powers of the parity of the target degree,
    and both are then fitted as polynomials in r^2.  The change when the
    largest radius is dropped is reported as a conditioning diagnostic.
    """
    n, k = p.n, p.k
    if directions is None:
        directions = [np.array([1.0])] if n == 1 else list(np.eye(n))
    radius_grid = np.asarray(radius_grid, float)
    rows = []
    for t in t_grid:
        for e in directions:
            e = np.asarray(e, float) / np.linalg.norm(e)
            eta = e.copy()
            free, lin = [], []
            for r in radius_grid:
                d = delta_rel * r
                fr, li = 0.0, 0.0
                for sgn in (1.0, -1.0):
                    xpt = p.x0 + sgn * r * e
                    fr += 0.5 * psi(p, t, xpt, np.zeros(n), tol)
                    li += 0.5 * sgn * (psi(p, t, xpt, d * eta, tol)
                                       - psi(p, t, xpt, -d * eta, tol)) / (2 * d)
                free.append(fr)
                lin.append(li)
            A = _homogeneous_coefficient(free, radius_grid, 2 * k)
            B = _homogeneous_coefficient(lin, radius_grid, 2 * k - 1)
            A2 = _homogeneous_coefficient(free[:-1], radius_grid[:-1], 2 * k, extra=2)
            B2 = _homogeneous_coefficient(lin[:-1], radius_grid[:-1], 2 * k - 1, extra=2)
            A_exp = -t * p.v2k(e)
            B_exp = t * t * float(eta @ p.v2k.gradient(e))
            rows.append({
                "t": float(t), "direction": e.tolist(),
                "xi_free": float(A), "xi_free_expected": float(A_exp),
                "xi_linear": float(B), "xi_linear_expected": float(B_exp),
                "xi_free_dev": float(abs(A - A_exp) / abs(A_exp)),
                "xi_linear_dev": float(abs(B - B_exp) / abs(B_exp)),
                "conditioning": float(max(abs(A - A2) / abs(A_exp), abs(B - B2) / abs(B_exp))),
            })
    worst = max(max(r["xi_free_dev"], r["xi_linear_dev"]) for r in rows)
    return {"rows": rows, "max_deviation": worst}


# ----------------------------------------------------------------------
def find_periodic_orbits(p, energies, t_max=40.0, seeds_per_energy=4, close_tol=1e-6,
                         seed=0):
    """Poincare-return search for closed orbits at the given energies.

    Seeds are placed on the energy surface; the section is the hyperplane
    through the seed orthogonal to the flow there.  A return to the section
    within ``close_tol`` (relative) of the seed counts as a periodic orbit and
    its first return time is recorded.
    """
    rng = np.random.default_rng(seed)
    lo, hi = p.box
    n = p.n
    f = _rhs(p)
    found = []
    for E in energies:
        grid = np.stack(np.meshgrid(*[np.linspace(lo[i], hi[i], 401 if n == 1 else 41)
                                      for i in range(n)], indexing="ij"), -1).reshape(-1, n)
        allowed = grid[p.full(grid) < E]
        if allowed.shape[0] == 0:
            continue
        picks = allowed[rng.choice(allowed.shape[0], size=min(seeds_per_energy, allowed.shape[0]),
                                   replace=False)]
        for x in picks:
            speed = np.sqrt(E - p.full(x))
            d = rng.standard_normal(n)
            d /= np.linalg.norm(d)
            z0 = np.concatenate([x, speed * d])
            v0 = f(0.0, z0)
            scale = np.linalg.norm(z0) + 1.0

            def section(_t, z, z0=z0, v0=v0):
                return float((z - z0) @ v0)
            section.direction = 1.0
            sol = solve_ivp(f, (0.0, t_max), z0, method="DOP853", rtol=1e-11, atol=1e-13,
                            events=section, dense_output=False)
            for te, ze in zip(sol.t_events[0], sol.y_events[0]):
                if te < 1e-8:
                    continue
                if np.linalg.norm(ze - z0) <= close_tol * scale:
                    found.append({"energy": float(E), "x0": x.tolist(), "period": float(te)})
                    break
    return found
