"""Homogeneous potentials, admissibility checks and sphere integrals."""

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np
from scipy import optimize

from .polynomial import Polynomial
from .quadrature import QuadratureError, gauss_legendre


class NonHomogeneousError(ValueError):
    """The claimed top form is not homogeneous of degree 2k."""


@dataclass
class HomogeneousPotential:
    """A confining polynomial potential with a degenerate maximum at ``x0``.

    ``full`` is the potential V, ``v2k`` the homogeneous form of degree 2k in
    the displacement ``x - x0``.  Both are :class:`Polynomial` instances and can
    be called on points.
    """

    n: int
    k: int
    v2k: Polynomial
    full: Polynomial
    e_c: float
    x0: np.ndarray
    box: tuple = None  # (lo, hi) per coordinate, used by the admissibility check

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(self.n)
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.box is None:
            self.box = (-np.ones(self.n) * 2.0 + self.x0, np.ones(self.n) * 2.0 + self.x0)
        self.box = (np.asarray(self.box[0], float).reshape(self.n),
                    np.asarray(self.box[1], float).reshape(self.n))

    @classmethod
    def from_table(cls, table, n, k, e_c=None, x0=None, v2k_table=None, box=None):
        """Build from a coefficient table ``[(multi_index, coef), ...]``.

        The homogeneous form is read off the Taylor expansion at ``x0`` unless an
        explicit ``v2k_table`` is claimed.  A claimed form is only checked for
        homogeneity here; whether it really is the leading term is left to
        :func:`taylor_defect`.
        """
        full = Polynomial(table, n)
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, float)
        local = full.shift(x0)
        if e_c is None:
            e_c = local.terms.get((0,) * n, 0.0)
        if v2k_table is None:
            v2k = local.homogeneous_part(2 * k)
        else:
            v2k = Polynomial(v2k_table, n)
        if not v2k.is_homogeneous(2 * k) or not v2k.terms:
            raise NonHomogeneousError(f"form is not homogeneous of degree {2 * k}: {v2k}")
        return cls(n=n, k=k, v2k=v2k, full=full, e_c=float(e_c), x0=x0, box=box)

    def scaled_form(self, c):
        """Same potential with V_2k replaced by c*V_2k (the remainder is kept)."""
        extra = self.v2k.shift(-self.x0).scaled(c - 1.0)
        return HomogeneousPotential(self.n, self.k, self.v2k.scaled(c), self.full + extra,
                                    self.e_c, self.x0.copy(), self.box)

    def symbol(self, x, xi):
        """p(x, xi) = |xi|^2 + V(x)."""
        xi = np.asarray(xi, float)
        return np.sum(xi * xi, axis=-1) + self.full(x)


# ----------------------------------------------------------------------
def sphere_surface(n):
    """Surface measure of the unit sphere in R^n; the 0-sphere counts 2 points."""
    if n < 1:
        raise ValueError("n must be positive")
    if n == 1:
        return 2.0
    return 2.0 * pi ** (n / 2) / gamma(n / 2)


def sphere_directions(n, count, rng):
    g = rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sphere_max(form, n, samples=4000, seed=0):
    """Maximum of ``form`` on the unit sphere: dense sampling plus local polish."""
    if n == 1:
        return float(max(form(np.array([1.0])), form(np.array([-1.0]))))
    dirs = sphere_directions(n, samples, np.random.default_rng(seed))
    vals = form(dirs)
    best = dirs[np.argmax(vals)]
    res = optimize.minimize(lambda y: -form(y / np.linalg.norm(y)), best, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
    return float(max(vals.max(), -res.fun))


def check_homogeneity(form, degree, n, samples=100, seed=1):
    """Max relative violation of ``form(s x) = s^degree form(x)`` over random samples."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((samples, n))
    s = rng.uniform(0.0, 2.0, samples)
    s[s == 0.0] = 1.0
    lhs = form(x * s[:, None])
    rhs = s ** degree * form(x)
    scale = np.abs(form(x)) * s ** degree
    return float(np.max(np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0)))


def taylor_defect(p, radii=(0.2, 0.1, 0.05), samples=64, seed=2):
    """Ratios  max|V - E_c - V_2k| / r^(2k+1)  at shrinking radii.

    Bounded ratios indicate the remainder is O(r^(2k+1)).
    """
    dirs = sphere_directions(p.n, samples, np.random.default_rng(seed)) if p.n > 1 \
        else np.array([[1.0], [-1.0]])
    out = []
    for r in radii:
        d = r * dirs
        rem = p.full(p.x0 + d) - p.e_c - p.v2k(d)
        out.append(float(np.max(np.abs(rem))) / r ** (2 * p.k + 1))
    return out


@dataclass
class AdmissibilityReport:
    definite: bool
    compact: bool
    isolated: bool
    sphere_max: float
    boundary_min: float
    extra_critical_points: list = field(default_factory=list)

    @property
    def ok(self):
        return self.definite and self.compact and self.isolated

    @property
    def failed(self):
        tags = []
        if not self.definite:
            tags.append("a")
        if not self.compact:
            tags.append("b")
        if not self.isolated:
            tags.append("c")
        return tags

    def __bool__(self):
        return self.ok


def _box_boundary(lo, hi, per_axis=41):
    n = lo.size
    if n == 1:
        return np.array([[lo[0]], [hi[0]]])
    grids = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    faces = []
    for i in range(n):
        for val in (lo[i], hi[i]):
            g = list(grids)
            g[i] = np.array([val])
            mesh = np.stack(np.meshgrid(*g, indexing="ij"), -1).reshape(-1, n)
            faces.append(mesh)
    return np.concatenate(faces)


def critical_points(V, lo, hi, seeds_per_axis=9, tol=1e-9):
    """Critical points of a polynomial in the box ``[lo, hi]`` (deduplicated)."""
    n = lo.size
    if n == 1:
        g = V.gradient_polys()[0]
        deg = g.degree
        coefs = np.zeros(deg + 1)
        for (e,), c in g.terms.items():
            coefs[deg - e] = c
        roots = np.roots(coefs) if deg > 0 else np.array([])
        real = roots[np.abs(roots.imag) < 1e-7].real
        pts = [np.array([r]) for r in np.unique(np.round(real, 10)) if lo[0] <= r <= hi[0]]
        return pts
    grids = [np.linspace(lo[i], hi[i], seeds_per_axis) for i in range(n)]
    seeds = np.stack(np.meshgrid(*grids, indexing="ij"), -1).reshape(-1, n)
    found = []
    for s in seeds:
        sol = optimize.root(lambda y: V.gradient(y), s, jac=lambda y: V.hessian(y), method="hybr")
        y = sol.x
        if np.linalg.norm(V.gradient(y)) > tol ** 0.5 or np.any(y < lo) or np.any(y > hi):
            continue
        if all(np.linalg.norm(y - f) > 1e-4 for f in found):
            found.append(y)
    return found


def is_admissible(p, eps, box=None, samples=4000, seed=0):
    """Check definiteness (a), compactness on the box (b) and isolation (c).

    Returns an :class:`AdmissibilityReport`, truthy when all three hold.
    Raises :class:`NonHomogeneousError` if the form fails the homogeneity test.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if check_homogeneity(p.v2k, 2 * p.k, p.n) > 1e-10:
        raise NonHomogeneousError("v2k is not homogeneous of degree 2k")
    lo, hi = (p.box if box is None else (np.asarray(box[0], float), np.asarray(box[1], float)))
    lo, hi = np.reshape(lo, p.n), np.reshape(hi, p.n)
    smax = sphere_max(p.v2k, p.n, samples, seed)
    bvals = p.full(_box_boundary(lo, hi))
    bmin = float(np.min(bvals))
    extra = []
    for c in critical_points(p.full, lo, hi):
        if np.linalg.norm(c - p.x0) < 1e-3:
            continue  # the degenerate point itself; root finders converge slowly to it
        if abs(p.full(c) - p.e_c) <= eps:
            extra.append((c.tolist(), float(p.full(c))))
    return AdmissibilityReport(definite=smax < 0.0, compact=bmin > p.e_c + eps,
                               isolated=not extra, sphere_max=smax, boundary_min=bmin,
                               extra_critical_points=extra)


def angular_factor(p, tol=1e-10, full_output=False, max_nodes=1 << 16):
    """Integral of |V_2k|^(-n/2k) over the unit sphere.

    n=1 is the two-point sum, n=2 a periodic trapezoid rule refined until two
    resolutions agree, n>=3 a Gauss-Legendre x trapezoid product rule in
    hyperspherical angles with the same doubling test.
    """
    n, k = p.n, p.k
    expo = -n / (2 * k)

    def g(pts):
        v = p.v2k(pts)
        return np.abs(v) ** expo

    if n == 1:
        val = float(g(np.array([[1.0], [-1.0]])).sum())
        return (val, 0.0) if full_output else val

    def rule(m):
        if n == 2:
            th = 2 * pi * np.arange(m) / m
            pts = np.stack([np.cos(th), np.sin(th)], -1)
            return float(g(pts).sum() * 2 * pi / m)
        return _hyperspherical(g, n, m)

    m = 32 if n == 2 else 8
    prev = rule(m)
    while True:
        m *= 2
        cur = rule(m)
        err = abs(cur - prev)
        if err <= tol * abs(cur):
            return (cur, err) if full_output else cur
        if m >= max_nodes or (n > 2 and m ** (n - 1) * 2 > 4e6):
            raise QuadratureError(f"angular_factor not converged: estimate {err:.3e}",
                                  value=cur, error=err)
        prev = cur


def _hyperspherical(g, n, m):
    # angles theta_1..theta_{n-2} in [0, pi] (Gauss-Legendre), phi trapezoid
    x, w = gauss_legendre(m)
    th = 0.5 * pi * (x + 1.0)
    wt = 0.5 * pi * w
    phi = 2 * pi * np.arange(2 * m) / (2 * m)
    grids = [th] * (n - 2) + [phi]
    mesh = np.meshgrid(*grids, indexing="ij")
    weight = np.full(mesh[0].shape, 2 * pi / (2 * m))
    wmesh = np.meshgrid(*([wt] * (n - 2) + [np.ones(2 * m)]), indexing="ij")
    for i in range(n - 2):
        weight = weight * wmesh[i] * np.sin(mesh[i]) ** (n - 2 - i)
    coords = []
    sprod = np.ones_like(mesh[0])
    for i in range(n - 2):
        coords.append(sprod * np.cos(mesh[i]))
        sprod = sprod * np.sin(mesh[i])
    coords.append(sprod * np.cos(mesh[-1]))
    coords.append(sprod * np.sin(mesh[-1]))
    pts = np.stack(coords, -1).reshape(-1, n)
    return float(np.sum(g(pts) * weight.ravel()))
