"""Mellin-residue machinery for the model integral.

Conventions
-----------
The model integral with phase ``t (r^2 - q^{2k})`` reduces, after the t-Fourier
transform, to ``K(lam) = int ahat(lam u) rho(u) du``.  Mellin inversion of
``ahat`` on each half line gives

    K(lam) = sum over poles of  -Res[ M_+(z) lam^-z Z_+(z) + M_-(z) lam^-z Z_-(z) ]

with ``M_pm(z) = int_0^inf v^(z-1) ahat(pm v) dv`` and ``Z_pm(z) = int_0^inf
u^-z rho(pm u) du``.  Writing ``r = s q^k`` gives the (s, q) form

    Z_+(z) = int_1^inf ds int_0^inf dq (s-1)^-z (1+s)^-z s^(n-1) q^(alpha0 - 2kz) b(s q^k, q)

with ``alpha0 = n(k+1) - 1`` (``Z_-``: s over (0, 1), ``(1-s)`` in place of
``(s-1)``).  Rational factors are handled in exact arithmetic.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial, floor, ceil, pi
import numbers
import warnings

import numpy as np
from scipy import integrate, special

from .quadrature import QuadratureError, adaptive_gk

SIMPLE_ODD = "SimpleOdd"
SIMPLE_EVEN = "SimpleEven"
INTEGER_ODD_LOG = "IntegerOddLog"
INTEGER_EVEN = "IntegerEven"


def z_min(n, k):
    """Leading pole n(k+1)/(2k) as an exact fraction."""
    return Fraction(n * (k + 1), 2 * k)


def classify_case(n, k):
    if n < 1 or k < 2:
        raise ValueError("need n >= 1 and k >= 2")
    zm = z_min(n, k)
    integer = zm.denominator == 1
    if integer:
        return INTEGER_ODD_LOG if n % 2 else INTEGER_EVEN
    return SIMPLE_ODD if n % 2 else SIMPLE_EVEN


# ----------------------------------------------------------------------
# exact rational factors
def _exact(z):
    if isinstance(z, Fraction):
        return z
    if isinstance(z, numbers.Integral):
        return Fraction(z)
    return z


def b0(z, k):
    """(1 - z) prod_{j=1}^{2k} (j - 2kz), from differentiating (s-1)^(1-z) q^(2k(1-z))."""
    z = _exact(z)
    out = 1 - z
    for j in range(1, 2 * k + 1):
        out *= j - 2 * k * z
    return out


def b0_zfree(z, k):
    """(1 - z) prod (j - 2k) with no z inside the product.

    The j = 2k factor makes it identically zero, so it cannot serve as the
    Bernstein-Sato factor; kept so tests can show the contrast with :func:`b0`.
    """
    z = _exact(z)
    out = 1 - z
    for j in range(1, 2 * k + 1):
        out *= j - 2 * k
    return out


def _b_factors(n, k, shift=0):
    """Linear factors (a, c) with value a*z + c of b_weighted(z - shift)."""
    alpha0 = n * (k + 1) - 1
    facs = [(1, -1 - shift)]
    for j in range(1, 2 * k + 1):
        facs.append((-2 * k, j + alpha0 + 2 * k * shift))
    return facs


def _B_factors(n, k, l):
    out = []
    for i in range(l):
        out.extend(_b_factors(n, k, i))
    return out


def b_weighted(z, n, k):
    """(z - 1) prod_{j=1}^{2k} (j - 2kz + n(k+1) - 1)."""
    z = _exact(z)
    out = 1
    for a, c in _b_factors(n, k):
        out *= a * z + c
    return out


def B_l(z, n, k, l):
    """prod_{i=0}^{l-1} b_weighted(z - i)."""
    z = _exact(z)
    out = 1
    for a, c in _B_factors(n, k, l):
        out *= a * z + c
    return out


def root_multiplicity(z0, n, k, l):
    """Exact multiplicity of ``z0`` as a root of B_l."""
    z0 = Fraction(z0)
    return sum(1 for a, c in _B_factors(n, k, l) if a * z0 + c == 0)


def _series_inverse(coeffs, order):
    """Power series of 1/f from f's coefficients (f(0) != 0), exact."""
    inv = [Fraction(1) / coeffs[0]]
    for m in range(1, order + 1):
        acc = Fraction(0)
        for j in range(1, m + 1):
            if j < len(coeffs):
                acc += coeffs[j] * inv[m - j]
        inv.append(-acc / coeffs[0])
    return inv


def inverse_B_laurent(z0, n, k, l, terms=2):
    """Laurent coefficients of 1/B_l at ``z0``.

    Returns ``(m, [c_{-m}, c_{-m+1}, ...])`` with ``terms`` entries, where m is
    the root multiplicity; all values exact fractions.
    """
    z0 = Fraction(z0)
    lead = Fraction(1)
    m = 0
    poly = [Fraction(1)]  # coefficients in w = z - z0 of the non-vanishing part
    for a, c in _B_factors(n, k, l):
        val = a * z0 + c
        if val == 0:
            m += 1
            lead *= a
        else:
            new = [Fraction(0)] * (len(poly) + 1)
            for i, p in enumerate(poly):
                new[i] += p * val
                new[i + 1] += p * a
            poly = new
    inv = _series_inverse(poly, terms - 1)
    return m, [x / lead for x in inv]


def rational_limit(z0, n, k, l, power):
    """lim_{z->z0} (z - z0)^power / B_l(z), exact."""
    m, coeffs = inverse_B_laurent(z0, n, k, l, terms=max(1, power + 1))
    if power < m:
        raise ZeroDivisionError(f"(z-z0)^{power}/B_l has a pole at {z0}")
    shift = power - m
    return coeffs[0] if shift == 0 else Fraction(0)


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Pole:
    z: Fraction
    order: int

    @property
    def is_integer(self):
        return self.z.denominator == 1


@dataclass
class PoleCatalog:
    n: int
    k: int
    entries: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


def pole_catalog(n, k, z_max):
    """Poles of the continuation in [z_min, z_max], ordered, with orders 1 or 2."""
    zm = z_min(n, k)
    z_max = Fraction(z_max).limit_denominator(10 ** 6) if not isinstance(z_max, Fraction) else z_max
    if z_max < zm:
        raise ValueError("z_max below z_min")
    out = []
    m = 0
    while zm + Fraction(m, 2 * k) <= z_max:
        z = zm + Fraction(m, 2 * k)
        out.append(Pole(z, 2 if z.denominator == 1 else 1))
        m += 1
    return PoleCatalog(n, k, out)


def regular_poles(n, k):
    """Integer poles 1 <= p < z_min coming from the s-continuation alone (order 1)."""
    zm = z_min(n, k)
    return [Pole(Fraction(p), 1) for p in range(1, ceil(zm)) if p < zm]


def unweighted_candidates(k, upto):
    """The unweighted grid j/(2k), j >= 1, up to ``upto`` (exclusive)."""
    out = []
    j = 1
    while Fraction(j, 2 * k) < upto:
        out.append(Fraction(j, 2 * k))
        j += 1
    return out


def minimal_l(z):
    """Smallest admissible continuation depth: l > Re z."""
    return floor(float(np.real(z))) + 1


# ----------------------------------------------------------------------
# closed-form integrals
def _quiet(fn):
    def wrapped(*a, **kw):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return fn(*a, **kw)
    wrapped.__name__ = fn.__name__
    wrapped.__doc__ = fn.__doc__
    return wrapped


def _falling(x, j):
    out = 1.0
    for i in range(j):
        out *= x - i
    return out


def leibniz_derivative(m, alpha, beta, s):
    """d^m/ds^m [(1+s)^(-alpha) s^beta] for real or complex alpha."""
    s = np.asarray(s, dtype=float)
    out = 0.0
    for i in range(m + 1):
        fa = _falling(-alpha, i)
        fb = _falling(beta, m - i)
        if fa == 0 or fb == 0:
            continue
        out = out + comb(m, i) * fa * fb * (1 + s) ** (-alpha - i) * s ** (beta - m + i)
    return out + np.zeros(s.shape)


def E_closed(n, alpha):
    """Closed form of int_1^inf (s-1)^(n-a) d^n[(1+s)^-a s^(n-1)] ds.

    Zero for even n; for odd n,
    -prod_{j=1}^{(n-1)/2}(1-2j) * 2^((n+1)/2-2a) G(n+1-a) G(2a-n) / G((1-n)/2+a).
    """
    _check_strip(n, alpha)
    if n % 2 == 0:
        return 0.0
    prod = 1.0
    for j in range(1, (n - 1) // 2 + 1):
        prod *= 1 - 2 * j
    return (-prod * 2.0 ** ((n + 1) / 2 - 2 * alpha) * special.gamma(n + 1 - alpha)
            * special.gamma(2 * alpha - n) * special.rgamma((1 - n) / 2 + alpha))


def E_closed_unsigned(n, alpha):
    """Odd-n variant with product over (-2j-1) and no leading sign.

    Disagrees with quadrature for every odd n; kept for regression only.
    """
    _check_strip(n, alpha)
    if n % 2 == 0:
        return 0.0
    prod = 1.0
    for j in range(1, (n - 1) // 2 + 1):
        prod *= -2 * j - 1
    return (prod * 2.0 ** ((n + 1) / 2 - 2 * alpha) * special.gamma(n + 1 - alpha)
            * special.gamma(2 * alpha - n) * special.rgamma((1 - n) / 2 + alpha))


def _check_strip(n, alpha):
    if not (n / 2 < alpha < n + 1):
        raise ValueError(f"alpha={alpha} outside ({n / 2}, {n + 1})")


@_quiet
def E_numeric(n, alpha, epsabs=1e-13):
    """Direct quadrature of the E(n, alpha) integral."""
    _check_strip(n, alpha)
    f = lambda s: leibniz_derivative(n, alpha, n - 1, s)  # noqa: E731
    head, _ = integrate.quad(f, 1.0, 2.0, weight="alg", wvar=(n - alpha, 0.0),
                             epsabs=epsabs, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(lambda s: (s - 1.0) ** (n - alpha) * f(s), 2.0, np.inf,
                             epsabs=epsabs, epsrel=1e-13, limit=400)
    return head + tail


def s_identity(p, n):
    """int_1^inf d^p[(s+1)^-p s^(n-1)] ds = -(1/2^p) prod_{j=1}^{p-1} (n - 2j).

    Returned as an exact Fraction (the even-n, p=n/2... cases give exactly 0).
    """
    _check_s(p, n)
    out = Fraction(-1, 2 ** p)
    for j in range(1, p):
        out *= n - 2 * j
    return out


def s_identity_from_zero(p, n):
    """Variant with the product starting at j=0 (off by a factor n); regression only."""
    _check_s(p, n)
    out = Fraction(-1, 2 ** p)
    for j in range(0, p):
        out *= n - 2 * j
    return out


def _check_s(p, n):
    if not (p > 1 and n < 2 * p):
        raise ValueError("need p > 1 and n < 2p")


@_quiet
def s_identity_numeric(p, n):
    _check_s(p, n)
    f = lambda s: leibniz_derivative(p, p, n - 1, s)  # noqa: E731
    a, _ = integrate.quad(f, 1.0, 3.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(f, 3.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=200)
    return a + b


@_quiet
def a_nk(n, k, full_output=False):
    """int_0^1 (1-s)^(n-z) d^n[(1+s)^-z s^(n-1)] ds at z = z_min(n, k).

    Evaluated twice (weighted QUADPACK rule and Gauss-Kronrod after the
    substitution 1-s = w^2); the two must agree to 1e-9.
    """
    z = float(z_min(n, k))
    f = lambda s: leibniz_derivative(n, z, n - 1, s)  # noqa: E731
    v1, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(0.0, n - z),
                           epsabs=1e-14, epsrel=1e-13, limit=200)
    g = lambda w: 2 * w * w ** (2 * (n - z)) * f(1.0 - w * w)  # noqa: E731
    v2, _ = adaptive_gk(g, 0.0, 1.0, rtol=1e-13, atol=1e-15)
    if abs(v1 - v2) > 1e-9 * max(1.0, abs(v1)):
        raise QuadratureError(f"a_nk({n},{k}) resolutions disagree: {v1} vs {v2}")
    return (v1, abs(v1 - v2)) if full_output else v1


@_quiet
def a_tilde(side, p, n):
    """Log-weighted constants: -int log|s^2-1| d^p[(s+1)^-p s^(n-1)] ds.

    ``side='+'`` integrates over (1, inf), ``side='-'`` over (0, 1) where the
    weight is log(1 - s^2).
    """
    if not 2 * p > n:
        raise ValueError("need p > n/2")
    f = lambda s: leibniz_derivative(p, p, n - 1, s)  # noqa: E731
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    if side == "+":
        a, _ = integrate.quad(f, 1.0, 2.0, weight="alg-loga", wvar=(0.0, 0.0), **opts)
        b, _ = integrate.quad(lambda s: np.log1p(s) * f(s), 1.0, 2.0, **opts)
        c, _ = integrate.quad(lambda s: np.log(s * s - 1.0) * f(s), 2.0, np.inf, **opts)
        return -(a + b + c)
    if side == "-":
        a, _ = integrate.quad(f, 0.0, 1.0, weight="alg-logb", wvar=(0.0, 0.0), **opts)
        b, _ = integrate.quad(lambda s: np.log1p(s) * f(s), 0.0, 1.0, **opts)
        return -(a + b)
    raise ValueError("side must be '+' or '-'")


def vanishing_moment(alpha, beta, f, upper):
    """int_0^upper d^beta/dx^beta (x^alpha f(x)) dx for f vanishing near ``upper``.

    Zero whenever alpha + 1 > beta; computed from the closed-form Leibniz sum
    with ``f`` supplied as ``f(x, j)`` returning the j-th derivative.
    """
    def integrand(x):
        acc = 0.0
        for i in range(beta + 1):
            acc = acc + comb(beta, i) * _falling(alpha, i) * x ** (alpha - i) * f(x, beta - i)
        return acc
    val, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-13, limit=400)
    return val


# ----------------------------------------------------------------------
# Mellin transforms
def mellin_transform(f, side, z, cutoff=None, decay=None, rtol=1e-10, atol=1e-300):
    """M(z) = int_0^inf t^(z-1) f(+-t) dt for a vectorized, rapidly decaying ``f``.

    On (0, 1) the weight is absorbed by t = u^(1/Re z).  On (1, cutoff) plain
    adaptive Gauss-Kronrod.  ``cutoff`` may be given directly; otherwise it is
    found from ``decay(t)`` (an upper bound for |f| at and beyond t) or, lacking
    that, by probing |f| on a doubling grid.  Raises QuadratureError if the
    truncation cannot be controlled or the error estimate exceeds ``rtol``.
    """
    if side not in ("+", "-"):
        raise ValueError("side must be '+' or '-'")
    z = complex(z)
    c, y = z.real, z.imag
    if c <= 0:
        raise ValueError("Re z must be positive")
    sgn = 1.0 if side == "+" else -1.0
    g = lambda t: f(sgn * t)  # noqa: E731

    def head(u):
        t = u ** (1.0 / c)
        return g(t) * np.exp(1j * y * np.log(t)) / c if y else g(t) / c

    v0, e0 = adaptive_gk(head, 0.0, 1.0, rtol=rtol * 1e-2, atol=atol, l1=True)
    a0, _ = adaptive_gk(lambda u: np.abs(head(u)), 0.0, 1.0, rtol=1e-3)
    if cutoff is None:
        cutoff = _find_cutoff(g, c, decay, scale=max(abs(v0), 1e-300))
    if cutoff > 1.0:
        def body(t):
            w = t ** (c - 1.0)
            if y:
                w = w * np.exp(1j * y * np.log(t))
            return w * g(t)
        # panels roughly uniform in log t keep the budget bounded for long tails
        edges = np.unique(np.concatenate([[1.0], np.geomspace(1.0, cutoff, 9)[1:]]))
        v1, e1 = 0.0, 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            # tolerance measured against the running total, not the segment
            seg_atol = max(atol, 1e-2 * rtol * max(abs(v0 + v1), a0, 1e-300))
            v, e = adaptive_gk(body, lo, hi, rtol=1e-2 * rtol, atol=seg_atol, l1=True)
            v1 += v
            e1 += e
    else:
        v1, e1 = 0.0, 0.0
    val = v0 + v1
    err = e0 + e1
    if err > rtol * max(abs(val), a0) and err > 1e-15:
        raise QuadratureError(f"mellin_transform error {err:.2e} above tolerance", val, err)
    return complex(val)


def _find_cutoff(g, c, decay, scale, tiny=1e-17, t_max=1e7):
    t = 2.0
    while t < t_max:
        probe = np.linspace(t, 2 * t, 33)
        bound = decay(t) if decay is not None else np.max(np.abs(g(probe)))
        if bound * (2 * t) ** c * t < tiny * scale:
            return t
        t *= 2.0
    raise QuadratureError("mellin_transform: decay too slow to truncate below 1e7")


@dataclass
class MellinPair:
    """M_+ and M_- of one function, with caching and numerical z-derivatives.

    ``f`` is the (vectorized) transformed amplitude, e.g. ahat.
    """

    f: object
    cutoff: float = None
    rtol: float = 1e-10
    _cache: dict = field(default_factory=dict, repr=False)

    def value(self, side, z):
        key = (side, complex(z))
        if key not in self._cache:
            self._cache[key] = mellin_transform(self.f, side, z, cutoff=self.cutoff,
                                                rtol=self.rtol)
        return self._cache[key]

    def derivative(self, side, z, step=1e-5, check=True):
        """Central difference along the real direction, checked against 2*step."""
        z = complex(z)
        d1 = (self.value(side, z + step) - self.value(side, z - step)) / (2 * step)
        if check:
            d2 = (self.value(side, z + 2 * step) - self.value(side, z - 2 * step)) / (4 * step)
            if abs(d1 - d2) > 1e-5 * max(1.0, abs(d1)):
                raise QuadratureError(f"unstable M' at {z}: {d1} vs {d2}")
        return d1


# ----------------------------------------------------------------------
# spatial weight and the continued Z functions
@dataclass(frozen=True)
class PlateauWeight:
    """b(r, q) = b00 * chi(r/R) * chi(q/R) with chi = 1 on [0, 1/2], 0 beyond 1."""

    R: float = 1.0
    b00: float = 1.0

    def __call__(self, r, q):
        from .profiles import plateau
        return self.b00 * plateau(np.abs(r) / self.R) * plateau(np.abs(q) / self.R)

    def dr(self, j, r, q):
        """j-th r-derivative of b."""
        from .profiles import plateau
        return (self.b00 * self.R ** -j * plateau(np.abs(r) / self.R, j)
                * plateau(np.abs(q) / self.R))

    def dr_all(self, jmax, r, q):
        """[d^j b / dr^j for j = 0..jmax] in one pass."""
        from .profiles import plateau, plateau_all
        pr = plateau_all(np.abs(r) / self.R, jmax)
        pq = self.b00 * plateau(np.abs(q) / self.R)
        return [self.R ** -j * pr[j] * pq for j in range(jmax + 1)]

    def scaled(self, c):
        return PlateauWeight(self.R, self.b00 * c)


class ContinuedZ:
    """Meromorphic continuation of Z_+ and Z_- for a plateau weight.

    The q-integral is continued by its finite part (b is constant near q = 0, so
    the only q-pole sits at z_min); the s-integral by ``l`` integrations by parts.
    """

    def __init__(self, n, k, weight, q_panels=32, q_nodes=24, rtol=1e-12):
        self.n, self.k, self.w = n, k, weight
        self.alpha0 = n * (k + 1) - 1
        from .quadrature import gauss_legendre
        x, wts = gauss_legendre(q_nodes)
        edges = np.linspace(0.0, 1.0, q_panels + 1)
        a, b = edges[:-1, None], edges[1:, None]
        self._qx = (a + 0.5 * (b - a) * (x + 1)).ravel()
        self._qw = (0.5 * (b - a) * wts).ravel()
        self.rtol = rtol
        R = weight.R
        self.s_big = R * (2.0 / R) ** k
        self._cache = {}

    # finite-part q integrals -------------------------------------------
    def _nodes(self, s, jmax):
        # q nodes and weight derivatives depend on s only, not on z; the
        # contour evaluations revisit the same s nodes many times
        key = (s.tobytes(), jmax)
        hit = self._cache.get(key)
        if hit is None:
            k, R = self.k, self.w.R
            with np.errstate(divide="ignore"):  # s = 0 gives the full q range
                q1 = np.minimum(R / 2, (R / (2 * s)) ** (1.0 / k))
                qmax = np.minimum(R, (R / s) ** (1.0 / k))
            q = q1[:, None] + (qmax - q1)[:, None] * self._qx[None, :]
            wq = (qmax - q1)[:, None] * self._qw[None, :]
            if isinstance(self.w, PlateauWeight):
                vals = self.w.dr_all(jmax, s[:, None] * q ** k, q)
            else:
                vals = [self.w.dr(j, s[:, None] * q ** k, q) if j else self.w(s[:, None] * q ** k, q)
                        for j in range(jmax + 1)]
            hit = (q1, np.log(q), [v * wq for v in vals])
            if len(self._cache) >= 256:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = hit
        return hit

    def _fp(self, s, z, j, jmax=None):
        """d^j/ds^j of F.P. int_0^inf q^beta b(s q^k, q) dq, beta = alpha0 - 2kz."""
        beta = self.alpha0 - 2 * self.k * z
        s = np.ascontiguousarray(s, dtype=float)
        q1, logq, vw = self._nodes(s, j if jmax is None else jmax)
        out = np.sum(np.exp((beta + self.k * j) * logq) * vw[j], axis=1)
        if j == 0:
            out = out + self.w.b00 * np.exp((beta + 1) * np.log(q1)) / (beta + 1)
        return out

    def _tail_constant(self, z):
        # for s >= s_big: FP(s) = b00 * C * s^(-(beta+1)/k) exactly
        k, R = self.k, self.w.R
        beta = self.alpha0 - 2 * k * z
        from .profiles import plateau
        q1 = (R / 2) ** (1.0 / k)
        qm = R ** (1.0 / k)
        q = q1 + (qm - q1) * self._qx
        wq = (qm - q1) * self._qw
        val = np.sum(np.exp(beta * np.log(q)) * plateau(q ** k / R) * wq)
        return self.w.b00 * (val + np.exp((beta + 1) * np.log(q1)) / (beta + 1))

    def q_derivatives(self, s, z, l):
        """[d^i/ds^i Q(s, z) for i = 0..l],  Q = (1+s)^-z s^(n-1) FP(s)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        fps = [self._fp(s, z, j, l) for j in range(l + 1)]
        hs = [leibniz_derivative(m, z, self.n - 1, s) for m in range(l + 1)]
        out = []
        for i in range(l + 1):
            acc = 0.0
            for j in range(i + 1):
                acc = acc + comb(i, j) * hs[i - j] * fps[j]
            out.append(acc)
        return out

    def value(self, side, z, l=None):
        z = complex(z)
        if l is None:
            l = max(1, floor(z.real) + 1)
        if l <= z.real - 1:
            raise ValueError("continuation depth l too small for this z")
        ql = lambda s: self.q_derivatives(s, z, l)[l]  # noqa: E731
        prod = 1.0 + 0j
        for m in range(1, l + 1):
            prod *= m - z
        if side == "+":
            f = lambda s: np.exp((l - z) * np.log(s - 1.0)) * ql(s)  # noqa: E731
            v1, _ = adaptive_gk(f, 1.0, self.s_big, rtol=self.rtol, atol=1e-300, initial=16)
            v2 = self._tail(z, l)
            return (-1) ** l * (v1 + v2) / prod
        if side == "-":
            f = lambda s: np.exp((l - z) * np.log1p(-s)) * ql(s)  # noqa: E731
            v1, _ = adaptive_gk(f, 0.0, 1.0, rtol=self.rtol, atol=1e-300, initial=16)
            bnd = 0.0
            at0 = self.q_derivatives(np.array([0.0]), z, l)
            pi_ = 1.0 + 0j
            for i in range(l):
                pi_ *= (i + 1) - z
                bnd += at0[i][0] / pi_
            return bnd + v1 / prod
        raise ValueError("side must be '+' or '-'")

    def _tail(self, z, l):
        k, n = self.k, self.n
        beta = self.alpha0 - 2 * k * z
        C = self._tail_constant(z)
        expo = n - 1 - (beta + 1) / k
        gam = k / n
        sb = self.s_big

        def f(w):
            s = sb * w ** (-gam)
            jac = gam * sb * w ** (-gam - 1.0)
            return np.exp((l - z) * np.log(s - 1.0)) * leibniz_derivative(l, z, expo, s) * jac

        v, _ = adaptive_gk(f, 0.0, 1.0, rtol=self.rtol, atol=1e-300)
        return C * v

    def laurent(self, side, z0, radius=None, npts=32, l=None):
        """Coefficients (c_-2, c_-1) of Z_side at z0 by the trapezoid rule on a circle."""
        z0 = float(z0)
        if radius is None:
            radius = 0.3 / (2 * self.k)
        if l is None:
            l = floor(z0 + radius) + 1
        th = 2 * pi * (np.arange(npts // 2 + 1)) / npts
        zs = z0 + radius * np.exp(1j * th)
        vals = np.array([self.value(side, z, l) for z in zs])
        # conjugate symmetry: Z(conj z) = conj Z(z)
        full = np.concatenate([vals, np.conj(vals[1:-1][::-1])])
        ang = 2 * pi * np.arange(npts) / npts
        w = radius * np.exp(1j * ang)
        cm1 = np.mean(full * w)
        cm2 = np.mean(full * w * w)
        return cm2.real, cm1.real


# ----------------------------------------------------------------------
# analytic route at z_min
@_quiet
def _h_integral_plus(n, z0, l):
    f = lambda s: leibniz_derivative(l, z0, n - 1, s)  # noqa: E731
    a = l - z0
    v1, _ = integrate.quad(f, 1.0, 2.0, weight="alg", wvar=(a, 0.0), epsabs=1e-14,
                           epsrel=1e-13, limit=200)
    v2, _ = integrate.quad(lambda s: (s - 1.0) ** a * f(s), 2.0, np.inf, epsabs=1e-14,
                           epsrel=1e-13, limit=400)
    return v1 + v2


@_quiet
def _h_integral_minus(n, z0, l):
    f = lambda s: leibniz_derivative(l, z0, n - 1, s)  # noqa: E731
    v, _ = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(0.0, l - z0), epsabs=1e-14,
                          epsrel=1e-13, limit=200)
    bnd = 0.0
    for i in range(l):
        prod = 1.0
        for m in range(i + 2, l + 1):
            prod *= m - z0
        bnd += float(leibniz_derivative(i, z0, n - 1, np.array([0.0]))[0]) * prod
    return (-1) ** l * (v + bnd)


def analytic_residue(n, k, side, l=None, b00=1.0):
    """Leading Laurent coefficient of Z_side at z_min from the exact rational factor.

    At z_min the q-integral collapses to (2kl-1)! b(0,0), so only the rational
    limit and a one-dimensional s-integral remain.  For a simple pole this is
    the residue; for a double pole it is the coefficient of (z - z_min)^-2.
    """
    z0 = z_min(n, k)
    if l is None:
        l = minimal_l(z0)
    if l <= z0:
        raise ValueError("need l > z_min")
    order = root_multiplicity(z0, n, k, l)
    lim = rational_limit(z0, n, k, l, order) * factorial(2 * k * l - 1)
    sint = _h_integral_plus(n, float(z0), l) if side == "+" else _h_integral_minus(n, float(z0), l)
    return float(lim) * b00 * sint


def singular_constants(n, k):
    """Closed forms of the leading constants for b(0,0) = 1.

    Simple pole:  K ~ lam^-z (c_+ M_+(z) + c_- M_-(z)),
      c_+ = G(1-z) G(z-n/2) / (4k G(1-n/2)),  c_- = G(1-z) G(n/2) / (4k G(1-z+n/2)).
    Integer z = p with n odd: the log coefficients
      d_+ = -(-1)^p G(p-n/2) / (4k G(1-n/2) (p-1)!),  d_- = -(-1)^p G(n/2) / (4k G(1-p+n/2) (p-1)!).
    Integer z with n even: d_pm = 0 and (c_+, c_-) are the limits of the simple-pole formulas.
    """
    z = z_min(n, k)
    case = classify_case(n, k)
    zf = float(z)
    if case in (SIMPLE_ODD, SIMPLE_EVEN):
        cp = special.gamma(1 - zf) * special.gamma(zf - n / 2) * special.rgamma(1 - n / 2) / (4 * k)
        cm = special.gamma(1 - zf) * special.gamma(n / 2) * special.rgamma(1 - zf + n / 2) / (4 * k)
        return {"case": case, "z": z, "c+": cp, "c-": cm, "d+": 0.0, "d-": 0.0}
    p = int(z)
    if case == INTEGER_ODD_LOG:
        dp = -(-1) ** p * special.gamma(p - n / 2) * special.rgamma(1 - n / 2) / (4 * k * factorial(p - 1))
        dm = -(-1) ** p * special.gamma(n / 2) * special.rgamma(1 - p + n / 2) / (4 * k * factorial(p - 1))
        return {"case": case, "z": z, "c+": None, "c-": None, "d+": dp, "d-": dm}
    # n even: G(1-z)/G(1-z+n/2) = 1 / prod_{i=1}^{n/2} (i - z)
    prod = 1.0
    for i in range(1, n // 2 + 1):
        prod *= i - p
    cm = special.gamma(n / 2) / prod / (4 * k)
    return {"case": case, "z": z, "c+": 0.0, "c-": cm, "d+": 0.0, "d-": 0.0}


def residue_coefficient(n, k, pole, M, weight, l=None, method="auto", zfun=None):
    """(power, log) coefficients of lam^-z0 contributed by ``pole``.

    ``M`` is a :class:`MellinPair` of ahat, ``weight`` a :class:`PlateauWeight`.
    ``method='analytic'`` uses the exact rational limit at z_min,
    ``'contour'`` extracts Laurent coefficients of the continued Z numerically,
    ``'auto'`` picks analytic where it is complete (simple z_min, log part of a
    double z_min) and contour otherwise.
    """
    z0 = pole if isinstance(pole, Fraction) else Fraction(pole.z)
    zm = z_min(n, k)
    if l is not None and l <= z0:
        raise ValueError(f"l={l} does not uncover the pole at {z0} (need l > {z0})")
    zf = float(z0)
    at_min = z0 == zm
    order = 2 if (at_min and z0.denominator == 1) else 1
    if method == "auto":
        if not at_min and z0.denominator != 1 and isinstance(weight, PlateauWeight):
            # b is constant near q = 0, so the finite-part q-integral is entire
            # except at z_min, and the s-continuation only adds integer poles
            return 0.0, 0.0
        method = "analytic" if at_min and order == 1 else "mixed" if at_min else "contour"
    if method == "analytic":
        if not at_min:
            # away from z_min the collapse to b(0,0) does not apply; only poles
            # outside the zero set of B_l are decided here (they vanish exactly)
            if z0.denominator != 1 and root_multiplicity(z0, n, k, l or minimal_l(z0)) == 0:
                return 0.0, 0.0
            raise ValueError("analytic route only available at z_min")
        if order == 1:
            rp = analytic_residue(n, k, "+", l, weight.b00)
            rm = analytic_residue(n, k, "-", l, weight.b00)
            return -(rp * M.value("+", zf) + rm * M.value("-", zf)), 0.0
        method = "mixed"
    zf_ = zfun if zfun is not None else ContinuedZ(n, k, weight)
    if method == "mixed":
        dp = analytic_residue(n, k, "+", l, weight.b00)
        dm = analytic_residue(n, k, "-", l, weight.b00)
        _, ep = zf_.laurent("+", zf, l=l)
        _, em = zf_.laurent("-", zf, l=l)
    elif method == "contour":
        dp, ep = zf_.laurent("+", zf, l=l)
        dm, em = zf_.laurent("-", zf, l=l)
        if order == 1 and z0.denominator != 1:
            dp = dm = 0.0
    else:
        raise ValueError(f"unknown method {method}")
    mp, mm = M.value("+", zf), M.value("-", zf)
    power = -(ep * mp + em * mm)
    log = 0.0
    if abs(dp) + abs(dm) > 1e-13:
        power -= dp * M.derivative("+", zf) + dm * M.derivative("-", zf)
        log = dp * mp + dm * mm
    return power, log


def leading_distribution(n, k, phi, l=None):
    """<T_{n,k}, phi> for b(0,0) = 1: the leading residue paired with phi.

    ``phi`` is a vectorized function on R (for the spectral problem the test
    function plays the role of ahat).  Returns the coefficient multiplying
    lam^-z_min (times log lam in the odd integer case).
    """
    z = z_min(n, k)
    case = classify_case(n, k)
    decay = getattr(phi, "decay_bound", None)
    Mp = mellin_transform(phi, "+", float(z), decay=decay).real
    Mm = mellin_transform(phi, "-", float(z), decay=decay).real
    if case == INTEGER_EVEN:
        c = singular_constants(n, k)
        return c["c+"] * Mp + c["c-"] * Mm
    rp = analytic_residue(n, k, "+", l)
    rm = analytic_residue(n, k, "-", l)
    if case == INTEGER_ODD_LOG:
        return rp * Mp + rm * Mm
    return -(rp * Mp + rm * Mm)


@_quiet
def q_identity_check(b, k, l, s=0.5, R=1.0, rtol=1e-12):
    """Both sides of int_0^inf q^(2kl-1) d^(2kl)/dq^(2kl) b(s q^k, q) dq = (2kl-1)! b(0, 0).

    ``b(r, q)`` must accept sympy symbols and return an expression valid on its
    support, which lies in |r|, |q| < R (the bump product of
    :func:`bump_weight_expr` is the standard choice).  The derivative is taken
    symbolically, so no differentiation noise enters.
    """
    import sympy as sp

    if k < 2 or l < 1:
        raise ValueError("need k >= 2 and l >= 1")
    m = 2 * k * l
    q = sp.Symbol("q", positive=True)
    g = b(s * q ** k, q)
    dg = sp.diff(g, q, m)
    fn = sp.lambdify(q, q ** (m - 1) * dg, "numpy")
    qmax = min(R, (R / s) ** (1.0 / k)) if s > 0 else R
    rhs = factorial(m - 1) * float(b(sp.Integer(0), sp.Integer(0)))
    if rhs == 0 and sp.simplify(g) == 0:
        return 0.0, 0.0

    def f(x):
        with np.errstate(all="ignore"):
            v = np.asarray(fn(x), dtype=float) * np.ones_like(x)
        return np.where(np.isfinite(v), v, 0.0)

    lhs, _ = integrate.quad(f, 0.0, qmax * (1 - 1e-15), epsabs=1e-14, epsrel=rtol, limit=500)
    return float(lhs), float(rhs)


def bump_weight_expr(c=1.0, R=1.0):
    """b(r, q) = c * e^2 * exp(-1/(1-(r/R)^2)) * exp(-1/(1-(q/R)^2)), so b(0, 0) = c."""
    import sympy as sp

    def b(r, q):
        return (sp.nsimplify(c) * sp.exp(2) * sp.exp(-1 / (1 - (r / R) ** 2))
                * sp.exp(-1 / (1 - (q / R) ** 2)))
    return b
