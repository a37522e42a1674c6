"""Model oscillatory integrals: oracle evaluation, residue expansions, tail fits.

The model integral is

    K(lam) = int_R dt int_0^inf dr int_0^inf dq  exp(-i lam t (r^2 - q^{2k})) a(t) b(r, q) r^(n-1) q^(n-1)

with b a plateau cutoff.  Because b factorizes, ``K(lam) = (1/lam) int a(tau/lam)
G(tau) dtau`` where ``G = F_r F_q`` is a product of one-dimensional Fourier-type
integrals; for large |tau| each factor equals its endpoint term exactly up to
exponentially small corrections.  That representation is the default oracle.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial, gamma

import numpy as np

from . import mellin
from ._accel import phase_sum
from .profiles import bump, bump_moment_derivative, plateau
from .quadrature import QuadratureError, adaptive_gk, geometric_edges, panel_rule


# ----------------------------------------------------------------------
@dataclass
class ModelAmplitude:
    """Separable amplitude a(t) * b(r, q) * r^(n-1) q^(n-1).

    ``profile`` is ``'bump'`` (a(t) = t^m0 bump(t/T), support (-T, T)) or
    ``'gaussian'`` (a(t) = t^m0 exp(-t^2 / (2 T^2))).  The polar weights are
    kept as the explicit degree ``n - 1`` and never folded into ``weight``.
    """

    n: int
    k: int
    profile: str = "bump"
    T: float = 1.0
    m0: int = 0
    weight: mellin.PlateauWeight = field(default_factory=mellin.PlateauWeight)
    t_panels: int = 128

    def __post_init__(self):
        if self.profile not in ("bump", "gaussian"):
            raise ValueError(f"unsupported profile {self.profile!r}")
        self._mellin = None
        if self.profile == "bump":
            u, w = panel_rule(np.linspace(-1.0, 1.0, self.t_panels + 1), 32)
            self._tn = self.T * u
            self._tw = self.T * w * self.a(self._tn)

    @property
    def weight_degree(self):
        return self.n - 1

    @property
    def support(self):
        return self.T if self.profile == "bump" else 12.0 * self.T

    def a(self, t):
        t = np.asarray(t, dtype=float)
        if self.profile == "bump":
            env = bump(t / self.T)
        else:
            env = np.exp(-0.5 * (t / self.T) ** 2)
        return t ** self.m0 * env

    def a_derivative_at_zero(self, m):
        if self.profile == "bump":
            return bump_moment_derivative(self.m0, self.T, m)
        # t^m0 exp(-t^2/2T^2): only even offsets j = m - m0 survive
        j = m - self.m0
        if j < 0 or j % 2:
            return 0.0
        c = (-0.5 / self.T ** 2) ** (j // 2) / factorial(j // 2)
        return c * factorial(m)

    def ahat(self, v):
        """Fourier transform int a(t) exp(-i v t) dt."""
        v = np.asarray(v, dtype=float)
        if self.profile == "gaussian":
            from numpy.polynomial.hermite_e import hermeval
            sig = self.T
            coef = np.zeros(self.m0 + 1)
            coef[-1] = 1.0
            return (sig * np.sqrt(2 * np.pi) * (-1j * sig) ** self.m0
                    * hermeval(sig * v, coef) * np.exp(-0.5 * (sig * v) ** 2))
        flat = v.ravel()
        out = phase_sum(flat, self._tn, self._tw, -1.0)
        return out.reshape(v.shape)

    def B(self, r, q):
        return self.weight(r, q) * r ** (self.n - 1) * q ** (self.n - 1)

    @property
    def mellin(self):
        """M_+ and M_- of ahat, computed from moments of a (see :class:`MomentMellin`)."""
        if self._mellin is None:
            self._mellin = MomentMellin(self)
        return self._mellin

    def numeric_mellin(self):
        """Direct quadrature of v^(z-1) ahat(+-v); reliable only for moderate Re z."""
        return mellin.MellinPair(self.ahat, cutoff=self._ahat_cutoff())

    def _ahat_cutoff(self, rel=1e-13):
        """First v beyond which |ahat| stays below ``rel`` times its peak.

        The bump transform decays like exp(-sqrt(2 v T)); past the cutoff the
        computed values are dominated by rounding in the phase sum.
        """
        ref = float(np.max(np.abs(self.ahat(np.linspace(0, 4.0 / self.T, 64)))))
        v = 4.0 / self.T
        limit = 12.0 * self.t_panels / self.T if self.profile == "bump" else 1e4 / self.T
        while v < limit:
            probe = np.abs(self.ahat(np.linspace(v, 1.25 * v, 64)))
            if probe.max() < rel * ref:
                return 1.25 * v
            v *= 1.25
        raise QuadratureError("ahat does not decay within the resolved band")

    def with_b00(self, b00):
        return ModelAmplitude(self.n, self.k, self.profile, self.T, self.m0,
                              mellin.PlateauWeight(self.weight.R, b00), self.t_panels)


def _bump_series(terms):
    """Coefficients f_i of exp(-1/(1-w)) = sum f_i w^i (w = y^2)."""
    f = np.zeros(terms)
    f[0] = np.exp(-1.0)
    for m in range(1, terms):
        f[m] = -np.dot(np.arange(1, m + 1), f[m - 1::-1]) / m
    return f


class MomentMellin:
    """Mellin transforms of ahat from finite-part moments of a.

    For ahat(v) = int a(t) exp(-i v t) dt,

        M_+(z) = Gamma(z) [exp(-i pi z/2) P(z) + exp(i pi z/2) N(z)],
        M_-(z) = Gamma(z) [exp(i pi z/2) P(z) + exp(-i pi z/2) N(z)],

    with P(z) = int_0^inf t^-z a(t) dt and N(z) the same for a(-t), both
    continued as finite parts.  Here N = (-1)^m0 P.  This avoids the rounding
    floor of ahat at large v, which spoils direct quadrature once Re z > 2.
    P has simple poles at z = m0 + 1 + 2i that cancel against the phase factor;
    close to them the value is taken as a circle mean.
    """

    _series_terms = 48

    def __init__(self, amp):
        self.amp = amp
        self._cache = {}
        if amp.profile == "bump":
            self._f = _bump_series(self._series_terms)

    def _P(self, z):
        amp = self.amp
        m0, T = amp.m0, amp.T
        if amp.profile == "gaussian":
            from scipy.special import gamma as cgamma
            e = (m0 + 1 - z) / 2
            return 0.5 * (2 * T * T) ** e * cgamma(e)
        s = T / 4
        i = np.arange(self._series_terms)
        ex = m0 + 2 * i + 1 - z
        head = np.sum(self._f * T ** (-2.0 * i) * s ** ex / ex)
        tail, _ = adaptive_gk(lambda t: t ** (-z) * amp.a(t), s, T, rtol=1e-13, atol=1e-300,
                              l1=True)
        return head + tail

    def _direct(self, side, z):
        from scipy.special import gamma as cgamma
        P = self._P(z)
        N = (-1) ** self.amp.m0 * P
        ph = np.exp(-0.5j * np.pi * z)
        if side == "-":
            ph = 1 / ph
        return complex(cgamma(z) * (ph * P + N / ph))

    def _near_pole(self, z):
        j = np.round((z.real - self.amp.m0 - 1) / 2)
        if j < 0:
            return False
        return abs(z - (self.amp.m0 + 1 + 2 * j)) < 0.04

    def value(self, side, z):
        if side not in ("+", "-"):
            raise ValueError("side must be '+' or '-'")
        z = complex(z)
        if z.real <= 0:
            raise ValueError("Re z must be positive")
        key = (side, z)
        if key not in self._cache:
            if self._near_pole(z):
                th = 2 * np.pi * (np.arange(16) + 0.5) / 16
                v = np.mean([self._direct(side, z + 0.1 * np.exp(1j * a)) for a in th])
            else:
                v = self._direct(side, z)
            self._cache[key] = complex(v)
        return self._cache[key]

    def derivative(self, side, z, radius=0.2, points=24):
        """Cauchy integral on a circle (M is analytic for Re z > 0)."""
        z = complex(z)
        th = 2 * np.pi * (np.arange(points) + 0.5) / points
        e = np.exp(1j * th)
        vals = np.array([self.value(side, z + radius * w) for w in e])
        return complex(np.mean(vals / e) / radius)


def amplitude_factory(profile="bump", n=1, k=2, T=1.0, m0=0, R=1.0, b00=1.0):
    """Build a :class:`ModelAmplitude` with plateau spatial factor of radius R."""
    if profile not in ("bump", "gaussian"):
        raise ValueError(f"unsupported profile {profile!r}")
    return ModelAmplitude(n, k, profile, T, m0, mellin.PlateauWeight(R, b00))


# ----------------------------------------------------------------------
class SeparableOracle:
    """K(lam) through the factorization K = (1/lam) int a(tau/lam) F_r(tau) F_q(tau) dtau.

    ``s_switch`` is where each factor is replaced by its exact endpoint term; the
    neglected remainder decays like exp(-c sqrt(s)).
    """

    def __init__(self, amp, s_switch=8000.0, osc_per_panel=4.0):
        self.amp = amp
        n, k, R = amp.n, amp.k, amp.weight.R
        self.s_switch = s_switch
        self._r = self._nodes(2, R, osc_per_panel)
        self._q = self._nodes(2 * k, R, osc_per_panel)

    def _nodes(self, p, R, osc_per_panel):
        n = self.amp.n
        # total phase variation of s x^p on [0, R] at s_switch
        cycles = self.s_switch * R ** p / (2 * np.pi)
        panels = int(max(16, np.ceil(cycles / osc_per_panel)))
        # refine toward R where the phase derivative is largest: uniform in x^p
        y = np.linspace(0.0, 1.0, panels + 1) ** (1.0 / p) * R
        x, w = panel_rule(y, 32)
        f = w * plateau(x / R) * x ** (n - 1)
        return x ** p, f, p

    def factor(self, s, which):
        xp, f, p = self._r if which == "r" else self._q
        sign = -1.0 if which == "r" else 1.0
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape, dtype=complex)
        small = np.abs(s) <= self.s_switch
        if np.any(small):
            out[small] = phase_sum(s[small], xp, f, sign)
        if np.any(~small):
            out[~small] = self.endpoint_term(s[~small], p, sign)
        return out

    def endpoint_term(self, s, p, sign):
        """int_0^inf exp(i sign s x^p) x^(n-1) dx = G(n/p) / (p (-i sign s)^(n/p))."""
        n = self.amp.n
        return gamma(n / p) / (p * (-1j * sign * s + 0j) ** (n / p))

    def G(self, tau):
        return self.factor(tau, "r") * self.factor(tau, "q")

    def tau_rule(self, lam):
        L = lam * self.amp.support
        inner = np.linspace(0.0, min(1.0, L), 9)
        outer = geometric_edges(min(1.0, L), L, 0.125, ratio=1.25) if L > 1.0 else np.array([L])
        edges = np.unique(np.concatenate([inner, outer]))
        return panel_rule(edges, 32)

    def __call__(self, lam):
        lam = float(lam)
        x, w = self.tau_rule(lam)
        g = self.G(x)
        a_pos = self.amp.a(x / lam)
        a_neg = self.amp.a(-x / lam)
        # G(-tau) = conj(G(tau)) because F_r, F_q are Fourier integrals of real data
        return np.sum(w * (a_pos * g + a_neg * np.conj(g))) / lam


def oracle_eval(amp, lam, method="fourier", oracle=None):
    """Brute-force value of the model integral at ``lam``.

    ``method='fourier'`` (default) is the separable representation above;
    ``'reduced'`` integrates ahat(lam(r^2 - q^{2k})) B(r, q) with the u = r^2 - q^{2k}
    substitution and is meant for moderate lam; ``'direct'`` is a tensor-product
    quadrature over (t, r, q), usable only for small lam.
    """
    if amp.weight.b00 == 0.0:
        return 0.0 + 0j
    if method == "fourier":
        return (oracle or SeparableOracle(amp))(lam)
    if method == "reduced":
        return reduced_eval(amp, lam)
    if method == "direct":
        return direct_eval(amp, lam)
    raise ValueError(f"unknown method {method!r}")


def reduced_eval(amp, lam, q_panels=24, ratio=1.4):
    """int_0^R dq int_0^R dr ahat(lam (r^2 - q^{2k})) B(r, q), concentrated near r = q^k.

    ahat(lam u) is negligible once |lam u| exceeds the Mellin cutoff, so each
    r-integral is restricted to that band and panels are graded geometrically
    around r* = q^k with the finest width set by the oscillation scale
    1/(lam T r*).  (Grading in r rather than in u = r^2 - q^{2k} avoids the
    1/(2r) Jacobian, which is nearly singular when q^{2k} is below 1/lam.)
    """
    n, k, R = amp.n, amp.k, amp.weight.R
    width = 1.0 / (lam * amp.T)
    vcut = amp._ahat_cutoff()
    qe = np.concatenate([[0.0], np.geomspace(1e-4 * R, R, q_panels)])
    qs, qw = panel_rule(qe, 16)
    total = 0.0 + 0j
    for q, wq in zip(qs, qw):
        c = q ** (2 * k)
        rstar = q ** k
        lo = np.sqrt(max(0.0, c - vcut / lam))
        hi = min(R, np.sqrt(c + vcut / lam))
        if hi <= lo:
            continue
        d0 = 0.25 * width / (2.0 * max(rstar, np.sqrt(width)))
        centre = min(max(rstar, lo), hi)
        left = centre - geometric_edges(0.0, centre - lo, d0, ratio)[::-1]
        right = centre + geometric_edges(0.0, hi - centre, d0, ratio)
        edges = np.unique(np.concatenate([left, right]))
        r, wr = panel_rule(edges, 32)
        total += wq * np.sum(wr * amp.ahat(lam * (r * r - c)) * amp.B(r, np.full_like(r, q)))
    return total


def direct_eval(amp, lam, nt=160, nr=160, nq=160, chunk=40):
    """Tensor-product Gauss-Legendre over (t, r, q); a slow independent check."""
    R = amp.weight.R
    te, tw = panel_rule(np.linspace(-amp.support, amp.support, nt // 16 + 1), 16)
    re, rw = panel_rule(np.linspace(0.0, R, nr // 16 + 1), 16)
    qe, qw = panel_rule(np.linspace(0.0, R, nq // 16 + 1), 16)
    at = amp.a(te) * tw
    RR, QQ = np.meshgrid(re, qe, indexing="ij")
    BW = amp.B(RR, QQ) * rw[:, None] * qw[None, :]
    D = RR ** 2 - QQ ** (2 * amp.k)
    total = 0.0 + 0j
    for i in range(0, te.size, chunk):
        ph = np.exp(-1j * lam * te[i:i + chunk, None, None] * D[None])
        total += np.sum(at[i:i + chunk, None, None] * ph * BW[None])
    return total


# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Term:
    a: Fraction
    m: int
    c: complex

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return self.c * lam ** (-float(self.a)) * np.log(lam) ** self.m


@dataclass
class AsymptoticSeries:
    terms: list
    valid_from: float = 1.0

    def __post_init__(self):
        self.terms = sorted(self.terms, key=lambda t: (t.a, -t.m))
        for t in self.terms:
            if t.m == 1 and Fraction(t.a).denominator != 1:
                raise ValueError("log terms only at integer exponents")

    def __call__(self, lam, count=None):
        terms = self.terms if count is None else self.terms[:count]
        return sum((t(lam) for t in terms), 0.0 * np.asarray(lam, dtype=float))

    def __len__(self):
        return len(self.terms)


def build_expansion(amp, order=2, drop_below=1e-13, zfun=None):
    """Residue expansion of ``amp``'s model integral.

    Terms come from the first ``order`` catalog poles (z_min first).  Integer
    poles below z_min are evaluated as well; their coefficients are proportional
    to low derivatives of a at 0 and are dropped when they vanish (below
    ``drop_below``), as they do for amplitudes with enough vanishing moments.
    """
    n, k = amp.n, amp.k
    zm = mellin.z_min(n, k)
    cat = mellin.pole_catalog(n, k, zm + Fraction(order, 2 * k))
    M = amp.mellin
    Z = zfun or mellin.ContinuedZ(n, k, amp.weight)
    terms = []
    scale = max(abs(M.value("+", float(zm))), abs(M.value("-", float(zm))), 1e-300)
    for pole in mellin.regular_poles(n, k):
        zf = float(pole.z)
        if max(abs(M.value("+", zf)), abs(M.value("-", zf))) < 1e-14 * scale:
            # these poles are simple: a vanishing M kills the residue outright
            continue
        c, _ = mellin.residue_coefficient(n, k, pole, M, amp.weight, method="contour", zfun=Z)
        if abs(c) > drop_below:
            terms.append(Term(pole.z, 0, complex(c)))
    for pole in list(cat)[:order]:
        c, d = mellin.residue_coefficient(n, k, pole, M, amp.weight, zfun=Z)
        if abs(d) > drop_below:
            terms.append(Term(pole.z, 1, complex(d)))
        terms.append(Term(pole.z, 0, complex(c)))
    return AsymptoticSeries(terms)


# ----------------------------------------------------------------------
class FitError(ValueError):
    pass


def fit_tail(samples, with_log=False):
    """Fit ``value ~ c lam^-a`` (times log lam if ``with_log``) on the log scale.

    ``samples`` is a sequence of (lam, value) with real values of one sign.
    Returns (a, c, residual) where residual is the RMS of the log misfit.
    """
    lam = np.array([s[0] for s in samples], dtype=float)
    val = np.array([s[1] for s in samples], dtype=float)
    if lam.size < 6 or lam.max() / lam.min() < 10.0 - 1e-9:
        raise FitError("need at least 6 samples spanning a decade")
    if not (np.all(val > 0) or np.all(val < 0)):
        raise FitError("values change sign; the log-scale fit is undefined")
    y = np.log(np.abs(val))
    if with_log:
        y = y - np.log(np.log(lam))
    X = np.column_stack([np.ones_like(lam), -np.log(lam)])
    if np.linalg.cond(X) > 1e12:
        raise FitError("degenerate design matrix")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    c = float(np.sign(val[0]) * np.exp(coef[0]))
    return float(coef[1]), c, resid


def lambda_grid(lo=1e2, hi=1e4, per_decade=12):
    decades = np.log10(hi / lo)
    count = int(round(decades * per_decade)) + 1
    return np.geomspace(lo, hi, count)
