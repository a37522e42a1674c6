"""Smooth compactly supported profiles with analytic derivatives.

``plateau(x)`` equals 1 for x <= 1/2 and 0 for x >= 1; ``bump(u)`` is
exp(-1/(1-u^2)) on (-1, 1).  Derivatives are generated symbolically once and
compiled to numpy.
"""

from functools import lru_cache
from math import factorial

import numpy as np
import sympy as sp

_y = sp.Symbol("y", real=True)
_psi = lambda e: sp.exp(-1 / e)  # noqa: E731
_STEP = _psi(_y) / (_psi(_y) + _psi(1 - _y))
_BUMP = sp.exp(-1 / (1 - _y ** 2))


@lru_cache(maxsize=None)
def _step_derivative(j):
    return sp.lambdify(_y, sp.diff(_STEP, _y, j), "numpy")


@lru_cache(maxsize=None)
def _bump_derivative(j):
    return sp.lambdify(_y, sp.diff(_BUMP, _y, j), "numpy")


# Taylor-mode arithmetic on arrays of shape (order + 1, npoints); row j holds
# the coefficient of eps^j.  Much cheaper than lambdified high derivatives.
def _series_exp(a):
    e = np.empty_like(a)
    e[0] = np.exp(a[0])
    for m in range(1, a.shape[0]):
        i = np.arange(1, m + 1)[:, None]
        e[m] = np.sum(i * a[1:m + 1] * e[m - 1::-1][:m], axis=0) / m
    return e


def _series_recip(b):
    r = np.empty_like(b)
    r[0] = 1.0 / b[0]
    for m in range(1, b.shape[0]):
        r[m] = -np.sum(b[1:m + 1] * r[m - 1::-1][:m], axis=0) * r[0]
    return r


def _series_mul(a, b):
    out = np.zeros_like(a)
    for m in range(a.shape[0]):
        out[m] = np.sum(a[:m + 1] * b[m::-1], axis=0)
    return out


def _step_series(y, order):
    """Taylor coefficients of 1 / (1 + exp(1/y - 1/(1-y))) at points 0 < y < 1."""
    j = np.arange(order + 1)[:, None]
    h = (-1.0) ** j * y ** (-j - 1.0) - (1.0 - y) ** (-j - 1.0)
    pos = h[0] > 0
    sgn = np.where(pos, -1.0, 1.0)
    E = _series_exp(sgn * h)  # exp(-|h|) at order 0, never overflows
    one = np.zeros_like(E)
    one[0] = 1.0
    inv = _series_recip(one + E)
    return np.where(pos, _series_mul(E, inv), inv)


def _bump_series(u, order):
    j = np.arange(order + 1)[:, None]
    g = -0.5 * ((1.0 - u) ** (-j - 1.0) + (-1.0) ** j * (1.0 + u) ** (-j - 1.0))
    return _series_exp(g)


def smooth_step(y, deriv=0):
    """C-infinity step: 0 for y <= 0, 1 for y >= 1, and its ``deriv``-th derivative."""
    y0 = np.asarray(y, dtype=float)
    y = np.atleast_1d(y0)
    out = np.zeros_like(y) if deriv else (y >= 1.0).astype(float)
    inside = (y > 0.0) & (y < 1.0)
    if np.any(inside):
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            val = factorial(deriv) * _step_series(y[inside], deriv)[deriv]
        out[inside] = np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)
    return out.reshape(y0.shape)


def plateau(x, deriv=0):
    """Cutoff equal to 1 on |x| <= 1/2 and 0 on |x| >= 1 (x >= 0 assumed).

    ``plateau(x) = smooth_step(2 - 2x)``, hence the (-2)^deriv factor.
    """
    x = np.asarray(x, dtype=float)
    return (-2.0) ** deriv * smooth_step(2.0 - 2.0 * x, deriv)


def plateau_all(x, order):
    """Array of shape (order + 1, ...) with plateau derivatives 0..order at ``x``.

    One Taylor pass serves every order, which is what repeated weight
    evaluations in the pole continuation need.
    """
    x0 = np.asarray(x, dtype=float)
    y = np.atleast_1d(2.0 - 2.0 * x0).ravel()
    out = np.zeros((order + 1, y.size))
    out[0] = (y >= 1.0).astype(float)
    inside = (y > 0.0) & (y < 1.0)
    if np.any(inside):
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            ser = _step_series(y[inside], order)
        scale = np.array([(-2.0) ** j * factorial(j) for j in range(order + 1)])[:, None]
        out[:, inside] = np.nan_to_num(scale * ser, nan=0.0, posinf=0.0, neginf=0.0)
    return out.reshape((order + 1,) + x0.shape)


def bump(u, deriv=0):
    """exp(-1/(1-u^2)) on (-1, 1), zero outside."""
    u0 = np.asarray(u, dtype=float)
    u = np.atleast_1d(u0)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    if np.any(inside):
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            val = factorial(deriv) * _bump_series(u[inside], deriv)[deriv]
        out[inside] = np.nan_to_num(val, nan=0.0, posinf=0.0, neginf=0.0)
    return out.reshape(u0.shape)


@lru_cache(maxsize=None)
def bump_taylor(order):
    """Exact Taylor coefficients of the bump at 0 as sympy numbers, up to ``order``."""
    ser = sp.series(_BUMP, _y, 0, order + 1).removeO()
    return tuple(ser.coeff(_y, j) for j in range(order + 1))


def bump_moment_derivative(m0, T, m):
    """m-th derivative at 0 of t^m0 * bump(t/T)."""
    if m < m0:
        return 0.0
    c = bump_taylor(m - m0)[m - m0]
    return float(c) * factorial(m) / T ** (m - m0)
