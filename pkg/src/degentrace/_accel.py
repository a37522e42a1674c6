"""Compiled kernels with a plain numpy fallback.

Set ``DEGENTRACE_NUMPY=1`` to bypass numba entirely (useful for debugging and
for the speed comparison in ``benchmarks/``).  The two paths agree to rounding.
"""

import cmath
import os

import numpy as np

os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

USE_NUMBA = os.environ.get("DEGENTRACE_NUMPY", "").strip() in ("", "0")

if USE_NUMBA:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

_CHUNK = 256


def _phase_sum_numpy(s, xp, f, sign):
    out = np.empty(s.shape[0], dtype=np.complex128)
    for i0 in range(0, s.shape[0], _CHUNK):
        blk = s[i0:i0 + _CHUNK]
        out[i0:i0 + _CHUNK] = np.exp((1j * sign) * np.outer(blk, xp)) @ f
    return out


def _poly_eval_numpy(pts, exps, coefs):
    # pts (m, n), exps (t, n) -> (m,)
    mon = np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)
    return mon @ coefs


if USE_NUMBA:

    @njit(parallel=True, fastmath=True, cache=True)
    def _phase_sum_numba(s, xp, f, sign):
        out = np.empty(s.shape[0], np.complex128)
        for i in prange(s.shape[0]):
            si = sign * s[i]
            acc = 0j
            for j in range(xp.shape[0]):
                acc += f[j] * cmath.exp(1j * (si * xp[j]))
            out[i] = acc
        return out

    # serial on purpose: spectral solves call this from worker threads
    @njit(cache=True)
    def _poly_eval_numba(pts, exps, coefs):
        m = pts.shape[0]
        out = np.zeros(m)
        for i in range(m):
            acc = 0.0
            for t in range(exps.shape[0]):
                term = coefs[t]
                for d in range(exps.shape[1]):
                    e = exps[t, d]
                    if e:
                        term *= pts[i, d] ** e
                acc += term
            out[i] = acc
        return out


def phase_sum(s, xp, f, sign=1.0):
    """Return ``sum_j f_j exp(i*sign*s_i*xp_j)`` for every ``s_i``.

    This is the workhorse behind every Fourier-type integral in the package:
    quadrature nodes are pre-mapped to ``xp`` and weights folded into ``f``.
    ``f`` may be real or complex.
    """
    s = np.ascontiguousarray(s, dtype=np.float64)
    xp = np.ascontiguousarray(xp, dtype=np.float64)
    f = np.asarray(f)
    if np.iscomplexobj(f):
        re = phase_sum(s, xp, f.real.copy(), sign)
        im = phase_sum(s, xp, f.imag.copy(), sign)
        return re + 1j * im
    f = np.ascontiguousarray(f, dtype=np.float64)
    if USE_NUMBA:
        return _phase_sum_numba(s, xp, f, float(sign))
    return _phase_sum_numpy(s, xp, f, float(sign))


def poly_eval(pts, exps, coefs):
    """Evaluate a sparse polynomial at points ``pts`` of shape (m, n)."""
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    coefs = np.ascontiguousarray(coefs, dtype=np.float64)
    if exps.shape[0] == 0:
        return np.zeros(pts.shape[0])
    if USE_NUMBA:
        return _poly_eval_numba(pts, exps, coefs)
    return _poly_eval_numpy(pts, exps, coefs)
