"""Sparse multivariate polynomials with real coefficients.

Potentials are given as coefficient tables ``[(multi_index, coefficient), ...]``.
Only the operations the toolkit needs are implemented: evaluation, gradient,
Hessian, homogeneous parts and re-expansion about a point.
"""

from math import comb
from itertools import product

import numpy as np

from ._accel import poly_eval


class Polynomial:
    """A polynomial in ``n`` variables stored as ``{exponent tuple: coefficient}``."""

    def __init__(self, terms, n):
        self.n = int(n)
        acc = {}
        for idx, c in (terms.items() if isinstance(terms, dict) else terms):
            idx = tuple(int(e) for e in idx)
            if len(idx) != self.n or min(idx, default=0) < 0:
                raise ValueError(f"bad multi-index {idx} for n={self.n}")
            acc[idx] = acc.get(idx, 0.0) + float(c)
        self.terms = {k: v for k, v in acc.items() if v != 0.0}
        self._exps = np.array(list(self.terms), dtype=np.int64).reshape(-1, self.n)
        self._coefs = np.array(list(self.terms.values()), dtype=float)

    # ------------------------------------------------------------------
    def _points(self, x):
        """Coerce ``x`` to shape (m, n); return it with the output shape."""
        x = np.asarray(x, dtype=float)
        if self.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            return x.reshape(-1, 1), x.shape
        if x.shape[-1] != self.n:
            raise ValueError(f"expected trailing dimension {self.n}, got {x.shape}")
        return x.reshape(-1, self.n), x.shape[:-1]

    def __call__(self, x):
        pts, shp = self._points(x)
        out = poly_eval(pts, self._exps, self._coefs).reshape(shp)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        body = " + ".join(f"{c:g}*x^{list(e)}" for e, c in sorted(self.terms.items()))
        return f"Polynomial({body or '0'}, n={self.n})"

    def __add__(self, other):
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0.0) + c
        return Polynomial(terms, self.n)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def scaled(self, c):
        return Polynomial({e: c * v for e, v in self.terms.items()}, self.n)

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    @property
    def min_degree(self):
        return min((sum(e) for e in self.terms), default=0)

    def homogeneous_part(self, d):
        return Polynomial({e: c for e, c in self.terms.items() if sum(e) == d}, self.n)

    def is_homogeneous(self, d):
        return all(sum(e) == d for e in self.terms)

    def derivative(self, i):
        out = {}
        for e, c in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                out[tuple(f)] = out.get(tuple(f), 0.0) + c * e[i]
        return Polynomial(out, self.n)

    def gradient_polys(self):
        if not hasattr(self, "_grad"):
            self._grad = [self.derivative(i) for i in range(self.n)]
        return self._grad

    def hessian_polys(self):
        if not hasattr(self, "_hess"):
            g = self.gradient_polys()
            self._hess = [[gi.derivative(j) for j in range(self.n)] for gi in g]
        return self._hess

    def gradient(self, x):
        """Gradient at ``x``; shape ``x.shape[:-1] + (n,)``."""
        pts, shp = self._points(x)
        out = np.stack([poly_eval(pts, g._exps, g._coefs) for g in self.gradient_polys()], -1)
        return out.reshape(shp + (self.n,))

    def hessian(self, x):
        pts, shp = self._points(x)
        H = np.empty((pts.shape[0], self.n, self.n))
        for i, row in enumerate(self.hessian_polys()):
            for j, hij in enumerate(row):
                H[:, i, j] = poly_eval(pts, hij._exps, hij._coefs)
        return H.reshape(shp + (self.n, self.n))

    def shift(self, x0):
        """Return ``q`` with ``q(y) = self(y + x0)``."""
        x0 = np.asarray(x0, dtype=float).reshape(self.n)
        out = {}
        for e, c in self.terms.items():
            for f in product(*(range(ei + 1) for ei in e)):
                coef = c
                for ei, fi, xi in zip(e, f, x0):
                    coef *= comb(ei, fi) * xi ** (ei - fi)
                out[f] = out.get(f, 0.0) + coef
        return Polynomial({k: v for k, v in out.items() if abs(v) > 0.0}, self.n)

    def to_table(self):
        return [[list(e), c] for e, c in sorted(self.terms.items())]
