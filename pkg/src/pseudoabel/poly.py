"""Bivariate real polynomials with compensated Horner evaluation."""
from __future__ import annotations

import numpy as np

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _comp_horner(coef_hi, coef_lo, x):
    """Compensated Horner for coefficients given as (high, low) pairs, highest degree last."""
    s = coef_hi[-1]
    err = coef_lo[-1]
    for k in range(len(coef_hi) - 2, -1, -1):
        p, pe = _two_prod(s, x)
        s, se = _two_sum(p, coef_hi[k])
        err = err * x + (pe + se + coef_lo[k])
    return s, err


class Poly2:
    """``sum c[i, j] x**i y**j`` stored as a dense coefficient array."""

    __slots__ = ("c",)

    def __init__(self, coeffs):
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        # trim trailing zero rows/columns
        while c.shape[0] > 1 and not np.any(c[-1]):
            c = c[:-1]
        while c.shape[1] > 1 and not np.any(c[:, -1]):
            c = c[:, :-1]
        self.c = c

    @classmethod
    def from_terms(cls, terms) -> "Poly2":
        """From ``[(i, j, coefficient), ...]``; repeated monomials add up."""
        terms = [(int(i), int(j), float(v)) for i, j, v in terms]
        if not terms:
            return cls([[0.0]])
        if any(i < 0 or j < 0 for i, j, _ in terms):
            raise ValueError("negative monomial degree")
        c = np.zeros((max(t[0] for t in terms) + 1, max(t[1] for t in terms) + 1))
        for i, j, v in terms:
            c[i, j] += v
        return cls(c)

    def terms(self) -> list:
        return [[int(i), int(j), float(self.c[i, j])] for i, j in zip(*np.nonzero(self.c))]

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.c)
        return int(max(nz[0] + nz[1])) if nz[0].size else 0

    @property
    def is_constant(self) -> bool:
        return self.c.shape == (1, 1)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        zero = np.zeros_like(x)
        rows_hi, rows_lo = [], []
        for i in range(self.c.shape[0]):
            row = self.c[i]
            hi, lo = _comp_horner([zero + v for v in row], [zero] * len(row), y)
            rows_hi.append(hi)
            rows_lo.append(lo)
        s, err = _comp_horner(rows_hi, rows_lo, x)
        out = s + err
        return out if out.ndim else float(out)

    def dx(self) -> "Poly2":
        if self.c.shape[0] == 1:
            return Poly2([[0.0]])
        return Poly2(self.c[1:] * np.arange(1, self.c.shape[0])[:, None])

    def dy(self) -> "Poly2":
        if self.c.shape[1] == 1:
            return Poly2([[0.0]])
        return Poly2(self.c[:, 1:] * np.arange(1, self.c.shape[1])[None, :])

    def _pad(self, other):
        shape = (max(self.c.shape[0], other.c.shape[0]), max(self.c.shape[1], other.c.shape[1]))
        a = np.zeros(shape)
        b = np.zeros(shape)
        a[:self.c.shape[0], :self.c.shape[1]] = self.c
        b[:other.c.shape[0], :other.c.shape[1]] = other.c
        return a, b

    def __add__(self, other):
        if not isinstance(other, Poly2):
            other = Poly2([[float(other)]])
        a, b = self._pad(other)
        return Poly2(a + b)

    __radd__ = __add__

    def __neg__(self):
        return Poly2(-self.c)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly2) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly2):
            return Poly2(self.c * float(other))
        out = np.zeros((self.c.shape[0] + other.c.shape[0] - 1, self.c.shape[1] + other.c.shape[1] - 1))
        for i, j in zip(*np.nonzero(self.c)):
            out[i:i + other.c.shape[0], j:j + other.c.shape[1]] += self.c[i, j] * other.c
        return Poly2(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly2([[1.0]])
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Poly2) and self.c.shape == other.c.shape and np.array_equal(self.c, other.c)

    def __repr__(self):
        return f"Poly2({self.terms()})"


X = Poly2([[0.0], [1.0]])
Y = Poly2([[0.0, 1.0]])
