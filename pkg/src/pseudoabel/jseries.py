"""J-series: finite sums of compensators and fractional monomials.

A J-series over a spectrum ``lambdas`` is

    f(t) = sum a[p,q,i,j] * ell(p/lambda_i, q/lambda_j; t) + sum b[r,i] * t**(r/lambda_i)

where ``ell(x, y; t) = (t**x - t**y) / (x - y)``, continued by ``t**x log t`` on
the diagonal ``x == y``.  Coefficients carry a decay certificate
``|a| <= C rho**-(p+q)``, ``|b| <= C rho**-r`` with ``rho > 2``; the stored
terms are kept to total order ``order`` and everything past it is accounted
for by :func:`tail_bound`.

Points are given on the universal cover of the punctured disk as
:class:`SectorPoint` (modulus plus an unbounded argument), so that
``log t = log(modulus) + i*argument`` is single valued.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import CertificateLoss, SectorOutOfRange

TOL_SPEC = 1e-12
TOL_POLE = 1e-9
DEFAULT_ORDER = 24

_CHUNK = 256
# Taylor coefficients 1/(k+1)! of (e^z - 1)/z, highest first for Horner.
_PHI_TERMS = 24
_PHI_COEFS = np.array([1.0 / math.factorial(k + 1) for k in range(_PHI_TERMS)])[::-1]


def phi_stable(z):
    """Return ``(exp(z) - 1) / z`` with the removable singularity filled in.

    Uses a Taylor series for ``|z| < 1`` and ``expm1`` elsewhere; accepts
    scalars or arrays.
    """
    arr = np.asarray(z, dtype=complex)
    out = np.empty_like(arr)
    small = np.abs(arr) < 1.0
    zs = arr[small]
    acc = np.full_like(zs, _PHI_COEFS[0])
    for c in _PHI_COEFS[1:]:
        acc = acc * zs + c
    out[small] = acc
    zb = arr[~small]
    out[~small] = np.expm1(zb) / zb
    if out.ndim == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class Spectrum:
    """Ordered, pairwise distinct positive exponents ``lambda_1..lambda_n``."""

    lambdas: tuple

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam:
            raise ValueError("spectrum must be non-empty")
        if any(not (x > 0.0) or not math.isfinite(x) for x in lam):
            raise ValueError(f"spectrum entries must be positive: {lam}")
        for i in range(len(lam)):
            for j in range(i + 1, len(lam)):
                if abs(lam[i] - lam[j]) <= TOL_SPEC * max(lam[i], lam[j]):
                    raise ValueError(f"spectrum entries {i} and {j} coincide")
        object.__setattr__(self, "lambdas", lam)

    def __len__(self):
        return len(self.lambdas)

    def __getitem__(self, i):
        return self.lambdas[i]

    def __iter__(self):
        return iter(self.lambdas)

    @cached_property
    def inverse(self) -> np.ndarray:
        return 1.0 / np.array(self.lambdas)


@dataclass(frozen=True)
class SectorPoint:
    """``modulus * exp(i*argument)`` on the universal cover of the punctured disk."""

    modulus: float
    argument: float = 0.0

    def __post_init__(self):
        if not (self.modulus > 0.0):
            raise ValueError("modulus must be positive")

    @property
    def log(self) -> complex:
        return complex(math.log(self.modulus), self.argument)

    def rotated(self, kappa: float) -> "SectorPoint":
        return SectorPoint(self.modulus, self.argument + kappa)


@dataclass(frozen=True)
class AsymptoticTerm:
    alpha: float
    c1: complex
    c2: complex


def _freeze(d: Mapping, width: int) -> Mapping:
    out = {}
    for key, val in d.items():
        key = tuple(int(k) for k in key)
        if len(key) != width:
            raise ValueError(f"bad coefficient key {key}")
        val = complex(val)
        if val != 0:
            out[key] = out.get(key, 0j) + val
    return MappingProxyType(out)


@dataclass(frozen=True, eq=False)
class JSeries:
    """Truncated J-series with a decay certificate.

    ``a`` maps ``(p, q, i, j)`` to the coefficient of
    ``ell(p/lambda_i, q/lambda_j)`` and ``b`` maps ``(r, i)`` to the coefficient
    of ``t**(r/lambda_i)``; ``i, j`` are 0-based spectrum indices and all of
    ``p, q, r`` are at least ``1 - m``.  ``order=None`` marks an exact finite
    sum with no tail.  ``C=None`` picks the smallest constant compatible with
    the stored coefficients.
    """

    spectrum: Spectrum
    a: Mapping = field(default_factory=dict)
    b: Mapping = field(default_factory=dict)
    m: int = 0
    C: float | None = None
    rho: float = 3.0
    order: int | None = None

    def __post_init__(self):
        if not isinstance(self.spectrum, Spectrum):
            object.__setattr__(self, "spectrum", Spectrum(tuple(self.spectrum)))
        a = _freeze(self.a, 4)
        b = _freeze(self.b, 2)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        n = len(self.spectrum)
        lo = 1 - int(self.m)
        for p, q, i, j in a:
            if p < lo or q < lo or not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"a-index {(p, q, i, j)} out of range (m={self.m}, n={n})")
        for r, i in b:
            if r < lo or not (0 <= i < n):
                raise ValueError(f"b-index {(r, i)} out of range (m={self.m}, n={n})")
        if not (self.rho > 2.0):
            raise CertificateLoss(f"decay ratio rho={self.rho} must exceed 2")
        need = 0.0
        for (p, q, _, _), v in a.items():
            need = max(need, abs(v) * self.rho ** (p + q))
        for (r, _), v in b.items():
            need = max(need, abs(v) * self.rho ** r)
        if self.C is None:
            object.__setattr__(self, "C", need * (1 + 1e-12) if need > 0 else 1.0)
        elif not (self.C > 0 and math.isfinite(self.C)):
            raise CertificateLoss(f"bad certificate constant C={self.C}")
        elif need > self.C * (1 + 1e-9):
            raise ValueError(f"coefficients violate |coef| <= C rho^-index (need C >= {need:g})")

    # -- array views -------------------------------------------------------
    @cached_property
    def _a_arrays(self):
        inv = self.spectrum.inverse
        if not self.a:
            e = np.zeros(0)
            return np.zeros((0, 4), int), np.zeros(0, complex), e, e
        keys = np.array(list(self.a.keys()), dtype=int)
        coef = np.array(list(self.a.values()), dtype=complex)
        x = keys[:, 0] * inv[keys[:, 2]]
        y = keys[:, 1] * inv[keys[:, 3]]
        return keys, coef, x, y

    @cached_property
    def _b_arrays(self):
        inv = self.spectrum.inverse
        if not self.b:
            return np.zeros((0, 2), int), np.zeros(0, complex), np.zeros(0)
        keys = np.array(list(self.b.keys()), dtype=int)
        coef = np.array(list(self.b.values()), dtype=complex)
        return keys, coef, keys[:, 0] * inv[keys[:, 1]]

    @property
    def n(self) -> int:
        return len(self.spectrum)

    @property
    def is_zero(self) -> bool:
        return not self.a and not self.b

    @cached_property
    def lower_exponent(self) -> float:
        """Smallest exponent among stored terms (``inf`` for the zero series)."""
        _, _, x, y = self._a_arrays
        _, _, z = self._b_arrays
        vals = np.concatenate([x, y, z])
        return float(vals.min()) if vals.size else math.inf

    def is_real(self, tol: float = 0.0) -> bool:
        vals = list(self.a.values()) + list(self.b.values())
        return all(abs(v.imag) <= tol * max(1.0, abs(v)) for v in vals)

    def coefficient_scale(self) -> float:
        return float(sum(abs(v) for v in self.a.values()) + sum(abs(v) for v in self.b.values()))

    def progressions(self) -> set:
        """Spectrum indices carrying at least one pole of the Mellin transform."""
        out = {i for (_, i) in self.b}
        for (_, _, i, j) in self.a:
            out.update((i, j))
        return out

    def replace(self, **kw) -> "JSeries":
        return replace(self, **kw)

    def __call__(self, t, argument=0.0):
        """Vectorised evaluation at ``t * exp(i*argument)`` (no tail bound)."""
        t = np.asarray(t, dtype=float)
        L = np.log(t) + 1j * np.asarray(argument, dtype=float)
        vals, _ = _evaluate(self, np.atleast_1d(L).ravel())
        vals = vals.reshape(np.broadcast(t, np.asarray(argument)).shape)
        return complex(vals) if vals.ndim == 0 else vals

    def __repr__(self):
        return (f"JSeries(n={self.n}, m={self.m}, |a|={len(self.a)}, |b|={len(self.b)}, "
                f"C={self.C:.3g}, rho={self.rho}, order={self.order})")


# -- evaluation -------------------------------------------------------------

def _ell_scaled(x, y, L, shift):
    """``t**-shift * ell(x, y; t)`` for ``L = log t`` (broadcast L:(k,1), x,y:(n,))."""
    d = y - x
    re = (d * L).real
    choose_x = (re < 0) | ((re == 0) & (x <= y))
    e = np.where(choose_x, x, y)
    dd = np.where(choose_x, y - x, x - y)
    return np.exp((e - shift) * L) * L * phi_stable(dd * L)


def _evaluate(sigma: JSeries, L: np.ndarray, shift: float = 0.0, want_d: bool = False):
    """Return ``t**-shift f(t)`` and optionally ``t**-shift (t f'(t))`` at ``t = exp(L)``."""
    L = np.asarray(L, dtype=complex).ravel()
    vals = np.zeros(L.size, dtype=complex)
    dvals = np.zeros(L.size, dtype=complex) if want_d else None
    _, ac, ax, ay = sigma._a_arrays
    _, bc, bz = sigma._b_arrays
    for lo in range(0, L.size, _CHUNK):
        Lc = L[lo:lo + _CHUNK, None]
        acc = np.zeros(Lc.shape[0], dtype=complex)
        dacc = np.zeros(Lc.shape[0], dtype=complex)
        if ac.size:
            ell = _ell_scaled(ax, ay, Lc, shift)
            acc += ell @ ac
            if want_d:
                # t d/dt ell(x, y) = t**x + y * ell(x, y)
                dacc += (np.exp((ax - shift) * Lc) + ay * ell) @ ac
        if bc.size:
            mono = np.exp((bz - shift) * Lc)
            acc += mono @ bc
            if want_d:
                dacc += (mono * bz) @ bc
        vals[lo:lo + _CHUNK] = acc
        if want_d:
            dvals[lo:lo + _CHUNK] = dacc
    return vals, dvals


def compensator_eval(p: int, q: int, lam: float, mu: float, point) -> complex:
    """``ell_{p q lam mu}`` at a sector point, stable across resonance."""
    if not (lam > 0 and mu > 0):
        raise ValueError("lambda and mu must be positive")
    point = _as_point(point)
    x = np.array([p / lam])
    y = np.array([q / mu])
    return complex(_ell_scaled(x, y, np.array([[point.log]]), 0.0)[0, 0])


def _as_point(point) -> SectorPoint:
    if isinstance(point, SectorPoint):
        return point
    if isinstance(point, complex):
        return SectorPoint(abs(point), math.atan2(point.imag, point.real))
    return SectorPoint(float(point), 0.0)


def check_sector(sigma: JSeries, point: SectorPoint) -> None:
    """Raise :class:`SectorOutOfRange` if the decay certificate cannot control ``point``.

    For a real spectrum ``|t**x| = modulus**x`` does not depend on the
    argument, so only moduli above one can break convergence.
    """
    if point.modulus <= 1.0:
        return
    grow = math.log(point.modulus) * float(sigma.spectrum.inverse.max())
    if grow >= math.log(sigma.rho) - math.log(2.0):
        raise SectorOutOfRange(
            f"modulus {point.modulus} outside the convergence region (rho={sigma.rho})")


def _series_sum(coef_fn: Callable[[int], float], start: int, ratio: float) -> float:
    """Sum ``coef_fn(k) * ratio**k`` for ``k >= start`` until terms are negligible."""
    if ratio <= 0:
        return 0.0
    total, k = 0.0, start
    while True:
        term = coef_fn(k) * ratio ** k
        total += term
        if term <= 1e-18 * total or k > start + 20000:
            return total
        k += 1


def tail_bound(sigma: JSeries, point) -> float:
    """Bound on the contribution of the unstored terms of order above ``sigma.order``."""
    point = _as_point(point)
    if sigma.order is None:
        return 0.0
    P, m, n, rho, C = sigma.order, sigma.m, sigma.n, sigma.rho, sigma.C
    r0 = point.modulus
    absL = abs(point.log)
    inv = sigma.spectrum.inverse
    if r0 <= 1.0:
        g_low = r0 ** ((1 - m) * (inv.max() if m >= 1 else inv.min()))
        a_tail = C * n * n * absL * g_low * _series_sum(lambda k: k + 2 * m - 1, P + 1, 1.0 / rho)
        b_ratio = r0 ** inv.min() / rho
        b_tail = C * n * _series_sum(lambda k: 1.0, P + 1, b_ratio)
    else:
        grow = r0 ** inv.max()
        a_tail = C * n * n * absL * grow ** (m - 1) * _series_sum(lambda k: k + 2 * m - 1, P + 1, grow / rho)
        b_tail = C * n * _series_sum(lambda k: 1.0, P + 1, grow / rho)
    return float(a_tail + b_tail)


def jseries_eval(sigma: JSeries, point) -> tuple:
    """Evaluate the stored sum at ``point``; returns ``(value, tail_bound)``."""
    point = _as_point(point)
    check_sector(sigma, point)
    vals, _ = _evaluate(sigma, np.array([point.log]))
    return complex(vals[0]), tail_bound(sigma, point)


def jseries_derivative(sigma: JSeries, t: float) -> complex:
    """``f'(t)`` for real ``t`` in (0, 1), by termwise differentiation."""
    if not (0.0 < t < 1.0):
        raise ValueError("t must lie in (0, 1)")
    _, d = _evaluate(sigma, np.array([complex(math.log(t))]), want_d=True)
    return complex(d[0]) / t


# -- asymptotics --------------------------------------------------------------

def _asymptotic_pieces(sigma: JSeries):
    """Raw ``(exponent, c1, c2)`` contributions of every stored term."""
    _, ac, ax, ay = sigma._a_arrays
    _, bc, bz = sigma._b_arrays
    pieces = [(float(z), complex(c), 0j) for z, c in zip(bz, bc)]
    for x, y, c in zip(ax, ay, ac):
        x, y, c = float(x), float(y), complex(c)
        if abs(x - y) <= TOL_POLE:
            pieces.append((min(x, y), 0j, c))
        else:
            pieces.append((x, c / (x - y), 0j))
            pieces.append((y, c / (y - x), 0j))
    return pieces


def _aggregate(pieces) -> list:
    pieces = sorted(pieces, key=lambda p: p[0])
    out = []
    for e, c1, c2 in pieces:
        if out and e - out[-1][3] <= TOL_POLE:
            alpha, s1, s2, _ = out[-1]
            out[-1] = (alpha, s1 + c1, s2 + c2, e)
        else:
            out.append((e, c1, c2, e))
    return [AsymptoticTerm(alpha, c1, c2) for alpha, c1, c2, _ in out]


def asymptotic_terms(sigma: JSeries) -> list:
    """All aggregated terms ``t**alpha (c1 + c2 log t)`` of the expansion at 0."""
    return _aggregate(_asymptotic_pieces(sigma))


def asymptotic_coeffs(sigma: JSeries, alpha: float) -> tuple:
    """Coefficients ``(c1, c2)`` of ``t**alpha`` and ``t**alpha log t``."""
    c1 = c2 = 0j
    for e, p1, p2 in _asymptotic_pieces(sigma):
        if abs(e - alpha) <= TOL_POLE:
            c1 += p1
            c2 += p2
    return c1, c2


def leading_term(sigma: JSeries, rel_tol: float = 1e-13) -> AsymptoticTerm | None:
    """First aggregated term whose coefficients do not cancel to rounding level."""
    scale = max(sigma.coefficient_scale(), 1e-300)
    for term in asymptotic_terms(sigma):
        if abs(term.c1) + abs(term.c2) > rel_tol * scale:
            return term
    return None


def admissible_cut(sigma: JSeries, cutoff: float) -> float:
    """Nearest point to ``cutoff`` at distance ``>= h/(2n)`` from every exponent
    ``k/lambda_i`` (``k >= 1-m``), where ``h = 1/max(lambda)`` is the finest
    progression step."""
    inv = sigma.spectrum.inverse
    n = sigma.n
    h = float(inv.min())
    gap = h / (2 * n)
    lo_idx = 1 - sigma.m
    window = (cutoff - 3 * h, cutoff + 3 * h)
    pts = []
    for s in inv:
        k0 = max(lo_idx, math.floor(window[0] / s))
        k1 = math.ceil(window[1] / s)
        pts.extend(k * s for k in range(k0, k1 + 1))
    pts = sorted(set(pts))
    if not pts:
        return float(cutoff)
    candidates = []
    bounds = [-math.inf] + pts + [math.inf]
    for left, right in zip(bounds[:-1], bounds[1:]):
        a, b = left + gap, right - gap
        if a <= b:
            candidates.append(min(max(cutoff, a), b))
    if not candidates:
        widths = [(r - l, 0.5 * (l + r)) for l, r in zip(pts[:-1], pts[1:])]
        return max(widths)[1]
    return float(min(candidates, key=lambda c: abs(c - cutoff)))


@dataclass(frozen=True)
class PartialSum:
    """Truncated asymptotic expansion with a remainder envelope ``K t**cut``."""

    terms: tuple
    cut: float
    constant: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        L = np.log(t)
        out = np.zeros(t.shape, dtype=complex)
        for term in self.terms:
            out = out + t ** term.alpha * (term.c1 + term.c2 * L)
        return out

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        return self.constant * t ** self.cut


def asymptotic_partial_sum(sigma: JSeries, cutoff: float) -> PartialSum:
    """Terms with exponent below the admissible cut nearest ``cutoff``.

    The envelope bounds ``|f(t) - partial(t)|`` on (0, 1) for the stored sum:
    every remaining piece ``c t**e (log t)**k`` with ``e > cut`` satisfies
    ``|c| t**(e-cut) |log t|**k <= |c| / (e (e - cut))**k``.
    """
    cut = admissible_cut(sigma, cutoff)
    below, K = [], 0.0
    for e, c1, c2 in _asymptotic_pieces(sigma):
        if e < cut:
            below.append((e, c1, c2))
        else:
            K += abs(c1)
            if c2 != 0:
                K += abs(c2) / (math.e * (e - cut))
    return PartialSum(tuple(_aggregate(below)), cut, K)


# -- rotation -----------------------------------------------------------------

def kernel_certificate(sigma: JSeries, value_bound: float, deriv_bound: float) -> float:
    """New certificate constant after a kernel with ``|K| <= value_bound`` and
    ``|K'| <= deriv_bound`` on the real axis acts on the coefficients."""
    rho, n, m = sigma.rho, sigma.n, sigma.m
    return sigma.C * (value_bound + 2.0 * deriv_bound * n * rho ** m / (rho - 1.0))


def rotate_series(sigma: JSeries, kappa: float) -> JSeries:
    """J-series of ``f(exp(i*kappa) t)``.

    Double terms pick up the mean of the two rotation factors; the mismatch
    goes half to each of the two monomials through the divided difference
    ``(e^{i k x} - e^{i k y})/(x - y) = i k e^{i k y} phi(i k (x - y))``.
    """
    kappa = float(kappa)
    if not math.isfinite(kappa):
        raise CertificateLoss("rotation angle must be finite")
    if kappa == 0.0:
        return sigma
    akeys, ac, ax, ay = sigma._a_arrays
    bkeys, bc, bz = sigma._b_arrays
    new_b: dict = {}
    for (r, i), c, z in zip(map(tuple, bkeys), bc, bz):
        new_b[(r, i)] = new_b.get((r, i), 0j) + np.exp(1j * kappa * z) * c
    new_a = {}
    if ac.size:
        ex = np.exp(1j * kappa * ax)
        ey = np.exp(1j * kappa * ay)
        dd = 1j * kappa * ey * phi_stable(1j * kappa * (ax - ay))
        for (p, q, i, j), c, fx, fy, d in zip(map(tuple, akeys), ac, ex, ey, dd):
            new_a[(p, q, i, j)] = 0.5 * (fx + fy) * c
            new_b[(p, i)] = new_b.get((p, i), 0j) + 0.5 * d * c
            new_b[(q, j)] = new_b.get((q, j), 0j) + 0.5 * d * c
    C = kernel_certificate(sigma, 1.0, abs(kappa))
    if not math.isfinite(C):
        raise CertificateLoss("rotated certificate overflowed")
    return JSeries(sigma.spectrum, new_a, new_b, m=sigma.m, C=C, rho=sigma.rho, order=sigma.order)


def kappa_max(sigma: JSeries) -> float:
    """Largest admissible rotation angle; unbounded for real spectra."""
    return math.inf


# -- serialisation ------------------------------------------------------------

def to_dict(sigma: JSeries) -> dict:
    return {
        "spectrum": list(sigma.spectrum.lambdas),
        "m": sigma.m,
        "C": sigma.C,
        "rho": sigma.rho,
        "order": sigma.order,
        "a": [{"p": p, "q": q, "i": i, "j": j, "re": v.real, "im": v.imag}
              for (p, q, i, j), v in sigma.a.items()],
        "b": [{"r": r, "i": i, "re": v.real, "im": v.imag} for (r, i), v in sigma.b.items()],
    }


def from_dict(d: Mapping) -> JSeries:
    a = {(t["p"], t["q"], t["i"], t["j"]): complex(t["re"], t.get("im", 0.0)) for t in d.get("a", [])}
    b = {(t["r"], t["i"]): complex(t["re"], t.get("im", 0.0)) for t in d.get("b", [])}
    return JSeries(Spectrum(tuple(d["spectrum"])), a, b, m=int(d.get("m", 0)),
                   C=d.get("C"), rho=float(d.get("rho", 3.0)), order=d.get("order"))


def dumps(sigma: JSeries) -> str:
    # json writes floats with repr(), which round-trips bit-exactly
    return json.dumps(to_dict(sigma), indent=1)


def loads(text: str) -> JSeries:
    return from_dict(json.loads(text))


def coefficients_equal(s1: JSeries, s2: JSeries, atol: float = 0.0) -> bool:
    if s1.spectrum != s2.spectrum or s1.m != s2.m:
        return False
    for mine, theirs in ((s1.a, s2.a), (s1.b, s2.b)):
        for key in set(mine) | set(theirs):
            if abs(mine.get(key, 0j) - theirs.get(key, 0j)) > atol:
                return False
    return True


def monomial(spectrum: Iterable[float], terms: Mapping, **kw) -> JSeries:
    """Convenience: b-terms only, ``terms`` maps ``(r, i)`` to coefficient."""
    return JSeries(Spectrum(tuple(spectrum)), {}, dict(terms), **kw)
