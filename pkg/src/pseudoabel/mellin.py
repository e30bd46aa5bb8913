"""Mellin transforms of J-series and kernel operators acting on pole data.

With ``M u(s) = int_0^1 t**(s-1) u(t) dt`` one has ``M t**x = 1/(s+x)`` and
``M ell(x, y) = -1/((s+x)(s+y))``.  A :class:`MellinRep` stores the
partial-fraction data literally: ``doubles[(p,q,i,j)] = c`` stands for
``c/((s+x)(s+y))`` and ``simples[(r,i)] = b`` for ``b/(s+r/lambda_i)``, so
the forward map negates the compensator coefficients and copies the rest.

Kernels are entire functions ``K`` bounded on horizontal strips.  Applying a
kernel multiplies the transform by ``K`` and keeps only the principal parts,
which is how rotations (``K = exp(-i k s)``) and the Petrov operator
(``K = sin(k s)``) act on J-series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np
from scipy import integrate

from .errors import ContourInvalid, DivergentIntegral, NearPole
from .jseries import TOL_POLE, JSeries, _evaluate, kernel_certificate, phi_stable


@dataclass(frozen=True, eq=False)
class MellinRep:
    spectrum: object
    doubles: Mapping = field(default_factory=dict)
    simples: Mapping = field(default_factory=dict)
    m: int = 0
    C: float = 1.0
    rho: float = 3.0
    order: int | None = None

    def __post_init__(self):
        d = {tuple(int(k) for k in key): complex(v) for key, v in self.doubles.items() if v != 0}
        s = {tuple(int(k) for k in key): complex(v) for key, v in self.simples.items() if v != 0}
        object.__setattr__(self, "doubles", MappingProxyType(d))
        object.__setattr__(self, "simples", MappingProxyType(s))

    @cached_property
    def _arrays(self):
        inv = self.spectrum.inverse
        if self.doubles:
            dk = np.array(list(self.doubles.keys()), dtype=int)
            dc = np.array(list(self.doubles.values()), dtype=complex)
            dx = dk[:, 0] * inv[dk[:, 2]]
            dy = dk[:, 1] * inv[dk[:, 3]]
        else:
            dk, dc, dx, dy = np.zeros((0, 4), int), np.zeros(0, complex), np.zeros(0), np.zeros(0)
        if self.simples:
            sk = np.array(list(self.simples.keys()), dtype=int)
            sc = np.array(list(self.simples.values()), dtype=complex)
            sz = sk[:, 0] * inv[sk[:, 1]]
        else:
            sk, sc, sz = np.zeros((0, 2), int), np.zeros(0, complex), np.zeros(0)
        return dk, dc, dx, dy, sk, sc, sz

    @property
    def is_empty(self) -> bool:
        return not self.doubles and not self.simples

    def pole_locations(self) -> np.ndarray:
        _, _, dx, dy, _, _, sz = self._arrays
        return -np.concatenate([dx, dy, sz])

    def rightmost_pole(self) -> float:
        poles = self.pole_locations()
        return float(poles.max()) if poles.size else -math.inf

    def coefficient_scale(self) -> float:
        return float(sum(map(abs, self.doubles.values())) + sum(map(abs, self.simples.values())))

    def __call__(self, s):
        return mellin_eval_at(self, s)


def mellin_forward(sigma: JSeries) -> MellinRep:
    return MellinRep(sigma.spectrum, {k: -v for k, v in sigma.a.items()}, dict(sigma.b),
                     m=sigma.m, C=sigma.C, rho=sigma.rho, order=sigma.order)


def mellin_to_series(g: MellinRep) -> JSeries:
    sigma = JSeries(g.spectrum, {k: -v for k, v in g.doubles.items()}, dict(g.simples),
                    m=g.m, rho=g.rho, order=g.order)
    # keep the propagated certificate unless the stored terms need more
    return sigma.replace(C=max(sigma.C, g.C))


def rep_to_dict(g: MellinRep) -> dict:
    """JSON layout mirroring the series one, with the pole data under ``poles``."""
    return {
        "spectrum": list(g.spectrum.lambdas), "m": g.m, "C": g.C, "rho": g.rho, "order": g.order,
        "poles": {
            "double": [{"p": p, "q": q, "i": i, "j": j, "re": v.real, "im": v.imag}
                       for (p, q, i, j), v in g.doubles.items()],
            "simple": [{"r": r, "i": i, "re": v.real, "im": v.imag} for (r, i), v in g.simples.items()],
        },
    }


def rep_from_dict(d: Mapping) -> MellinRep:
    from .jseries import Spectrum

    poles = d.get("poles", {})
    dbl = {(t["p"], t["q"], t["i"], t["j"]): complex(t["re"], t.get("im", 0.0)) for t in poles.get("double", [])}
    smp = {(t["r"], t["i"]): complex(t["re"], t.get("im", 0.0)) for t in poles.get("simple", [])}
    return MellinRep(Spectrum(tuple(d["spectrum"])), dbl, smp, m=int(d.get("m", 0)),
                     C=float(d.get("C") or 1.0), rho=float(d.get("rho", 3.0)), order=d.get("order"))


def _eval_rep(g: MellinRep, s: np.ndarray) -> np.ndarray:
    _, dc, dx, dy, _, sc, sz = g._arrays
    s = np.asarray(s, dtype=complex).ravel()
    out = np.zeros(s.size, dtype=complex)
    for lo in range(0, s.size, 512):
        sc_ = s[lo:lo + 512, None]
        acc = np.zeros(sc_.shape[0], dtype=complex)
        if dc.size:
            acc += (1.0 / ((sc_ + dx) * (sc_ + dy))) @ dc
        if sc.size:
            acc += (1.0 / (sc_ + sz)) @ sc
        out[lo:lo + 512] = acc
    return out


def mellin_eval_at(g: MellinRep, s) -> complex:
    s = complex(s)
    poles = g.pole_locations()
    if poles.size and np.min(np.abs(s - poles)) <= 1e-9:
        raise NearPole(f"s={s} is within 1e-9 of a pole")
    return complex(_eval_rep(g, np.array([s]))[0])


def principal_parts(g: MellinRep) -> list:
    """Aggregated Laurent data ``(pole, c_-2, c_-1)`` sorted by pole location."""
    _, dc, dx, dy, _, sc, sz = g._arrays
    pieces = [(-float(z), 0j, complex(c)) for z, c in zip(sz, sc)]
    for x, y, c in zip(dx, dy, dc):
        x, y, c = float(x), float(y), complex(c)
        if abs(x - y) <= TOL_POLE:
            pieces.append((-min(x, y), c, 0j))
        else:
            pieces.append((-x, 0j, c / (y - x)))
            pieces.append((-y, 0j, c / (x - y)))
    pieces.sort(key=lambda p: p[0])
    out = []
    for pole, c2, c1 in pieces:
        if out and pole - out[-1][3] <= TOL_POLE:
            p0, s2, s1, _ = out[-1]
            out[-1] = (p0, s2 + c2, s1 + c1, pole)
        else:
            out.append((pole, c2, c1, pole))
    return [(p, c2, c1) for p, c2, c1, _ in out]


# -- numerical forward transform ---------------------------------------------

def mellin_numeric(f, s, lowest_exponent: float | None = None, tol: float = 1e-11) -> tuple:
    """``int_0^1 t**(s-1) f(t) dt`` by quadrature in ``u = -log t``.

    ``f`` is a :class:`JSeries` or a callable on (0, 1].  Returns
    ``(value, abserr)``.
    """
    s = complex(s)
    if isinstance(f, JSeries):
        lowest_exponent = f.lower_exponent if lowest_exponent is None else lowest_exponent
        series = f
        shift = lowest_exponent if math.isfinite(lowest_exponent) else 0.0

        def integrand(u):
            # t**(s-1) f(t) dt = exp(-u (s + shift)) * t**-shift f(t) du, with log t = -u
            val = _evaluate(series, np.array([complex(-u)]), shift)[0][0]
            return complex(np.exp(-u * (s + shift)) * val)
    else:
        def integrand(u):
            t = math.exp(-u)
            return complex(np.exp(-u * s) * f(t)) if t > 0.0 else 0j
    if lowest_exponent is not None and math.isfinite(lowest_exponent):
        if s.real <= -lowest_exponent + 0.1:
            raise DivergentIntegral(
                f"Re s={s.real} too small for lowest exponent {lowest_exponent}")

    val, err = integrate.quad(integrand, 0.0, math.inf, epsabs=tol, epsrel=1e-12,
                              limit=400, complex_func=True)
    return complex(val), float(abs(err))


# -- contour inversion ---------------------------------------------------------

_GL_N = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)
# rows map node values to Legendre coefficients on [-1, 1]
_LEG_PROJ = np.array([(2 * k + 1) / 2.0 * _GL_W * np.polynomial.legendre.Legendre.basis(k)(_GL_X)
                      for k in range(_GL_N)])


@dataclass(frozen=True)
class ContourSpec:
    """Truncated boundary of the semistrip ``Re s <= abscissa, |Im s| <= 1``.

    The horizontal rays run from ``abscissa`` down to ``abscissa - length``.
    """

    abscissa: float
    length: float
    quad_tol: float = 1e-8
    panel: float = 0.5

    @classmethod
    def for_rep(cls, g: MellinRep, t_max: float, quad_tol: float = 1e-8) -> "ContourSpec":
        if not (0.0 < t_max < 1.0):
            raise ContourInvalid("inverse Mellin transform needs 0 < t < 1")
        right = g.rightmost_pole()
        abscissa = (right if math.isfinite(right) else 0.0) + 1.0
        return cls(abscissa, 1.0 + 40.0 / abs(math.log(t_max)), quad_tol)

    def validate(self, g: MellinRep) -> None:
        right = g.rightmost_pole()
        if math.isfinite(right) and self.abscissa - right < 0.5:
            raise ContourInvalid(
                f"vertical segment Re s={self.abscissa} does not clear the pole at {right}")
        if not (self.length > 0 and self.panel > 0):
            raise ContourInvalid("contour length and panel width must be positive")

    def nodes(self):
        """Quadrature nodes ``s`` and weights ``w ds`` shaped (panels, 16)."""
        c = self.abscissa
        npan = max(1, math.ceil(self.length / self.panel))
        left = c - npan * self.panel
        edges = np.linspace(left, c, npan + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * self.panel
        u = mid + half * _GL_X
        w = half * np.broadcast_to(_GL_W, u.shape)
        vedges = np.linspace(-1.0, 1.0, 5)
        vmid = 0.5 * (vedges[1:] + vedges[:-1])[:, None]
        v = vmid + 0.25 * _GL_X
        vw = 0.25 * np.broadcast_to(_GL_W, v.shape)
        s = np.concatenate([u - 1j, c + 1j * v, u[::-1, ::-1] + 1j])
        wds = np.concatenate([w.astype(complex), 1j * vw, -w[::-1, ::-1].astype(complex)])
        return s, wds


def inverse_mellin(g: MellinRep, t, contour: ContourSpec | None = None, return_error: bool = False):
    """``(1/2 pi i) int_gamma t**-s g(s) ds`` for real ``0 < t < 1``.

    ``t`` may be an array; the transform is evaluated once on a contour long
    enough for the largest ``t``.  With ``return_error`` the estimated
    absolute error (panel spectral tail plus ray truncation) is returned too.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0) or np.any(t_arr >= 1):
        raise ContourInvalid("inverse Mellin transform needs 0 < t < 1")
    if g.is_empty:
        zero = np.zeros(t_arr.shape, complex)
        res = (zero, np.zeros(t_arr.shape)) if return_error else zero
        return _unwrap(res, t)
    if contour is None:
        contour = ContourSpec.for_rep(g, float(t_arr.max()))
    contour.validate(g)
    vals, errs = _contour_integral(g, t_arr, contour)
    panel = contour.panel
    tries = 0
    while np.max(errs) > contour.quad_tol and tries < 3:
        panel /= 2
        tries += 1
        refined = ContourSpec(contour.abscissa, contour.length, contour.quad_tol, panel)
        vals, errs = _contour_integral(g, t_arr, refined)
    return _unwrap((vals, errs) if return_error else vals, t)


def _unwrap(res, t):
    if np.ndim(t) == 0:
        if isinstance(res, tuple):
            return complex(res[0][0]), float(res[1][0])
        return complex(res[0])
    return res


def _contour_integral(g: MellinRep, t_arr: np.ndarray, contour: ContourSpec):
    s, wds = contour.nodes()
    gs = _eval_rep(g, s).reshape(s.shape)
    gmax = float(np.max(np.abs(gs)))
    vals = np.empty(t_arr.size, complex)
    errs = np.empty(t_arr.size)
    for k, tk in enumerate(t_arr):
        logt = math.log(tk)
        integrand = np.exp(-s * logt) * gs
        vals[k] = np.sum(wds * integrand) / (2j * math.pi)
        # spectral tail of each panel's Legendre expansion
        leg = integrand @ _LEG_PROJ.T
        scale = np.abs(wds).sum(axis=1)
        panel_err = scale * (np.abs(leg[:, -1]) + np.abs(leg[:, -2]))
        trunc = gmax * math.exp(-(contour.length - contour.abscissa) * abs(logt)) / (math.pi * abs(logt))
        errs[k] = panel_err.sum() / (2 * math.pi) + trunc
    return vals, errs


# -- kernels ---------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    """Entire function with value, derivative and divided-difference evaluators.

    ``bounds`` are ``(sup |K|, sup |K'|)`` on the real axis and feed the
    decay-certificate update; ``is_zero`` flags exact zeros of ``K`` so that
    the pole data they annihilate is removed exactly instead of surviving as
    rounding noise.
    """

    value: Callable
    deriv: Callable
    divdiff: Callable
    bounds: tuple = (1.0, 0.0)
    strip_bounded: bool = True
    is_zero: Callable | None = None
    name: str = "K"

    def __mul__(self, other: "Kernel") -> "Kernel":
        k1, k2 = self, other

        def dd(u, v):
            return k1.value(u) * k2.divdiff(u, v) + k1.divdiff(u, v) * k2.value(v)

        def zero(s):
            z = np.zeros(np.shape(s), bool)
            for k in (k1, k2):
                if k.is_zero is not None:
                    z = z | k.is_zero(s)
            return z

        return Kernel(
            value=lambda s: k1.value(s) * k2.value(s),
            deriv=lambda s: k1.deriv(s) * k2.value(s) + k1.value(s) * k2.deriv(s),
            divdiff=dd,
            bounds=(k1.bounds[0] * k2.bounds[0], k1.bounds[0] * k2.bounds[1] + k1.bounds[1] * k2.bounds[0]),
            strip_bounded=k1.strip_bounded and k2.strip_bounded,
            is_zero=zero if (k1.is_zero or k2.is_zero) else None,
            name=f"({k1.name})*({k2.name})",
        )


def kernel_identity() -> Kernel:
    return Kernel(
        value=lambda s: np.ones(np.shape(s), complex),
        deriv=lambda s: np.zeros(np.shape(s), complex),
        divdiff=lambda u, v: np.zeros(np.broadcast(u, v).shape, complex),
        bounds=(1.0, 0.0),
        name="1",
    )


def kernel_sin(kappa: float) -> Kernel:
    """``K(s) = sin(kappa s)``; divided differences via the product-to-sum identity."""
    kappa = float(kappa)

    def divdiff(u, v):
        u = np.asarray(u, complex)
        v = np.asarray(v, complex)
        return kappa * np.cos(0.5 * kappa * (u + v)) * np.sinc(kappa * (u - v) / (2 * math.pi))

    def is_zero(s):
        s = np.asarray(s)
        if kappa == 0.0:
            return np.ones(s.shape, bool)
        w = kappa * np.real(s) / math.pi
        return (np.abs(np.imag(s)) == 0) & (np.abs(w - np.round(w)) <= 1e-10 * np.maximum(1.0, np.abs(w)))

    return Kernel(
        value=lambda s: np.sin(kappa * np.asarray(s, complex)),
        deriv=lambda s: kappa * np.cos(kappa * np.asarray(s, complex)),
        divdiff=divdiff,
        bounds=(1.0, abs(kappa)),
        is_zero=is_zero,
        name=f"sin({kappa:g}s)",
    )


def kernel_exp(kappa: float) -> Kernel:
    """``K(s) = exp(-i kappa s)``, the Mellin image of rotation by ``kappa``."""
    kappa = float(kappa)

    def divdiff(u, v):
        u = np.asarray(u, complex)
        v = np.asarray(v, complex)
        return -1j * kappa * np.exp(-1j * kappa * v) * phi_stable(-1j * kappa * (u - v))

    return Kernel(
        value=lambda s: np.exp(-1j * kappa * np.asarray(s, complex)),
        deriv=lambda s: -1j * kappa * np.exp(-1j * kappa * np.asarray(s, complex)),
        divdiff=divdiff,
        bounds=(1.0, abs(kappa)),
        name=f"exp(-i{kappa:g}s)",
    )


def apply_kernel(g: MellinRep, K: Kernel) -> MellinRep:
    """Principal part of ``K(s) g(s)``, written back in the same pole basis.

    A double term ``c/((s+x)(s+y))`` becomes ``(K(-x)+K(-y))/2`` times itself
    plus ``c/2 * K[-x,-y]`` on each of ``1/(s+x)`` and ``1/(s+y)``, where
    ``K[u,v]`` is the divided difference.  When ``K`` vanishes at one of the
    two poles the term collapses to a single simple pole; when it vanishes at
    both, only a coinciding (second order) pole leaves ``K'`` behind.
    """
    if not K.strip_bounded:
        raise ValueError("kernel must be bounded on horizontal strips")
    dk, dc, dx, dy, sk, sc, sz = g._arrays
    simples: dict = {}
    doubles: dict = {}

    if sc.size:
        kv = K.value(-sz)
        zero = K.is_zero(-sz) if K.is_zero else np.zeros(sz.shape, bool)
        for key, c, val, z in zip(map(tuple, sk), sc, kv, zero):
            if not z:
                simples[key] = simples.get(key, 0j) + val * c

    if dc.size:
        kx, ky = K.value(-dx), K.value(-dy)
        dd = K.divdiff(-dx, -dy)
        kd = K.deriv(-dx)
        if K.is_zero:
            zx, zy = K.is_zero(-dx), K.is_zero(-dy)
        else:
            zx = zy = np.zeros(dx.shape, bool)
        same = np.abs(dx - dy) <= TOL_POLE
        for n, (p, q, i, j) in enumerate(map(tuple, dk)):
            c = dc[n]
            kx_, ky_ = (p, i), (q, j)
            if zx[n] and zy[n]:
                if same[n]:
                    simples[kx_] = simples.get(kx_, 0j) + kd[n] * c
            elif zy[n]:
                simples[kx_] = simples.get(kx_, 0j) + dd[n] * c
            elif zx[n]:
                simples[ky_] = simples.get(ky_, 0j) + dd[n] * c
            else:
                doubles[(p, q, i, j)] = 0.5 * (kx[n] + ky[n]) * c
                simples[kx_] = simples.get(kx_, 0j) + 0.5 * dd[n] * c
                simples[ky_] = simples.get(ky_, 0j) + 0.5 * dd[n] * c

    sigma_like = JSeries(g.spectrum, {}, {}, m=g.m, C=g.C, rho=g.rho)
    C = kernel_certificate(sigma_like, *K.bounds)
    return MellinRep(g.spectrum, doubles, simples, m=g.m, C=max(C, 1e-300), rho=g.rho, order=g.order)


def petrov_series(sigma: JSeries, kappa: float) -> JSeries:
    """J-series of ``(f(t e^{-i kappa}) - f(t e^{i kappa})) / 2i``."""
    return mellin_to_series(apply_kernel(mellin_forward(sigma), kernel_sin(kappa)))


def rotate_via_kernel(sigma: JSeries, kappa: float) -> JSeries:
    """Rotation ``f(e^{i kappa} t)`` computed through the Mellin side."""
    return mellin_to_series(apply_kernel(mellin_forward(sigma), kernel_exp(kappa)))
