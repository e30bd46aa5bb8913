"""Zero counting for real J-functions, Petrov inequality checks and the
progression-by-progression reduction.

Real zeros are located on a grid in ``L = log t`` for the rescaled function
``h(L) = t**-alpha f(t)`` (``alpha`` the leading exponent), which keeps
magnitudes of order one all the way down to ``t -> 0``.  Below the
zero-free floor ``eps*`` the leading asymptotic term dominates the stored
remainder by a factor 10, so no zero can hide there.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateLeadingTerm, ResidualNotZero, ZeroOnContour
from .jseries import (JSeries, SectorPoint, _asymptotic_pieces, _evaluate, check_sector,
                      leading_term, tail_bound)
from .mellin import petrov_series

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ZeroRecord:
    location: float
    multiplicity: int
    residual: float


@dataclass(frozen=True)
class ZeroCountReport:
    count: int
    certified: bool
    zeros: tuple = ()
    method: str = "sign-scan"
    margin: float = 0.0
    flagged: tuple = ()
    interval: tuple = (0.0, 1.0)

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "certified": self.certified,
            "method": self.method,
            "zeros": [{"t": z.location, "multiplicity": z.multiplicity, "residual": z.residual}
                      for z in self.zeros],
            "margin": self.margin,
            "flagged": [list(f) for f in self.flagged],
            "interval": list(self.interval),
        }


@dataclass(frozen=True)
class SectorContour:
    kappa: float
    epsilon_inner: float
    samples: int = 64

    def __post_init__(self):
        if not (0.0 < self.epsilon_inner < 1.0):
            raise ValueError("inner radius must lie in (0, 1)")
        if not (0.0 < self.kappa <= math.pi):
            raise ValueError("sector half-angle must lie in (0, pi]")


# -- scaled real evaluation -----------------------------------------------------

class _Scaled:
    """``h(L) = exp(-shift L) f(exp L)``, its L-derivative and a rounding-noise level."""

    def __init__(self, sigma: JSeries, shift: float):
        self.sigma = sigma
        self.shift = shift
        self.mag = JSeries(sigma.spectrum, {k: -abs(v) for k, v in sigma.a.items()},
                           {k: abs(v) for k, v in sigma.b.items()}, m=sigma.m, rho=sigma.rho)
        _, _, ax, ay = sigma._a_arrays
        _, _, bz = sigma._b_arrays
        ex = np.concatenate([ax, ay, bz])
        self.e_max = float(ex.max()) if ex.size else 0.0

    def __call__(self, L):
        L = np.atleast_1d(np.asarray(L, dtype=float)).astype(complex)
        v, d = _evaluate(self.sigma, L, self.shift, want_d=True)
        return v.real, (d - self.shift * v).real

    def h(self, L: float) -> float:
        return float(self(L)[0][0])

    def dh(self, L: float) -> float:
        return float(self(L)[1][0])

    def noise(self, L):
        L = np.atleast_1d(np.asarray(L, dtype=float)).astype(complex)
        scale = np.abs(_evaluate(self.mag, L, self.shift)[0])
        return 256 * _EPS * scale, 256 * _EPS * scale * (self.e_max + abs(self.shift) + 1.0)


def _log_grid(Lmin: float, Lmax: float, rate_max: float, alpha: float) -> np.ndarray:
    """Grid in ``L`` fine enough for ``exp((e - alpha) L)`` with ``e <= alpha + rate_max``;
    terms with ``(e - alpha)|L| > 46`` are negligible, which coarsens the grid for large |L|."""
    pts = [Lmax]
    L = Lmax
    while L > Lmin:
        rate = max(min(rate_max, 46.0 / max(abs(L), 1e-12)), 4.0 / (abs(L) + 1.0))
        L -= 0.2 / rate
        pts.append(max(L, Lmin))
    return np.array(pts[::-1])


def zero_free_floor(sigma: JSeries, factor: float = 10.0) -> float | None:
    """``log eps*`` such that the leading term beats ``factor`` times the remainder
    envelope on (0, eps*); ``None`` for the zero series."""
    lead = leading_term(sigma)
    if lead is None:
        return None
    above = sorted({round(e, 15) for e, _, _ in _asymptotic_pieces(sigma) if e > lead.alpha + 1e-9})
    if not above:
        return math.log(0.5)
    cut = 0.5 * (lead.alpha + above[0])
    K = 0.0
    for e, c1, c2 in _asymptotic_pieces(sigma):
        if e >= cut:
            K += abs(c1) + (abs(c2) / (math.e * (e - cut)) if c2 != 0 else 0.0)
        elif abs(e - lead.alpha) > 1e-9:
            K += abs(c1) + abs(c2)  # rounding-level leftovers below the lead
    c1, c2 = lead.c1, lead.c2
    vertex = -(c1 * c2.conjugate()).real / abs(c2) ** 2 if c2 != 0 else math.inf
    L = math.log(0.5)
    for _ in range(200):
        lead_val = abs(c1 + c2 * L)
        env = K * math.exp((cut - lead.alpha) * L)
        if lead_val >= factor * env and L < vertex - 1.0:
            return L
        L *= 1.5
    return None


# -- real zero counting ------------------------------------------------------------

def _count_on(scaled: _Scaled, Lmin: float, Lmax: float, lead_alpha: float,
              exclude_right_endpoint: bool = False) -> ZeroCountReport:
    grid = _log_grid(Lmin, Lmax, max(scaled.e_max - lead_alpha, 1.0), lead_alpha)
    hv, dv = scaled(grid)
    nh, nd = scaled.noise(grid)
    zeros: list = []
    flagged: list = []
    shift = scaled.shift

    def record(L0, mult):
        t0 = math.exp(L0)
        resid = abs(scaled.h(L0)) * t0 ** shift if t0 > 0 else 0.0
        zeros.append(ZeroRecord(t0, mult, resid))

    sign = np.sign(hv)
    sign[np.abs(hv) <= nh] = 0
    if exclude_right_endpoint and sign[-1] == 0:
        flagged.append(("endpoint-zero", math.exp(grid[-1]), math.exp(grid[-1])))
        sign[-1] = sign[-2] if len(sign) > 1 else 1
    # exact grid hits: treat as tiny intervals around the node
    for k in np.nonzero(sign == 0)[0]:
        if 0 < k < len(grid) - 1:
            flagged.append(("grid-hit", math.exp(grid[k - 1]), math.exp(grid[k + 1])))

    root_brackets = []
    for k in range(len(grid) - 1):
        if sign[k] * sign[k + 1] < 0:
            L0 = brentq(scaled.h, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * _EPS)
            root_brackets.append((k, L0))
            _, ndL = scaled.noise(L0)
            if abs(scaled.dh(L0)) > 1e3 * ndL[0]:
                record(L0, 1)
            else:
                record(L0, 1)
                flagged.append(("possible-higher-multiplicity", math.exp(grid[k]), math.exp(grid[k + 1])))

    dsign = np.sign(dv)
    for k in range(len(grid) - 1):
        if dsign[k] * dsign[k + 1] >= 0:
            continue
        Lc = brentq(scaled.dh, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * _EPS)
        hc = scaled.h(Lc)
        nhc = scaled.noise(Lc)[0][0]
        has_root = any(kk == k for kk, _ in root_brackets)
        if abs(hc) <= nhc:
            if has_root:
                flagged.append(("odd-multiplicity-cluster", math.exp(grid[k]), math.exp(grid[k + 1])))
            else:
                record(Lc, 2)
            continue
        if has_root:
            continue
        if sign[k] != 0 and np.sign(hc) == -sign[k] and sign[k + 1] == sign[k]:
            for lo, hi in ((grid[k], Lc), (Lc, grid[k + 1])):
                L0 = brentq(scaled.h, lo, hi, xtol=1e-15, rtol=4 * _EPS)
                record(L0, 1)
        elif abs(hc) <= 1e3 * nhc:
            flagged.append(("unresolved-dip", math.exp(grid[k]), math.exp(grid[k + 1])))

    free = np.abs(hv) > nh
    margin = float(np.min(np.abs(hv[free]))) if np.any(free) else 0.0
    zeros.sort(key=lambda z: z.location)
    count = sum(z.multiplicity for z in zeros)
    uncertain = [f for f in flagged if f[0] != "endpoint-zero"]
    return ZeroCountReport(count, not uncertain, tuple(zeros), "sign-scan", margin, tuple(flagged),
                           (math.exp(Lmin), math.exp(Lmax)))


def count_zeros_interval(sigma: JSeries, t_min: float, t_max: float) -> ZeroCountReport:
    """Zeros of the real function ``f`` on ``[t_min, t_max]`` with multiplicity."""
    if not (0.0 < t_min < t_max <= 1.0):
        raise ValueError("need 0 < t_min < t_max <= 1")
    if sigma.is_zero:
        return ZeroCountReport(0, False, (), "sign-scan", 0.0, (("identically-zero", t_min, t_max),),
                               (t_min, t_max))
    lead = leading_term(sigma)
    alpha = lead.alpha if lead is not None else sigma.lower_exponent
    scaled = _Scaled(sigma, alpha)
    return _count_on(scaled, math.log(t_min), math.log(t_max), alpha,
                     exclude_right_endpoint=(t_max == 1.0))


def count_zeros_unit(sigma: JSeries) -> ZeroCountReport:
    """``N(f)`` on (0, 1): scan down to the zero-free floor, certify the rest."""
    if sigma.is_zero:
        return ZeroCountReport(0, False, (), "sign-scan", 0.0, (("identically-zero", 0.0, 1.0),))
    lead = leading_term(sigma)
    Lfloor = zero_free_floor(sigma)
    if lead is None or Lfloor is None:
        return ZeroCountReport(0, False, (), "sign-scan", 0.0, (("no-zero-free-floor", 0.0, 1.0),))
    scaled = _Scaled(sigma, lead.alpha)
    rep = _count_on(scaled, Lfloor, 0.0, lead.alpha, exclude_right_endpoint=True)
    return ZeroCountReport(rep.count, rep.certified, rep.zeros, rep.method, rep.margin,
                           rep.flagged, (0.0, 1.0))


# -- complex sectors -----------------------------------------------------------------

def _phase_track(sigma: JSeries, path, s0: float, s1: float, shift: float, samples: int,
                 margin_factor: float = 1e3, max_points: int = 200000) -> tuple:
    """Unwrapped argument increment of ``t**-shift f(t)`` along ``L = path(u)``, u in [s0, s1].

    Returns ``(increment, min |value|, min noise-relative margin)``.
    """
    mag = JSeries(sigma.spectrum, {k: -abs(v) for k, v in sigma.a.items()},
                  {k: abs(v) for k, v in sigma.b.items()}, m=sigma.m, rho=sigma.rho)
    u = np.linspace(s0, s1, samples + 1)
    vals = _evaluate(sigma, path(u), shift)[0]
    while True:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            step = np.angle(vals[1:] / vals[:-1])
        bad = ~np.isfinite(step) | (np.abs(step) > math.pi / 4)
        if np.any(vals == 0):
            raise ZeroOnContour("f vanishes at a contour sample")
        if not np.any(bad):
            break
        if u.size > max_points:
            raise ZeroOnContour("phase refinement did not converge")
        mids = 0.5 * (u[:-1][bad] + u[1:][bad])
        mvals = _evaluate(sigma, path(mids), shift)[0]
        u = np.concatenate([u, mids])
        vals = np.concatenate([vals, mvals])
        order = np.argsort(u) if s1 > s0 else np.argsort(-u)
        u, vals = u[order], vals[order]
    noise = 256 * _EPS * np.abs(_evaluate(mag, path(u), shift)[0]) * (1 + np.abs(path(u)))
    absv = np.abs(vals)
    if np.any(absv <= margin_factor * noise):
        k = int(np.argmin(absv / np.maximum(noise, 1e-300)))
        raise ZeroOnContour(f"|f| at rounding level on the contour near log t = {path(u[k:k + 1])[0]}")
    return float(np.sum(step)), float(absv.min()), float(np.min(absv / np.maximum(noise, 1e-300)))


def arg_increment_arc(sigma: JSeries, radius: float, kappa: float, samples: int = 64) -> float:
    """Increment of ``arg f`` along ``radius * exp(i kappa phi)``, phi from -1 to 1."""
    if sigma.is_zero:
        raise ZeroOnContour("identically zero function")
    lead = leading_term(sigma)
    shift = lead.alpha if lead is not None else 0.0
    lr = math.log(radius)
    inc, _, _ = _phase_track(sigma, lambda u: lr + 1j * kappa * u, -1.0, 1.0, shift, samples)
    # undo the phase of t**-shift along the arc
    return inc + shift * 2.0 * kappa


def delta_zero(sigma: JSeries, kappa: float) -> float:
    """Limit of the arc increment as the radius goes to zero: ``2 kappa alpha_lead``."""
    lead = leading_term(sigma)
    if lead is None:
        raise DegenerateLeadingTerm("all asymptotic coefficients vanish")
    return 2.0 * kappa * lead.alpha


def argument_principle_count(sigma: JSeries, contour: SectorContour) -> ZeroCountReport:
    """Winding number of ``f`` around ``{eps <= |t| <= 1, |arg t| <= kappa}``."""
    if sigma.is_zero:
        raise ZeroOnContour("identically zero function")
    lead = leading_term(sigma)
    shift = lead.alpha if lead is not None else 0.0
    k, le, n = contour.kappa, math.log(contour.epsilon_inner), contour.samples
    pieces = [
        (lambda u: 1j * u, -k, k),                    # outer arc, counter-clockwise
        (lambda u: u + 1j * k, 0.0, le),              # upper ray, inwards
        (lambda u: le + 1j * u, k, -k),               # inner arc, clockwise
        (lambda u: u - 1j * k, le, 0.0),              # lower ray, outwards
    ]
    total, margins = 0.0, []
    for path, a, b in pieces:
        inc, mn, rel = _phase_track(sigma, path, a, b, shift, n)
        total += inc
        margins.append(mn)
    winding = total / (2 * math.pi)
    count = int(round(winding))
    certified = abs(winding - count) < 0.05 and count >= 0
    return ZeroCountReport(count, certified, (), "argument-principle", min(margins), (),
                           (contour.epsilon_inner, 1.0))


# -- Petrov operator ---------------------------------------------------------------------

def petrov_numeric(sigma: JSeries, kappa: float, t: float) -> complex:
    """``(f(t e^{-i kappa}) - f(t e^{i kappa})) / 2i`` by direct evaluation."""
    if not t > 0:
        raise ValueError("t must be positive")
    check_sector(sigma, SectorPoint(t, kappa))
    L = math.log(t)
    vals = _evaluate(sigma, np.array([L - 1j * kappa, L + 1j * kappa]))[0]
    return complex((vals[0] - vals[1]) / 2j)


def petrov_chain_numeric(sigma: JSeries, kappas, t) -> np.ndarray:
    """Composition of Petrov operators expanded into ``2**len(kappas)`` rotations."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(t.size, dtype=complex)
    for signs in itertools.product((-1, 1), repeat=len(kappas)):
        weight = np.prod([-s / 2j for s in signs])
        angle = sum(s * k for s, k in zip(signs, kappas))
        out += weight * _evaluate(sigma, np.log(t) + 1j * angle)[0]
    return out


@dataclass
class PetrovCheck:
    lhs: int | None
    rhs: float | None
    rhs_paper: float | None
    holds: bool | None
    status: str
    parts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "rhs_paper": self.rhs_paper,
                "holds": self.holds, "status": self.status, "parts": self.parts}


def verify_petrov(sigma: JSeries, kappa: float) -> PetrovCheck:
    """Check ``N(f) <= 1 + N(P f) + (D1 - D0)/2 pi`` on a real J-function.

    ``D1`` is the argument increment along the unit arc and ``D0 = 2 kappa
    alpha`` its limit on vanishing arcs, both taken counter-clockwise; the
    inner arc enters the boundary of the sector clockwise, hence the minus
    sign.  ``rhs_paper`` reports the variant with ``+ D0``.
    Contour or certification trouble yields ``status="inconclusive"``.
    """
    parts: dict = {"kappa": kappa}
    try:
        nf = count_zeros_unit(sigma)
        parts["N_f"] = nf.count
        parts["N_f_certified"] = nf.certified
        psig = petrov_series(sigma, kappa)
        if psig.is_zero or leading_term(psig) is None:
            npf = ZeroCountReport(0, True)
            parts["petrov_identically_zero"] = True
        else:
            npf = count_zeros_unit(psig)
        parts["N_Pf"] = npf.count
        parts["N_Pf_certified"] = npf.certified
        d1 = arg_increment_arc(sigma, 1.0, kappa)
        d0 = delta_zero(sigma, kappa)
        parts["delta1"] = d1
        parts["delta0"] = d0
    except (ZeroOnContour, DegenerateLeadingTerm) as exc:
        parts["error"] = f"{type(exc).__name__}: {exc}"
        return PetrovCheck(None, None, None, None, "inconclusive", parts)
    rhs = 1 + npf.count + (d1 - d0) / (2 * math.pi)
    rhs_paper = 1 + npf.count + (d1 + d0) / (2 * math.pi)
    if not (nf.certified and npf.certified):
        return PetrovCheck(nf.count, rhs, rhs_paper, None, "inconclusive", parts)
    holds = nf.count <= rhs + 1e-9
    return PetrovCheck(nf.count, rhs, rhs_paper, holds, "holds" if holds else "violated", parts)


# -- reduction ---------------------------------------------------------------------------------

@dataclass
class ReductionStep:
    spectrum_index: int
    kappa: float
    applications: int
    progressions: tuple
    delta0: float | None = None
    delta1: float | None = None


@dataclass
class ReductionResult:
    chain: list
    steps: list
    residual: float
    tail: float

    def to_dict(self) -> dict:
        return {
            "steps": [{"index": s.spectrum_index, "kappa": s.kappa, "applications": s.applications,
                       "progressions": list(s.progressions), "delta0": s.delta0, "delta1": s.delta1}
                      for s in self.steps],
            "residual": self.residual,
            "tail": self.tail,
        }


def _progression_present(sigma: JSeries, k: int) -> bool:
    return k in sigma.progressions()


def reduction_chain(sigma: JSeries, with_deltas: bool = False, max_repeat: int = 2) -> ReductionResult:
    """Annihilate ``sigma`` by Petrov operators ``kappa = pi lambda_k``, k = n..1.

    Each progression is removed in one step; a step applies the operator once
    per order of the highest pole left on that progression (a resonant
    ``t**x log t`` term on it needs two applications).
    """
    chain = [sigma]
    steps = []
    current = sigma
    n = sigma.n
    for k in range(n - 1, -1, -1):
        kappa = math.pi * sigma.spectrum[k]
        d0 = d1 = None
        if with_deltas and not current.is_zero:
            try:
                d0 = delta_zero(current, kappa)
                d1 = arg_increment_arc(current, 1.0, kappa)
            except (ZeroOnContour, DegenerateLeadingTerm):
                pass
        apps = 0
        while apps == 0 or _progression_present(current, k):
            if apps >= max_repeat:
                raise ResidualNotZero(f"progression {k} survived {apps} Petrov applications")
            current = petrov_series(current, kappa)
            apps += 1
        chain.append(current)
        surviving = tuple(sorted(current.progressions()))
        if any(i >= k for i in surviving):
            raise ResidualNotZero(f"progressions {surviving} remain after removing index {k}")
        steps.append(ReductionStep(k, kappa, apps, surviving, d0, d1))
    grid = np.linspace(0.1, 0.9, 33)
    final = chain[-1]
    residual = float(np.max(np.abs(final(grid)))) if not final.is_zero else 0.0
    tail = max(tail_bound(final, float(t)) for t in grid)
    if residual > 10 * tail and residual > 1e-12 * max(1.0, sigma.coefficient_scale()):
        raise ResidualNotZero(f"final residual {residual:g} exceeds 10x tail {tail:g}")
    return ReductionResult(chain, steps, residual, tail)
