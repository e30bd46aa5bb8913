"""Darbouxian first integrals ``f = prod p_j**lambda_j``, their real ovals and
the integrals of admissible forms over them.

Ovals are traced as level curves of ``F = log f`` with a unit-speed
counter-clockwise tangent field, so the parameter is arclength and the
integrand stays order one near the separatrix where ``grad f`` degenerates.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import (BranchError, InversionDiverged, NoCenterFound, OnSeparatrix, PoleOnOval,
                     SaddleTooClose, TraceDiverged, TransversalityFailure)
from .jseries import compensator_eval
from .poly import Poly2

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)
_GL_X_LO, _GL_W_LO = np.polynomial.legendre.leggauss(8)


# -- systems and forms --------------------------------------------------------------------

@dataclass(frozen=True)
class DarbouxSystem:
    polys: tuple
    exponents: tuple
    box: tuple = (-10.0, 10.0, -10.0, 10.0)

    def __post_init__(self):
        polys = tuple(p if isinstance(p, Poly2) else Poly2.from_terms(p) for p in self.polys)
        exps = tuple(float(v) for v in self.exponents)
        if len(polys) != len(exps) or not polys:
            raise ValueError("need one positive exponent per polynomial")
        if any(v <= 0 or not math.isfinite(v) for v in exps):
            raise ValueError("exponents must be positive")
        if any(p.is_constant for p in polys):
            raise ValueError("polynomials must be nonconstant")
        if len(self.box) != 4 or self.box[0] >= self.box[1] or self.box[2] >= self.box[3]:
            raise ValueError("box must be (xmin, xmax, ymin, ymax)")
        object.__setattr__(self, "polys", polys)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "box", tuple(float(v) for v in self.box))
        object.__setattr__(self, "_grads", tuple((p.dx(), p.dy()) for p in polys))
        object.__setattr__(self, "_hess", tuple((gx.dx(), gx.dy(), gy.dy()) for gx, gy in self._grads))

    @property
    def n(self) -> int:
        return len(self.polys)

    def values(self, x, y) -> np.ndarray:
        return np.array([p(x, y) for p in self.polys])

    def log_integral(self, x, y):
        """``F = sum lambda_j log p_j`` with its gradient; assumes all p_j > 0."""
        P = self.values(x, y)
        lam = np.array(self.exponents).reshape((-1,) + (1,) * (P.ndim - 1))
        gx = np.array([g[0](x, y) for g in self._grads])
        gy = np.array([g[1](x, y) for g in self._grads])
        F = np.sum(lam * np.log(P), axis=0)
        return F, np.sum(lam * gx / P, axis=0), np.sum(lam * gy / P, axis=0)

    def log_hessian(self, x: float, y: float) -> np.ndarray:
        H = np.zeros((2, 2))
        for lam, p, (gx, gy), (hxx, hxy, hyy) in zip(self.exponents, self.polys, self._grads, self._hess):
            v = p(x, y)
            g = np.array([gx(x, y), gy(x, y)])
            H += lam * (np.array([[hxx(x, y), hxy(x, y)], [hxy(x, y), hyy(x, y)]]) / v - np.outer(g, g) / v**2)
        return H

    def intersections(self, i: int, j: int, seeds: int = 12, tol: float = 1e-12) -> list:
        """Points of ``{p_i = 0} & {p_j = 0}`` inside the box, found by Newton from a seed grid."""
        pi, pj = self.polys[i], self.polys[j]
        (ix, iy), (jx, jy) = self._grads[i], self._grads[j]
        xs = np.linspace(self.box[0], self.box[1], seeds)
        ys = np.linspace(self.box[2], self.box[3], seeds)
        found = []
        scale = max(self.box[1] - self.box[0], self.box[3] - self.box[2])
        for x0 in xs:
            for y0 in ys:
                x, y = float(x0), float(y0)
                ok = False
                for _ in range(80):
                    F = np.array([pi(x, y), pj(x, y)])
                    J = np.array([[ix(x, y), iy(x, y)], [jx(x, y), jy(x, y)]])
                    try:
                        dx, dy = np.linalg.lstsq(J, -F, rcond=None)[0]
                    except np.linalg.LinAlgError:
                        break
                    x, y = x + dx, y + dy
                    if not (np.isfinite(x) and np.isfinite(y)) or abs(x) + abs(y) > 1e3 * scale:
                        break
                    if math.hypot(dx, dy) <= tol * (1 + math.hypot(x, y)):
                        ok = True
                        break
                if not ok:
                    continue
                if abs(pi(x, y)) > 1e-9 or abs(pj(x, y)) > 1e-9:
                    continue
                if not (self.box[0] <= x <= self.box[1] and self.box[2] <= y <= self.box[3]):
                    continue
                if all(math.hypot(x - u, y - v) > 1e-6 for u, v in found):
                    found.append((x, y))
        return sorted(found)

    def transversality(self, margin: float = 1e-6) -> list:
        """``(i, j, point, sin_angle, ok)`` for every intersection in the box."""
        out = []
        for i in range(self.n):
            for j in range(i + 1, self.n):
                for x, y in self.intersections(i, j):
                    gi = np.array([g(x, y) for g in self._grads[i]])
                    gj = np.array([g(x, y) for g in self._grads[j]])
                    s = abs(gi[0] * gj[1] - gi[1] * gj[0]) / (np.linalg.norm(gi) * np.linalg.norm(gj))
                    out.append((i, j, (x, y), float(s), bool(s > margin)))
        return out


@dataclass(frozen=True)
class AdmissibleForm:
    """``(A dx + B dy) / prod p_j**k_j``."""
    dx: Poly2
    dy: Poly2
    denom_powers: tuple = ()
    max_pole_order: int = 0

    def __post_init__(self):
        for name in ("dx", "dy"):
            v = getattr(self, name)
            if not isinstance(v, Poly2):
                object.__setattr__(self, name, Poly2.from_terms(v))
        ks = tuple(int(k) for k in self.denom_powers)
        if any(k < 0 for k in ks):
            raise ValueError("denominator powers must be nonnegative")
        object.__setattr__(self, "denom_powers", ks)
        if self.max_pole_order < 0:
            raise ValueError("max pole order must be nonnegative")

    @classmethod
    def exact(cls, P: Poly2) -> "AdmissibleForm":
        """``dP`` for a polynomial P."""
        return cls(P.dx(), P.dy())

    @classmethod
    def theta(cls, system: DarbouxSystem) -> "AdmissibleForm":
        """``sum lambda_j dp_j / p_j`` over the common denominator ``prod p_j``."""
        A = Poly2([[0.0]])
        B = Poly2([[0.0]])
        for j, (lam, (gx, gy)) in enumerate(zip(system.exponents, system._grads)):
            rest = Poly2([[1.0]])
            for k, p in enumerate(system.polys):
                if k != j:
                    rest = rest * p
            A = A + gx * rest * lam
            B = B + gy * rest * lam
        return cls(A, B, (1,) * system.n, 1)

    def evaluate(self, system: DarbouxSystem, x, y):
        """Components ``(omega_x, omega_y)`` at points."""
        A, B = self.dx(x, y), self.dy(x, y)
        if any(self.denom_powers):
            den = np.ones_like(np.asarray(A, dtype=float))
            for p, k in zip(system.polys, self.denom_powers):
                if k:
                    v = p(x, y)
                    if np.any(v == 0):
                        raise PoleOnOval("form evaluated on a pole")
                    den = den * v**k
            A, B = A / den, B / den
        return A, B


def pole_orders(system: DarbouxSystem, omega: AdmissibleForm) -> tuple:
    """Effective pole order along each ``{p_j = 0}`` (0 for a vanishing numerator)."""
    ks = omega.denom_powers or (0,) * system.n
    if not np.any(omega.dx.c) and not np.any(omega.dy.c):
        return (0,) * system.n
    return tuple(ks)


def admissibility_check(system: DarbouxSystem, omega: AdmissibleForm) -> bool:
    """Poles of ``omega`` lie on the separatrix with orders at most ``max_pole_order``.

    Denominator factors are drawn from the ``p_j`` by construction, so only
    the length of the power list and the bound on the orders are checked; an
    all-zero (or empty) power list is a polynomial form and always admissible.
    """
    ks = omega.denom_powers
    if ks and len(ks) != system.n:
        return False
    return all(k <= omega.max_pole_order for k in pole_orders(system, omega))


# -- pointwise evaluation --------------------------------------------------------------------

def first_integral_eval(system: DarbouxSystem, x, y):
    """``f = exp(sum lambda_j log p_j)`` on the positive branch."""
    P = system.values(x, y)
    if np.any(P <= 0):
        raise BranchError("some p_j <= 0: outside the positive branch")
    lam = np.array(system.exponents).reshape((-1,) + (1,) * (P.ndim - 1))
    out = np.exp(np.sum(lam * np.log(P), axis=0))
    return out if np.ndim(out) else float(out)


def theta_eval(system: DarbouxSystem, x: float, y: float) -> tuple:
    """``theta = sum lambda_j grad p_j / p_j`` as ``(theta_x, theta_y)``."""
    P = system.values(x, y)
    if np.any(P == 0):
        raise OnSeparatrix(f"({x}, {y}) lies on the separatrix")
    tx = sum(lam * g[0](x, y) / v for lam, g, v in zip(system.exponents, system._grads, P))
    ty = sum(lam * g[1](x, y) / v for lam, g, v in zip(system.exponents, system._grads, P))
    return float(tx), float(ty)


# -- centers and ovals ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Center:
    point: tuple
    t_center: float
    t_range: tuple


def _ray_exit(system: DarbouxSystem, c, d) -> float:
    """Largest ``r`` with ``c + s d`` on the positive branch and inside the box for s < r."""
    lo, hi = 0.0, 1.0
    b = system.box

    def inside(r):
        x, y = c[0] + r * d[0], c[1] + r * d[1]
        return b[0] <= x <= b[1] and b[2] <= y <= b[3] and bool(np.all(system.values(x, y) > 0))

    while inside(hi):
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            return math.inf
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            lo = mid
        else:
            hi = mid
    return lo


def find_center(system: DarbouxSystem, seed: tuple, rays: int = 16) -> Center:
    """Nondegenerate maximum of ``f`` by damped Newton on ``theta = 0``.

    ``t_range`` is the interval of levels whose curves were probed to close
    around the center: ``(0, t_center)`` when every ray from the center runs
    into the separatrix with ``f`` decreasing.
    """
    x, y = map(float, seed)
    if not np.all(system.values(x, y) > 0):
        raise NoCenterFound("seed is outside the positive branch")
    for _ in range(100):
        F, gx, gy = system.log_integral(x, y)
        H = system.log_hessian(x, y)
        try:
            step = -np.linalg.solve(H, [gx, gy])
        except np.linalg.LinAlgError as exc:
            raise NoCenterFound("singular Hessian") from exc
        damp = 1.0
        while damp > 1e-8:
            xn, yn = x + damp * step[0], y + damp * step[1]
            if np.all(system.values(xn, yn) > 0):
                break
            damp *= 0.5
        else:
            raise NoCenterFound("Newton left the positive branch")
        x, y = xn, yn
        if damp * np.linalg.norm(step) <= 1e-15 * (1 + math.hypot(x, y)):
            break
    F, gx, gy = system.log_integral(x, y)
    H = system.log_hessian(x, y)
    if math.hypot(gx, gy) > 1e-9 * (1 + np.abs(H).max()):
        raise NoCenterFound("Newton did not converge")
    if not np.all(np.linalg.eigvalsh(H) < 0):
        raise NoCenterFound("critical point is not a maximum of f")
    if not (system.box[0] <= x <= system.box[1] and system.box[2] <= y <= system.box[3]):
        raise NoCenterFound("critical point outside the box")
    t_center = float(math.exp(F))
    t_low = 0.0
    for a in np.linspace(0, 2 * math.pi, rays, endpoint=False):
        d = (math.cos(a), math.sin(a))
        r_end = _ray_exit(system, (x, y), d)
        if not math.isfinite(r_end):
            raise NoCenterFound("unbounded positive region")
        rs = np.linspace(0, r_end, 200)[1:]
        vals = system.log_integral(x + rs * d[0], y + rs * d[1])[0]
        if np.any(np.diff(vals) > 0):
            t_low = max(t_low, float(math.exp(np.max(vals[1:][np.diff(vals) > 0]))))
        if np.all(system.values(x + r_end * 1.0001 * d[0] + 1e-12, y + r_end * 1.0001 * d[1]) > 0):
            # left the box rather than hitting the separatrix
            t_low = max(t_low, float(math.exp(vals[-1])))
    return Center((float(x), float(y)), t_center, (t_low, t_center))


@dataclass
class TraceOptions:
    level_tol: float = 1e-10      # relative: |f - t| <= level_tol * t
    trace_tol: float = 1e-8       # relative to arc length
    rtol: float = 1e-12
    start_angle: float = 0.0
    max_length: float = 1e3
    samples: int = 512


@dataclass
class Oval:
    points: np.ndarray
    residuals: np.ndarray
    t: float
    center: tuple
    arc_length: float
    closure_gap: float
    winding: int
    rtol: float = 1e-12
    system: DarbouxSystem = field(repr=False, default=None)
    _sol: object = field(repr=False, default=None)
    _breaks: np.ndarray = field(repr=False, default=None)

    def point_at(self, s) -> np.ndarray:
        """Point at arclength ``s`` projected onto the level curve."""
        z = self._sol(np.asarray(s, dtype=float))[:2]
        return _project(self.system, z[0], z[1], math.log(self.t))


def _project(system: DarbouxSystem, x, y, logt: float, iters: int = 4):
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    for _ in range(iters):
        F, gx, gy = system.log_integral(x, y)
        g2 = gx * gx + gy * gy
        corr = (F - logt) / g2
        x = x - corr * gx
        y = y - corr * gy
    return np.array([x, y])


def trace_oval(system: DarbouxSystem, t: float, center: Center | None = None,
               opts: TraceOptions | None = None, seed: tuple | None = None) -> Oval:
    """Closed real level curve ``{f = t}`` around ``center``, traced counter-clockwise."""
    opts = opts or TraceOptions()
    if center is None:
        if seed is None:
            raise ValueError("need a center or a seed")
        center = find_center(system, seed)
    cx, cy = center.point
    if not (0.0 < t < center.t_center):
        raise TraceDiverged(f"no oval at level {t}: levels must lie in (0, {center.t_center})")
    logt = math.log(t)
    d = (math.cos(opts.start_angle), math.sin(opts.start_angle))
    r_end = _ray_exit(system, (cx, cy), d)

    def along(r):
        return float(system.log_integral(cx + r * d[0], cy + r * d[1])[0]) - logt

    if along(r_end * (1 - 1e-15)) > 0:
        raise TraceDiverged("level not reached along the start ray")
    r0 = brentq(along, 0.0, r_end * (1 - 1e-15), xtol=1e-16, rtol=1e-15)
    start = _project(system, cx + r0 * d[0], cy + r0 * d[1], logt)

    def rhs(s, z):
        x, y = z[0], z[1]
        P = system.values(x, y)
        if np.any(P <= 0):
            return [np.nan, np.nan, np.nan]
        _, gx, gy = system.log_integral(x, y)
        g = math.hypot(gx, gy)
        tx, ty = gy / g, -gx / g
        X, Y = x - cx, y - cy
        return [tx, ty, (X * ty - Y * tx) / (X * X + Y * Y)]

    def closed(s, z):
        return z[2] - 2 * math.pi

    closed.terminal = True
    closed.direction = 1
    sol = solve_ivp(rhs, (0.0, opts.max_length), [start[0], start[1], 0.0], method="DOP853",
                    rtol=opts.rtol, atol=opts.rtol * 1e-3, events=closed, dense_output=True)
    if sol.status == -1:
        if "step size" in sol.message.lower():
            raise SaddleTooClose(f"step collapsed near the separatrix: {sol.message}")
        raise TraceDiverged(sol.message)
    if not np.all(np.isfinite(sol.y)):
        raise TraceDiverged("trace left the positive branch")
    if sol.status != 1 or not sol.t_events[0].size:
        raise TraceDiverged("trace did not close within the maximal length")
    s_end = float(sol.t_events[0][0])
    end = _project(system, *sol.sol(s_end)[:2], logt)
    gap = float(math.hypot(end[0] - start[0], end[1] - start[1]))
    if gap > opts.trace_tol * s_end:
        raise TraceDiverged(f"closure gap {gap:g} exceeds tolerance")
    breaks = np.append(sol.t[sol.t < s_end], s_end)
    s = np.linspace(0.0, s_end, opts.samples + 1)
    pts = _project(system, *sol.sol(s)[:2], logt).T
    resid = np.abs(first_integral_eval(system, pts[:, 0], pts[:, 1]) - t)
    if resid.max() > opts.level_tol * t:
        raise TraceDiverged(f"level drift {resid.max() / t:g} exceeds tolerance")
    return Oval(pts, resid, t, (cx, cy), s_end, gap, 1, opts.rtol, system, sol.sol, breaks)


# -- integrals ----------------------------------------------------------------------------------------

def _panel_rule(oval: Oval, omega: AdmissibleForm, nodes, weights) -> float:
    system = oval.system
    logt = math.log(oval.t)
    a, b = oval._breaks[:-1], oval._breaks[1:]
    # split every solver step once more so the rule also resolves the denominators
    mid = 0.5 * (a + b)
    a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    half = 0.5 * (b - a)
    s = (0.5 * (a + b))[:, None] + half[:, None] * nodes[None, :]
    z = _project(system, *oval._sol(s.ravel())[:2], logt)
    if np.any(system.values(z[0], z[1]) <= 0):
        raise PoleOnOval("oval touches the separatrix")
    _, gx, gy = system.log_integral(z[0], z[1])
    g = np.hypot(gx, gy)
    A, B = omega.evaluate(system, z[0], z[1])
    integrand = (A * gy - B * gx) / g
    w = weights[None, :] * half[:, None]
    integrand = integrand.reshape(s.shape)
    return float(np.sum(integrand * w)), float(np.sum(np.abs(integrand) * w))


def integrate_form(oval: Oval, omega: AdmissibleForm, return_error: bool = False):
    """``I(t) = closed integral of omega`` along the oval (counter-clockwise).

    Gauss-Legendre panels over the solver steps, with nodes projected back
    onto the level and the exact unit tangent; the error estimate is the gap
    to a lower-order rule on the same panels plus the tracer tolerance times
    the integral of ``|omega(T)|``.
    """
    hi, mag = _panel_rule(oval, omega, _GL_X, _GL_W)
    if not return_error:
        return hi
    lo, _ = _panel_rule(oval, omega, _GL_X_LO, _GL_W_LO)
    return hi, abs(hi - lo) + 10 * oval.rtol * mag


@dataclass(frozen=True)
class ScanSample:
    t: float
    value: float
    err: float
    status: str


def integral_scan(system: DarbouxSystem, omega: AdmissibleForm, t_grid, center: Center | None = None,
                  seed: tuple | None = None, opts: TraceOptions | None = None,
                  threads: int = 1) -> list:
    """``(t, I(t), err, status)`` over a grid of levels; failed traces are flagged, not dropped."""
    if center is None:
        center = find_center(system, seed)

    def one(t):
        try:
            oval = trace_oval(system, float(t), center, opts)
            v, e = integrate_form(oval, omega, return_error=True)
            return ScanSample(float(t), v, e, "ok")
        except (TraceDiverged, PoleOnOval) as exc:
            return ScanSample(float(t), math.nan, math.nan, type(exc).__name__)

    grid = list(t_grid)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, grid))
    return [one(t) for t in grid]


def region_integral(system: DarbouxSystem, t: float, density: Poly2, center: Center) -> float:
    """``double integral of density over {f >= t}`` by slicing in x.

    Independent of the tracer: slice endpoints come from root finding on
    vertical lines, the inner integral is exact for polynomial densities.
    Assumes the superlevel set is convex in the y-direction (log-concave f).
    """
    logt = math.log(t)
    cx, cy = center.point
    _, _, ymin, ymax = system.box

    def y_peak(x):
        lo, hi = _y_branch(system, x, cy, ymin, ymax)
        res = minimize_scalar(lambda y: -float(system.log_integral(x, y)[0]), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-13})
        return res.x, -res.fun, lo, hi

    def slice_len_fn(x):
        try:
            return y_peak(x)[1] - logt
        except BranchError:
            return -1.0

    # x extent of the superlevel set: walk outwards until the slice is empty
    xmin, xmax = system.box[0], system.box[1]
    ends = []
    for direction, bound in ((-1.0, xmin), (1.0, xmax)):
        step = 1e-2 * (xmax - xmin)
        a = cx
        b = cx + direction * step
        while (b - bound) * direction < 0 and slice_len_fn(b) > 0:
            a, b = b, b + direction * step
            step *= 1.5
        b = bound if (b - bound) * direction >= 0 else b
        ends.append(brentq(slice_len_fn, a, b, xtol=1e-15))
    xl, xr = ends
    anti = Poly2(np.hstack([np.zeros((density.c.shape[0], 1)), density.c / np.arange(1, density.c.shape[1] + 1)]))

    def inner(x):
        yp, Fp, lo, hi = y_peak(x)
        if Fp <= logt:
            return 0.0
        g = lambda y: float(system.log_integral(x, y)[0]) - logt
        y0 = brentq(g, lo + (hi - lo) * 1e-15, yp, xtol=1e-15)
        y1 = brentq(g, yp, hi - (hi - lo) * 1e-15, xtol=1e-15)
        return float(anti(x, y1) - anti(x, y0))

    # x = mid - half cos(phi) removes the square-root behaviour at both ends
    mid, half = 0.5 * (xl + xr), 0.5 * (xr - xl)
    val, _ = quad(lambda ph: inner(mid - half * math.cos(ph)) * half * math.sin(ph), 0.0, math.pi,
                  epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def _y_branch(system: DarbouxSystem, x: float, cy: float, ymin: float, ymax: float) -> tuple:
    """Interval of y around ``cy`` on the positive branch at abscissa x."""
    def ok(y):
        return bool(np.all(system.values(x, y) > 0))

    if not ok(cy):
        # walk towards a positive point on this vertical line
        ys = np.linspace(ymin, ymax, 401)
        good = [y for y in ys if ok(y)]
        if not good:
            raise BranchError(f"no positive branch on x = {x}")
        cy = min(good, key=lambda y: abs(y - cy))
    lo, hi = ymin, ymax
    if not ok(lo):
        a, b = ymin, cy
        for _ in range(60):
            m = 0.5 * (a + b)
            a, b = (a, m) if ok(m) else (m, b)
        lo = b
    if not ok(hi):
        a, b = cy, ymax
        for _ in range(60):
            m = 0.5 * (a + b)
            a, b = (m, b) if ok(m) else (a, m)
        hi = a
    return lo, hi


# -- saddle corners --------------------------------------------------------------------------------------

@dataclass(frozen=True)
class CornerArc:
    x: np.ndarray
    y: np.ndarray
    lam: float
    mu: float
    t: float

    def y_of(self, x):
        return self.t ** (1 / self.mu) * np.asarray(x, dtype=float) ** (-self.lam / self.mu)


def corner_curve(lam: float, mu: float, t: float, n: int = 201) -> CornerArc:
    """Leaf ``x**lam y**mu = t`` between the sections ``{y = 1}`` and ``{x = 1}``.

    Ordered from the ``{y = 1}`` end (``x = t**(1/lam)``) to ``x = 1``, the
    direction in which a counter-clockwise oval passes the corner.
    """
    if not (0.0 < t < 1.0):
        raise ValueError("t must lie in (0, 1)")
    x0 = t ** (1 / lam)
    x = np.exp(np.linspace(math.log(x0), 0.0, n))
    x[0], x[-1] = x0, 1.0
    y = t ** (1 / mu) * x ** (-lam / mu)
    return CornerArc(x, y, lam, mu, t)


def corner_monomial_integral(p: int, q: int, lam: float, mu: float, t: float) -> float:
    """``integral x**(p-1) y**q dx`` along the corner leaf in its orientation.

    Equals ``-ell(p/lam, q/mu; t) / lam``; at resonance ``-t**(q/mu) log(t) / lam``.
    """
    if not (0.0 < t < 1.0):
        raise ValueError("t must lie in (0, 1)")
    return float(-compensator_eval(p, q, lam, mu, t).real / lam)


@dataclass
class CornerChart:
    corner: tuple
    pair: tuple
    exponents: tuple
    radius: float
    residual: float
    constant: float
    system: DarbouxSystem = field(repr=False)

    def forward(self, x, y):
        """``psi = (p_i, p_j prod_{k != i,j} p_k**(lambda_k / lambda_j))``."""
        i, j = self.pair
        P = self.system.values(x, y)
        v = P[j]
        lj = self.system.exponents[j]
        with np.errstate(invalid="ignore"):
            for k in range(self.system.n):
                if k not in (i, j):
                    v = v * P[k] ** (self.system.exponents[k] / lj)
        return P[i], v

    def _jac(self, x, y):
        i, j = self.pair
        s = self.system
        P = s.values(x, y)
        lj = s.exponents[j]
        grad = [np.array([g(x, y) for g in gr]) for gr in s._grads]
        Q, dlogQ = 1.0, np.zeros(2)
        for k in range(s.n):
            if k not in (i, j):
                e = s.exponents[k] / lj
                Q *= P[k] ** e
                dlogQ = dlogQ + e * grad[k] / P[k]
        return np.array([grad[i], Q * (grad[j] + P[j] * dlogQ)])

    def inverse(self, u: float, v: float, iters: int = 60) -> tuple:
        """Newton inversion of ``psi`` started from the linearization at the corner."""
        x0 = np.array(self.corner)
        J0 = self._jac(*x0)
        z = x0 + np.linalg.solve(J0, [u, v])
        for _ in range(iters):
            cu, cv = self.forward(*z)
            r = np.array([cu - u, cv - v])
            try:
                dz = np.linalg.solve(self._jac(*z), -r)
            except np.linalg.LinAlgError as exc:
                raise InversionDiverged("singular Jacobian") from exc
            others = [k for k in range(self.system.n) if k not in self.pair]
            damp = 1.0
            while others and np.any(self.system.values(*(z + damp * dz))[others] <= 0):
                damp *= 0.5
                if damp < 1e-6:
                    raise InversionDiverged("Newton step leaves the chart domain")
            z = z + damp * dz
            if not np.all(np.isfinite(z)):
                raise InversionDiverged("Newton produced non-finite iterate")
            if np.linalg.norm(dz) <= 1e-15 * (1 + np.linalg.norm(z)):
                return float(z[0]), float(z[1])
        cu, cv = self.forward(*z)
        if abs(cu - u) + abs(cv - v) > 1e-12 * (1 + abs(u) + abs(v)):
            raise InversionDiverged(f"no convergence at ({u}, {v})")
        return float(z[0]), float(z[1])


def linearize_corner(system: DarbouxSystem, pair: tuple, order: int | None = None,
                     corner: tuple | None = None, radius: float | None = None,
                     margin: float = 1e-6, samples: int = 12) -> CornerChart:
    """Chart ``psi`` at a transversal intersection of ``{p_i = 0}`` and ``{p_j = 0}``.

    In these coordinates ``f = u**lambda_i v**lambda_j`` exactly, so no
    truncation is involved and ``order`` has no effect.  The box
    ``[0, radius]**2`` is certified by inverting a sample grid and checking
    the monomial identity; the radius is halved until it passes.
    """
    i, j = pair
    if i == j:
        raise ValueError("need two distinct curves")
    if corner is None:
        pts = system.intersections(i, j)
        if not pts:
            raise TransversalityFailure(f"curves {i} and {j} do not meet in the box")
        corner = pts[0]
    x0, y0 = corner
    gi = np.array([g(x0, y0) for g in system._grads[i]])
    gj = np.array([g(x0, y0) for g in system._grads[j]])
    sin_angle = abs(gi[0] * gj[1] - gi[1] * gj[0]) / (np.linalg.norm(gi) * np.linalg.norm(gj))
    if sin_angle <= margin:
        raise TransversalityFailure(f"gradients nearly parallel at {corner} (sin = {sin_angle:.2e})")
    others = [k for k in range(system.n) if k not in (i, j)]
    if any(system.polys[k](x0, y0) <= 0 for k in others):
        raise TransversalityFailure("another separatrix curve passes through the corner")
    chart = CornerChart((float(x0), float(y0)), (i, j), (system.exponents[i], system.exponents[j]),
                        0.0, math.inf, 1.0, system)
    r = radius if radius is not None else 0.25
    li, lj = chart.exponents
    for _ in range(20):
        worst = 0.0
        try:
            for u in np.linspace(r / samples, r, samples):
                for v in np.linspace(r / samples, r, samples):
                    x, y = chart.inverse(u, v)
                    if np.any(system.values(x, y) <= 0):
                        raise InversionDiverged("preimage off the positive branch")
                    f = first_integral_eval(system, x, y)
                    worst = max(worst, abs(f / (u ** li * v ** lj) - 1.0))
        except (InversionDiverged, BranchError, np.linalg.LinAlgError):
            worst = math.inf
        if worst <= 1e-8:
            chart.radius = float(r)
            chart.residual = float(worst)
            return chart
        r *= 0.5
    raise InversionDiverged("could not certify any box around the corner")


# -- JSON ----------------------------------------------------------------------------------------------

def system_to_dict(system: DarbouxSystem, omega: AdmissibleForm | None = None) -> dict:
    out = {"polys": [p.terms() for p in system.polys], "exponents": list(system.exponents),
           "box": list(system.box)}
    if omega is not None:
        out["omega"] = {"dx": omega.dx.terms(), "dy": omega.dy.terms(),
                        "denomPowers": list(omega.denom_powers), "maxPoleOrder": omega.max_pole_order}
    return out


def system_from_dict(d: dict) -> tuple:
    """``(system, omega or None)`` from the JSON layout."""
    system = DarbouxSystem(tuple(Poly2.from_terms(p) for p in d["polys"]), tuple(d["exponents"]),
                           tuple(d.get("box", (-10.0, 10.0, -10.0, 10.0))))
    omega = None
    if "omega" in d:
        o = d["omega"]
        ks = tuple(o.get("denomPowers", ()))
        omega = AdmissibleForm(Poly2.from_terms(o.get("dx", [])), Poly2.from_terms(o.get("dy", [])), ks,
                               int(o.get("maxPoleOrder", max(ks, default=0))))
    return system, omega


def system_dumps(system: DarbouxSystem, omega: AdmissibleForm | None = None) -> str:
    return json.dumps(system_to_dict(system, omega))


def system_loads(s: str) -> tuple:
    return system_from_dict(json.loads(s))


def triangle(exponents=(1.0, 1.0, 1.0)) -> DarbouxSystem:
    """``p = (x, y, 1 - x - y)`` on the unit square box."""
    return DarbouxSystem((Poly2.from_terms([(1, 0, 1.0)]), Poly2.from_terms([(0, 1, 1.0)]),
                          Poly2.from_terms([(0, 0, 1.0), (1, 0, -1.0), (0, 1, -1.0)])),
                         tuple(exponents), (-0.5, 1.5, -0.5, 1.5))
