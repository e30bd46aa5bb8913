import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize

from pseudoabel.errors import (BranchError, NoCenterFound, OnSeparatrix, PoleOnOval, TraceDiverged,
                               TransversalityFailure)
from pseudoabel.foliation import (AdmissibleForm, DarbouxSystem, TraceOptions, admissibility_check,
                                  corner_curve, corner_monomial_integral, find_center,
                                  first_integral_eval, integral_scan, integrate_form, linearize_corner,
                                  pole_orders, region_integral, system_dumps, system_loads,
                                  theta_eval, trace_oval, triangle)
from pseudoabel.poly import X, Y, Poly2

XDY = AdmissibleForm(Poly2([[0.0]]), X)


@pytest.fixture(scope="module")
def tri():
    s = triangle()
    return s, find_center(s, (0.3, 0.3))


# -- pointwise ---------------------------------------------------------------------------------

def test_first_integral_examples():
    assert first_integral_eval(triangle(), 1 / 3, 1 / 3) == pytest.approx(1 / 27, rel=1e-14)
    with pytest.raises(BranchError):
        first_integral_eval(triangle(), 0.0, 0.5)
    v = first_integral_eval(triangle((1, 1, math.sqrt(2))), 1 / 3, 1 / 3)
    assert v == pytest.approx((1 / 9) * (1 / 3) ** math.sqrt(2), rel=1e-14)


def test_theta_examples():
    tx, ty = theta_eval(triangle(), 1 / 3, 1 / 3)
    assert abs(tx) < 1e-14 and abs(ty) < 1e-14
    s = DarbouxSystem((X,), (2.0,))
    assert theta_eval(s, 0.5, 0.0) == pytest.approx((4.0, 0.0))
    with pytest.raises(OnSeparatrix):
        theta_eval(triangle(), 0.0, 0.3)


@given(st.floats(0.05, 0.6), st.floats(0.05, 0.3), st.sampled_from([(1, 1, 1), (1, 2, 0.7), (1, 1, math.sqrt(2))]))
def test_theta_is_gradient_of_log_f(x, y, lam):
    s = triangle(lam)
    h = 1e-6
    F = lambda a, b: math.log(first_integral_eval(s, a, b))
    fd = ((F(x + h, y) - F(x - h, y)) / (2 * h), (F(x, y + h) - F(x, y - h)) / (2 * h))
    tx, ty = theta_eval(s, x, y)
    assert tx == pytest.approx(fd[0], abs=1e-8 * (1 + abs(tx)) + 1e-7)
    assert ty == pytest.approx(fd[1], abs=1e-8 * (1 + abs(ty)) + 1e-7)


# -- centers --------------------------------------------------------------------------------------

def test_center_triangle(tri):
    _, c = tri
    assert c.point == pytest.approx((1 / 3, 1 / 3), abs=1e-14)
    assert c.t_center == pytest.approx(1 / 27, rel=1e-14)
    assert c.t_range[0] == 0.0


def test_center_weighted_against_descent():
    s = triangle((1, 1, 2))
    c = find_center(s, (0.3, 0.3))

    def neg_log_f(z):
        P = s.values(*z)
        return math.inf if np.any(P <= 0) else -float(np.sum(np.array(s.exponents) * np.log(P)))

    ref = minimize(neg_log_f, [0.3, 0.3], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    assert c.point == pytest.approx(tuple(ref.x), abs=1e-6)
    assert c.point == pytest.approx((0.25, 0.25), abs=1e-14)


def test_center_seed_outside():
    with pytest.raises(NoCenterFound):
        find_center(triangle(), (0.8, 0.8))


# -- ovals ------------------------------------------------------------------------------------------

def test_oval_near_center(tri):
    s, c = tri
    oval = trace_oval(s, 0.9 / 27, c)
    assert oval.winding == 1
    assert oval.closure_gap <= 1e-8 * oval.arc_length
    area = integrate_form(oval, XDY)
    assert area == pytest.approx(region_integral(s, 0.9 / 27, Poly2([[1.0]]), c), rel=1e-6)
    assert 0 < area < 0.05


def test_oval_level_above_center(tri):
    s, c = tri
    with pytest.raises(TraceDiverged):
        trace_oval(s, 1 / 27, c)
    with pytest.raises(TraceDiverged):
        trace_oval(s, 0.05, c)


def test_oval_drift_small_level(tri):
    s, c = tri
    t = 1e-3 * c.t_center
    oval = trace_oval(s, t, c)
    vals = first_integral_eval(s, oval.points[:, 0], oval.points[:, 1])
    assert np.max(np.abs(vals - t)) <= 1e-10 * t


@pytest.mark.parametrize("frac", [0.5, 1e-2])
def test_closed_forms_vanish(tri, frac):
    s, c = tri
    oval = trace_oval(s, frac * c.t_center, c)
    dP = AdmissibleForm.exact(X ** 2 * Y)
    assert abs(integrate_form(oval, dP)) <= 1e-8 * oval.arc_length
    theta = AdmissibleForm.theta(s)
    assert abs(integrate_form(oval, theta)) <= 1e-8 * oval.arc_length


def test_start_section_symmetry(tri):
    s, c = tri
    t = 0.1 * c.t_center
    vals = [integrate_form(trace_oval(s, t, c, TraceOptions(start_angle=a)), XDY) for a in (0.0, 1.0, 2.5, 4.0)]
    assert max(vals) - min(vals) <= 1e-9


def test_green_cross_check(tri):
    s, c = tri
    t = 0.5 / 27
    v, err = integrate_form(trace_oval(s, t, c), XDY, return_error=True)
    assert v == pytest.approx(region_integral(s, t, Poly2([[1.0]]), c), rel=1e-4)
    assert err < 1e-8


def test_form_pole_is_reported():
    s = triangle()
    omega = AdmissibleForm(Poly2([[1.0]]), Poly2([[0.0]]), (1, 0, 0), 1)
    assert omega.evaluate(s, 0.5, 0.2)[0] == pytest.approx(2.0)
    with pytest.raises(PoleOnOval):
        omega.evaluate(s, np.array([0.1, 0.0]), np.array([0.2, 0.3]))


def test_scan_area_and_exact():
    s = triangle()
    grid = np.geomspace(1e-3, 0.9, 6)[::-1] / 27
    rows = integral_scan(s, XDY, grid, seed=(0.3, 0.3))
    vals = [r.value for r in rows]
    assert all(r.status == "ok" for r in rows)
    assert np.all(np.diff(vals) > 0) and abs(vals[-1] - 0.5) < 0.02
    rows = integral_scan(s, AdmissibleForm.exact(X * Y ** 2), grid, seed=(0.3, 0.3))
    assert all(abs(r.value) < 1e-8 for r in rows)


# -- corners -------------------------------------------------------------------------------------------

def test_corner_curve_examples():
    arc = corner_curve(1, 1, 0.25)
    assert arc.x[0] == 0.25 and arc.x[-1] == 1.0
    assert arc.y[0] == pytest.approx(1.0, rel=1e-15)
    assert np.allclose(arc.x * arc.y, 0.25, rtol=1e-14, atol=0)
    arc = corner_curve(1.3, 0.7, 0.1)
    assert np.max(np.abs(arc.x ** 1.3 * arc.y ** 0.7 / 0.1 - 1)) <= 1e-14


def test_corner_monomial_examples():
    assert corner_monomial_integral(1, 1, 1, 1, 0.25) == pytest.approx(-0.25 * math.log(0.25), rel=1e-14)
    assert abs(corner_monomial_integral(2, 1, 1.2, 0.8, 1 - 1e-12)) < 1e-10


def _corner_quad(p, q, lam, mu, t):
    arc = corner_curve(lam, mu, t)
    lx = math.log(arc.x[0])
    # in log x the integrand is smooth and bounded
    g = lambda u: math.exp(p * u) * float(arc.y_of(math.exp(u))) ** q
    return quad(g, lx, 0.0, epsabs=0, epsrel=1e-13, limit=200)[0]


@given(st.integers(1, 4), st.integers(0, 4), st.floats(0.3, 3), st.floats(0.3, 3), st.floats(1e-3, 0.95))
def test_corner_formula_vs_quadrature(p, q, lam, mu, t):
    want = _corner_quad(p, q, lam, mu, t)
    assert corner_monomial_integral(p, q, lam, mu, t) == pytest.approx(want, abs=1e-8, rel=1e-10)


def test_corner_formula_example_quadrature():
    assert corner_monomial_integral(1, 2, 1, 1.5, 0.3) == pytest.approx(_corner_quad(1, 2, 1, 1.5, 0.3), abs=1e-8)


def test_linearize_triangle_corner():
    s = triangle((1, 1, math.sqrt(2)))
    chart = linearize_corner(s, (0, 1), corner=(0.0, 0.0))
    assert chart.residual <= 1e-8 and chart.radius > 0
    x, y = 0.03, 0.05
    u, v = chart.forward(x, y)
    assert (u, v) == pytest.approx((x, y * (1 - x - y) ** math.sqrt(2)), rel=1e-14)
    assert chart.inverse(u, v) == pytest.approx((x, y), abs=1e-14)


def test_linearize_identity():
    s = DarbouxSystem((X, Y), (1.0, 2.0), (-1, 1, -1, 1))
    chart = linearize_corner(s, (0, 1))
    assert chart.forward(0.2, 0.3) == pytest.approx((0.2, 0.3))
    assert chart.residual <= 1e-14


def test_linearize_tangent_curves():
    s = DarbouxSystem((Y - X ** 2, Y), (1.0, 1.0), (-1, 1, -1, 1))
    with pytest.raises(TransversalityFailure):
        linearize_corner(s, (0, 1), corner=(0.0, 0.0))


# -- admissibility and I/O ---------------------------------------------------------------------------------

def test_admissibility_cases():
    s = triangle()
    assert admissibility_check(s, AdmissibleForm.theta(s))
    too_deep = AdmissibleForm(Poly2([[1.0]]), Poly2([[0.0]]), (2, 0, 0), 1)
    assert not admissibility_check(s, too_deep)
    assert pole_orders(s, too_deep) == (2, 0, 0)
    polynomial = AdmissibleForm(Poly2([[0.0]]), X)
    assert admissibility_check(s, polynomial) and pole_orders(s, polynomial) == (0, 0, 0)
    vanishing = AdmissibleForm(Poly2([[0.0]]), Poly2([[0.0]]), (3, 3, 3), 0)
    assert admissibility_check(s, vanishing)
    with pytest.raises(ValueError):
        AdmissibleForm(X, Y, (-1, 0, 0))


def test_json_round_trip():
    s = triangle((1, 1, math.sqrt(2)))
    omega = AdmissibleForm.theta(s)
    s2, o2 = system_loads(system_dumps(s, omega))
    assert s2.exponents == s.exponents and s2.box == s.box
    assert all(a == b for a, b in zip(s.polys, s2.polys))
    assert o2.dx == omega.dx and o2.dy == omega.dy and o2.denom_powers == omega.denom_powers
