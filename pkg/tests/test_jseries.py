import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import series_strategy
from pseudoabel import jseries as js
from pseudoabel.errors import CertificateLoss, SectorOutOfRange
from pseudoabel.fixtures import random_jseries
from pseudoabel.jseries import (JSeries, SectorPoint, Spectrum, asymptotic_coeffs, asymptotic_partial_sum,
                                compensator_eval, jseries_derivative, jseries_eval, phi_stable,
                                rotate_series)

mp.mp.dps = 40


def ell_mp(x, y, t):
    """High-precision compensator at real t."""
    t = mp.mpf(t)
    x, y = mp.mpf(x), mp.mpf(y)
    if x == y:
        return t**x * mp.log(t)
    return (t**x - t**y) / (x - y)


# -- phi ----------------------------------------------------------------------------

def test_phi_examples():
    assert phi_stable(0.0) == 1.0
    assert abs(phi_stable(1.0) - (math.e - 1)) < 1e-15
    assert abs(phi_stable(1e-10) - (1 + 5e-11)) < 1e-14


@given(st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False))
def test_phi_matches_mpmath_in_unit_disc(z):
    want = complex(mp.expm1(mp.mpc(z)) / z) if z != 0 else 1.0
    assert abs(phi_stable(z) - want) <= 1e-14 * abs(want)


def test_phi_vectorised():
    z = np.array([0, 1e-8, 0.5j, -3, 40])
    assert np.allclose(phi_stable(z), [phi_stable(v) for v in z], rtol=1e-15)


# -- compensators ----------------------------------------------------------------------

def test_compensator_examples():
    assert compensator_eval(1, 1, 1.0, 1.0, 0.5) == pytest.approx(0.5 * math.log(0.5), rel=1e-15)
    assert compensator_eval(3, 2, 1.3, 0.7, 1.0) == 0
    assert compensator_eval(1, 1, 1.0, 2.0, 0.25) == pytest.approx(-0.5, rel=1e-15)


def test_compensator_domain():
    with pytest.raises(ValueError):
        compensator_eval(1, 1, 0.0, 1.0, 0.5)


@given(p=st.integers(1, 12), q=st.integers(1, 12), lam=st.floats(0.3, 4), mu=st.floats(0.3, 4),
       t=st.floats(1e-6, 1.0), arg=st.floats(-7, 7))
def test_compensator_symmetric(p, q, lam, mu, t, arg):
    pt = SectorPoint(t, arg)
    assert compensator_eval(p, q, lam, mu, pt) == compensator_eval(q, p, mu, lam, pt)


@given(p=st.integers(1, 12), lam=st.floats(0.3, 4), t=st.floats(1e-6, 0.999))
def test_compensator_continuous_at_resonance(p, lam, t):
    x = p / lam
    mu = 1 / (x - 1e-12)  # q = 1
    res = t**x * math.log(t)
    assert abs(compensator_eval(p, 1, lam, mu, t) - res) <= 1e-10 * abs(res)


@given(p=st.integers(1, 12), q=st.integers(1, 12), lam=st.floats(0.3, 4), mu=st.floats(0.3, 4),
       t=st.floats(1e-6, 0.999))
def test_compensator_bound(p, q, lam, mu, t):
    gamma = min(p / lam, q / mu)
    assert abs(t**-gamma * compensator_eval(p, q, lam, mu, t)) <= abs(math.log(t)) * (1 + 1e-12)


@given(p=st.integers(1, 16), q=st.integers(1, 16), lam=st.floats(0.5, 3), mu=st.floats(0.5, 3),
       t=st.floats(1e-4, 0.999))
def test_compensator_against_mpmath(p, q, lam, mu, t):
    want = ell_mp(mp.mpf(p) / lam, mp.mpf(q) / mu, t)
    got = compensator_eval(p, q, lam, mu, t)
    assert abs(got.imag) == 0
    assert abs(got.real - float(want)) <= 1e-12 * abs(float(want))


# -- spectrum and series ----------------------------------------------------------------------

def test_spectrum_validation():
    with pytest.raises(ValueError):
        Spectrum((1.0, -2.0))
    with pytest.raises(ValueError):
        Spectrum((1.0, 1.0 + 1e-14))
    assert list(Spectrum((2.0, 0.5)).inverse) == [0.5, 2.0]


def test_series_certificate_checks():
    with pytest.raises(CertificateLoss):
        JSeries(Spectrum((1.0,)), {}, {(1, 0): 1.0}, rho=2.0)
    with pytest.raises(ValueError):
        JSeries(Spectrum((1.0,)), {}, {(2, 0): 1.0}, C=1.0, rho=3.0)  # |b_2| > C rho**-2
    with pytest.raises(ValueError):
        JSeries(Spectrum((1.0,)), {}, {(0, 0): 1.0})  # index below 1 - m


def test_eval_examples():
    mono = js.monomial((1.0,), {(1, 0): 1.0})
    v, tail = jseries_eval(mono, 0.3)
    assert v == pytest.approx(0.3, rel=1e-15) and tail == 0
    ell = JSeries(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    assert jseries_eval(ell, 0.25)[0] == pytest.approx(-0.5, rel=1e-15)


def test_eval_random_against_mpmath(rng):
    for _ in range(5):
        s = random_jseries(rng, real=False)
        t, arg = 0.5, math.pi / 4
        L = mp.log(mp.mpf(t)) + 1j * mp.mpf(arg)
        want = mp.mpc(0)
        inv = s.spectrum.inverse
        for (p, q, i, j), c in s.a.items():
            x, y = mp.mpf(p) * inv[i], mp.mpf(q) * inv[j]
            want += mp.mpc(c) * (L * mp.exp(x * L) if x == y else (mp.exp(x * L) - mp.exp(y * L)) / (x - y))
        for (r, i), c in s.b.items():
            want += mp.mpc(c) * mp.exp(mp.mpf(r) * inv[i] * L)
        v, tail = jseries_eval(s, SectorPoint(t, arg))
        assert abs(v - complex(want)) <= tail + 1e-12


def test_sector_certificate():
    s = js.monomial((1.0,), {(1, 0): 1.0})
    jseries_eval(s, SectorPoint(0.5, 100.0))  # argument is unrestricted for real spectra
    with pytest.raises(SectorOutOfRange):
        jseries_eval(s, SectorPoint(2.0, 0.0))


@given(series_strategy())
def test_reality(s):
    t = np.linspace(0.05, 0.95, 7)
    assert np.max(np.abs(s(t).imag)) <= 1e-13 * max(1.0, s.coefficient_scale())


def test_tail_bound_dominates_dropped_terms(rng):
    full = random_jseries(rng, n=2, order=20, rho=3.0)
    kept = JSeries(full.spectrum, {k: v for k, v in full.a.items() if k[0] + k[1] <= 8},
                   {k: v for k, v in full.b.items() if k[0] <= 8}, C=full.C, rho=full.rho, order=8)
    for t in (0.1, 0.5, 0.9):
        assert abs(full(t) - kept(t)) <= js.tail_bound(kept, t)


# -- derivative ----------------------------------------------------------------------------

def test_derivative_examples():
    assert jseries_derivative(js.monomial((1.0,), {(1, 0): 1.0}), 0.37) == pytest.approx(1.0)
    ell = JSeries(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    assert abs(jseries_derivative(ell, 0.25)) < 1e-15


@given(series_strategy(), st.floats(0.05, 0.95))
def test_derivative_vs_central_difference(s, t):
    h = 1e-6
    fd = (s(t + h) - s(t - h)) / (2 * h)
    d = jseries_derivative(s, t)
    assert abs(d - fd) <= 1e-6 * max(abs(d), 1e-3 * s.coefficient_scale())


# -- asymptotics ----------------------------------------------------------------------------

def test_asymptotic_coeff_examples():
    assert asymptotic_coeffs(js.monomial((2.0,), {(1, 0): 3.0}), 0.5) == (3, 0)
    res = JSeries(Spectrum((1.0,)), {(1, 1, 0, 0): 1.0}, {})
    assert asymptotic_coeffs(res, 1.0) == (0, 1)
    ell = JSeries(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    assert asymptotic_coeffs(ell, 1.0) == pytest.approx((2, 0))
    assert asymptotic_coeffs(ell, 0.5) == pytest.approx((-2, 0))
    assert asymptotic_coeffs(ell, 0.7) == (0, 0)


def test_partial_sum_examples():
    ps = asymptotic_partial_sum(js.monomial((1.0,), {(1, 0): 1.0}), 2.0)
    assert [(t.alpha, t.c1, t.c2) for t in ps.terms] == [(1.0, 1, 0)]
    assert ps.constant == 0
    ell = JSeries(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    ps = asymptotic_partial_sum(ell, 0.75)
    assert len(ps.terms) == 1 and ps.terms[0].alpha == 0.5 and ps.terms[0].c1 == pytest.approx(-2)
    t = np.geomspace(1e-4, 0.9, 20)
    assert np.allclose(np.abs(ell(t) - ps(t)), 2 * t, rtol=1e-9)


@given(series_strategy(), st.floats(0.5, 3.0))
def test_partial_sum_envelope(s, cutoff):
    ps = asymptotic_partial_sum(s, cutoff)
    t = np.geomspace(1e-3, 0.5, 12)
    assert np.all(np.abs(s(t) - ps(t)) <= ps.envelope(t) * (1 + 1e-9) + 1e-13)


def test_admissible_cut_gap(rng):
    for _ in range(20):
        s = random_jseries(rng)
        cut = js.admissible_cut(s, float(rng.uniform(0.3, 4)))
        h = float(s.spectrum.inverse.min())
        pts = [k * v for v in s.spectrum.inverse for k in range(1, 60)]
        assert min(abs(cut - p) for p in pts) >= h / (2 * s.n) - 1e-12


# -- rotations ---------------------------------------------------------------------------------

def test_rotation_identity_and_monomial():
    s = random_jseries(np.random.default_rng(3))
    assert js.coefficients_equal(rotate_series(s, 0.0), s, atol=0)
    kappa = 0.4
    mono = rotate_series(js.monomial((1.0,), {(1, 0): 1.0}), kappa)
    assert mono.b[(1, 0)] == pytest.approx(cmath.exp(1j * kappa))
    assert mono(0.3) == pytest.approx(0.3 * cmath.exp(1j * kappa))


@given(series_strategy(), st.sampled_from([0.1, 0.3, 1.0, -0.7]))
def test_rotation_matches_rotated_evaluation(s, kappa):
    r = rotate_series(s, kappa)
    for t in (0.2, 0.5, 0.8):
        want = jseries_eval(s, SectorPoint(t, kappa))[0]
        assert abs(r(t) - want) <= 1e-9 * max(1.0, s.coefficient_scale())


@given(series_strategy(), st.floats(-1, 1), st.floats(-1, 1))
def test_rotation_composition(s, k1, k2):
    a = rotate_series(rotate_series(s, k1), k2)
    b = rotate_series(s, k1 + k2)
    t = np.array([0.2, 0.5, 0.8])
    assert np.max(np.abs(a(t) - b(t))) <= 1e-8


# -- serialisation -----------------------------------------------------------------------------

@given(series_strategy(real=False))
def test_json_round_trip_bit_exact(s):
    back = js.loads(js.dumps(s))
    assert js.coefficients_equal(back, s, atol=0)
    assert (back.C, back.rho, back.order, back.m) == (s.C, s.rho, s.order, s.m)
