import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import series_strategy
from pseudoabel import jseries as js
from pseudoabel.errors import ContourInvalid, DivergentIntegral, NearPole
from pseudoabel.fixtures import random_jseries
from pseudoabel.jseries import JSeries, SectorPoint, Spectrum, jseries_eval
from pseudoabel.mellin import (ContourSpec, MellinRep, apply_kernel, inverse_mellin, kernel_exp,
                               kernel_identity, kernel_sin, mellin_eval_at, mellin_forward, mellin_numeric,
                               mellin_to_series, petrov_series, principal_parts, rep_from_dict, rep_to_dict,
                               rotate_via_kernel)

ELL = JSeries(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})


def pp_close(g1, g2, atol):
    """Pole-wise equality of principal parts."""
    a = {round(p, 9): (c2, c1) for p, c2, c1 in principal_parts(g1)}
    b = {round(p, 9): (c2, c1) for p, c2, c1 in principal_parts(g2)}
    for pole in set(a) | set(b):
        c2a, c1a = a.get(pole, (0, 0))
        c2b, c1b = b.get(pole, (0, 0))
        if abs(c2a - c2b) > atol or abs(c1a - c1b) > atol:
            return False
    return True


# -- structural transforms -------------------------------------------------------------

def test_forward_examples():
    g = mellin_forward(js.monomial((1.0,), {(1, 0): 1.0}))
    assert dict(g.simples) == {(1, 0): 1} and not g.doubles
    assert mellin_forward(JSeries(Spectrum((1.0,)), {}, {})).is_empty
    # M ell = -1/((s+x)(s+y)): the stored double coefficient is -a
    g = mellin_forward(ELL)
    assert dict(g.doubles) == {(1, 1, 0, 1): -1}
    assert mellin_eval_at(g, 1.0) == pytest.approx(-1 / 3)


def test_eval_at_examples():
    simple = MellinRep(Spectrum((1.0,)), {}, {(1, 0): 1.0})
    assert mellin_eval_at(simple, 2.0) == pytest.approx(1 / 3)
    double = MellinRep(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    assert mellin_eval_at(double, 0.0) == pytest.approx(2.0)
    with pytest.raises(NearPole):
        mellin_eval_at(simple, -1 + 1e-10)


def test_eval_at_random_against_mpmath(rng):
    for _ in range(5):
        g = mellin_forward(random_jseries(rng, real=False))
        s = mp.mpc(1, 1)
        want = mp.mpc(0)
        inv = g.spectrum.inverse
        for (p, q, i, j), c in g.doubles.items():
            want += mp.mpc(c) / ((s + mp.mpf(p) * inv[i]) * (s + mp.mpf(q) * inv[j]))
        for (r, i), c in g.simples.items():
            want += mp.mpc(c) / (s + mp.mpf(r) * inv[i])
        got = mellin_eval_at(g, 1 + 1j)
        assert abs(got - complex(want)) <= 1e-12 * abs(complex(want))


@given(series_strategy(real=False))
def test_structural_round_trip(s):
    back = mellin_to_series(mellin_forward(s))
    assert js.coefficients_equal(back, s, atol=0)


def test_rep_json_round_trip(rng):
    g = mellin_forward(random_jseries(rng, real=False))
    back = rep_from_dict(rep_to_dict(g))
    assert dict(back.doubles) == dict(g.doubles) and dict(back.simples) == dict(g.simples)


# -- numerical forward transform -----------------------------------------------------------

def test_numeric_examples():
    assert mellin_numeric(lambda t: t, 2.0)[0] == pytest.approx(1 / 3, abs=1e-11)
    assert mellin_numeric(lambda t: t**0.3, 1.7)[0] == pytest.approx(0.5, abs=1e-11)
    assert mellin_numeric(ELL, 1.0)[0] == pytest.approx(mellin_eval_at(mellin_forward(ELL), 1.0), abs=1e-11)
    with pytest.raises(DivergentIntegral):
        mellin_numeric(ELL, -0.45)


@given(series_strategy(n=2, order=10), st.sampled_from([0.5, 1.0, 2.0 + 1.0j, 3.0 - 2.0j]))
def test_numeric_matches_structured(s, shift):
    z = -s.lower_exponent + shift
    val, err = mellin_numeric(s, z)
    assert abs(val - mellin_eval_at(mellin_forward(s), z)) <= 1e-8 + err


# -- inversion -------------------------------------------------------------------------------

def test_inverse_examples():
    simple = MellinRep(Spectrum((1.0,)), {}, {(1, 0): 1.0})
    assert inverse_mellin(simple, 0.5) == pytest.approx(0.5, abs=1e-10)
    # the true transform of ell is -1/((s+1)(s+1/2)); the plain product inverts to -ell = +0.5
    double = MellinRep(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    assert inverse_mellin(double, 0.25) == pytest.approx(0.5, abs=1e-10)
    assert inverse_mellin(mellin_forward(ELL), 0.25) == pytest.approx(-0.5, abs=1e-10)
    empty = MellinRep(Spectrum((1.0,)), {}, {})
    assert inverse_mellin(empty, 0.3) == 0


def test_inverse_contour_validation():
    g = MellinRep(Spectrum((1.0,)), {}, {(1, 0): 1.0})
    with pytest.raises(ContourInvalid):
        inverse_mellin(g, 0.5, ContourSpec(abscissa=-0.9, length=10.0))
    with pytest.raises(ContourInvalid):
        inverse_mellin(g, 1.0)


def test_inverse_reports_error(rng):
    s = random_jseries(rng, n=2, order=8)
    t = np.array([0.1, 0.5, 0.9])
    vals, errs = inverse_mellin(mellin_forward(s), t, return_error=True)
    assert np.all(errs < 1e-8)
    assert np.all(np.abs(vals - s(t)) <= errs + 1e-12)


# -- kernels -------------------------------------------------------------------------------------

def test_identity_kernel():
    g = mellin_forward(random_jseries(np.random.default_rng(5)))
    h = apply_kernel(g, kernel_identity())
    assert pp_close(g, h, atol=1e-15)


def test_sin_kernel_kills_integer_poles():
    g = MellinRep(Spectrum((1.0,)), {}, {(1, 0): 1.0})
    assert apply_kernel(g, kernel_sin(math.pi)).is_empty
    K = kernel_sin(math.pi)
    assert np.all(K.is_zero(-np.arange(1, 20)))


def test_sin_kernel_on_double_term():
    g = MellinRep(Spectrum((1.0, 2.0)), {(1, 1, 0, 1): 1.0}, {})
    h = apply_kernel(g, kernel_sin(math.pi))
    parts = principal_parts(h)
    assert len(parts) == 1
    pole, c2, c1 = parts[0]
    assert pole == pytest.approx(-0.5) and c2 == 0
    # residue of sin(pi s)/((s+1)(s+1/2)) at -1/2, by a numerical contour integral
    th = np.linspace(0, 2 * math.pi, 400, endpoint=False)
    z = -0.5 + 0.2 * np.exp(1j * th)
    res = np.mean(np.sin(math.pi * z) / ((z + 1) * (z + 0.5)) * 0.2 * np.exp(1j * th))
    assert c1 == pytest.approx(res, abs=1e-12)
    assert c1 == pytest.approx(-2.0)


@given(st.floats(-3, 3), st.floats(-4, 4), st.floats(-4, 4))
def test_sin_divdiff_properties(kappa, u, v):
    K = kernel_sin(kappa)
    dd = K.divdiff(u, v)
    assert dd == pytest.approx(K.divdiff(v, u), abs=1e-12)
    if abs(u - v) > 1e-3:
        assert dd == pytest.approx((K.value(u) - K.value(v)) / (u - v), abs=1e-12)
    assert K.divdiff(u, u) == pytest.approx(K.deriv(u), abs=1e-12)


def test_sin_divdiff_near_diagonal():
    K = kernel_sin(1.3)
    assert abs(K.divdiff(1.0, 1.0 + 1e-13) - K.deriv(1.0)) <= 1e-10 * abs(K.deriv(1.0))


@given(series_strategy(), st.floats(0.1, 3), st.floats(-2, 2))
def test_kernel_composition(s, k1, k2):
    g = mellin_forward(s)
    K1, K2 = kernel_sin(k1), kernel_exp(k2)
    twice = apply_kernel(apply_kernel(g, K1), K2)
    once = apply_kernel(g, K1 * K2)
    assert pp_close(twice, once, atol=1e-12 * max(1.0, g.coefficient_scale()))


@given(series_strategy(n=2, order=8), st.sampled_from([0.2, 0.7]))
def test_shift_identity_through_contour(s, kappa):
    g = apply_kernel(mellin_forward(s), kernel_exp(kappa))
    t = np.array([0.2, 0.5, 0.8])
    vals = inverse_mellin(g, t)
    want = np.array([jseries_eval(s, SectorPoint(x, kappa))[0] for x in t])
    assert np.max(np.abs(vals - want)) <= 1e-8


def test_rotation_two_ways_agree(rng):
    for _ in range(5):
        s = random_jseries(rng)
        t = np.array([0.3, 0.7])
        assert np.allclose(rotate_via_kernel(s, 0.9)(t), js.rotate_series(s, 0.9)(t), atol=1e-13)


# -- Petrov -----------------------------------------------------------------------------------------

def test_petrov_examples():
    mono = js.monomial((1.0,), {(1, 0): 1.0})
    assert petrov_series(mono, math.pi).is_zero
    assert petrov_series(random_jseries(np.random.default_rng(1)), 0.0).is_zero
    # P_k t**x = -sin(k x) t**x
    kappa = 0.7
    p = petrov_series(js.monomial((2.0,), {(3, 0): 1.0}), kappa)
    assert p.b[(3, 0)] == pytest.approx(-math.sin(kappa * 1.5))


@given(series_strategy(), st.floats(0.05, 4))
def test_petrov_matches_definition(s, kappa):
    p = petrov_series(s, kappa)
    for t in (0.1, 0.4, 0.9):
        want = (jseries_eval(s, SectorPoint(t, -kappa))[0] - jseries_eval(s, SectorPoint(t, kappa))[0]) / 2j
        assert abs(p(t) - want) <= 1e-9
        assert abs(p(t).imag) <= 1e-12 * max(1.0, s.coefficient_scale())


def test_petrov_certificate_is_valid(rng):
    for _ in range(10):
        s = random_jseries(rng)
        p = petrov_series(s, float(rng.uniform(0.1, 5)))
        assert p.rho == s.rho and p.C >= s.C * 0  # constructor enforces the coefficient bounds
        assert p.C > 0
