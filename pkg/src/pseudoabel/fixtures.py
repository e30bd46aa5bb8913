"""Named J-series fixtures and a seeded random generator."""
from __future__ import annotations

import numpy as np

from .jseries import JSeries, Spectrum


def one_zero() -> JSeries:
    """``t - t**(1/2)/2``: a single simple zero at ``t = 1/4``."""
    return JSeries(Spectrum((2.0,)), {}, {(2, 0): 1.0, (1, 0): -0.5})


def one_zero_two_lambdas() -> JSeries:
    """Same function written over the spectrum ``(1, 2)``."""
    return JSeries(Spectrum((1.0, 2.0)), {}, {(1, 0): 1.0, (1, 1): -0.5})


def two_zero() -> JSeries:
    """``t**(3/2) - t + t**(1/2)/4 = sqrt(t) (sqrt(t) - 1/2)**2``: double zero at 1/4."""
    return JSeries(Spectrum((2.0,)), {}, {(3, 0): 1.0, (2, 0): -1.0, (1, 0): 0.25})


def fewnomial_one_zero() -> JSeries:
    """``t - 2.5 t**1.3 + 1.5 t**1.6``; zero where ``t**0.3 = 2/3``."""
    return JSeries(Spectrum((10.0,)), {}, {(10, 0): 1.0, (13, 0): -2.5, (16, 0): 1.5})


def two_progression_double() -> JSeries:
    """One compensator across two progressions plus monomials on both."""
    return JSeries(Spectrum((1.0, 1.7)), {(1, 1, 0, 1): 0.8}, {(1, 0): 0.3, (2, 1): -0.2})


def random_spectrum(rng: np.random.Generator, n: int, lo: float = 0.6, hi: float = 2.4,
                    min_gap: float = 0.08) -> Spectrum:
    while True:
        lam = np.sort(rng.uniform(lo, hi, size=n))
        if n == 1 or np.min(np.diff(lam)) >= min_gap:
            return Spectrum(tuple(float(x) for x in rng.permutation(lam)))


def random_jseries(rng: np.random.Generator, n: int | None = None, order: int | None = None,
                   real: bool = True, rho: float = 3.0, m: int = 0, density: float = 0.35,
                   diagonal: bool = True, spectrum: Spectrum | None = None) -> JSeries:
    """Random truncated J-series obeying ``|coef| <= rho**-index``.

    ``density`` is the probability of keeping each admissible compensator
    term; monomials are always kept.  ``diagonal=False`` drops the resonant
    ``ell(p/l, p/l) = t**(p/l) log t`` terms.
    """
    n = int(rng.integers(1, 4)) if n is None else n
    order = int(rng.integers(4, 17)) if order is None else order
    spec = spectrum if spectrum is not None else random_spectrum(rng, n)
    lo = 1 - m

    def coef(index):
        c = rng.uniform(-1, 1)
        if not real:
            c = c + 1j * rng.uniform(-1, 1)
            c /= np.sqrt(2)
        return c * rho ** (-index)

    a, b = {}, {}
    for r in range(lo, order + 1):
        for i in range(n):
            b[(r, i)] = coef(r)
    for p in range(lo, order - lo + 1):
        for q in range(lo, order - p + 1):
            for i in range(n):
                for j in range(n):
                    if not diagonal and p == q and i == j:
                        continue
                    if rng.random() < density:
                        a[(p, q, i, j)] = coef(p + q)
    return JSeries(spec, a, b, m=m, C=1.0, rho=rho, order=order)
