"""Zero counts over small families of J-series (exponent perturbations, rescalings)."""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PseudoabelError
from .jseries import JSeries, Spectrum
from .zerocount import count_zeros_unit, reduction_chain


@dataclass(frozen=True)
class SweepSpec:
    """Grid of family parameters.

    ``deltas`` perturb the spectrum entries listed in ``indices`` (all by
    default): ``lambda -> lambda * (1 + delta)`` when ``relative``, else the
    entry is set to ``delta``.  ``scales`` multiply every coefficient.
    """
    deltas: tuple = (0.0,)
    indices: tuple | None = None
    relative: bool = True
    scales: tuple = (1.0,)
    with_reduction: bool = False

    def __post_init__(self):
        if not self.deltas or not self.scales:
            raise ValueError("sweep grid must be nonempty")
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))

    @classmethod
    def relative_grid(cls, width: float = 0.01, points: int = 9, **kw) -> "SweepSpec":
        return cls(tuple(np.linspace(-width, width, points)), **kw)

    def grid(self) -> list:
        return list(itertools.product(self.deltas, self.scales))

    def perturb(self, base: JSeries, delta: float, scale: float) -> JSeries:
        idx = range(base.n) if self.indices is None else self.indices
        lam = list(base.spectrum)
        for i in idx:
            lam[i] = lam[i] * (1 + delta) if self.relative else delta
        if any(v <= 0 for v in lam):
            raise ValueError(f"perturbation {delta} makes an exponent nonpositive")
        spec = Spectrum(tuple(lam))
        return JSeries(spec, {k: scale * v for k, v in base.a.items()},
                       {k: scale * v for k, v in base.b.items()}, m=base.m, rho=base.rho,
                       order=base.order)


@dataclass(frozen=True)
class SweepRow:
    delta: float
    scale: float
    spectrum: tuple
    count: int | None
    certified: bool
    flags: tuple = ()
    steps: tuple = ()


@dataclass
class SweepResult:
    rows: list
    max_count: int | None
    all_certified: bool
    flagged: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "max_count": self.max_count,
            "all_certified": self.all_certified,
            "flagged": self.flagged,
            "rows": [{"delta": r.delta, "scale": r.scale, "spectrum": list(r.spectrum), "count": r.count,
                      "certified": r.certified, "flags": list(r.flags),
                      "steps": [list(s) for s in r.steps]} for r in self.rows],
        }


def sweep_zero_counts(spec: SweepSpec, base: JSeries, threads: int = 1) -> SweepResult:
    """Zero count on (0, 1) at every grid point; inconclusive points are flagged, not dropped."""
    grid = spec.grid()
    # validate the whole grid before doing any work
    members = [spec.perturb(base, d, s) for d, s in grid]

    def one(args):
        (d, s), sigma = args
        if sigma.is_zero:
            return SweepRow(d, s, tuple(sigma.spectrum), 0, True)
        try:
            rep = count_zeros_unit(sigma)
            steps = ()
            if spec.with_reduction:
                red = reduction_chain(sigma, with_deltas=True)
                steps = tuple((st.spectrum_index, st.kappa, st.delta0, st.delta1) for st in red.steps)
            return SweepRow(d, s, tuple(sigma.spectrum), rep.count, rep.certified,
                            tuple(f[0] for f in rep.flagged), steps)
        except PseudoabelError as exc:
            return SweepRow(d, s, tuple(sigma.spectrum), None, False, (f"{type(exc).__name__}: {exc}",))

    jobs = list(zip(grid, members))
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, jobs))
    else:
        rows = [one(j) for j in jobs]
    counts = [r.count for r in rows if r.count is not None]
    flagged = [i for i, r in enumerate(rows) if not r.certified]
    return SweepResult(rows, max(counts) if counts else None, not flagged, flagged)
