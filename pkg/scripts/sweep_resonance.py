"""Zero counts while one exponent sweeps through a resonance (lambda_2 = 2 by default)."""
import argparse

import numpy as np

from pseudoabel import fixtures
from pseudoabel.sweep import SweepSpec, sweep_zero_counts


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=1.9)
    ap.add_argument("--hi", type=float, default=2.1)
    ap.add_argument("--points", type=int, default=21)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    base = fixtures.one_zero_two_lambdas()
    spec = SweepSpec(tuple(np.linspace(args.lo, args.hi, args.points)), indices=(1,), relative=False,
                     with_reduction=True)
    res = sweep_zero_counts(spec, base, threads=args.threads)
    print("lambda_2,N,certified,flags,delta1-delta0 per step")
    for r in res.rows:
        deltas = " ".join(f"{d1 - d0:.3f}" if d0 is not None and d1 is not None else "-"
                          for _, _, d0, d1 in r.steps)
        print(f"{r.delta!r},{r.count},{r.certified},{' '.join(r.flags)},{deltas}")
    print(f"# max N = {res.max_count}, all certified: {res.all_certified}")


if __name__ == "__main__":
    main()
