"""Petrov inequality on random real J-series; prints one line per series and a summary."""
import argparse
import math

import numpy as np

from pseudoabel.fixtures import random_jseries
from pseudoabel.zerocount import verify_petrov


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=None, help="spectrum size (random 1..3 by default)")
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    tally = {"holds": 0, "violated": 0, "inconclusive": 0}
    slack = []
    for k in range(args.count):
        s = random_jseries(rng, n=args.n)
        chk = verify_petrov(s, math.pi * s.spectrum[-1])
        tally[chk.status] += 1
        if chk.rhs is not None:
            slack.append(chk.rhs - chk.lhs)
        if not args.quiet:
            print(f"{k:4d} n={s.n} N(f)={chk.lhs} rhs={chk.rhs if chk.rhs is None else round(chk.rhs, 4)} "
                  f"{chk.status}")
    print(f"holds {tally['holds']}  inconclusive {tally['inconclusive']}  violated {tally['violated']}")
    if slack:
        print(f"slack rhs - N(f): min {min(slack):.3f}  median {float(np.median(slack)):.3f}")


if __name__ == "__main__":
    main()
