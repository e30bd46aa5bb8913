"""I(t) for omega = x dy on the triangle system as t -> 0; the limit is the triangle area 1/2."""
import argparse
import math
import time

import numpy as np

from pseudoabel.foliation import AdmissibleForm, find_center, integral_scan, triangle
from pseudoabel.poly import X, Poly2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam3", type=float, default=1.0, help="third exponent (try 1.4142135623730951)")
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--floor", type=float, default=1e-4, help="smallest level as a fraction of t_center")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    system = triangle((1.0, 1.0, args.lam3))
    center = find_center(system, (0.3, 0.3))
    omega = AdmissibleForm(Poly2([[0.0]]), X)
    grid = center.t_center * np.geomspace(0.9, args.floor, args.points)
    t0 = time.perf_counter()
    rows = integral_scan(system, omega, grid, center, threads=args.threads)
    print("t/t_center,I,err,|I-0.5|,status")
    for r in rows:
        gap = abs(r.value - 0.5) if math.isfinite(r.value) else math.nan
        print(f"{r.t / center.t_center:.3e},{r.value!r},{r.err:.2e},{gap:.4e},{r.status}")
    print(f"# center {center.point}, t_center {center.t_center!r}, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
