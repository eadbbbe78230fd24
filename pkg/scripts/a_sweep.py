"""Fredholm value against the noncolliding limit along a shrinking-a sweep.

    python scripts/a_sweep.py [--t 1] [--h 0]
"""

import argparse

from wmfred.fredholm import fredholm_rank_det
from wmfred.kernel import DriftSpec, ObservablePoint
from wmfred.ncbm import gap_probability_drifted

A_VALUES = (0.4, 0.3, 0.2, 0.15, 0.1, 0.07, 0.05, 0.03, 0.02)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--nu-hat", default="-0.5,0.5")
    args = p.parse_args()
    nu = tuple(float(v) for v in args.nu_hat.split(","))
    limit = gap_probability_drifted(nu, args.t, args.h)
    print("a,value,limit,gap")
    for a in A_VALUES:
        v = fredholm_rank_det(DriftSpec(nu, a), ObservablePoint(args.t, args.h))
        print(f"{a},{v:.10f},{limit:.10f},{abs(v - limit):.3e}")


if __name__ == "__main__":
    main()
