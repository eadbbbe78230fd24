"""Literal real-axis kernel versus its analytic continuation.

Prints both Fredholm values next to the direct density integral over an
h-grid; the continued value tracks the density, the literal one does not.

    python scripts/contour_discrepancy.py [--nu-hat -0.5,0.5] [--a 0.5]
"""

import argparse

import numpy as np

from wmfred.fredholm import fredholm_rank_det
from wmfred.kernel import DriftSpec, ObservablePoint
from wmfred.measure import direct_observable


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--nu-hat", default="-0.5,0.5")
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--t", type=float, default=1.0)
    args = p.parse_args()
    drift = DriftSpec(tuple(float(v) for v in args.nu_hat.split(",")), args.a)
    print("h,shifted,real,direct")
    for h in np.linspace(-2, 2, 9):
        obs = ObservablePoint(args.t, float(h))
        s = fredholm_rank_det(drift, obs)
        r = fredholm_rank_det(drift, obs, contour="real")
        d = direct_observable(drift, obs) if drift.N <= 2 else float("nan")
        print(f"{h:.2f},{s:.10f},{r:.10f},{d:.10f}")


if __name__ == "__main__":
    main()
