"""Monte Carlo estimate against both Fredholm values, in standard errors.

    python scripts/cbm_comparison.py [--samples 100000] [--seed 7]
"""

import argparse

from wmfred.cbm import MCConfig, cbm_estimate
from wmfred.fredholm import fredholm_rank_det
from wmfred.kernel import DriftSpec, ObservablePoint

CONFIGS = {
    "N=1": DriftSpec((0.3,), 0.5),
    "N=2": DriftSpec((-0.5, 0.5), 0.5),
    "N=3": DriftSpec((-0.6, 0.0, 0.7), 0.4),
}


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    mc = MCConfig(args.samples, seed=args.seed, workers=args.workers)
    print("config,h,estimate,se,median_of_means,continued,real_axis,z_continued,z_real_axis,z_imag")
    for name, drift in CONFIGS.items():
        for h in (-1.0, 0.0, 1.0):
            obs = ObservablePoint(1.0, h)
            e = cbm_estimate(drift, obs, mc)
            cont = fredholm_rank_det(drift, obs)
            real = fredholm_rank_det(drift, obs, contour="real")
            print(f"{name},{h},{e.value:.6f},{e.std_error:.6f},{e.median_of_means:.6f},{cont:.6f},{real:.6f},"
                  f"{(e.value - cont) / e.std_error:+.2f},{(e.value - real) / e.std_error:+.2f},"
                  f"{e.imag_residual / e.imag_std_error:+.2f}")


if __name__ == "__main__":
    main()
