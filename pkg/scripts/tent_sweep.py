"""Tent sharpness slopes for the four (kappa, alpha) pairs of the acceptance run.

    python scripts/tent_sweep.py [--workers 4]
"""

import argparse
from concurrent.futures import ProcessPoolExecutor

from hausdorff_choquet.verify import sharpness_tent

PAIRS = ((0.0, 2.0), (0.0, 3.0), (0.5, 1.5), (0.5, 2.5))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--r-list", default="0.25,0.125,0.0625")
    args = ap.parse_args()
    rs = [float(x) for x in args.r_list.split(",")]
    with ProcessPoolExecutor(args.workers) as pool:
        mapper = pool.map if args.workers > 1 else map
        print("kappa  alpha  slope    +-      expected  ratios")
        for kappa, alpha in PAIRS:
            sw = sharpness_tent(kappa, alpha, rs, mapper=mapper)
            ratios = " ".join(f"{x:.4f}" for x in sw.ratio_lower())
            print(f"{kappa:<6} {alpha:<6} {sw.slope:+.4f} {sw.halfwidth:.4f}  {sw.expected_slope:+.4f}   {ratios}")


if __name__ == "__main__":
    main()
