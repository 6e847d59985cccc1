"""Cantor blow-up ratios along levels k.

    python scripts/cantor_sweep.py --delta 0.8 --k-list 1,2,3,4
"""

import argparse
from concurrent.futures import ProcessPoolExecutor

from hausdorff_choquet.verify import cantor_blowup


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=0.8)
    ap.add_argument("--p", type=float, default=1.0)
    ap.add_argument("--k-list", default="1,2,3,4")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    ks = [int(x) for x in args.k_list.split(",")]
    with ProcessPoolExecutor(args.workers) as pool:
        sw = cantor_blowup(args.delta, args.p, ks, mapper=pool.map if args.workers > 1 else map)
    print("k  ratio_lower  gradient   content_floor")
    for k, r, g, c in zip(ks, sw.ratio_lower(), sw.extra["gradient"], sw.extra["content_floor"]):
        print(f"{k}  {r:.5f}      {g:.5f}    {c:.5f}")
    print(f"log-log slope of ratio against k: {sw.slope:.4f} +- {sw.halfwidth:.4f}")


if __name__ == "__main__":
    main()
