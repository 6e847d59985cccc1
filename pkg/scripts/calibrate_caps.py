"""Largest empirical constant of each inequality over the testbed.

The verdict caps in ``verify.DEFAULT_CAPS`` were chosen to leave a factor of
at least 3 over the numbers printed here.

    python scripts/calibrate_caps.py [--cells 64 128]
"""

import argparse
from collections import defaultdict

import numpy as np

from hausdorff_choquet.grid import make_grid
from hausdorff_choquet.testbed import TentSpec, radial_bump, random_bump_sum, tent2d, truncate
from hausdorff_choquet.verify import (
    DEFAULT_CAPS,
    InequalityParams,
    verify_ko_lemma,
    verify_limit,
    verify_ps,
    verify_spw,
    verify_superlevel,
)


def testbed(cells):
    g = make_grid(2, (-1.25, 1.25), cells)
    bump = radial_bump(2, 1.0, cells)
    yield "bump", bump
    yield "truncated", truncate(bump, 0.25, 0.75)
    yield "tent", tent2d(TentSpec(0.5, cells // 8))
    for s in range(2):
        yield f"sum{s}", random_bump_sum(g, np.random.default_rng(s))


def checks(f):
    for kappa in (0.0, 0.5):
        yield "ps", verify_ps(f, InequalityParams("ps", 2, 2.0, 1.5, kappa))
        yield "spw", verify_spw(f, kappa)
        yield "limit", verify_limit(f, 2.0, kappa)
        yield "superlevel", verify_superlevel(f, kappa)
    yield "ko", verify_ko_lemma(f, 0.0, 0.5 * f.max(), 0.0)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, nargs="+", default=[64, 128])
    args = ap.parse_args()
    worst = defaultdict(float)
    for cells in args.cells:
        for name, f in testbed(cells):
            for th, rep in checks(f):
                worst[th] = max(worst[th], rep.constant)
                print(f"{cells:4d} {name:10s} {th:10s} constant={rep.constant:.4f} {rep.verdict}")
    print()
    for th, c in sorted(worst.items()):
        print(f"{th:10s} max constant {c:.4f}  cap {DEFAULT_CAPS[th]}  margin {DEFAULT_CAPS[th] / c:.2f}")


if __name__ == "__main__":
    main()
