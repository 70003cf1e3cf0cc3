"""How often the elbow rule recovers k=3 as blob separation shrinks."""
import argparse

import numpy as np

from poremine.analytics import select_k
from poremine.synth import simplex_centers


def blobs(centers, per_blob, seed):
    # drawn directly: the package generator refuses separations under 6 spreads
    rng = np.random.default_rng(seed)
    return np.vstack([c + rng.standard_normal((per_blob, len(c))) for c in centers])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--per-blob", type=int, default=50)
    ap.add_argument("--ratios", type=float, nargs="+", default=[8.0, 6.0, 4.0, 3.0, 2.0])
    args = ap.parse_args()

    print("separation/spread  k=3 hits")
    for ratio in args.ratios:
        centers = simplex_centers(3, args.dim, ratio)
        hits = sum(select_k(blobs(centers, args.per_blob, s), 10, seed=s).k == 3 for s in range(args.runs))
        print(f"{ratio:>17.1f}  {hits:>3}/{args.runs}")


if __name__ == "__main__":
    main()
