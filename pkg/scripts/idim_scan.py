"""Two-NN intrinsic dimension of benchmark ensembles vs subsample size.

The estimator needs only nearest-neighbor ratios, so a few thousand
frames per repeat are plenty; the scan shows how stable the estimate is.
"""

import argparse

import numpy as np

from scorefes.idim import twonn_estimate
from scorefes.synthetic import benchmark_names, benchmark_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--benchmarks", nargs="+", default=["torus2", "torus5", "torus10"],
                    choices=benchmark_names())
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 5000])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--n-frames", type=int, default=50_000)
    args = ap.parse_args()

    print(f"{'benchmark':>10} {'n':>6} " +
          " ".join(f"{'rep' + str(r):>6}" for r in range(args.repeats)) +
          f" {'median':>7}")
    for name in args.benchmarks:
        bm = benchmark_suite(name, n_frames=args.n_frames)
        samples = bm.dataset.samples
        for size in args.sizes:
            ests = []
            for rep in range(args.repeats):
                idx = np.random.default_rng(rep).choice(samples.shape[0], size,
                                                        replace=False)
                res = twonn_estimate(samples[idx], bm.space)
                ests.append(res.d_hat)
            row = " ".join(f"{d:6.2f}" for d in ests)
            print(f"{name:>10} {size:>6} {row} {np.median(ests):7.2f}")


if __name__ == "__main__":
    main()
