"""Monte Carlo density of the truncated Cauchy chain at the origin versus 1/pi^2 as eps shrinks."""

import argparse
import math

from stabledom.kernels import isotropic
from stabledom.montecarlo import GridBinning, estimate_density
from stabledom.semigroup import reference_density
from stabledom.truncation import make_context


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.01, 0.001])
    ap.add_argument("--N", type=int, default=1_000_000)
    ap.add_argument("--half-width", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    exact = float(reference_density(1.0, 1, 1.0, 0.0))
    binning = GridBinning.uniform(-args.half_width, args.half_width, 1)
    print(f"reference p(1, 0) = {exact:.6f} (1/pi^2 = {1 / math.pi ** 2:.6f})")
    print("eps,density,stderr,rel_error,atom_mass")
    for eps in args.eps:
        est = estimate_density(make_context(isotropic(1.0, 1), eps), [0.0], 1.0, args.N, binning,
                               seed=args.seed, workers=args.workers)
        d, se = float(est.density[0]), float(est.stderr[0])
        print(f"{eps:g},{d:.6f},{se:.2e},{d / exact - 1:+.4f},{est.atom_mass:.3e}")


if __name__ == "__main__":
    main()
