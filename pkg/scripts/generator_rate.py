"""Convergence order of the truncated generator on a Gaussian: sup |A phi - A_eps phi| against eps."""

import argparse

import numpy as np

from stabledom.functions import make_function
from stabledom.kernels import isotropic
from stabledom.semigroup import apply_limit_generator


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, nargs="+", default=[0.5, 1.0, 1.5])
    ap.add_argument("--dim", type=int, default=1)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05])
    args = ap.parse_args()
    phi = make_function("gaussian", args.dim)
    pts = np.array([[0.0] * args.dim, [0.5] + [0.0] * (args.dim - 1), [1.0] + [0.0] * (args.dim - 1)])
    print("alpha,eps,sup_error,slope,expected")
    for a in args.alpha:
        res = apply_limit_generator(isotropic(a, args.dim), phi, pts, args.eps)
        for e, err in zip(res.eps, res.errors):
            print(f"{a:g},{e:g},{err:.6e},{res.slope:.4f},{res.expected_slope:.4f}")


if __name__ == "__main__":
    main()
