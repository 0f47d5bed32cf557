"""Fitted constant of the semigroup bound per eps, time and test function for a config."""

import argparse

from stabledom.config import load_config
from stabledom.truncation import make_context
from stabledom.verifier import check_semigroup_bound, semigroup_bound_ratios


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", help="JSON experiment config, e.g. configs/isotropic.json")
    args = ap.parse_args()
    cfg = load_config(args.config)
    kernel, lat, phis = cfg.build_kernel(), cfg.build_lattice(), cfg.build_functions()
    eps = sorted(cfg.eps, reverse=True)
    print("eps,t,phi,max_ratio")
    for e in eps:
        out = semigroup_bound_ratios(make_context(kernel, e), lat, phis, cfg.times)
        for c in out["configs"]:
            print(f"{e:g},{c['t']:g},{c['phi']},{c['max_ratio']:.6f}")
    rep = check_semigroup_bound([make_context(kernel, e) for e in eps], lat, phis, cfg.times)
    print(rep.to_markdown())


if __name__ == "__main__":
    main()
