"""Batch driver: ``stabledom {verify,iterate,apply,sample,bounds,all}``.

Each subcommand maps onto one library module. Artifacts are named
``<kind>_<confighash>...`` so identical configs write identical files.
Exit status: 0 all gated checks pass, 1 a gated check failed, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .errors import ConfigError, StableDomError
from .io import write_json
from .kernels import SamplingPlan, verify_assumptions
from .lattice import export_iterated_csv, iterate_kernels, mass_identity_defect
from .montecarlo import estimate_density
from .reports import BoundReport
from .semigroup import Field, apply_semigroup
from .truncation import make_context
from . import verifier

SUBCOMMANDS = ("verify", "iterate", "apply", "sample", "bounds", "all")
MODULE_OF = {"verify": "kernels", "iterate": "lattice", "apply": "semigroup",
             "sample": "montecarlo", "bounds": "verifier"}


@dataclass
class Run:
    cfg: ExperimentConfig
    workers: int = 1
    reports: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    _contexts: dict = field(default_factory=dict)
    _iterated: dict = field(default_factory=dict)
    _densities: list | None = None

    def __post_init__(self):
        self.kernel = self.cfg.build_kernel()
        self.lat = self.cfg.build_lattice()
        self.quad = self.cfg.build_quad()
        self.tol = self.cfg.tolerances
        self.tag = self.cfg.hash()
        self.out = Path(self.cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)

    def wants(self, check: str) -> bool:
        return check in self.cfg.checks

    def context(self, eps: float):
        if eps not in self._contexts:
            self._contexts[eps] = make_context(self.kernel, eps, self.quad)
        return self._contexts[eps]

    def path(self, name: str) -> Path:
        p = self.out / f"{name}_{self.tag}"
        self.artifacts.append(p.name)
        return p

    def guarded(self, stage: str, name: str, fn):
        """Run one check; library errors become a failed report naming the module."""
        try:
            rep = fn()
        except StableDomError as exc:
            rep = BoundReport(f"{name}", passed=False, worst_ratio=float("inf"), fitted_constant=float("nan"),
                              notes=[f"{MODULE_OF[stage]} raised {type(exc).__name__}: {exc}"])
        if rep is not None:
            self.reports.append(rep)
        return rep

    # ---------------------------------------------------------------- caches

    def iterated(self, eps: float):
        if eps not in self._iterated:
            ctx = self.context(eps)
            src = self.lat.index_of(self.cfg.source_point())
            its = iterate_kernels(ctx, self.lat, int(src), self.cfg.orders)
            i = sorted(self.cfg.eps, reverse=True).index(eps)
            export_iterated_csv(its, self.path(f"iterated_eps{i}").with_suffix(".csv"))
            self._iterated[eps] = its
        return self._iterated[eps]

    def densities(self):
        if self._densities is None:
            mc = self.cfg.montecarlo
            binning = mc.build_binning(self.kernel.dim)
            ests = []
            for i, eps in enumerate(mc.eps):
                est = estimate_density(self.context(eps), self.cfg.mc_start(), mc.t, mc.N, binning,
                                       seed=mc.seed, workers=self.workers)
                est.to_csv(self.path(f"density_eps{i}").with_suffix(".csv"))
                ests.append(est)
            self._densities = ests
        return self._densities


# -------------------------------------------------------------------- stages


def stage_verify(run: Run) -> None:
    if run.wants("assumptions"):
        plan = SamplingPlan(eps_values=tuple(run.cfg.eps))
        run.guarded("verify", "assumptions", lambda: verify_assumptions(run.kernel, plan, run.quad))
    if run.wants("intensity"):
        run.guarded("verify", "intensity", lambda: verifier.check_intensity_bounds(run.kernel, run.cfg.eps, run.quad))


def stage_iterate(run: Run) -> None:
    if not run.wants("mass_identity"):
        return

    def mass():
        children = []
        for eps in sorted(run.cfg.eps, reverse=True):
            defects = [mass_identity_defect(it) for it in run.iterated(eps)]
            worst = max(defects)
            children.append(BoundReport(f"eps={eps:g}", passed=worst <= run.tol.mass,
                                        worst_ratio=worst / run.tol.mass, fitted_constant=worst,
                                        extra={"defects": defects}))
        return BoundReport.combine("mass identity", children)

    run.guarded("iterate", "mass identity", mass)


def stage_apply(run: Run) -> None:
    phis = run.cfg.build_functions()
    centre = run.lat.nearest_index(np.zeros(run.kernel.dim))
    for i, eps in enumerate(sorted(run.cfg.eps, reverse=True)):
        def evaluations(eps=eps, i=i):
            ctx = run.context(eps)
            for j, t in enumerate(run.cfg.times):
                for k, phi in enumerate(phis):
                    ev = apply_semigroup(ctx, run.lat, Field.from_function(run.lat, phi), t)
                    ev.to_csv(run.path(f"semigroup_eps{i}_t{j}_f{k}").with_suffix(".csv"))
        run.guarded("apply", f"semigroup eps={eps:g}", evaluations)

    def conservative():
        children = []
        for eps in sorted(run.cfg.eps, reverse=True):
            ctx = run.context(eps)
            one = Field.constant(run.lat, 1.0)
            worst = max(abs(apply_semigroup(ctx, run.lat, one, t).result.values[centre] - 1.0)
                        for t in run.cfg.times)
            children.append(BoundReport(f"eps={eps:g}", passed=worst <= run.tol.conservative,
                                        worst_ratio=worst / run.tol.conservative, fitted_constant=worst))
        return BoundReport.combine("conservativeness", children)

    def invariance():
        children = []
        for eps in sorted(run.cfg.eps, reverse=True):
            ctx = run.context(eps)
            phi = Field.from_function(run.lat, phis[0])
            t = max(run.cfg.times)
            u = apply_semigroup(ctx, run.lat, phi, t).result.values
            v = apply_semigroup(ctx, run.lat, phi, t, rate=1.2 * ctx.b_bar).result.values
            worst = float(np.max(np.abs(u - v)))
            children.append(BoundReport(f"eps={eps:g}", passed=worst <= run.tol.invariance,
                                        worst_ratio=worst / run.tol.invariance, fitted_constant=worst))
        return BoundReport.combine("uniformization invariance", children)

    def law():
        children = []
        s, t = 0.3, 0.7
        for eps in sorted(run.cfg.eps, reverse=True):
            ctx = run.context(eps)
            phi = Field.from_function(run.lat, phis[0])
            whole = apply_semigroup(ctx, run.lat, phi, s + t).result.values
            split = apply_semigroup(ctx, run.lat, apply_semigroup(ctx, run.lat, phi, t).result, s).result.values
            worst = float(np.max(np.abs(whole - split)))
            children.append(BoundReport(f"eps={eps:g}", passed=worst <= run.tol.semigroup_law,
                                        worst_ratio=worst / run.tol.semigroup_law, fitted_constant=worst))
        return BoundReport.combine("semigroup law (0.3, 0.7)", children)

    if run.wants("conservativeness"):
        run.guarded("apply", "conservativeness", conservative)
    if run.wants("invariance"):
        run.guarded("apply", "uniformization invariance", invariance)
    if run.wants("semigroup_law"):
        run.guarded("apply", "semigroup law", law)


def stage_sample(run: Run) -> None:
    def sample():
        ests = run.densities()
        return BoundReport("density estimates", passed=True, gated=False,
                           extra={"atom_mass": [e.atom_mass for e in ests],
                                  "out_of_range_mass": [e.out_of_range_mass for e in ests],
                                  "eps": list(run.cfg.montecarlo.eps)})

    run.guarded("sample", "density estimates", sample)


def stage_bounds(run: Run) -> None:
    k = run.kernel
    if run.wants("series"):
        run.guarded("bounds", "series bound",
                    lambda: verifier.check_series_bound(sorted({0.0, 0.5, 1.0, k.dim / k.alpha})))
    if run.wants("subharmonicity"):
        run.guarded("bounds", "subharmonicity", lambda: verifier.check_subharmonicity(
            k, run.cfg.eps, kappa_min=run.tol.kappa_min, n_pairs=run.cfg.subharmonic_pairs,
            seed=run.cfg.montecarlo.seed, quad=run.quad)[0])
    if run.wants("estimates"):
        def estimates():
            children = [verifier.check_estimates(run.iterated(eps), k, drift_tol=run.tol.drift,
                                                 mass_tol=run.tol.mass)
                        for eps in sorted(run.cfg.eps, reverse=True)]
            for c, eps in zip(children, sorted(run.cfg.eps, reverse=True)):
                c.name = f"estimates eps={eps:g}"
            return BoundReport.combine("estimates", children)
        run.guarded("bounds", "estimates", estimates)
    integrable = [p for p in run.cfg.build_functions() if p.exterior == 0]
    if run.wants("semigroup_bound") and integrable:
        run.guarded("bounds", "semigroup bound", lambda: verifier.check_semigroup_bound(
            [run.context(e) for e in sorted(run.cfg.eps, reverse=True)], run.lat, integrable,
            run.cfg.times, stability=run.tol.stability))
    if run.wants("density_bound"):
        run.guarded("bounds", "density bound", lambda: verifier.check_density_bound(
            run.densities(), k.alpha, stability=run.tol.stability))
    if run.wants("generator_decay") and integrable:
        run.guarded("bounds", "generator decay",
                    lambda: verifier.generator_decay(k, integrable[0], min(run.cfg.eps), quad=run.quad))


STAGES = {"verify": stage_verify, "iterate": stage_iterate, "apply": stage_apply,
          "sample": stage_sample, "bounds": stage_bounds}


def run(cfg: ExperimentConfig, subcommand: str, workers: int = 1) -> tuple[int, dict]:
    """Execute a pipeline; returns (exit status, summary dict)."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    r = Run(cfg, workers=workers)
    for name in (STAGES if subcommand == "all" else [subcommand]):
        STAGES[name](r)
    failures = [f for rep in r.reports for f in rep.failures()]
    summary = {
        "config_hash": r.tag,
        "subcommand": subcommand,
        "config": cfg.identity(),
        "passed": not failures,
        "failures": failures,
        "reports": [rep.to_dict() for rep in r.reports],
        "artifacts": sorted(r.artifacts),
    }
    base = r.out / f"summary_{subcommand}_{r.tag}"
    write_json(base.with_suffix(".json"), summary)
    base.with_suffix(".md").write_text("\n\n".join(rep.to_markdown() for rep in r.reports) + "\n")
    for rep in r.reports:
        print(rep.summary_line())
    for f in failures:
        print(f"FAILED: {f}")
    return (0 if not failures else 1), summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stabledom", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", type=Path, default=None, help="JSON experiment config (defaults built in)")
    p.add_argument("--seed", type=int, default=None, help="master seed for Monte Carlo (unsigned 64-bit)")
    p.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo sampling")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--tolerance-scale", type=float, default=None,
                   help="multiply every tolerance (values > 1 loosen)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(seed=args.seed, out=None if args.out is None else str(args.out),
                                 tolerance_scale=args.tolerance_scale)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        status, _ = run(cfg, args.subcommand, workers=args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
