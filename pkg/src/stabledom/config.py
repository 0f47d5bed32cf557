"""Experiment configuration: plain dataclasses loaded from JSON and validated."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .functions import TestFunction, make_function
from .io import config_hash, read_json
from .kernels import JumpKernel, make_kernel
from .lattice import Lattice
from .montecarlo import GridBinning, RadialBinning
from .quadrature import QuadSpec

CHECKS = ("assumptions", "intensity", "mass_identity", "estimates", "conservativeness",
          "invariance", "semigroup_law", "series", "subharmonicity", "semigroup_bound",
          "density_bound", "generator_decay")


@dataclass(frozen=True)
class KernelSpec:
    name: str = "isotropic"
    params: dict = field(default_factory=lambda: {"alpha": 1.0, "dim": 1})
    M: float | None = None
    a: float | None = None

    def build(self) -> JumpKernel:
        return make_kernel(self.name, self.params, M=self.M, a=self.a)


@dataclass(frozen=True)
class LatticeSpec:
    R: float = 16.0
    n: int = 1025

    def build(self, dim: int) -> Lattice:
        return Lattice(float(self.R), int(self.n), dim)


@dataclass(frozen=True)
class MonteCarloSpec:
    N: int = 100_000
    seed: int = 0
    t: float = 1.0
    eps: tuple = (0.1, 0.05, 0.025)
    x0: tuple | None = None
    r_min: float = 0.05
    r_max: float = 50.0
    n_bins: int = 25
    binning: str = "radial"

    def build_binning(self, dim: int):
        if self.binning == "radial":
            return RadialBinning(np.concatenate([[0.0], np.geomspace(self.r_min, self.r_max, self.n_bins)]), dim)
        if self.binning == "grid":
            return GridBinning.uniform(-self.r_max, self.r_max, self.n_bins, dim)
        raise ConfigError(f"unknown binning {self.binning!r}")


@dataclass(frozen=True)
class Tolerances:
    mass: float = 1e-2
    conservative: float = 1e-3
    invariance: float = 1e-8
    semigroup_law: float = 1e-3
    drift: float = 0.2
    stability: float = 2.0
    kappa_min: float = 0.02
    mc_sigma: float = 3.0

    def scaled(self, s: float) -> "Tolerances":
        """Loosen (s > 1) or tighten (s < 1) every tolerance; kappa_min is divided."""
        if s <= 0:
            raise ConfigError("tolerance scale must be positive")
        vals = {f.name: getattr(self, f.name) * s for f in fields(self)}
        vals["kappa_min"] = self.kappa_min / s
        return Tolerances(**vals)


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    eps: tuple = (0.5, 0.25, 0.125, 0.0625)
    lattice: LatticeSpec = field(default_factory=LatticeSpec)
    times: tuple = (0.1, 0.5, 1.0)
    functions: tuple = ({"name": "bump", "center": 0.0, "radius": 1.0},
                        {"name": "indicator", "lo": 1.0, "hi": 2.0})
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    checks: tuple = CHECKS
    out: str = "results"
    tolerances: Tolerances = field(default_factory=Tolerances)
    orders: int = 20
    source: tuple | None = None
    quad: dict = field(default_factory=dict)
    subharmonic_pairs: int = 50

    # -------------------------------------------------------------- loading

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "kernel" in data:
                data["kernel"] = KernelSpec(**data["kernel"])
            if "lattice" in data:
                data["lattice"] = LatticeSpec(**data["lattice"])
            if "montecarlo" in data:
                mc = dict(data["montecarlo"])
                for key in ("eps", "x0"):
                    if mc.get(key) is not None:
                        mc[key] = tuple(mc[key])
                data["montecarlo"] = MonteCarloSpec(**mc)
            if "tolerances" in data:
                data["tolerances"] = Tolerances(**data["tolerances"])
        except TypeError as exc:
            raise ConfigError(f"bad config section: {exc}") from exc
        for key in ("eps", "times", "functions", "checks", "source"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = read_json(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def identity(self) -> dict:
        """Everything that affects results (the output directory does not)."""
        d = self.to_dict()
        d.pop("out")
        return d

    def hash(self) -> str:
        return config_hash(self.identity())

    def with_overrides(self, seed: int | None = None, out: str | None = None,
                       tolerance_scale: float | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, montecarlo=replace(cfg.montecarlo, seed=int(seed)))
        if out is not None:
            cfg = replace(cfg, out=str(out))
        if tolerance_scale is not None:
            cfg = replace(cfg, tolerances=cfg.tolerances.scaled(float(tolerance_scale)))
        cfg.validate()
        return cfg

    # ------------------------------------------------------------- building

    def build_kernel(self) -> JumpKernel:
        return self.kernel.build()

    def build_lattice(self) -> Lattice:
        return self.lattice.build(self.build_kernel().dim)

    def build_functions(self) -> list[TestFunction]:
        dim = self.build_kernel().dim
        out = []
        for spec in self.functions:
            spec = dict(spec)
            name = spec.pop("name", None)
            if name is None:
                raise ConfigError("each function needs a 'name'")
            out.append(make_function(name, dim, **spec))
        return out

    def build_quad(self) -> QuadSpec:
        try:
            return QuadSpec(**self.quad)
        except TypeError as exc:
            raise ConfigError(f"bad quadrature options: {exc}") from exc

    def source_point(self) -> np.ndarray:
        dim = self.build_kernel().dim
        return np.zeros(dim) if self.source is None else np.asarray(self.source, dtype=float).reshape(dim)

    def mc_start(self) -> np.ndarray:
        dim = self.build_kernel().dim
        x0 = self.montecarlo.x0
        return np.zeros(dim) if x0 is None else np.asarray(x0, dtype=float).reshape(dim)

    # ------------------------------------------------------------ validation

    def validate(self) -> None:
        kernel = self.build_kernel()
        if not self.eps or any(not (e > 0 and math.isfinite(e)) for e in self.eps):
            raise ConfigError("eps sweep must be a nonempty list of positive numbers")
        if not self.times or any(not (t > 0 and math.isfinite(t)) for t in self.times):
            raise ConfigError("times must be a nonempty list of positive numbers")
        if kernel.dim not in (1, 2):
            raise ConfigError("lattice pipelines support d = 1 and d = 2 only")
        try:
            lat = self.lattice.build(kernel.dim)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if lat.h >= min(self.eps):
            raise ConfigError(f"lattice spacing {lat.h:g} must be below the smallest eps {min(self.eps):g}")
        for f in fields(self.tolerances):
            if not getattr(self.tolerances, f.name) > 0:
                raise ConfigError(f"tolerance {f.name} must be positive")
        bad = set(self.checks) - set(CHECKS)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}; known: {list(CHECKS)}")
        mc = self.montecarlo
        if mc.N < 1 or not 0 <= int(mc.seed) < 2 ** 64 or mc.t <= 0:
            raise ConfigError("montecarlo needs N >= 1, t > 0 and a 64-bit unsigned seed")
        if not mc.eps or any(e <= 0 for e in mc.eps):
            raise ConfigError("montecarlo eps sweep must be positive")
        mc.build_binning(kernel.dim)
        if self.orders < 1:
            raise ConfigError("orders must be at least 1")
        self.build_functions()
        self.build_quad()
        src = self.source_point()
        try:
            lat.index_of(src)
        except Exception as exc:
            raise ConfigError(f"source {src.tolist()} is not a lattice node") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    return ExperimentConfig.from_json(path)
