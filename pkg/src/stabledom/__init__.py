"""Truncated jump operators, uniformization series and Monte Carlo for
stable-dominated jump kernels, with numerical checks of their heat-kernel bounds."""

from .config import ExperimentConfig
from .functions import make_function
from .kernels import JumpKernel, available_kernels, make_kernel, register_kernel, verify_assumptions
from .lattice import Lattice, discretize_kernel, iterate_kernels, mass_identity_defect
from .montecarlo import estimate_density, estimate_semigroup, sample_endpoints
from .reports import BoundReport
from .semigroup import Field, apply_limit_generator, apply_semigroup, reference_density
from .truncation import b_eps, make_context

__all__ = [
    "BoundReport", "ExperimentConfig", "Field", "JumpKernel", "Lattice", "apply_limit_generator",
    "apply_semigroup", "available_kernels", "b_eps", "discretize_kernel", "estimate_density",
    "estimate_semigroup", "iterate_kernels", "make_context", "make_function", "make_kernel",
    "mass_identity_defect", "reference_density", "register_kernel", "sample_endpoints",
    "verify_assumptions",
]
__version__ = "0.1.0"
