"""Blow-up families u0 - W + phi for perturbed fourth-order Paneitz-type equations.

Modules: ``geometry`` (model manifolds and quadrature), ``bubble`` (bubbles,
kernel fields, transplants), ``operator`` (P_g, its inverse and certificates),
``galerkin`` and ``reduction`` (the Lyapunov-Schmidt fixed point), ``energy``
(reduced energy and its expansion) and ``driver`` (critical points, sweeps, I/O).
"""

from .bubble import ScaleLaw, alpha_n, critical_exponent, delta_of_t
from .driver import RunConfig, assemble_solution, find_critical_point, load_config, sweep
from .energy import expansion_constants, sobolev_kn
from .geometry import ManifoldModel
from .operator import constant_spec, general_spec
from .reduction import Discretization, ReductionProblem

__version__ = "0.1.0"

__all__ = [
    "ManifoldModel", "ScaleLaw", "alpha_n", "critical_exponent", "delta_of_t", "constant_spec",
    "general_spec", "Discretization", "ReductionProblem", "expansion_constants", "sobolev_kn",
    "RunConfig", "load_config", "find_critical_point", "assemble_solution", "sweep",
]
