"""Kernel-free boundary integral solver for 3D Stokes and Navier Dirichlet problems."""
from .bie import KFBISolver, ProblemSpec, apply_bie_operator, evaluate_volume_trace, reconstruct_solution, solve_bie
from .cases import CASE_IDS, get_case
from .errors import KFBIError
from .geometry import ellipsoid, make_surface, sphere, torus
from .harness import compute_norms, run_case, run_convergence

__version__ = "0.1.0"

__all__ = [
    "CASE_IDS",
    "KFBIError",
    "KFBISolver",
    "ProblemSpec",
    "apply_bie_operator",
    "compute_norms",
    "ellipsoid",
    "evaluate_volume_trace",
    "get_case",
    "make_surface",
    "reconstruct_solution",
    "run_case",
    "run_convergence",
    "solve_bie",
    "sphere",
    "torus",
]
