"""Multiplicity thresholds and numerical solution pairs for critical
p-Laplacian and (p,q)-Laplacian Dirichlet problems on boxes."""

from .eigen import EigenPair, EigenSequence, eigs_continuation, eigs_linear_p2, first_eigen_p
from .fem import FemFunction, P1Space, energy
from .mesh import SimplicialMesh, build_box_mesh, read_mesh, write_mesh
from .params import HypothesisConstants, ProblemParams, constants_for
from .sobolev import ps_ceiling, sobolev_constant
from .thresholds import nu_general, nu_resonant, sup_tau, threshold_p, threshold_pq
from .variational import SolverConfig, deflated_multisolve, mountain_pass, scan_lambda

__all__ = [
    "EigenPair", "EigenSequence", "eigs_continuation", "eigs_linear_p2", "first_eigen_p",
    "FemFunction", "P1Space", "energy",
    "SimplicialMesh", "build_box_mesh", "read_mesh", "write_mesh",
    "HypothesisConstants", "ProblemParams", "constants_for",
    "ps_ceiling", "sobolev_constant",
    "nu_general", "nu_resonant", "sup_tau", "threshold_p", "threshold_pq",
    "SolverConfig", "deflated_multisolve", "mountain_pass", "scan_lambda",
]
