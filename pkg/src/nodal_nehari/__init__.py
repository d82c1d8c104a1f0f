"""Least-energy nodal radial solutions of a Schroedinger-Poisson system.

Typical use::

    from nodal_nehari import builtin_asymcubic, make_grid, solve, certify

    nl = builtin_asymcubic()
    grid = make_grid(30.0, 4096)
    report, seed = solve(nl, 0.1, grid)
    certify(report, nl, 0.1)
"""

from .constraint import (MirandaBox, MirandaResult, NodalDecomposition, decomposition_of,
                         miranda_solve, multi_project, nehari_project, nodal_project)
from .energy import (ComponentFiber, EnergyReport, directional_derivative, energy,
                     energy_gradient_vector, fiber_scan, functional, gradient_field, gamma)
from .errors import (BracketFailure, CertificationFailed, DegenerateSign, EdgeConditionViolated,
                     GridTooCoarse, LambdaTooLarge, MaxIterExceeded, NodalNehariError,
                     NoConvergence, NoPositiveAnnulus, NoProjection, NoT0, ProjectionLost,
                     RampTooCoarse)
from .grid import RadialField, RadialGrid, h1_norm_sq, make_grid, split_signs
from .model import (HypothesisReport, Nonlinearity, builtin_asymcubic, builtin_power,
                    check_hypotheses, from_name)
from .poisson import PoissonSolution, nonlocal_coupling, solve_poisson
from .seed import SeedArtifacts, appendix_seed, positive_ground_state
from .solver import (SolveReport, certify, count_sign_changes, decoupled_two_bump,
                     minimize_on_M, solve, three_component_check)

__version__ = "0.1.0"

__all__ = [
    "appendix_seed", "BracketFailure", "builtin_asymcubic", "builtin_power",
    "CertificationFailed", "certify", "check_hypotheses", "ComponentFiber",
    "count_sign_changes", "decomposition_of", "decoupled_two_bump", "DegenerateSign",
    "directional_derivative", "EdgeConditionViolated", "energy", "energy_gradient_vector",
    "EnergyReport", "fiber_scan", "from_name", "functional", "gamma", "gradient_field",
    "GridTooCoarse", "h1_norm_sq", "HypothesisReport", "LambdaTooLarge", "make_grid",
    "MaxIterExceeded", "minimize_on_M", "miranda_solve", "MirandaBox", "MirandaResult",
    "multi_project", "nehari_project", "NoConvergence", "nodal_project", "NodalDecomposition",
    "NodalNehariError", "Nonlinearity", "nonlocal_coupling", "NoPositiveAnnulus",
    "NoProjection", "NoT0", "PoissonSolution", "positive_ground_state", "ProjectionLost",
    "RadialField", "RadialGrid", "RampTooCoarse", "SeedArtifacts", "solve", "solve_poisson",
    "SolveReport", "split_signs", "three_component_check",
]

