"""Periodic-orbit continuation for a ring of equal masses with an axial body."""

from .bifurcate import (
    BifurcationReport,
    bifurcation_point,
    degeneracy_margin,
    nondegeneracy,
    resonance_ratio,
    xi_second_derivative,
)
from .continuation import (
    Branch,
    BranchPoint,
    EndpointReport,
    StepControl,
    StopRules,
    classify_endpoint,
    continue_branch,
    tangent,
    theta_curvature_numeric,
)
from .integrate import EvalPoint, FlowResult, IntegratorConfig, eval_at, flow
from .model import (
    CartesianState,
    ReducedState,
    SystemParams,
    cartesian_lift,
    full_rhs,
    lambda_n,
    reduced_energy,
    reduced_rhs,
    variational_rhs,
)
from .orbits import (
    ResonanceTarget,
    Trajectory,
    closure_order,
    export,
    find_resonance,
    reconstruct,
)
from .shoot import SeedPoint, SymmetryKind, newton_correct, residual, residual_desing

__version__ = "0.1.0"

__all__ = [
    "BifurcationReport",
    "Branch",
    "BranchPoint",
    "CartesianState",
    "EndpointReport",
    "EvalPoint",
    "FlowResult",
    "IntegratorConfig",
    "ReducedState",
    "ResonanceTarget",
    "SeedPoint",
    "StepControl",
    "StopRules",
    "SymmetryKind",
    "SystemParams",
    "Trajectory",
    "bifurcation_point",
    "cartesian_lift",
    "classify_endpoint",
    "closure_order",
    "continue_branch",
    "degeneracy_margin",
    "eval_at",
    "export",
    "find_resonance",
    "flow",
    "full_rhs",
    "lambda_n",
    "newton_correct",
    "nondegeneracy",
    "reconstruct",
    "reduced_energy",
    "reduced_rhs",
    "residual",
    "residual_desing",
    "resonance_ratio",
    "tangent",
    "theta_curvature_numeric",
    "variational_rhs",
    "xi_second_derivative",
]
