"""Minimisers of one-dimensional reinforced-beam free-discontinuity energies."""

from .energy import EnergyBreakdown, blake_zisserman_form, damage_count, eval_energy
from .fem import Mesh, PiecewiseDisplacement, apply_clamp, assemble_bending, assemble_load, assemble_mass, build_mesh
from .model import (
    Break,
    BreakConfig,
    BreakKind,
    DirichletDatum,
    LoadField,
    Loads,
    ModelParams,
    ParamViolation,
    Problem,
    validate_params,
)
from .solvers import (
    SolveReport,
    solve_E1_fixed,
    solve_E1_obstacle,
    solve_F1_fixed,
    solve_F1_obstacle,
    solve_G1_fixed,
    solve_fixed,
)
from .search import SearchPolicy, SearchResult, refine_positions, search
from .verify import (
    VerificationReport,
    check_breaks,
    check_compliance,
    check_euler,
    check_threshold,
    check_vi,
    poincare_constant,
    verify_solution,
)

__version__ = "0.1.0"
