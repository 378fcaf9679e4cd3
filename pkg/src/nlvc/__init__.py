"""Meshfree conversion of local boundary data into nonlocal volume constraints.

The package solves the 2D nonlocal Poisson problem and the linear
peridynamic solid model with volume constraints generated from local
(surface) Dirichlet data, and verifies quadratic convergence of the
nonlocal solution to its local limit as the horizon shrinks.
"""

from .bc_conversion import AssembledSystem, build_dtd_system, build_dtn_system
from .grid_geometry import (
    INTERIOR,
    OMEGA_LOC,
    OMEGA_NLOC,
    AnnulusWithLayer,
    PointCloud,
    SquareWithLayer,
    build_point_cloud,
    classify_point,
    neighbors_within,
)
from .harness_cli import (
    ConvergenceReport,
    ExperimentConfig,
    cli_main,
    compute_e0,
    run_consistency,
    run_convergence,
)
from .linsolve import SparseMatrixCSR, solve, spmv
from .local_solutions import (
    FdPoissonSolution,
    LameCylinderParams,
    ManufacturedCase,
    fd_poisson_solve,
    registry_lookup,
    sample_local_solution,
)
from .nonlocal_operators import MaterialParams, OperatorMatrix
from .quadrature import (
    KernelSpec,
    LpsIndicator,
    MomentVector,
    PoissonConstant,
    QuadratureRule,
    build_rules,
    compute_weights,
    discrete_m,
    full_ball_moments,
    truncated_ball_moments,
)

__version__ = "0.1.0"
