"""Conversion of local Dirichlet boundary data into solvable nonlocal systems.

Both strategies start from a local solution sampled on the cloud and differ
only in the constraint imposed on the layer region where volumetric data is
missing:

* direct strategy: identity rows pin the nonlocal solution to the local
  one on that region (Dirichlet volume constraint);
* flux strategy: the nonlocal flux operator is collocated there and its
  right-hand side is the same flux matrix applied to the sampled local
  solution, so the constraint is consistent by construction and costs one
  matrix-vector product.

The remaining layer region always carries identity rows with the available
nonlocal Dirichlet data; interior points carry the negated operator rows
with the forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import AssemblyError, ConfigurationError
from .grid_geometry import INTERIOR, OMEGA_LOC, OMEGA_NLOC, PointCloud
from .linsolve import SolveStats, SparseMatrixCSR, solve
from .nonlocal_operators import (
    DIRICHLET_IDENTITY,
    EQUATION,
    FLUX_CONSTRAINT,
    OperatorMatrix,
)


@dataclass(frozen=True)
class AssembledSystem:
    """Square constrained system with per-row bookkeeping.

    ``dofs_per_point`` is 1 for the scalar model and 2 for LPS with
    interleaved components; row ``dofs_per_point * i + a`` belongs to point
    ``i``.
    """

    op: OperatorMatrix
    rhs: NDArray
    dofs_per_point: int

    @property
    def matrix(self) -> SparseMatrixCSR:
        return self.op.matrix

    @property
    def row_kind(self) -> NDArray:
        return self.op.row_kind

    def point_of_row(self, row: int) -> int:
        return row // self.dofs_per_point


def _expand_ids(point_ids: NDArray, dofs: int) -> NDArray:
    """Row/column indices of all components of ``point_ids``."""
    if dofs == 1:
        return point_ids
    out = np.empty(len(point_ids) * dofs, dtype=np.int64)
    for a in range(dofs):
        out[a::dofs] = dofs * point_ids + a
    return out


def _flat_values(values: NDArray, point_ids: NDArray, dofs: int) -> NDArray:
    v = values[point_ids]
    return v if dofs == 1 else v.reshape(-1)


def _check_samples(values: NDArray, point_ids: NDArray, what: str) -> None:
    if len(point_ids) and not np.all(np.isfinite(values[point_ids])):
        raise AssemblyError(f"missing or non-finite {what} samples")


def _identity_block(point_ids: NDArray, dofs: int, n_rows: int) -> SparseMatrixCSR:
    ids = _expand_ids(point_ids, dofs)
    return SparseMatrixCSR.from_coo(ids, ids, np.ones(len(ids)), (n_rows, n_rows))


def build_dtd_system(
    model: str,
    cloud: PointCloud,
    operator_rows: SparseMatrixCSR,
    u_l: NDArray,
    v_n: NDArray,
    s: NDArray,
) -> AssembledSystem:
    """Dirichlet-constrained system: identity rows over the whole layer."""
    dofs = 1 if model == "poisson" else 2
    n_rows = dofs * cloud.n_points
    interior = cloud.ids_of_region(INTERIOR)
    loc = cloud.ids_of_region(OMEGA_LOC)
    nloc = cloud.ids_of_region(OMEGA_NLOC)
    _check_samples(u_l, loc, "local-solution")
    _check_samples(v_n, nloc, "nonlocal Dirichlet")
    _check_samples(s, interior, "forcing")

    matrix = operator_rows.scaled(-1.0) + _identity_block(
        np.concatenate([loc, nloc]), dofs, n_rows
    )
    rhs = np.zeros(n_rows)
    rhs[_expand_ids(interior, dofs)] = _flat_values(s, interior, dofs)
    rhs[_expand_ids(loc, dofs)] = _flat_values(u_l, loc, dofs)
    rhs[_expand_ids(nloc, dofs)] = _flat_values(v_n, nloc, dofs)

    row_kind = np.full(n_rows, DIRICHLET_IDENTITY, dtype=np.int8)
    row_kind[_expand_ids(interior, dofs)] = EQUATION
    return AssembledSystem(
        op=OperatorMatrix(matrix=matrix, row_kind=row_kind), rhs=rhs, dofs_per_point=dofs
    )


def build_dtn_system(
    model: str,
    cloud: PointCloud,
    operator_rows: SparseMatrixCSR,
    flux_rows: SparseMatrixCSR,
    u_l: NDArray,
    v_n: NDArray,
    s: NDArray,
) -> AssembledSystem:
    """Flux-constrained system; the flux right-hand side is matrix-consistent.

    Constraint rows hold the negated flux operator scaled by ``1/delta^2``
    (conditioning only; both sides are scaled together), and their data is
    exactly those rows applied to the sampled local solution.
    """
    dofs = 1 if model == "poisson" else 2
    n_rows = dofs * cloud.n_points
    interior = cloud.ids_of_region(INTERIOR)
    loc = cloud.ids_of_region(OMEGA_LOC)
    nloc = cloud.ids_of_region(OMEGA_NLOC)
    if len(nloc) == 0:
        null_space = "constants" if model == "poisson" else "rigid motions"
        raise ConfigurationError(
            f"pure flux constraints leave the problem singular ({null_space} "
            "are in the operator kernel); nonlocal Dirichlet data must cover "
            "part of the layer"
        )
    _check_samples(v_n, nloc, "nonlocal Dirichlet")
    _check_samples(s, interior, "forcing")
    u_flat = u_l.reshape(-1) if dofs == 2 else u_l
    if not np.all(np.isfinite(u_flat)):
        raise AssemblyError("missing or non-finite local-solution samples")

    delta = cloud.domain.horizon
    constraint = flux_rows.scaled(-1.0 / delta ** 2)
    g = constraint.matvec(u_flat)

    matrix = operator_rows.scaled(-1.0) + constraint + _identity_block(nloc, dofs, n_rows)
    rhs = np.zeros(n_rows)
    rhs[_expand_ids(interior, dofs)] = _flat_values(s, interior, dofs)
    rhs[_expand_ids(loc, dofs)] = g[_expand_ids(loc, dofs)]
    rhs[_expand_ids(nloc, dofs)] = _flat_values(v_n, nloc, dofs)

    row_kind = np.full(n_rows, DIRICHLET_IDENTITY, dtype=np.int8)
    row_kind[_expand_ids(interior, dofs)] = EQUATION
    row_kind[_expand_ids(loc, dofs)] = FLUX_CONSTRAINT
    return AssembledSystem(
        op=OperatorMatrix(matrix=matrix, row_kind=row_kind), rhs=rhs, dofs_per_point=dofs
    )


def solve_system(
    system: AssembledSystem, method: str = "auto", tol: float = 1e-12
) -> tuple[NDArray, SolveStats]:
    """Solve an assembled system, condensing out the identity rows first.

    Dirichlet rows are unit-diagonal with known data, so their unknowns are
    substituted into the remaining equations before the linear solve; this
    removes the scale mixing between constraint and operator rows that
    stalls restarted Krylov methods on fine levels.  The residual contract
    is re-verified on the full system.
    """
    kinds = system.row_kind
    fixed = np.flatnonzero(kinds == DIRICHLET_IDENTITY)
    if len(fixed) == 0:
        return solve(system.matrix, system.rhs, method=method, tol=tol)
    free = np.flatnonzero(kinds != DIRICHLET_IDENTITY)
    S = system.matrix.scipy()
    x = np.empty(S.shape[0])
    x[fixed] = system.rhs[fixed]
    sub = S[free]
    A_ff = SparseMatrixCSR(sub[:, free])
    b_f = system.rhs[free] - sub[:, fixed] @ x[fixed]
    x[free], stats = solve(A_ff, b_f, method=method, tol=tol)

    norm_b = np.linalg.norm(system.rhs)
    if norm_b > 0:
        rel = float(np.linalg.norm(system.rhs - S @ x) / norm_b)
        stats = SolveStats(
            method=stats.method, n=stats.n,
            relative_residual=rel, iterations=stats.iterations,
        )
    return x, stats
