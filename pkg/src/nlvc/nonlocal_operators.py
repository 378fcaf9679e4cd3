"""Sparse rows of the nonlocal diffusion and peridynamic operators.

All operators share the same structure: per collocation point, a quadrature
rule over the horizon ball turns the interaction integral into a sparse row.
The scalar diffusion operator and its flux variant act on one unknown per
point; the linear peridynamic solid (LPS) operator acts on interleaved
2-vectors ``[u1_0, u2_0, u1_1, u2_1, ...]`` and composes a dilatation stage
(pointwise weighted divergence) with a second horizon integral, giving an
effective stencil radius of two horizons.

Row conventions follow the continuous operators: applying a diffusion row
to samples of ``u`` approximates ``L u(x_i)``; flux rows approximate the
flux operator ``N`` (for the scalar model ``N = -L/2`` restricted to the
domain; for LPS the flux operator is the LPS operator itself evaluated at
layer points).  Sign flips for the constrained systems happen at system
assembly, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import AssemblyError, ConfigurationError
from .grid_geometry import PointCloud
from .linsolve import SparseMatrixCSR
from .quadrature import QuadratureRule

# row kinds used by assembled systems
EQUATION = 0
FLUX_CONSTRAINT = 1
DIRICHLET_IDENTITY = 2

LPS_C1 = 2.0
LPS_C2 = 16.0


@dataclass(frozen=True)
class MaterialParams:
    """Plane-strain elastic moduli."""

    young_e: float
    poisson_nu: float
    lam: float
    mu: float

    @classmethod
    def plane_strain(cls, young_e: float, poisson_nu: float) -> "MaterialParams":
        if not 0.0 < poisson_nu < 0.5:
            raise ConfigurationError("Poisson ratio must lie in (0, 0.5)")
        lam = young_e * poisson_nu / ((1.0 + poisson_nu) * (1.0 - 2.0 * poisson_nu))
        mu = young_e / (2.0 * (1.0 + poisson_nu))
        return cls(young_e=young_e, poisson_nu=poisson_nu, lam=lam, mu=mu)


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse operator rows plus the kind of each row."""

    matrix: SparseMatrixCSR
    row_kind: NDArray

    @property
    def shape(self):
        return self.matrix.shape


def _rule_pairs(cloud: PointCloud, rule: QuadratureRule, point_ids: NDArray):
    """Flattened (i, j, w, z, dist) arrays for the rule rows of ``point_ids``."""
    idx = np.array([rule.row_of(i) for i in point_ids], dtype=np.int64)
    counts = rule.indptr[idx + 1] - rule.indptr[idx]
    take = np.concatenate(
        [np.arange(rule.indptr[k], rule.indptr[k + 1]) for k in idx]
    ) if len(idx) else np.empty(0, np.int64)
    rows = np.repeat(point_ids, counts)
    cols = rule.cols[take]
    w = rule.weights[take]
    z = cloud.points[cols] - cloud.points[rows]
    dist = np.linalg.norm(z, axis=1)
    return rows, cols, w, z, dist, counts


def poisson_rows(
    cloud: PointCloud, rule: QuadratureRule, kernel, point_ids: NDArray
) -> SparseMatrixCSR:
    """Nonlocal Laplacian rows ``2 sum_j w gamma (u_j - u_i)`` at ``point_ids``."""
    n = cloud.n_points
    rows, cols, w, _, dist, counts = _rule_pairs(cloud, rule, point_ids)
    coef = 2.0 * w * kernel.scale
    diag = -np.add.reduceat(coef, np.concatenate([[0], np.cumsum(counts)])[:-1]) if len(
        counts
    ) else np.empty(0)
    all_rows = np.concatenate([rows, point_ids])
    all_cols = np.concatenate([cols, point_ids])
    all_vals = np.concatenate([coef, diag])
    return SparseMatrixCSR.from_coo(all_rows, all_cols, all_vals, (n, n))


def poisson_flux_rows(
    cloud: PointCloud, rule: QuadratureRule, kernel, point_ids: NDArray
) -> SparseMatrixCSR:
    """Nonlocal flux rows ``-sum_j w gamma (u_j - u_i)`` at layer points."""
    return poisson_rows(cloud, rule, kernel, point_ids).scaled(-0.5)


def assemble_poisson_row(cloud: PointCloud, rule: QuadratureRule, kernel, i: int):
    """Single diffusion row as ``(cols, vals)``; ``row @ u ~ L u(x_i)``."""
    m = poisson_rows(cloud, rule, kernel, np.array([i], dtype=np.int64))
    return m.row(i)


def assemble_poisson_flux_row(cloud: PointCloud, rule: QuadratureRule, kernel, i: int):
    """Single flux row as ``(cols, vals)``; ``row @ u ~ N u(x_i)``."""
    m = poisson_flux_rows(cloud, rule, kernel, np.array([i], dtype=np.int64))
    return m.row(i)


def assemble_theta_operator(
    cloud: PointCloud, rule: QuadratureRule, kernel, m_values: NDArray
) -> SparseMatrixCSR:
    """Dilatation operator: (n_points x 2 n_points) map from displacements.

    ``theta_i = (2/m_i) sum_j w gamma z . (u_j - u_i)`` with rows for every
    rule point; ``m_values`` aligns with ``rule.point_ids``.
    """
    n = cloud.n_points
    pids = rule.point_ids
    if np.any(m_values <= 0):
        raise AssemblyError("nonpositive normalization in theta assembly")
    rows, cols, w, z, dist, counts = _rule_pairs(cloud, rule, pids)
    inv_m = np.repeat(2.0 / m_values, counts)
    coef = inv_m[:, None] * (w * kernel.scale)[:, None] * z  # (nnz, 2)

    starts = np.concatenate([[0], np.cumsum(counts)])[:-1]
    diag = np.empty((len(pids), 2))
    diag[:, 0] = -np.add.reduceat(coef[:, 0], starts)
    diag[:, 1] = -np.add.reduceat(coef[:, 1], starts)

    r = np.concatenate([rows, rows, pids, pids])
    c = np.concatenate([2 * cols, 2 * cols + 1, 2 * pids, 2 * pids + 1])
    v = np.concatenate([coef[:, 0], coef[:, 1], diag[:, 0], diag[:, 1]])
    return SparseMatrixCSR.from_coo(r, c, v, (n, 2 * n))


def lps_rows(
    cloud: PointCloud,
    rule: QuadratureRule,
    kernel,
    material: MaterialParams,
    m_values: NDArray,
    theta_op: SparseMatrixCSR,
    point_ids: NDArray,
) -> SparseMatrixCSR:
    """LPS operator rows (2 per point) at ``point_ids`` as a (2n x 2n) matrix.

    The dilatation coupling ``(C1 (lam-mu)/m_i) sum_j w gamma z (theta_i +
    theta_j)`` is assembled by sparse composition with ``theta_op``; the
    deviatoric part is a direct horizon integral.
    """
    n = cloud.n_points
    lam, mu = material.lam, material.mu
    rows, cols, w, z, dist, counts = _rule_pairs(cloud, rule, point_ids)
    m_by_point = m_values[[rule.row_of(i) for i in point_ids]]
    if np.any(m_by_point <= 0):
        raise AssemblyError("nonpositive normalization in LPS assembly")
    inv_m = np.repeat(1.0 / m_by_point, counts)
    wg = w * kernel.scale

    # dilatation coupling: P @ theta_op with
    #   P[2i+a, j]  = (C1 (lam-mu)/m_i) w_ij g z_a,
    #   P[2i+a, i] += (C1 (lam-mu)/m_i) sum_j w_ij g z_a
    pc = LPS_C1 * (lam - mu) * inv_m[:, None] * wg[:, None] * z
    starts = np.concatenate([[0], np.cumsum(counts)])[:-1]
    bsum = np.stack(
        [np.add.reduceat(pc[:, 0], starts), np.add.reduceat(pc[:, 1], starts)], axis=1
    )
    pr = np.concatenate([2 * rows, 2 * rows + 1, 2 * point_ids, 2 * point_ids + 1])
    pcol = np.concatenate([cols, cols, point_ids, point_ids])
    pv = np.concatenate([pc[:, 0], pc[:, 1], bsum[:, 0], bsum[:, 1]])
    P = SparseMatrixCSR.from_coo(pr, pcol, pv, (2 * n, n))
    dil = P.matmul(theta_op)

    # deviatoric part: (C2 mu/m_i) w g (z (x) z / |z|^2) (u_j - u_i)
    tens = LPS_C2 * mu * inv_m[:, None, None] * wg[:, None, None] * (
        z[:, :, None] * z[:, None, :] / (dist ** 2)[:, None, None]
    )  # (nnz, 2, 2)
    dsum = np.add.reduceat(tens, starts, axis=0)  # (npts, 2, 2)

    r_list, c_list, v_list = [], [], []
    for a in range(2):
        for b in range(2):
            r_list.append(2 * rows + a)
            c_list.append(2 * cols + b)
            v_list.append(tens[:, a, b])
            r_list.append(2 * point_ids + a)
            c_list.append(2 * point_ids + b)
            v_list.append(-dsum[:, a, b])
    dev = SparseMatrixCSR.from_coo(
        np.concatenate(r_list), np.concatenate(c_list), np.concatenate(v_list), (2 * n, 2 * n)
    )
    return dil + dev


def assemble_lps_rows(
    cloud: PointCloud,
    rule: QuadratureRule,
    kernel,
    material: MaterialParams,
    m_values: NDArray,
    theta_op: SparseMatrixCSR,
    i: int,
):
    """The two LPS operator rows of point ``i`` as ``[(cols, vals), (cols, vals)]``."""
    m = lps_rows(cloud, rule, kernel, material, m_values, theta_op, np.array([i], np.int64))
    return [m.row(2 * i), m.row(2 * i + 1)]


def assemble_lps_flux_rows(
    cloud: PointCloud,
    rule: QuadratureRule,
    kernel,
    material: MaterialParams,
    m_values: NDArray,
    theta_op: SparseMatrixCSR,
    i: int,
):
    """LPS flux rows at a layer point: the LPS operator evaluated there."""
    return assemble_lps_rows(cloud, rule, kernel, material, m_values, theta_op, i)


def lps_flux_rows(
    cloud: PointCloud,
    rule: QuadratureRule,
    kernel,
    material: MaterialParams,
    m_values: NDArray,
    theta_op: SparseMatrixCSR,
    point_ids: NDArray,
) -> SparseMatrixCSR:
    """Bulk LPS flux rows; identical algebra to :func:`lps_rows` at layer points."""
    return lps_rows(cloud, rule, kernel, material, m_values, theta_op, point_ids)
