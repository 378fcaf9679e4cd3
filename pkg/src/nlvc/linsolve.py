"""Sparse CSR matrices and linear solvers for the assembled systems.

Thin layer over scipy: storage is compressed sparse rows with sorted,
deduplicated column indices; solvers are dense LU, SuperLU, GMRES(50) and
BiCGStab with Jacobi preconditioning, plus CG for the symmetric positive
definite finite-difference path.  Every successful solve is verified
against the relative-residual contract after the fact; iteration counts
are never trusted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .errors import NumericError

DENSE_CUTOFF = 4000
GMRES_RESTART = 50


@dataclass
class SolveStats:
    method: str
    n: int
    relative_residual: float
    iterations: int = 0


class SparseMatrixCSR:
    """Square-or-rectangular CSR matrix with canonical (sorted, unique) rows."""

    def __init__(self, matrix: sp.csr_matrix):
        m = matrix.tocsr().copy()
        m.sum_duplicates()
        m.sort_indices()
        self._m = m

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "SparseMatrixCSR":
        return cls(sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr())

    @classmethod
    def identity(cls, n: int) -> "SparseMatrixCSR":
        return cls(sp.identity(n, format="csr"))

    @property
    def shape(self):
        return self._m.shape

    @property
    def row_offsets(self) -> NDArray:
        return self._m.indptr

    @property
    def col_indices(self) -> NDArray:
        return self._m.indices

    @property
    def values(self) -> NDArray:
        return self._m.data

    @property
    def nnz(self) -> int:
        return self._m.nnz

    def scipy(self) -> sp.csr_matrix:
        return self._m

    def matvec(self, x: NDArray) -> NDArray:
        return spmv(self, x)

    def matmul(self, other: "SparseMatrixCSR") -> "SparseMatrixCSR":
        return SparseMatrixCSR(self._m @ other._m)

    def __add__(self, other: "SparseMatrixCSR") -> "SparseMatrixCSR":
        return SparseMatrixCSR(self._m + other._m)

    def scaled(self, factor: float) -> "SparseMatrixCSR":
        return SparseMatrixCSR(self._m * factor)

    def row(self, i: int):
        sl = slice(self._m.indptr[i], self._m.indptr[i + 1])
        return self._m.indices[sl], self._m.data[sl]

    def export_coo_text(self, path) -> None:
        """Debug export: one ``row col value`` triple per line, 17 digits."""
        coo = self._m.tocoo()
        with open(path, "w") as f:
            for r, c, v in zip(coo.row, coo.col, coo.data):
                f.write(f"{r} {c} {v:.17g}\n")


def spmv(A: SparseMatrixCSR, x: NDArray) -> NDArray:
    """Matrix-vector product with fixed per-row accumulation order."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: {A.shape} @ {x.shape}")
    return A.scipy() @ x


def _jacobi(A: sp.csr_matrix) -> spla.LinearOperator:
    d = A.diagonal()
    d = np.where(np.abs(d) > 0, d, 1.0)
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda v: inv * v)


def _refine(solve_once, A: sp.csr_matrix, b: NDArray, x: NDArray, tol: float):
    """A few steps of iterative refinement against the residual contract."""
    norm_b = np.linalg.norm(b)
    for _ in range(3):
        r = b - A @ x
        if np.linalg.norm(r) <= tol * norm_b:
            break
        x = x + solve_once(r)
    return x


def solve(
    A: SparseMatrixCSR,
    b: NDArray,
    method: str = "auto",
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> tuple[NDArray, SolveStats]:
    """Solve ``A x = b`` to relative residual ``tol`` (verified post hoc).

    ``auto`` uses dense LU up to 4000 unknowns and GMRES(50) with Jacobi
    preconditioning beyond; ``sparse_lu`` (SuperLU) and ``cg`` extend the
    basic method set for large or symmetric positive definite systems.
    """
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    b = np.asarray(b, dtype=float)
    if b.shape[0] != n:
        raise ValueError("right-hand side length mismatch")
    if not np.all(np.isfinite(b)):
        raise NumericError("right-hand side contains non-finite entries")

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n), SolveStats(method="trivial", n=n, relative_residual=0.0)

    if method == "auto":
        method = "dense_lu" if n <= DENSE_CUTOFF else "gmres"

    S = A.scipy()
    iterations = 0

    if method == "dense_lu":
        lu, piv = scipy.linalg.lu_factor(S.toarray())
        x = scipy.linalg.lu_solve((lu, piv), b)
        x = _refine(lambda r: scipy.linalg.lu_solve((lu, piv), r), S, b, x, tol)
    elif method == "sparse_lu":
        fac = spla.splu(S.tocsc())
        x = fac.solve(b)
        x = _refine(fac.solve, S, b, x, tol)
    elif method in ("gmres", "bicgstab", "cg"):
        M = _jacobi(S)
        count = [0]

        def cb(_):
            count[0] += 1

        if method == "gmres":
            x, info = spla.gmres(
                S, b, rtol=tol * 0.5, atol=0.0, restart=GMRES_RESTART,
                maxiter=max_iter // GMRES_RESTART + 1, M=M,
                callback=cb, callback_type="pr_norm",
            )
        elif method == "bicgstab":
            x, info = spla.bicgstab(S, b, rtol=tol * 0.5, atol=0.0, maxiter=max_iter, M=M, callback=cb)
        else:
            x, info = spla.cg(S, b, rtol=tol * 0.5, atol=0.0, maxiter=max_iter, M=M, callback=cb)
        iterations = count[0]
        if info < 0:
            raise NumericError(f"{method} breakdown (info={info})")
    else:
        raise ValueError(f"unknown method {method!r}")

    rel = float(np.linalg.norm(b - S @ x) / norm_b)
    if not np.isfinite(rel) or rel > tol:
        raise NumericError(
            f"{method} failed the residual contract: relative residual {rel:.3e} > {tol:.1e}"
        )
    return x, SolveStats(method=method, n=n, relative_residual=rel, iterations=iterations)
