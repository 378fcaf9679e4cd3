"""CSR storage, products, and solver residual contracts."""

import numpy as np
import pytest
import scipy.sparse as sp

from nlvc.errors import NumericError
from nlvc.linsolve import SparseMatrixCSR, solve, spmv


def five_point_laplacian(n):
    """Dirichlet 5-point stencil on an n x n interior grid."""
    main = 4.0 * np.ones(n * n)
    a = sp.diags([main, -np.ones(n * n - 1), -np.ones(n * n - 1)], [0, 1, -1], format="lil")
    for k in range(1, n):
        a[k * n, k * n - 1] = 0.0
        a[k * n - 1, k * n] = 0.0
    off = sp.diags([-np.ones(n * n - n)], [n])
    return SparseMatrixCSR((a.tocsr() + off + off.T).tocsr())


def test_spmv_identity():
    x = np.arange(5.0)
    assert np.array_equal(spmv(SparseMatrixCSR.identity(5), x), x)


def test_spmv_hand_example():
    A = SparseMatrixCSR.from_coo([0, 0, 1], [0, 1, 1], [2.0, 1.0, 3.0], (2, 2))
    assert np.array_equal(spmv(A, np.array([1.0, 1.0])), np.array([3.0, 3.0]))


def test_spmv_matches_dense_oracle():
    rng = np.random.default_rng(5)
    dense = np.where(rng.random((50, 50)) < 0.1, rng.standard_normal((50, 50)), 0.0)
    A = SparseMatrixCSR(sp.csr_matrix(dense))
    x = rng.standard_normal(50)
    got = spmv(A, x)
    want = dense @ x
    assert np.linalg.norm(got - want) <= 1e-13 * max(1.0, np.linalg.norm(want))


def test_spmv_shape_mismatch():
    with pytest.raises(ValueError):
        spmv(SparseMatrixCSR.identity(3), np.ones(4))


def test_csr_canonical_form():
    A = SparseMatrixCSR.from_coo([0, 0, 0], [2, 1, 2], [1.0, 2.0, 3.0], (3, 3))
    assert np.array_equal(A.col_indices, [1, 2])
    assert np.array_equal(A.values, [2.0, 4.0])


def test_solve_identity():
    b = np.array([3.0, -1.0, 2.0])
    x, stats = solve(SparseMatrixCSR.identity(3), b)
    assert np.allclose(x, b, atol=1e-14)
    assert stats.relative_residual <= 1e-12


def test_solve_recovers_manufactured_solution():
    A = five_point_laplacian(20)
    rng = np.random.default_rng(11)
    x_star = rng.standard_normal(400)
    b = spmv(A, x_star)
    for method in ("dense_lu", "sparse_lu", "gmres", "bicgstab", "cg"):
        x, stats = solve(A, b, method=method, tol=1e-12)
        assert stats.relative_residual <= 1e-12
        assert np.linalg.norm(x - x_star) <= 1e-8 * np.linalg.norm(x_star)


def test_methods_agree():
    A = five_point_laplacian(18)
    rng = np.random.default_rng(2)
    b = rng.standard_normal(324)
    x1, _ = solve(A, b, method="dense_lu")
    x2, _ = solve(A, b, method="gmres")
    assert np.linalg.norm(x1 - x2) <= 1e-9 * np.linalg.norm(x1)


def test_auto_picks_dense_then_iterative():
    A = five_point_laplacian(10)
    b = np.ones(100)
    _, stats = solve(A, b, method="auto")
    assert stats.method == "dense_lu"
    A2 = five_point_laplacian(70)  # 4900 unknowns
    _, stats2 = solve(A2, b=np.ones(4900), method="auto")
    assert stats2.method == "gmres"


def test_zero_rhs_short_circuits():
    x, stats = solve(five_point_laplacian(5), np.zeros(25))
    assert np.all(x == 0)
    assert stats.relative_residual == 0.0


def test_singular_system_raises_with_residual():
    A = SparseMatrixCSR.from_coo([0, 1], [0, 1], [1.0, 0.0], (2, 2))
    with pytest.raises(NumericError) as err:
        solve(A, np.array([1.0, 1.0]), method="gmres", max_iter=50)
    assert "residual" in str(err.value) or "breakdown" in str(err.value)


def test_nonfinite_rhs_rejected():
    with pytest.raises(NumericError):
        solve(SparseMatrixCSR.identity(2), np.array([1.0, np.nan]))


def test_coo_export(tmp_path):
    A = SparseMatrixCSR.from_coo([0, 1], [1, 0], [1.5, -2.25], (2, 2))
    path = tmp_path / "mat.txt"
    A.export_coo_text(path)
    lines = path.read_text().strip().splitlines()
    assert lines == ["0 1 1.5", "1 0 -2.25"]
