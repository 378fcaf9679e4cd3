"""Manufactured cases, the cylinder solution, and the local FD solver."""

import numpy as np
import pytest

from nlvc.errors import ConfigurationError, DomainError
from nlvc.grid_geometry import SquareWithLayer, build_point_cloud
from nlvc.local_solutions import (
    CASE_NAMES,
    LameCylinderParams,
    fd_poisson_solve,
    registry_lookup,
    sample_local_solution,
)


def fd_laplacian(f, pts, step=1e-4):
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    return (
        f(pts + e1) + f(pts - e1) + f(pts + e2) + f(pts - e2) - 4.0 * f(pts)
    ) / step ** 2


def fd_navier(u, material, pts, step=1e-4):
    """Central-difference (lam+mu) grad(div u) + mu lap u."""
    lam, mu = material.lam, material.mu
    e = [np.array([step, 0.0]), np.array([0.0, step])]

    def grad_div(p):
        out = np.empty((len(p), 2))
        for a in range(2):
            div_p = lambda q: (
                (u(q + e[0])[:, 0] - u(q - e[0])[:, 0]) / (2 * step)
                + (u(q + e[1])[:, 1] - u(q - e[1])[:, 1]) / (2 * step)
            )
            out[:, a] = (div_p(p + e[a]) - div_p(p - e[a])) / (2 * step)
        return out

    lap = np.stack(
        [
            (u(pts + e[0])[:, k] + u(pts - e[0])[:, k] + u(pts + e[1])[:, k]
             + u(pts - e[1])[:, k] - 4 * u(pts)[:, k]) / step ** 2
            for k in range(2)
        ],
        axis=1,
    )
    return (lam + mu) * grad_div(pts) + mu * lap


def test_registry_examples():
    cubic = registry_lookup("poisson_cubic")
    p = np.array([[1.0, 1.0]])
    assert cubic.u_l(p)[0] == pytest.approx(2.0)
    assert cubic.s(p)[0] == pytest.approx(-12.0)
    lin = registry_lookup("lps_linear")
    assert np.allclose(lin.u_l(np.zeros((1, 2))), 0.0)
    with pytest.raises(KeyError):
        registry_lookup("nonexistent")


def test_lame_coefficients():
    lame = LameCylinderParams(young_e=1.0, poisson_nu=0.3)
    assert lame.coeff_a == pytest.approx(0.0416, abs=5e-5)
    assert lame.coeff_b == pytest.approx(0.234, abs=5e-4)
    u = lame.displacement(np.array([[1.0, 0.0]]))
    assert u[0, 0] == pytest.approx(lame.coeff_a + lame.coeff_b)
    assert u[0, 0] == pytest.approx(0.2756, abs=5e-5)


def test_forcing_consistency_poisson():
    rng = np.random.default_rng(31)
    pts = rng.random((20, 2))
    for name in ("poisson_linear", "poisson_cubic", "poisson_sin", "poisson_quartic"):
        case = registry_lookup(name)
        lap = fd_laplacian(case.u_l, pts)
        np.testing.assert_allclose(-lap, case.s(pts), atol=5e-6)


def test_forcing_consistency_lps():
    rng = np.random.default_rng(32)
    r = 1.1 + 0.3 * rng.random(20)
    t = 2 * np.pi * rng.random(20)
    pts = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    for name in ("lps_linear", "lps_cylinder"):
        case = registry_lookup(name, nu=0.3)
        resid = fd_navier(case.u_l, case.material, pts)
        np.testing.assert_allclose(resid, 0.0, atol=2e-5)


def test_cylinder_solves_navier_for_both_ratios():
    for nu in (0.3, 0.49):
        case = registry_lookup("lps_cylinder", nu=nu)
        pts = np.array([[1.2, 0.1], [0.0, 1.4], [-0.9, -0.9]])
        resid = fd_navier(case.u_l, case.material, pts)
        np.testing.assert_allclose(resid, 0.0, atol=5e-5)


def test_fd_solver_exact_on_linear_data():
    domain = SquareWithLayer(horizon=0.25)
    sol = fd_poisson_solve(
        domain, 0.05,
        dirichlet=lambda p: p[:, 0] + p[:, 1],
        s=lambda p: np.zeros(len(p)),
    )
    grid_pts = np.array([[0.3, 0.4], [-0.25, 0.5], [1.25, 1.25], [0.0, 0.0]])
    np.testing.assert_allclose(sol(grid_pts), grid_pts[:, 0] + grid_pts[:, 1], atol=1e-10)
    assert sol.max_residual <= 1e-10


def test_fd_solver_second_order():
    case = registry_lookup("poisson_sin")
    domain = SquareWithLayer(horizon=0.25)
    errs = []
    for h in (0.05, 0.025, 0.0125):
        sol = fd_poisson_solve(domain, h, dirichlet=case.u_l, s=case.s)
        probe = np.array([[0.31, 0.47], [0.83, 0.11], [-0.13, 0.91], [0.5, 0.5]])
        errs.append(np.max(np.abs(sol(probe) - case.u_l(probe))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 1.7) and np.all(rates <= 2.3)


def test_fd_solver_quartic_error_quarters():
    case = registry_lookup("poisson_quartic")
    domain = SquareWithLayer(horizon=0.25)
    errs = []
    rng = np.random.default_rng(8)
    probe = rng.random((40, 2))
    for h in (0.05, 0.025):
        sol = fd_poisson_solve(domain, h, dirichlet=case.u_l, s=case.s)
        errs.append(np.max(np.abs(sol(probe) - case.u_l(probe))))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.35)


def test_fd_spacing_must_divide():
    with pytest.raises(ConfigurationError):
        fd_poisson_solve(
            SquareWithLayer(horizon=0.25), 0.07,
            dirichlet=lambda p: np.zeros(len(p)), s=lambda p: np.zeros(len(p)),
        )


def test_bilinear_sampler_hand_check():
    domain = SquareWithLayer(horizon=0.25)
    sol = fd_poisson_solve(
        domain, 0.25,
        dirichlet=lambda p: np.zeros(len(p)),
        s=lambda p: np.zeros(len(p)),
    )
    vals = np.arange(sol.values.size, dtype=float).reshape(sol.values.shape)
    sol.values = vals
    # midpoint of the first cell: average of its 4 corner values
    mid = sol.origin + np.array([0.125, 0.125])
    want = 0.25 * (vals[0, 0] + vals[1, 0] + vals[0, 1] + vals[1, 1])
    assert sol(mid.reshape(1, 2))[0] == pytest.approx(want)
    with pytest.raises(DomainError):
        sol(np.array([[9.0, 9.0]]))


def test_sample_local_solution_analytic_and_fd():
    cloud = build_point_cloud(SquareWithLayer(horizon=0.25), 0.1)
    case = registry_lookup("poisson_linear")
    vals = sample_local_solution(cloud, case)
    np.testing.assert_allclose(vals, cloud.points[:, 0] + cloud.points[:, 1], atol=1e-14)
    sol = fd_poisson_solve(cloud.domain, 0.0125, dirichlet=case.u_l, s=case.s)
    vals_fd = sample_local_solution(cloud, sol)
    np.testing.assert_allclose(vals_fd, vals, atol=1e-9)


def test_case_names_cover_registry():
    for name in CASE_NAMES:
        registry_lookup(name)
