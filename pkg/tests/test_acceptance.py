"""Acceptance criteria for the full artifact, one test per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion.  Reference errors and rates are the published
benchmark values; rate windows are the hard contract, absolute errors are
checked within a factor of 3 where the material scale is documented.
"""

import time

import numpy as np
import pytest

from nlvc.grid_geometry import (
    INTERIOR,
    OMEGA_LOC,
    AnnulusWithLayer,
    SquareWithLayer,
    build_point_cloud,
    neighbor_table,
    neighbors_within,
)
from nlvc.harness_cli import (
    ExperimentConfig,
    report_to_csv,
    run_consistency,
    run_convergence,
)
from nlvc.nonlocal_operators import (
    MaterialParams,
    assemble_theta_operator,
    lps_flux_rows,
    lps_rows,
    poisson_flux_rows,
    poisson_rows,
)
from nlvc.quadrature import (
    LpsIndicator,
    PoissonConstant,
    build_rules,
    discrete_m_all,
    monomial_exponents,
    truncated_ball_moments,
)

# reference convergence data (delta0, ratio, errors, rates)
POISSON_REFERENCE = {
    ("dtd", "poisson_sin"): (0.25, 2.5, [1.837e-4, 4.443e-5, 1.098e-5, 2.730e-6],
                             [2.0473, 2.0174, 2.0071]),
    ("dtd", "poisson_quartic"): (0.31, 3.1, [9.571e-3, 2.198e-3, 5.290e-4, 1.299e-4],
                                 [2.1226, 2.0547, 2.0255]),
    ("dtn", "poisson_sin"): (0.25, 2.5, [2.551e-4, 7.257e-5, 1.953e-5, 5.069e-6],
                             [1.8136, 1.9455, 1.8941]),
    ("dtn", "poisson_quartic"): (0.31, 3.1, [1.094e-2, 2.929e-3, 7.720e-4, 1.990e-4],
                                 [1.9014, 1.9239, 1.9561]),
}

LPS_REFERENCE = {
    ("dtd", 0.30): [2.5625, 2.1673, 2.0801],
    ("dtd", 0.49): [2.7498, 2.2711, 2.1291],
    ("dtn", 0.30): [1.9179, 2.0470, 2.1412],
    ("dtn", 0.49): [1.7863, 2.0737, 2.1478],
}


def _report(label, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    assert ok, f"{label}: {detail}"


@pytest.fixture(scope="module")
def poisson_tables():
    out = {}
    for (strategy, case), (d0, ratio, _, _) in POISSON_REFERENCE.items():
        cfg = ExperimentConfig(model="poisson", strategy=strategy, case=case,
                               delta0=d0, ratio=ratio, levels=4)
        t0 = time.perf_counter()
        out[(strategy, case)] = (run_convergence(cfg), time.perf_counter() - t0)
    return out


@pytest.fixture(scope="module")
def lps_tables():
    out = {}
    for (strategy, nu) in LPS_REFERENCE:
        cfg = ExperimentConfig(model="lps", strategy=strategy, case="lps_cylinder",
                               delta0=0.3, ratio=3.2, levels=4, nu=nu)
        t0 = time.perf_counter()
        out[(strategy, nu)] = (run_convergence(cfg), time.perf_counter() - t0)
    return out


def test_criterion_1_poisson_consistency():
    worst = 0.0
    for strategy in ("dtd", "dtn"):
        for case in ("poisson_linear", "poisson_cubic"):
            cfg = ExperimentConfig(model="poisson", strategy=strategy, case=case,
                                   delta0=0.25, ratio=2.5, levels=1)
            e0 = run_consistency(cfg)["e0"]
            worst = max(worst, e0)
    _report("criterion 1 (scalar consistency)", worst <= 1e-10, f"max e0 = {worst:.2e} <= 1e-10")


def test_criterion_2_lps_consistency():
    worst = 0.0
    for strategy in ("dtd", "dtn"):
        cfg = ExperimentConfig(model="lps", strategy=strategy, case="lps_linear",
                               delta0=0.3, ratio=3.2, levels=1)
        e0 = run_consistency(cfg)["e0"]
        worst = max(worst, e0)
    _report("criterion 2 (LPS consistency)", worst <= 1e-9, f"max e0 = {worst:.2e} <= 1e-9")


def _check_poisson_table(tables, strategy):
    details = []
    ok = True
    for case in ("poisson_sin", "poisson_quartic"):
        report, seconds = tables[(strategy, case)]
        _, _, ref_errs, ref_rates = POISSON_REFERENCE[(strategy, case)]
        rates = report.rates()
        errs = report.errors()
        rate_ok = all(abs(r - rr) <= 0.2 for r, rr in zip(rates, ref_rates))
        err_ok = all(re / 3 <= e <= re * 3 for e, re in zip(errs, ref_errs))
        ok &= rate_ok and err_ok and seconds < 300
        details.append(
            f"{case}: rates {['%.3f' % r for r in rates]} vs {ref_rates} ({seconds:.0f}s)"
        )
    return ok, "; ".join(details)


def test_criterion_3_table_dtd(poisson_tables):
    ok, detail = _check_poisson_table(poisson_tables, "dtd")
    _report("criterion 3 (scalar Dirichlet-route table)", ok, detail)


def test_criterion_4_table_dtn(poisson_tables):
    ok, detail = _check_poisson_table(poisson_tables, "dtn")
    _report("criterion 4 (scalar flux-route table)", ok, detail)


def test_criterion_5_lps_tables(lps_tables):
    ok = True
    details = []
    for (strategy, nu), ref_rates in LPS_REFERENCE.items():
        report, seconds = lps_tables[(strategy, nu)]
        rates = report.rates()
        rate_ok = all(abs(r - rr) <= 0.3 for r, rr in zip(rates, ref_rates))
        final_ok = 1.7 <= rates[-1] <= 2.4
        ok &= rate_ok and final_ok and report.monotone()
        ok &= report.levels[-1].seconds < 1800
        details.append(f"{strategy} nu={nu}: rates {['%.3f' % r for r in rates]}")
    _report("criterion 5 (LPS cylinder tables)", ok, "; ".join(details))


def test_criterion_6_operator_local_limits():
    # scalar operator against the Laplacian on a quartic
    errs = []
    for delta in (0.2, 0.1, 0.05, 0.025):
        cloud = build_point_cloud(SquareWithLayer(horizon=delta), delta / 2.5)
        interior = cloud.ids_of_region(INTERIOR)
        rule = build_rules(cloud, delta, 3, interior)
        u = cloud.points[:, 0] ** 4 + cloud.points[:, 1] ** 4
        lap = 12.0 * (cloud.points[:, 0] ** 2 + cloud.points[:, 1] ** 2)
        got = poisson_rows(cloud, rule, PoissonConstant(delta), interior).matvec(u)
        errs.append(np.max(np.abs(got[interior] - lap[interior])))
    p_rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    p_ok = np.all((p_rates >= 1.8) & (p_rates <= 2.2))

    # LPS operator against the hand-derived Navier limit on a quartic field
    material = MaterialParams.plane_strain(1.0, 0.3)
    lam, mu = material.lam, material.mu
    errs_l = []
    for delta in (0.3, 0.15, 0.075, 0.0375):
        cloud = build_point_cloud(AnnulusWithLayer(horizon=delta), delta / 3.2)
        interior = cloud.ids_of_region(INTERIOR)
        _, nbr = neighbor_table(cloud, interior, delta)
        theta_pts = np.union1d(interior, nbr)
        rule = build_rules(cloud, delta, 3, theta_pts, include_rational=True)
        kernel = LpsIndicator(delta)
        m_all = discrete_m_all(cloud, rule, kernel)
        theta = assemble_theta_operator(cloud, rule, kernel, m_all)
        mat = lps_rows(cloud, rule, kernel, material, m_all, theta, interior)
        x, y = cloud.points[:, 0], cloud.points[:, 1]
        u = np.stack([x ** 4 + y ** 4, x ** 2 * y ** 2], axis=1)
        # div u = 4x^3 + 2x^2 y; navier = (lam+mu) grad(div) + mu lap
        want = np.stack(
            [
                (lam + mu) * (12 * x ** 2 + 4 * x * y) + mu * (12 * x ** 2 + 12 * y ** 2),
                (lam + mu) * (2 * x ** 2) + mu * (2 * x ** 2 + 2 * y ** 2),
            ],
            axis=1,
        )
        got = mat.matvec(u.reshape(-1)).reshape(-1, 2)
        errs_l.append(np.max(np.abs((got - want)[interior])))
    l_rates = np.log2(np.array(errs_l[:-1]) / np.array(errs_l[1:]))
    l_ok = np.all((l_rates >= 1.7) & (l_rates <= 2.3))
    _report(
        "criterion 6 (operator local limits)",
        bool(p_ok and l_ok),
        f"scalar rates {np.round(p_rates, 3).tolist()}, LPS rates {np.round(l_rates, 3).tolist()}",
    )


def test_criterion_7_property_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)

    # quadrature moment residuals on clipped stencils
    delta = 0.3
    domain = AnnulusWithLayer(horizon=delta, loc_mode="inner_ring")
    cloud = build_point_cloud(domain, 0.09375)
    interior = cloud.ids_of_region(INTERIOR)
    loc = cloud.ids_of_region(OMEGA_LOC)
    ids = np.concatenate([interior[::17], loc[::7]])
    rule = build_rules(cloud, delta, 3, ids, include_rational=True)
    mom_ok = True
    for pid in rng.choice(rule.point_ids, 12, replace=False):
        cols, w = rule.row(int(pid))
        z = cloud.points[cols] - cloud.points[pid]
        mom = truncated_ball_moments(cloud.points[pid], delta, domain, 3, include_rational=True)
        for k, (a, b) in enumerate(monomial_exponents(3)):
            got = np.sum(w * z[:, 0] ** a * z[:, 1] ** b)
            mom_ok &= abs(got - mom.poly[k]) <= 1e-12 * max(1.0, abs(mom.poly[k]))

    # positive normalizations
    kernel = LpsIndicator(delta)
    m_all = discrete_m_all(cloud, rule, kernel)
    m_ok = bool(np.all(m_all > 0))

    # null spaces: constants for the scalar rows, rigid motions for LPS rows
    theta = assemble_theta_operator(cloud, rule, kernel, m_all)
    material = MaterialParams.plane_strain(1.0, 0.3)
    sample_int = interior[::17]
    sample_loc = loc[::7]
    lmat = lps_rows(cloud, rule, kernel, material, m_all, theta, sample_int)
    fmat = lps_flux_rows(cloud, rule, kernel, material, m_all, theta, sample_loc)
    pts = cloud.points
    rig = np.stack([0.5 - 1.2 * pts[:, 1], -0.3 + 1.2 * pts[:, 0]], axis=1).reshape(-1)
    rows = np.concatenate([2 * sample_int, 2 * sample_int + 1])
    frow = np.concatenate([2 * sample_loc, 2 * sample_loc + 1])
    null_ok = np.max(np.abs(lmat.matvec(rig)[rows])) <= 1e-9
    null_ok &= np.max(np.abs(fmat.matvec(rig)[frow])) <= 1e-9

    sq_cloud = build_point_cloud(SquareWithLayer(horizon=0.25, loc_mode="right_strip"), 0.1)
    sq_int = sq_cloud.ids_of_region(INTERIOR)
    sq_loc = sq_cloud.ids_of_region(1)
    sq_rule = build_rules(sq_cloud, 0.25, 3, np.sort(np.concatenate([sq_int, sq_loc])))
    pk = PoissonConstant(0.25)
    ones = np.ones(sq_cloud.n_points)
    prow = poisson_rows(sq_cloud, sq_rule, pk, sq_int)
    frow_p = poisson_flux_rows(sq_cloud, sq_rule, pk, sq_loc)
    null_ok &= np.max(np.abs(prow.matvec(ones)[sq_int])) <= 1e-10 * np.abs(prow.values).max()
    null_ok &= np.max(np.abs(frow_p.matvec(ones)[sq_loc])) <= 1e-10 * np.abs(frow_p.values).max()

    # neighbor search vs brute force
    nbr_ok = True
    for i in rng.choice(sq_cloud.n_points, 40, replace=False):
        d = np.linalg.norm(sq_cloud.points - sq_cloud.points[i], axis=1)
        expect = np.flatnonzero((d > 0) & (d < 0.25))
        nbr_ok &= np.array_equal(neighbors_within(sq_cloud, int(i), 0.25), expect)

    # byte-identical reruns
    cfg = ExperimentConfig(model="poisson", strategy="dtd", case="poisson_sin",
                           delta0=0.25, ratio=2.5, levels=2)
    csv_ok = report_to_csv(run_convergence(cfg)) == report_to_csv(run_convergence(cfg))

    seconds = time.perf_counter() - t0
    ok = mom_ok and m_ok and bool(null_ok) and nbr_ok and csv_ok and seconds < 60
    _report(
        "criterion 7 (property suite)",
        ok,
        f"moments {mom_ok}, m>0 {m_ok}, nullspaces {bool(null_ok)}, "
        f"neighbors {nbr_ok}, determinism {csv_ok}, {seconds:.0f}s < 60s",
    )


def test_criterion_8_pipeline_with_fd_local_solver():
    cfg = ExperimentConfig(model="poisson", strategy="dtd", case="poisson_sin",
                           delta0=0.25, ratio=2.5, levels=4, local_provider="fd")
    report = run_convergence(cfg)
    ref = POISSON_REFERENCE[("dtd", "poisson_sin")][3]
    rates = report.rates()
    ok = all(abs(r - rr) <= 0.25 for r, rr in zip(rates, ref))
    _report(
        "criterion 8 (end-to-end pipeline with numerical local solve)",
        ok,
        f"rates {['%.3f' % r for r in rates]} vs {ref} (+/-0.25)",
    )
