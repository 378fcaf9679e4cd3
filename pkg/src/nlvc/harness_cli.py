"""Experiment driver: consistency checks, horizon-convergence sweeps, CLI.

A sweep halves the horizon at fixed horizon-to-spacing ratio, solves the
constrained nonlocal problem at every level against a chosen local-solution
provider, and reports the discrete L2 difference between the nonlocal and
local solutions together with successive convergence rates.  Reports are
emitted as CSV (``delta,h,M,e0,rate``) or JSON with the full configuration
echoed; reruns of the same configuration are byte-identical.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .bc_conversion import build_dtd_system, build_dtn_system, solve_system
from .errors import ConfigurationError, NlvcError
from .grid_geometry import INTERIOR, OMEGA_LOC, PointCloud, build_point_cloud, neighbor_table
from .linsolve import SolveStats
from .local_solutions import (
    CASE_NAMES,
    ManufacturedCase,
    fd_poisson_solve,
    registry_lookup,
    sample_local_solution,
)
from .nonlocal_operators import (
    lps_flux_rows,
    lps_rows,
    poisson_flux_rows,
    poisson_rows,
    assemble_theta_operator,
)
from .quadrature import (
    LpsIndicator,
    PoissonConstant,
    build_rules,
    discrete_m_all,
)

CONSISTENCY_CASES = ("poisson_linear", "poisson_cubic", "lps_linear")
CONSISTENCY_THRESHOLD = 1e-9
RATE_BOUNDS = (1.7, 2.4)
QUADRATURE_DEGREE = 3
FD_SPACING_FACTOR = 8


@dataclass
class ExperimentConfig:
    model: str = "poisson"
    strategy: str = "dtd"
    case: str = "poisson_sin"
    delta0: float = 0.25
    ratio: float = 2.5
    levels: int = 4
    loc_mode: Optional[str] = None
    nu: float = 0.3
    local_provider: str = "analytic"
    solver: str = "auto"
    tol: float = 1e-12
    threads: Optional[int] = None
    norm_region: str = "all"
    out: Optional[str] = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.model not in ("poisson", "lps"):
            raise ConfigurationError(f"unknown model {self.model!r}")
        if self.strategy not in ("dtd", "dtn"):
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.case not in CASE_NAMES:
            raise ConfigurationError(f"unknown case {self.case!r}")
        if self.levels < 1:
            raise ConfigurationError("levels must be >= 1")
        if self.local_provider not in ("analytic", "fd"):
            raise ConfigurationError(f"unknown local provider {self.local_provider!r}")
        if self.norm_region not in ("all", "interior"):
            raise ConfigurationError(f"unknown norm region {self.norm_region!r}")


@dataclass
class LevelResult:
    delta: float
    h: float
    n_points: int
    e0: float
    rate: Optional[float]
    stats: SolveStats
    seconds: float


@dataclass
class ConvergenceReport:
    config: ExperimentConfig
    levels: list = field(default_factory=list)

    def rates(self):
        return [lv.rate for lv in self.levels if lv.rate is not None]

    def errors(self):
        return [lv.e0 for lv in self.levels]

    def monotone(self) -> bool:
        e = self.errors()
        return all(b < a for a, b in zip(e, e[1:]))

    def passes(self) -> bool:
        if len(self.levels) < 2:
            return True
        final = self.levels[-1].rate
        return self.monotone() and final is not None and RATE_BOUNDS[0] <= final <= RATE_BOUNDS[1]


def compute_e0(cloud: PointCloud, u_n: NDArray, u_l: NDArray, region: str = "all") -> float:
    """Discrete L2 norm ``sqrt(h^2 sum |u_n - u_l|^2)`` over the cloud."""
    diff = np.asarray(u_n) - np.asarray(u_l)
    if diff.ndim == 1:
        sq = diff * diff
    else:
        sq = np.sum(diff * diff, axis=1)
    if region == "interior":
        sq = sq[cloud.labels == INTERIOR]
    return float(np.sqrt(cloud.h ** 2 * np.sum(sq)))


def apply_thread_cap(threads: Optional[int]):
    """Best-effort cap on BLAS worker threads; returns a context manager."""
    if threads is None:
        import contextlib

        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits

        return threadpool_limits(limits=threads)
    except ImportError:
        import contextlib

        return contextlib.nullcontext()


def _local_samples(case: ManufacturedCase, cloud: PointCloud, config: ExperimentConfig, h: float):
    if config.local_provider == "analytic":
        return sample_local_solution(cloud, case)
    if case.model != "poisson":
        raise ConfigurationError("finite-difference local provider supports the scalar model only")
    fd = fd_poisson_solve(
        cloud.domain,
        h / FD_SPACING_FACTOR,
        dirichlet=case.u_l,
        s=case.s,
    )
    return sample_local_solution(cloud, fd)


def solve_level(case: ManufacturedCase, config: ExperimentConfig, delta: float):
    """Assemble and solve one level; returns ``(cloud, u_n, u_l_vec, stats)``."""
    h = delta / config.ratio
    loc_mode = config.loc_mode or case.default_loc_mode(config.strategy)
    domain = case.make_domain(delta, loc_mode)
    cloud = build_point_cloud(domain, h)

    u_l_vec = _local_samples(case, cloud, config, h)
    v_n_vec = u_l_vec
    s_vec = case.s(cloud.points)

    interior = cloud.ids_of_region(INTERIOR)
    loc = cloud.ids_of_region(OMEGA_LOC)

    if config.model == "poisson":
        kernel = PoissonConstant(delta)
        needed = interior if config.strategy == "dtd" else np.concatenate([interior, loc])
        rule = build_rules(cloud, delta, QUADRATURE_DEGREE, needed)
        op = poisson_rows(cloud, rule, kernel, interior)
        if config.strategy == "dtd":
            system = build_dtd_system("poisson", cloud, op, u_l_vec, v_n_vec, s_vec)
        else:
            flux = poisson_flux_rows(cloud, rule, kernel, loc)
            system = build_dtn_system("poisson", cloud, op, flux, u_l_vec, v_n_vec, s_vec)
    else:
        kernel = LpsIndicator(delta)
        material = case.material
        rows_pts = interior if config.strategy == "dtd" else np.concatenate([interior, loc])
        rows_pts = np.sort(rows_pts)
        _, nbr_cols = neighbor_table(cloud, rows_pts, delta)
        theta_pts = np.union1d(rows_pts, nbr_cols)
        rule = build_rules(cloud, delta, QUADRATURE_DEGREE, theta_pts, include_rational=True)
        m_all = discrete_m_all(cloud, rule, kernel)
        theta = assemble_theta_operator(cloud, rule, kernel, m_all)
        op = lps_rows(cloud, rule, kernel, material, m_all, theta, interior)
        if config.strategy == "dtd":
            system = build_dtd_system("lps", cloud, op, u_l_vec, v_n_vec, s_vec)
        else:
            flux = lps_flux_rows(cloud, rule, kernel, material, m_all, theta, loc)
            system = build_dtn_system("lps", cloud, op, flux, u_l_vec, v_n_vec, s_vec)

    x, stats = solve_system(system, method=config.solver, tol=config.tol)
    u_n = x if config.model == "poisson" else x.reshape(-1, 2)
    return cloud, u_n, u_l_vec, stats


def run_convergence(config: ExperimentConfig) -> ConvergenceReport:
    """Horizon-halving sweep at fixed ratio; errors and successive rates."""
    if config.levels < 2:
        raise ConfigurationError("convergence sweeps need at least 2 levels")
    case = registry_lookup(config.case, nu=config.nu)
    if case.model != config.model:
        raise ConfigurationError(f"case {config.case!r} belongs to model {case.model!r}")
    report = ConvergenceReport(config=config)
    prev = None
    with apply_thread_cap(config.threads):
        for k in range(config.levels):
            delta = config.delta0 / 2 ** k
            t0 = time.perf_counter()
            cloud, u_n, u_l_vec, stats = solve_level(case, config, delta)
            e0 = compute_e0(cloud, u_n, u_l_vec, region=config.norm_region)
            rate = None if prev is None else float(np.log2(prev / e0)) if e0 > 0 else None
            report.levels.append(
                LevelResult(
                    delta=delta,
                    h=delta / config.ratio,
                    n_points=cloud.n_points,
                    e0=e0,
                    rate=rate,
                    stats=stats,
                    seconds=time.perf_counter() - t0,
                )
            )
            prev = e0
    return report


def run_consistency(config: ExperimentConfig) -> dict:
    """One solve of a polynomial-exact case; reports e0 against 1e-9."""
    if config.case not in CONSISTENCY_CASES:
        raise ConfigurationError(
            f"consistency cases are {CONSISTENCY_CASES}, got {config.case!r}"
        )
    case = registry_lookup(config.case, nu=config.nu)
    if case.model != config.model:
        raise ConfigurationError(f"case {config.case!r} belongs to model {case.model!r}")
    with apply_thread_cap(config.threads):
        t0 = time.perf_counter()
        cloud, u_n, u_l_vec, stats = solve_level(case, config, config.delta0)
        e0 = compute_e0(cloud, u_n, u_l_vec, region=config.norm_region)
    return {
        "config": asdict(config),
        "delta": config.delta0,
        "n_points": cloud.n_points,
        "e0": e0,
        "threshold": CONSISTENCY_THRESHOLD,
        "passed": bool(e0 <= CONSISTENCY_THRESHOLD),
        "solver": asdict(stats),
        "seconds": time.perf_counter() - t0,
    }


def report_to_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    buf.write("delta,h,M,e0,rate\n")
    for lv in report.levels:
        rate = "" if lv.rate is None else f"{lv.rate:.10g}"
        buf.write(f"{lv.delta:.10g},{lv.h:.10g},{lv.n_points},{lv.e0:.10g},{rate}\n")
    return buf.getvalue()


def report_to_json(report: ConvergenceReport) -> str:
    doc = {
        "config": asdict(report.config),
        "levels": [
            {
                "delta": lv.delta,
                "h": lv.h,
                "M": lv.n_points,
                "e0": lv.e0,
                "rate": lv.rate,
                "solver": asdict(lv.stats),
                "seconds": lv.seconds,
            }
            for lv in report.levels
        ],
        "passed": report.passes(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: Optional[str], stream) -> None:
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        stream.write(text)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=["poisson", "lps"], default="poisson")
    p.add_argument("--strategy", choices=["dtd", "dtn"], default="dtd")
    p.add_argument("--case", default=None)
    p.add_argument("--delta0", type=float, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--loc-mode", dest="loc_mode", default=None,
                   choices=["full_layer", "right_strip", "inner_ring"])
    p.add_argument("--nu", type=float, default=0.3)
    p.add_argument("--local-provider", dest="local_provider",
                   choices=["analytic", "fd"], default="analytic")
    p.add_argument("--solver", default="auto",
                   choices=["auto", "dense_lu", "sparse_lu", "gmres", "bicgstab", "cg"])
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--norm-region", dest="norm_region",
                   choices=["all", "interior"], default="all")
    p.add_argument("--out", default=None)
    p.add_argument("--format", dest="fmt", choices=["csv", "json"], default="csv")


def _build_config(args, levels: int) -> ExperimentConfig:
    model = args.model
    case = args.case
    if case is None:
        case = "poisson_linear" if model == "poisson" else "lps_linear"
    delta0 = args.delta0 if args.delta0 is not None else (0.25 if model == "poisson" else 0.3)
    ratio = args.ratio if args.ratio is not None else (2.5 if model == "poisson" else 3.2)
    return ExperimentConfig(
        model=model,
        strategy=args.strategy,
        case=case,
        delta0=delta0,
        ratio=ratio,
        levels=levels,
        loc_mode=args.loc_mode,
        nu=args.nu,
        local_provider=args.local_provider,
        solver=args.solver,
        tol=args.tol,
        threads=args.threads,
        norm_region=args.norm_region,
        out=args.out,
        fmt=args.fmt,
    )


def cli_main(argv, stdout=None, stderr=None) -> int:
    """Entry point; returns 0 on pass, 1 on threshold/rate failure, 2 on usage error."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = argparse.ArgumentParser(
        prog="nlvc",
        description="Convert local boundary data to nonlocal volume constraints and "
        "verify horizon convergence.",
    )
    sub = parser.add_subparsers(dest="command")
    p_cons = sub.add_parser("consistency", help="single polynomial-exact solve")
    _add_common(p_cons)
    p_conv = sub.add_parser("converge", help="horizon-halving convergence sweep")
    _add_common(p_conv)
    p_conv.add_argument("--levels", type=int, default=4)

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0,) else 0
    if args.command is None:
        parser.print_usage(stderr)
        return 2

    try:
        if args.command == "consistency":
            config = _build_config(args, levels=1)
            result = run_consistency(config)
            if config.fmt == "json":
                _emit(json.dumps(result, indent=2, sort_keys=True) + "\n", config.out, stdout)
            else:
                status = "pass" if result["passed"] else "FAIL"
                _emit(
                    f"case,strategy,delta,M,e0,status\n"
                    f"{config.case},{config.strategy},{config.delta0:.10g},"
                    f"{result['n_points']},{result['e0']:.10g},{status}\n",
                    config.out,
                    stdout,
                )
            return 0 if result["passed"] else 1
        config = _build_config(args, levels=args.levels)
        report = run_convergence(config)
        text = report_to_json(report) if config.fmt == "json" else report_to_csv(report)
        _emit(text, config.out, stdout)
        return 0 if report.passes() else 1
    except (NlvcError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
