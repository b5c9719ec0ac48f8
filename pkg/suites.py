"""
検証スイートの実行。
run_suite は設定 1 つにつき 1 スイートを実行し、CSV と JSON レポートを output_dir に書く。
レポートは設定の写しとシードを含み、同じ (設定, シード) から数値欄まで同じものが再現する。
"""
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.special import erfcx

from config_manager import CONVOLUTION_SUITES, SOLVER_SUITES, ExperimentConfig
from convolution import (
    discrete_isometry_norm,
    l2_scaling_exponent,
    lp_bound_check,
    increment_exponent,
    second_moment_table,
    simulate_Zk,
)
from mlf import mainardi_wright_moment, ml_array, ml_decay_check, mw_moment_quadrature
from nclt import nclt_check
from noise import (
    LrdSpec,
    cov_exponent_for,
    hermite_orthogonality_check,
    hermite_path,
    hermite_polynomial,
    hypercontractivity_ratio,
    self_similarity_check,
)
from regression import RegressionReport, loglog_regression
from report_writer import PARAM_COLUMNS, SCHEMA_VERSION, write_report
from seeding import run_units
from sim_errors import DomainError
from solver import (
    holder_estimate,
    increment_decomposition,
    picard_solve,
    solution_to_frame,
    solve_replicates,
    theta_diagnostics,
    weighted_norm,
)
from spectral import hs_norm_salpha

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-10
ERFC_TOL = 1e-8
MOMENT_TOL = 1e-6
HS_TOLERANCE = 0.05
ERFC_POINTS = (0.1, 1.0, 5.0)


@dataclass
class ExperimentReport:
    suite: str
    seed: int
    config: Dict[str, Dict[str, Any]]
    checks: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    wall_clock: float = 0.0
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(bool(c["passed"]) for c in self.checks)

    def add_check(
        self,
        name: str,
        estimate: float,
        passed: bool,
        theory: Optional[float] = None,
        formula: str = "",
        tolerance: Optional[float] = None,
        ci: Optional[tuple] = None,
        **extra: Any,
    ) -> None:
        row = {
            "name": name, "estimate": estimate, "theory": theory, "formula": formula,
            "tolerance": tolerance, "ci": list(ci) if ci is not None else None, "passed": bool(passed),
        }
        row.update(extra)
        self.checks.append(row)

    def add_regression(self, name: str, rep: RegressionReport) -> None:
        self.add_check(
            name, rep.slope, bool(rep.passed), theory=rep.theory, formula=rep.formula,
            tolerance=rep.tolerance, ci=rep.ci, se=rep.se, n_points=rep.n_points,
            residual_std=rep.residual_std, **{f"extra_{k}": v for k, v in rep.extra.items()},
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "suite": self.suite,
            "seed": self.seed,
            "config": self.config,
            "checks": self.checks,
            "details": self.details,
            "artifacts": sorted(self.tables),
            "passed": self.passed,
            "wall_clock": self.wall_clock,
        }


# ================================================================
# 各スイート
# ================================================================

def _mlf_check(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    m = cfg.sections["mlf"]
    z = np.linspace(-50.0, 10.0, m["n_identity"])
    # exp への置き換えを外し、級数と Talbot の両経路で恒等式を確かめる
    rel = np.abs(ml_array(1.0, 1.0, z, closed_form=False) - np.exp(z)) / np.maximum(1.0, np.exp(z))
    report.add_check("E_{1,1}(z) = exp(z)", float(rel.max()), bool(rel.max() <= IDENTITY_TOL),
                     theory=0.0, formula="E_{1,1}(z)=e^z", tolerance=IDENTITY_TOL)

    x = np.array(ERFC_POINTS)
    err = np.abs(ml_array(0.5, 1.0, -x) - erfcx(x))
    report.add_check("E_{1/2,1}(-x) = exp(x^2) erfc(x)", float(err.max()), bool(err.max() <= ERFC_TOL),
                     theory=0.0, formula="E_{1/2,1}(-x)=e^{x^2}erfc(x)", tolerance=ERFC_TOL)

    rows = []
    xs = np.geomspace(1e-3, 1e4, m["decay_points"])
    for a in m["alphas"]:
        d = ml_decay_check(a, xs)
        report.add_check(f"decay bound alpha={a}", d.C, math.isfinite(d.C),
                         formula="sup (1+x)|E_{a,a}(-x)| < inf", argmax=d.argmax)
        quad = mw_moment_quadrature(a, m["rhos"])
        for rho, val in quad.items():
            exact = mainardi_wright_moment(a, rho)
            rows.append({"alpha": a, "rho": rho, "quadrature": val, "exact": exact, "abs_err": abs(val - exact)})
    table = pd.DataFrame(rows, columns=["alpha", "rho", "quadrature", "exact", "abs_err"])
    report.tables["moments"] = table
    worst = float(table["abs_err"].max()) if len(table) else 0.0
    report.add_check("Mainardi-Wright moments", worst, worst <= MOMENT_TOL, theory=0.0,
                     formula="Gamma(1+rho)/Gamma(1+alpha*rho)", tolerance=MOMENT_TOL)


def _noise_check(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    nc, n = cfg.sections["noise_check"], cfg.sections["noise"]
    seed = cfg.root_seed
    t_grid = np.geomspace(nc["t_min"], 1.0, nc["n_times"])
    rows = []
    for k, H in zip(nc["ks"], nc["hursts"]):
        spec = LrdSpec(N=nc["N"], cov_exponent=cov_exponent_for(H, k, n["cov_preset"]), model=n["lrd_model"])
        paths = run_units(
            lambda r: hermite_path(k, H, nc["N"], 1.0, spec, seed.derive("noise_check", k, H, r),
                                   t_grid=t_grid, normalize=n["normalize"], calibration=n["calibration"],
                                   calibration_seed=seed.derive("calibration", k, H)),
            range(nc["replicates"]), cfg.threads,
        )
        rep = self_similarity_check(paths, t_range=(nc["t_min"], 1.0), n_points=nc["n_times"],
                                    seed=seed.derive("noise_check_bootstrap", k, H))
        report.add_regression(f"self-similarity k={k} H={H}", rep)
        var = np.var(np.stack([p.values for p in paths]), axis=0, ddof=1)
        rows.extend({"k": k, "H": H, "t": float(t), "variance": float(v)} for t, v in zip(t_grid, var))
    report.tables["variance"] = pd.DataFrame(rows, columns=["k", "H", "t", "variance"])

    gauss = seed.derive("hypercontractivity").generator().standard_normal(nc["hyper_samples"])
    for k in nc["hyper_ks"]:
        h = hypercontractivity_ratio(k, nc["hyper_p"], hermite_polynomial(k, gauss),
                                     seed=seed.derive("hypercontractivity_bootstrap", k))
        report.add_check(f"hypercontractivity k={k}", h.ratio, h.passed, theory=h.bound,
                         formula="(p-1)^(k/2)", ci=h.ci, se=h.se)

    mean, se = hermite_orthogonality_check(nc["kmax"], gauss)
    expected = np.diag([math.factorial(j) for j in range(nc["kmax"] + 1)]).astype(float)
    z = np.abs(mean - expected) / np.maximum(se, 1e-300)
    report.add_check("Hermite orthogonality", float(z.max()), bool(z.max() <= 4.0),
                     theory=0.0, formula="E[H_j H_k] = k! delta_jk", tolerance=4.0)


def _hs_scaling(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    h = cfg.sections["hs_scaling"]
    model = cfg.spectrum_model()
    rs = np.geomspace(h["r_min"], h["r_max"], h["n_r"])
    norms = [hs_norm_salpha(cfg.alpha, cfg.nu, float(r), model) for r in rs]
    hs_sq = np.array([x.value ** 2 for x in norms])
    theory = cfg.alpha * (1.0 - cfg.nu) - 2.0
    rep = loglog_regression(rs, hs_sq, theory=theory, tolerance=HS_TOLERANCE, formula="alpha*(1-nu)-2",
                            seed=cfg.root_seed.derive("hs_bootstrap"))
    report.add_regression("HS norm scaling", rep)
    report.tables["hs_norm"] = pd.DataFrame({"r": rs, "hs_sq": hs_sq, "tail_ratio": [x.tail_ratio for x in norms]})


def _zk_scaling(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    ccfg = cfg.convolution_config()
    ens = simulate_Zk(ccfg)
    report.add_regression("Z_k L2 growth", l2_scaling_exponent(ccfg, ens))
    table = second_moment_table(ens)
    report.tables["second_moment"] = table
    exact = discrete_isometry_norm(ccfg, ccfg.T)
    mean, se = ens.mean_sq_norm()
    z = abs(float(mean[-1]) - exact) / float(se[-1]) if se[-1] > 0 else 0.0
    report.add_check("discrete isometry at T", float(mean[-1]), z <= 4.0, theory=exact,
                     formula="sum_j lambda_j^nu K_j' Gamma K_j", tolerance=4.0, z_score=z)


def _zk_increment(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    ccfg = cfg.convolution_config()
    rep = increment_exponent(ccfg, cfg.increment_pairs())
    report.add_regression("Z_k increment exponent", rep)


def _lp_bound(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    ccfg = cfg.convolution_config()
    lp = lp_bound_check(ccfg)
    for row in lp.rows:
        report.add_check(f"Lp bound t={row['t']:.4g}", row["ratio"], row["passed"], theory=lp.bound,
                         formula="(p-1)^(k/2)", ci=(row["ci_lo"], row["ci_hi"]), se=row["se"])
    report.tables["lp_bound"] = lp.to_frame()


def _solve(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    s = cfg.sections["solver"]
    scfg = cfg.solver_config()
    results = solve_replicates(scfg, s["initial_guess"])
    norms, residuals = [], []
    sup_nu, weighted = [], []
    for r, (sol, pr) in enumerate(results):
        f = solution_to_frame(sol)
        f.insert(0, "replicate", r)
        norms.append(f)
        residuals.extend({"replicate": r, "iteration": i + 1, "residual": v} for i, v in enumerate(pr.residuals))
        a, b = weighted_norm(sol, scfg.params, scfg.p)
        sup_nu.append(a)
        weighted.append(b)
    reports = [pr for _, pr in results]
    report.tables["norms"] = pd.concat(norms, ignore_index=True)
    report.tables["picard_residuals"] = pd.DataFrame(residuals, columns=["replicate", "iteration", "residual"])

    report.add_check("Picard converged", float(sum(p.converged for p in reports)),
                     all(p.converged for p in reports), theory=float(len(reports)),
                     formula="#{replicates with residual < picard_tol} = replicates")
    factor = max((p.contraction_factor for p in reports if math.isfinite(p.contraction_factor)), default=0.0)
    report.add_check("contraction factor", factor, factor < 1.0, theory=1.0, formula="max residual ratio < 1")
    decreasing = all(all(b < a for a, b in zip(p.residuals, p.residuals[1:])) for p in reports if p.converged)
    report.add_check("residuals decreasing", float(decreasing), decreasing, theory=1.0,
                     formula="r_{i+1} < r_i for every Picard step")

    # 初期推定を変えても同じ不動点に収束するか（反復 0 のノイズを共有）
    sol0, pr0 = results[0]
    run = replace(scfg, T=pr0.achieved_T)
    alt, _ = picard_solve(run, 0, initial="zero", Z=sol0.noise)
    a, b = weighted_norm(alt.modal - sol0.modal, scfg.params, scfg.p, scfg.model, sol0.t_grid)
    dist = (a + b) ** (1.0 / scfg.p)
    report.add_check("uniqueness across initial guesses", dist, dist < 10.0 * scfg.picard_tol,
                     theory=0.0, tolerance=10.0 * scfg.picard_tol,
                     formula="||u(zero guess) - u(u0 guess)||_w < 10 picard_tol")

    report.details.update({
        "theta": theta_diagnostics(scfg.params),
        "lipschitz_constant": scfg.force.lipschitz_constant,
        "achieved_T": [p.achieved_T for p in reports],
        "iterations": [p.iterations for p in reports],
        "halvings": [p.halvings for p in reports],
        "E_sup_norm_nu_p": float(np.mean(sup_nu)),
        "E_weighted_sup_norm_nu1_p": float(np.mean(weighted)),
    })


def _holder(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    h = cfg.sections["holder"]
    scfg = cfg.solver_config(replicates=h["replicates"])
    pairs = cfg.holder_pairs()
    results = solve_replicates(scfg)
    sols = [sol for sol, _ in results]
    t_needed = max(t2 for _, t2 in pairs)
    achieved = min(pr.achieved_T for _, pr in results)
    if achieved + 1e-12 < t_needed:
        raise DomainError(f"T が {achieved:.4g} に縮小され、t2={t_needed:.4g} の増分を測れません")
    rep = holder_estimate(sols, scfg.params, pairs, p=scfg.p, seed=cfg.root_seed.derive("holder_bootstrap"))
    report.add_regression("solution Holder exponent", rep)
    t1, t2 = pairs[-1]
    parts = increment_decomposition(sols[0], scfg, t1, t2)
    report.tables["increment_terms"] = pd.DataFrame(
        [{"term": k, "norm": v["norm"], "exponent": v["exponent"]} for k, v in parts.items()],
        columns=["term", "norm", "exponent"],
    )


def _nclt(cfg: ExperimentConfig, report: ExperimentReport) -> None:
    ncfg = cfg.nclt_config()
    res = nclt_check(ncfg)
    report.tables["nclt"] = res.to_frame()
    stats = [row["ks_statistic"] for row in res.rows]
    report.add_check(f"KS nonincreasing in N ({res.functional})", stats[-1], res.passed,
                     formula="KS(u^N, u_ref) nonincreasing within CI")
    report.details.update({"N_ref": res.N_ref, "reference": res.reference})


SUITE_RUNNERS: Dict[str, Callable[[ExperimentConfig, ExperimentReport], None]] = {
    "mlf_check": _mlf_check,
    "noise_check": _noise_check,
    "hs_scaling": _hs_scaling,
    "zk_scaling": _zk_scaling,
    "zk_increment": _zk_increment,
    "lp_bound": _lp_bound,
    "solve": _solve,
    "holder": _holder,
    "nclt": _nclt,
}


# [params] の組ごとに回すスイート（mlf_check / noise_check は独自の格子を持つ）
PARAM_SUITES = ("hs_scaling",) + CONVOLUTION_SUITES + SOLVER_SUITES


def _run_param_sets(cfg: ExperimentConfig, report: ExperimentReport,
                    runner: Callable[[ExperimentConfig, ExperimentReport], None]) -> None:
    """
    パラメータの組ごとに runner を実行してひとつのレポートにまとめる。
    表には組の列（PARAM_COLUMNS）を先頭に足し、組が複数なら検査名の末尾に組を添える。
    """
    sets = cfg.param_sets()
    frames: Dict[str, List[pd.DataFrame]] = {}
    for alpha, nu, hurst, k in sets:
        values = {"alpha": alpha, "nu": nu, "hurst": hurst, "k": k}
        label = f"alpha={alpha:g}, nu={nu:g}, H={hurst:g}, k={k}"
        sub = ExperimentReport(suite=cfg.suite, seed=cfg.seed, config=report.config)
        runner(cfg.with_params(alpha, nu, hurst, k), sub)
        logger.info("suite %s [%s]: passed=%s", cfg.suite, label, sub.passed)
        for check in sub.checks:
            if len(sets) > 1:
                check["name"] = f"{check['name']} [{label}]"
            check.update(values)
            report.checks.append(check)
        for name, frame in sub.tables.items():
            frames.setdefault(name, []).append(frame.assign(**values)[PARAM_COLUMNS + list(frame.columns)])
        if len(sets) > 1:
            report.details.setdefault("by_params", []).append({**values, **sub.details})
        else:
            report.details.update(sub.details)
    for name, parts in frames.items():
        report.tables[name] = pd.concat(parts, ignore_index=True)


def execute_suite(cfg: ExperimentConfig) -> ExperimentReport:
    """スイートを実行してレポートを返す（ファイルは書かない）。"""
    runner = SUITE_RUNNERS.get(cfg.suite)
    if runner is None:
        raise DomainError(f"未知のスイート: {cfg.suite}")
    report = ExperimentReport(suite=cfg.suite, seed=cfg.seed, config=cfg.echo())
    logger.info("suite %s start (seed=%d)", cfg.suite, cfg.seed)
    started = time.perf_counter()
    if cfg.suite in PARAM_SUITES:
        _run_param_sets(cfg, report, runner)
    else:
        runner(cfg, report)
    report.wall_clock = time.perf_counter() - started
    logger.info("suite %s end: passed=%s (%.2f s)", cfg.suite, report.passed, report.wall_clock)
    return report


def run_suite(cfg: ExperimentConfig) -> ExperimentReport:
    """スイートを実行し、CSV と JSON レポートを cfg.output_dir に書く。"""
    report = execute_suite(cfg)
    write_report(report, cfg.output_dir)
    return report
