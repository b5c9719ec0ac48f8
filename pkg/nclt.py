"""
離散ノイズ S_N で駆動した解 u^N と、細かい格子の参照解との分布距離（非中心極限定理の検証）。

u^N のノイズ増分 N^{-H} H_k(ξ_n) は時刻 n/N に置き、参照格子（1 単位時間あたり N_ref セル）の上で
畳み込むので、核を r = 0 で評価することはない。
参照解は N_ref = N_ref_factor · max(N_values) の解で代用する（極限過程は厳密には生成できない）。
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from convolution import ConvolutionConfig, discrete_isometry_norm, fbm_convolution_variance, zk_paths
from regression import mean_with_se
from seeding import Seed, run_units
from sim_errors import DomainError, InsufficientReplicates
from solver import MildSolution, SolverConfig, picard_solve
from spectral import eigenvalues

logger = logging.getLogger(__name__)

FUNCTIONALS = ("norm_at_T", "norm_sup", "mode1_at_T")
MIN_KS_SAMPLES = 1000
N_REF_FACTOR = 8
KS_BOOTSTRAP = 200


@dataclass(frozen=True)
class NcltConfig:
    base: SolverConfig
    N_values: Tuple[int, ...]
    functional: str = "norm_at_T"
    replicates: int = 1000
    N_ref_factor: int = N_REF_FACTOR
    min_samples: int = MIN_KS_SAMPLES

    def __post_init__(self):
        n = tuple(int(x) for x in self.N_values)
        if len(n) < 2 or any(b <= a for a, b in zip(n, n[1:])) or n[0] < 1:
            raise DomainError(f"N_values={self.N_values} は長さ 2 以上の狭義単調増加列である必要があります")
        if self.functional not in FUNCTIONALS:
            raise DomainError(f"functional={self.functional} は {FUNCTIONALS} のいずれかである必要があります")
        object.__setattr__(self, "N_values", n)
        ref = self.N_ref
        bad = [N for N in n if ref % N != 0]
        if bad:
            raise DomainError(f"N_ref={ref} が N={bad} で割り切れません")
        stride = ref * self.base.dt
        if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
            raise DomainError(f"N_ref·dt={stride:.6g} は正の整数である必要があります")

    @property
    def N_ref(self) -> int:
        return int(self.N_ref_factor) * max(self.N_values)

    def echo(self) -> dict:
        d = self.base.echo()
        d.update({"N_values": list(self.N_values), "functional": self.functional,
                  "nclt_replicates": self.replicates, "N_ref": self.N_ref})
        return d


# ================================================================
# u^N
# ================================================================

def discrete_noise_path(cfg: NcltConfig, N: int, replicate: int, tag: str) -> np.ndarray:
    """解像度 N の部分和で作った Z_k^N を dt 格子に間引いたもの（(n_t, M)、t=0 は 0）。"""
    base = cfg.base
    out = np.zeros((base.n_steps + 1, base.model.n_modes))
    if base.noise_scale == 0:
        return out
    ncfg = replace(base.noise_config(), N_noise=cfg.N_ref)
    Z = zk_paths(ncfg, [replicate], fine=cfg.N_ref, N=int(N), tag=tag)[0]
    stride = int(round(cfg.N_ref * base.dt))
    out[1:] = Z[:, stride - 1::stride][:, :base.n_steps].T
    return out


def solve_with_discrete_noise(cfg: NcltConfig, N: int, tag: Optional[str] = None) -> List[MildSolution]:
    """各反復の u^N。ノイズ以外は picard_solve と同じ。"""
    tag = f"N{int(N)}" if tag is None else tag

    def one(r: int) -> MildSolution:
        Z = discrete_noise_path(cfg, N, r, tag)
        sol, _ = picard_solve(cfg.base, r, Z=Z)
        return sol

    return run_units(one, range(cfg.replicates), cfg.base.threads)


def reference_solutions(cfg: NcltConfig) -> List[MildSolution]:
    return solve_with_discrete_noise(cfg, cfg.N_ref, tag="ref")


def functional_values(solutions: Sequence[MildSolution], functional: str) -> np.ndarray:
    """解の集まりから 1 次元の標本を取り出す。"""
    if functional == "norm_at_T":
        return np.array([s.norms_nu[-1] for s in solutions])
    if functional == "norm_sup":
        return np.array([float(np.max(s.norms_nu)) for s in solutions])
    if functional == "mode1_at_T":
        return np.array([s.modal[-1, 0] for s in solutions])
    raise DomainError(f"functional={functional} は {FUNCTIONALS} のいずれかである必要があります")


# ================================================================
# 分布距離
# ================================================================

def _ks(a: np.ndarray, b: np.ndarray) -> float:
    return float(stats.ks_2samp(a, b).statistic)


def distribution_distance(samples_a: Sequence[float], samples_b: Sequence[float], min_samples: int = MIN_KS_SAMPLES) -> float:
    """2 標本 Kolmogorov-Smirnov 統計量（対称・非負、同一標本で 0）。"""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    n = min(a.size, b.size)
    if n < min_samples:
        raise InsufficientReplicates(min_samples, n, "distribution_distance")
    return _ks(a, b)


@dataclass
class DistanceEstimate:
    statistic: float
    se: float
    ci: Tuple[float, float]
    n_a: int
    n_b: int

    def to_dict(self) -> dict:
        return asdict(self)


def distance_with_ci(
    samples_a: Sequence[float],
    samples_b: Sequence[float],
    n_boot: int = KS_BOOTSTRAP,
    seed: Optional[Seed] = None,
    min_samples: int = MIN_KS_SAMPLES,
) -> DistanceEstimate:
    """KS 統計量と、両標本を独立に再標本化したブートストラップ SE・95% 区間。"""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    stat = distribution_distance(a, b, min_samples)
    rng = (seed or Seed(0)).derive("ks_bootstrap").generator()
    boots = np.empty(n_boot)
    for i in range(n_boot):
        boots[i] = _ks(a[rng.integers(0, a.size, a.size)], b[rng.integers(0, b.size, b.size)])
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return DistanceEstimate(stat, float(np.std(boots, ddof=1)), (float(lo), float(hi)), int(a.size), int(b.size))


def ks_trend(estimates: Sequence[DistanceEstimate]) -> bool:
    """N の昇順に並んだ距離が CI の範囲で非増加か（次の値 <= 前の ci_hi）。"""
    return all(nxt.statistic <= prev.ci[1] for prev, nxt in zip(estimates, estimates[1:]))


@dataclass
class NcltReport:
    functional: str
    N_ref: int
    rows: List[dict] = field(default_factory=list)
    passed: bool = False
    reference: str = "fine-grid self-convergence surrogate"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=["N", "ks_statistic", "ci_lo", "ci_hi", "functional"])


def nclt_check(cfg: NcltConfig) -> NcltReport:
    """各 N について u^N と参照解の汎関数の KS 距離を求め、N に関して非増加かを判定する。"""
    if cfg.replicates < cfg.min_samples:
        raise InsufficientReplicates(cfg.min_samples, cfg.replicates, "nclt")
    ref = functional_values(reference_solutions(cfg), cfg.functional)
    report = NcltReport(functional=cfg.functional, N_ref=cfg.N_ref)
    estimates = []
    for N in cfg.N_values:
        vals = functional_values(solve_with_discrete_noise(cfg, N), cfg.functional)
        est = distance_with_ci(vals, ref, seed=cfg.base.seed.derive("nclt", N), min_samples=cfg.min_samples)
        estimates.append(est)
        logger.info("N=%d KS=%.4f [%.4f, %.4f]", N, est.statistic, est.ci[0], est.ci[1])
        report.rows.append({"N": N, "ks_statistic": est.statistic, "ci_lo": est.ci[0], "ci_hi": est.ci[1],
                            "functional": cfg.functional})
    report.passed = ks_trend(estimates)
    return report


# ================================================================
# 線形の場合の分散
# ================================================================

def zkN_variance_gap(cfg: ConvolutionConfig, N_values: Sequence[int], N_ref_factor: int = N_REF_FACTOR) -> pd.DataFrame:
    """
    E‖Z_k^N(T)‖_ν^2 の Monte Carlo 推定と連続オラクル Σ_j λ_j^ν·(単一モード fBm 畳み込みの分散) の差。
    列: N, mean_sq_norm, se, scheme, oracle, rel_gap。scheme は N 格子だけで畳み込んだときの離散等長性の値。
    """
    N_values = [int(N) for N in N_values]
    ref = int(N_ref_factor) * max(N_values)
    fine_cfg = replace(cfg, N_noise=ref, t_grid=(cfg.T,), check_tail=False)
    lam = eigenvalues(cfg.model)
    sigma2 = cfg.noise_scale ** 2
    oracle = sigma2 * sum(lam[j] ** cfg.nu * fbm_convolution_variance(cfg.alpha, lam[j], cfg.H, fine_cfg.T_cells)
                          for j in range(lam.size))
    if cfg.noise_mode == "scalar":
        oracle /= lam.size
    rows = []
    for N in N_values:
        Z = zk_paths(fine_cfg, range(cfg.replicates), fine=ref, N=N, tag=f"gap{N}")[..., -1]
        mean, se = mean_with_se(np.sum(lam ** cfg.nu * Z ** 2, axis=1))
        scheme = discrete_isometry_norm(replace(fine_cfg, N_noise=N), fine_cfg.T_cells)
        rows.append({"N": N, "mean_sq_norm": float(mean), "se": float(se), "scheme": scheme, "oracle": oracle,
                     "rel_gap": abs(float(mean) - oracle) / oracle})
    return pd.DataFrame(rows)
