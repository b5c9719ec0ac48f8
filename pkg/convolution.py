"""
確率畳み込み Z_k(t) = ∫_0^t S_α(t-s) dZ_H^k(s) のモード別シミュレーションと
L2 成長指数・Lp 上界・増分指数の Monte Carlo 検証。

離散化:
  ノイズ格子 h = 1/N_noise のセル i の増分 ΔZ_i（部分和 S_N の増分）に対して
    Z_j(t_n) = Σ_{i<n} K_j[n-1-i] ΔZ_i
  K_j は mlf.kernel_table（midpoint は r=(l+½)h で評価し r=0 を避ける）。
  畳み込みは scipy.signal.fftconvolve でモード・反復をまとめて計算する。
ノイズの空間構造:
  cylindrical（既定）: モードごとに独立な Hermite 過程
  scalar: 1 本の Hermite 過程に固定単位ベクトル (1, ..., 1)/√J を掛ける
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate
from scipy.linalg import matmul_toeplitz
from scipy.signal import fftconvolve

from mlf import kernel_alpha, kernel_table, ml_array
from noise import (
    LrdSpec,
    _hurst,
    _order,
    cov_exponent_for,
    hermite_increments,
    lrd_covariance,
    normalization_constant,
)
from regression import RegressionReport, bootstrap_statistic, loglog_regression, mean_with_se
from seeding import Seed, chunked, run_units
from sim_errors import DomainError, GateError, InsufficientReplicates
from spectral import SpectrumModel, eigenvalues, hs_norm_salpha

logger = logging.getLogger(__name__)

NOISE_MODES = ("cylindrical", "scalar")
MIN_SCALING_REPLICATES = 100
MIN_LP_REPLICATES = 10_000
REPLICATE_BLOCK = 64
L2_TOLERANCE = 0.1
INCREMENT_TOLERANCE = 0.07


def gate_value(alpha: float, nu: float, H: float) -> float:
    return alpha * (1.0 - nu) + 2.0 * H


def l2_theory_slope(alpha: float, nu: float, H: float) -> float:
    """E‖Z_k(t)‖_ν^2 ~ t^{α(1-ν)+2H-2}。"""
    return gate_value(alpha, nu, H) - 2.0


def increment_theory(alpha: float, nu: float, H: float) -> float:
    """γ = min{(2-(2-ν)α)/2, (α(1-ν)+2H-2)/2}。"""
    return min((2.0 - (2.0 - nu) * alpha) / 2.0, (alpha * (1.0 - nu) + 2.0 * H - 2.0) / 2.0)


# ================================================================
# 設定
# ================================================================

@dataclass(frozen=True)
class ConvolutionConfig:
    alpha: float
    nu: float
    H: float
    k: int
    model: SpectrumModel
    t_grid: Tuple[float, ...]
    N_noise: int
    replicates: int
    p: float = 2.0
    seed: Seed = Seed(0)
    quadrature: str = "midpoint"
    noise_mode: str = "cylindrical"
    noise_scale: float = 1.0
    cov_preset: str = "classical"
    lrd_model: str = "power_law"
    normalize: bool = True
    calibration: str = "exact"
    threads: Union[int, str] = 1
    suite_id: str = "zk"
    check_tail: bool = True

    def __post_init__(self):
        a = kernel_alpha(self.alpha)
        h = _hurst(self.H)
        k = _order(self.k)
        nu = float(self.nu)
        g = gate_value(a, nu, h)
        if not g > 2.0:
            raise GateError([f"alpha*(1-nu)+2H = {g:.4g} <= 2"])
        t = tuple(sorted(float(x) for x in self.t_grid))
        if not t or t[0] <= 0:
            raise DomainError("t_grid は (0, T] の正の時刻である必要があります")
        if int(self.N_noise) < 1:
            raise DomainError(f"N_noise={self.N_noise} は 1 以上である必要があります")
        if self.p < 2:
            raise DomainError(f"p={self.p} は 2 以上である必要があります")
        if self.noise_mode not in NOISE_MODES:
            raise DomainError(f"noise_mode={self.noise_mode} は {NOISE_MODES} のいずれかである必要があります")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "N_noise", int(self.N_noise))
        object.__setattr__(self, "replicates", int(self.replicates))

    @property
    def T(self) -> float:
        return self.t_grid[-1]

    @property
    def h(self) -> float:
        return 1.0 / self.N_noise

    @property
    def n_cells(self) -> int:
        return int(round(self.T * self.N_noise))

    @property
    def T_cells(self) -> float:
        """ノイズ格子に合わせた終端時刻。"""
        return self.n_cells / self.N_noise

    def calibration_seed(self) -> Seed:
        return self.seed.derive("calibration")

    def lrd_spec(self) -> LrdSpec:
        e = cov_exponent_for(self.H, self.k, self.cov_preset)
        return LrdSpec(N=max(self.n_cells, 2), cov_exponent=e, model=self.lrd_model)

    def grid_indices(self) -> np.ndarray:
        """t_grid をノイズ格子 n/N_noise に合わせた添字（>= 1）。"""
        idx = np.maximum(1, np.rint(np.asarray(self.t_grid) * self.N_noise).astype(int))
        snapped = idx / self.N_noise
        if np.any(np.abs(snapped - np.asarray(self.t_grid)) > 1e-12):
            logger.info("t_grid をノイズ格子に合わせました: %s", np.round(snapped, 6).tolist())
        return idx

    def echo(self) -> dict:
        d = {
            "alpha": self.alpha, "nu": self.nu, "H": self.H, "k": self.k,
            "t_grid": list(self.t_grid), "N_noise": self.N_noise, "replicates": self.replicates,
            "p": self.p, "seed": self.seed.root, "quadrature": self.quadrature,
            "noise_mode": self.noise_mode, "noise_scale": self.noise_scale,
            "cov_preset": self.cov_preset, "lrd_model": self.lrd_model,
            "normalize": self.normalize, "calibration": self.calibration,
        }
        d.update(self.model.describe())
        return d


# ================================================================
# サンプル
# ================================================================

@dataclass
class ConvolutionSample:
    """1 反復分の Z_{k,j}(t_i)（モード × 時刻）と各時刻の Ḣ^ν ノルム。"""
    values: np.ndarray
    norms: np.ndarray


@dataclass
class ConvolutionEnsemble:
    t_grid: np.ndarray
    values: np.ndarray      # (R, J, n_t)
    norms: np.ndarray       # (R, n_t)

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, r: int) -> ConvolutionSample:
        return ConvolutionSample(values=self.values[r], norms=self.norms[r])

    def mean_sq_norm(self) -> Tuple[np.ndarray, np.ndarray]:
        return mean_with_se(self.norms ** 2, axis=0)


def convolve_increments(kernel: np.ndarray, dZ: np.ndarray) -> np.ndarray:
    """
    kernel: (J, n)、dZ: (..., J, n)。格子点 t_1..t_n での Z を (..., J, n) で返す。
    """
    n = dZ.shape[-1]
    return fftconvolve(dZ, np.broadcast_to(kernel, dZ.shape[:-2] + kernel.shape), axes=-1)[..., :n]


def _unit_direction(J: int) -> np.ndarray:
    return np.full(J, 1.0 / math.sqrt(J))


def noise_increments(cfg: ConvolutionConfig, replicate_ids: Sequence[int], fine: Optional[int] = None, N: Optional[int] = None, tag: str = "") -> np.ndarray:
    """
    反復 replicate_ids のモード別ノイズ増分 (R_b, J, n_cells)。
    N（既定 N_noise）は部分和の解像度、fine はそれを載せる格子の解像度。
    """
    N = cfg.N_noise if N is None else int(N)
    fine = N if fine is None else int(fine)
    J = cfg.model.n_modes
    T = cfg.T_cells
    spec = LrdSpec(N=max(int(math.floor(N * T + 1e-9)), 2),
                   cov_exponent=cov_exponent_for(cfg.H, cfg.k, cfg.cov_preset), model=cfg.lrd_model)
    suite = cfg.suite_id + tag
    if cfg.noise_mode == "cylindrical":
        seeds = [cfg.seed.derive(suite, r, j) for r in replicate_ids for j in range(J)]
        inc = hermite_increments(cfg.k, cfg.H, N, T, spec, seeds, fine=fine, normalize=cfg.normalize,
                                 calibration=cfg.calibration, calibration_seed=cfg.calibration_seed())
        inc = inc.reshape(len(replicate_ids), J, -1)
    else:
        seeds = [cfg.seed.derive(suite, r, 0) for r in replicate_ids]
        inc = hermite_increments(cfg.k, cfg.H, N, T, spec, seeds, fine=fine, normalize=cfg.normalize,
                                 calibration=cfg.calibration, calibration_seed=cfg.calibration_seed())
        inc = inc[:, None, :] * _unit_direction(J)[None, :, None]
    return cfg.noise_scale * inc


def zk_paths(cfg: ConvolutionConfig, replicate_ids: Sequence[int], fine: Optional[int] = None, N: Optional[int] = None, tag: str = "") -> np.ndarray:
    """格子 1/fine の全点での Z_k（(R_b, J, n)、t = 0 は含まない）。"""
    fine = cfg.N_noise if fine is None else int(fine)
    dZ = noise_increments(cfg, replicate_ids, fine=fine, N=N, tag=tag)
    kernel = kernel_table(cfg.alpha, eigenvalues(cfg.model), 1.0 / fine, dZ.shape[-1], cfg.quadrature)
    return convolve_increments(kernel, dZ)


def simulate_Zk(cfg: ConvolutionConfig) -> ConvolutionEnsemble:
    """
    全反復・全モードの Z_{k,j}(t_i) を計算する。反復はブロック単位で並列化し、
    ブロック分割はスレッド数に依存しないので結果はビット単位で再現する。
    """
    if cfg.check_tail:
        hs_norm_salpha(cfg.alpha, cfg.nu, cfg.T, cfg.model)
    idx = cfg.grid_indices()
    lam = eigenvalues(cfg.model)
    kernel = kernel_table(cfg.alpha, lam, cfg.h, cfg.n_cells, cfg.quadrature)

    def block(rows: List[int]) -> np.ndarray:
        dZ = noise_increments(cfg, rows)
        return convolve_increments(kernel, dZ)[..., idx - 1]

    blocks = run_units(block, chunked(range(cfg.replicates), REPLICATE_BLOCK), cfg.threads)
    values = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, lam.size, idx.size))
    norms = np.sqrt(np.einsum("j,rjt->rt", lam ** cfg.nu, values ** 2))
    return ConvolutionEnsemble(t_grid=idx / cfg.N_noise, values=values, norms=norms)


# ================================================================
# 検証
# ================================================================

def second_moment_table(ens: ConvolutionEnsemble) -> pd.DataFrame:
    """CSV 用（列: t, mean_sq_norm, ci_lo, ci_hi）。CI は平均 ± 1.96 SE。"""
    mean, se = ens.mean_sq_norm()
    return pd.DataFrame({
        "t": ens.t_grid, "mean_sq_norm": mean, "ci_lo": mean - 1.96 * se, "ci_hi": mean + 1.96 * se,
    })


def _check_scaling_grid(t: Sequence[float]) -> None:
    t = np.asarray(t, dtype=float)
    if t.size < 8 or math.log10(t[-1] / t[0]) < 1.5:
        raise DomainError("t_grid は 8 点以上・1.5 桁以上にわたる対数格子である必要があります")


def l2_scaling_exponent(cfg: ConvolutionConfig, ensemble: Optional[ConvolutionEnsemble] = None, tolerance: float = L2_TOLERANCE) -> RegressionReport:
    """log Ê‖Z_k(t)‖_ν^2 の log t に対する傾き。理論値 α(1-ν)+2H-2。"""
    _check_scaling_grid(cfg.t_grid)
    if cfg.replicates < MIN_SCALING_REPLICATES:
        raise InsufficientReplicates(MIN_SCALING_REPLICATES, cfg.replicates, "zk_scaling")
    ens = ensemble if ensemble is not None else simulate_Zk(cfg)
    mean, se = ens.mean_sq_norm()
    report = loglog_regression(
        ens.t_grid, mean, theory=l2_theory_slope(cfg.alpha, cfg.nu, cfg.H), tolerance=tolerance,
        formula="alpha*(1-nu)+2H-2", seed=cfg.seed.derive("bootstrap"),
    )
    report.extra["max_rel_se"] = float(np.max(se / mean))
    return report


@dataclass
class LpBoundReport:
    p: float
    k: int
    bound: float
    rows: List[dict] = field(default_factory=list)
    passed: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def lp_bound_check(cfg: ConvolutionConfig, ensemble: Optional[ConvolutionEnsemble] = None, n_boot: int = 200, min_replicates: int = MIN_LP_REPLICATES) -> LpBoundReport:
    """
    各 t で (Ê‖Z‖^p)^{1/p} <= (p-1)^{k/2} (Ê‖Z‖^2)^{1/2} + 3·(ブートストラップ SE) を検査する。
    """
    if cfg.replicates < min_replicates:
        raise InsufficientReplicates(min_replicates, cfg.replicates, "lp_bound")
    ens = ensemble if ensemble is not None else simulate_Zk(cfg)
    p = cfg.p
    bound = (p - 1.0) ** (cfg.k / 2.0)

    def ratio(x: np.ndarray) -> float:
        return float(np.mean(x ** p) ** (1.0 / p) / np.sqrt(np.mean(x ** 2)))

    report = LpBoundReport(p=p, k=cfg.k, bound=bound)
    for i, t in enumerate(ens.t_grid):
        est, se, ci = bootstrap_statistic(ens.norms[:, i], ratio, n_boot=n_boot, seed=cfg.seed.derive("lp", i))
        ok = bool(est <= bound + 3.0 * se)
        report.rows.append({"t": float(t), "ratio": est, "se": se, "ci_lo": ci[0], "ci_hi": ci[1], "bound": bound, "passed": ok})
        report.passed = report.passed and ok
    return report


def increment_exponent(
    cfg: ConvolutionConfig,
    pairs: Sequence[Tuple[float, float]],
    tolerance: float = INCREMENT_TOLERANCE,
) -> RegressionReport:
    """
    log Ê‖Z_k(t2) - Z_k(t1)‖_ν^2 を log(t2 - t1) に回帰し 1/2 倍した傾き。
    t1 = t2 の組は増分 0 として extra に数だけ記録し、回帰からは除く。
    """
    if cfg.replicates < MIN_SCALING_REPLICATES:
        raise InsufficientReplicates(MIN_SCALING_REPLICATES, cfg.replicates, "zk_increment")
    times = sorted({float(t) for pair in pairs for t in pair})
    run = replace(cfg, t_grid=tuple(times))
    ens = simulate_Zk(run)
    pos = {t: i for i, t in enumerate(times)}
    lam = eigenvalues(cfg.model)
    dts, msq = [], []
    zero_pairs = 0
    for t1, t2 in pairs:
        d = ens.values[:, :, pos[float(t2)]] - ens.values[:, :, pos[float(t1)]]
        m = float(np.mean(np.sum(lam ** cfg.nu * d ** 2, axis=1)))
        if ens.t_grid[pos[float(t2)]] == ens.t_grid[pos[float(t1)]]:
            zero_pairs += 1
            continue
        dts.append(abs(ens.t_grid[pos[float(t2)]] - ens.t_grid[pos[float(t1)]]))
        msq.append(m)
    report = loglog_regression(
        dts, msq, theory=increment_theory(cfg.alpha, cfg.nu, cfg.H), tolerance=tolerance,
        formula="min((2-(2-nu)*alpha)/2, (alpha*(1-nu)+2H-2)/2)", scale=0.5,
        seed=cfg.seed.derive("bootstrap_increment"),
    )
    report.extra["zero_pairs"] = float(zero_pairs)
    return report


def increment_pairs(t1: float, dmin: float, dmax: float, n_pairs: int) -> List[Tuple[float, float]]:
    """t1 を固定し t2 - t1 を対数等間隔にとった組。"""
    return [(t1, t1 + d) for d in np.geomspace(dmin, dmax, n_pairs)]


# ================================================================
# オラクル
# ================================================================

def increment_covariance(cfg: ConvolutionConfig) -> np.ndarray:
    """ノイズ増分の自己共分散 Cov(ΔZ_0, ΔZ_d)、d = 0..n-1（全次数 k で ρ^k 型）。"""
    spec = cfg.lrd_spec()
    n = cfg.n_cells
    c = normalization_constant(cfg.k, cfg.H, cfg.N_noise, spec, cfg.calibration, cfg.calibration_seed()) if cfg.normalize else 1.0
    rho = lrd_covariance(spec, n - 1)
    return (cfg.noise_scale * c) ** 2 * cfg.N_noise ** (-2.0 * cfg.H) * math.factorial(cfg.k) * rho ** cfg.k


def discrete_isometry_variance(cfg: ConvolutionConfig, t: float) -> np.ndarray:
    """
    シミュレーションの離散スキームでの E Z_j(t)^2 = K_j^T Γ K_j（モードごと）。
    Z_H^k は k によらず fBm と同じ共分散を持つので全 k で成り立つ。
    """
    n = max(1, int(round(t * cfg.N_noise)))
    gamma = increment_covariance(cfg)[:n]
    lam = eigenvalues(cfg.model)
    K = kernel_table(cfg.alpha, lam, cfg.h, n, cfg.quadrature)[:, ::-1]
    GK = matmul_toeplitz(gamma, K.T)
    var = np.sum(K.T * GK, axis=0)
    if cfg.noise_mode == "scalar":
        var = var * _unit_direction(lam.size) ** 2
    return var


def discrete_isometry_norm(cfg: ConvolutionConfig, t: float) -> float:
    """E‖Z_k(t)‖_ν^2 の離散スキーム上の厳密値。"""
    return float(np.sum(eigenvalues(cfg.model) ** cfg.nu * discrete_isometry_variance(cfg, t)))


def fbm_convolution_variance(alpha: float, lam: float, H: float, t: float) -> float:
    """
    単一モードの連続オラクル H(2H-1) ∫_0^t ∫_0^t s(x) s(y) |x-y|^{2H-2} dx dy（x, y は経過時間）。
    s(x) = x^{α-1} E_{α,α}(-λ x^α) の端点特異性は quad の代数重みで扱う。
    """
    a = kernel_alpha(alpha)
    h = _hurst(H)

    def e(x: float) -> float:
        return float(ml_array(a, a, np.array([-lam * x ** a]))[0])

    def inner(x: float) -> float:
        if x <= 0:
            return 0.0
        val, _ = integrate.quad(e, 0.0, x, weight="alg", wvar=(a - 1.0, 2.0 * h - 2.0), limit=200)
        return val

    outer, _ = integrate.quad(lambda x: e(x) * inner(x), 0.0, t, weight="alg", wvar=(a - 1.0, 0.0), limit=200)
    return 2.0 * h * (2.0 * h - 1.0) * outer


def mode_cross_covariance(ens: ConvolutionEnsemble, t_index: int = -1) -> Tuple[np.ndarray, np.ndarray]:
    """Z_j(t), Z_j'(t) の経験共分散行列とその標準誤差（モード独立性の監査）。"""
    z = ens.values[:, :, t_index]
    R = z.shape[0]
    if R < 2:
        raise InsufficientReplicates(2, R, "mode_cross_covariance")
    zc = z - z.mean(axis=0)
    prod = zc[:, :, None] * zc[:, None, :]
    return prod.mean(axis=0), prod.std(axis=0, ddof=1) / math.sqrt(R)


def refinement_check(cfg: ConvolutionConfig) -> Dict[str, float]:
    """N_noise を 2 倍にしたときの E‖Z_k(T)‖_ν^2 の変化（離散等長性から厳密に）。"""
    base = discrete_isometry_norm(cfg, cfg.T)
    fine = discrete_isometry_norm(replace(cfg, N_noise=2 * cfg.N_noise), cfg.T)
    return {"coarse": base, "fine": fine, "rel_change": abs(fine - base) / base}
