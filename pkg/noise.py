"""
長期依存（LRD）ガウス系列の生成、Hermite 多項式変換、
部分和 S_N(t) = c · N^{-H} Σ_{n<=[Nt]} H_k(ξ_n) による Hermite 過程の格子近似。

共分散モデル:
  fgn_exact: ρ(n) = ½((n+1)^{2H0} - 2n^{2H0} + |n-1|^{2H0})、2H0 - 2 = cov_exponent
  power_law: ρ(n) = (1+n)^{cov_exponent}、ρ(0) = 1
生成は circulant embedding（分布として厳密、O(N log N)）。
指数の選び方は cov_exponent_for の preset（direct: 2H-2, classical: (2H-2)/k）で明示する。
"""
import logging
import math
import threading
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial.hermite_e import hermeval
from scipy import fft as sfft

from regression import RegressionReport, bootstrap_statistic, loglog_regression
from seeding import Seed, chunked, run_units
from sim_errors import (
    DomainError,
    EmbeddingError,
    InsufficientReplicates,
    LengthError,
    RegressionError,
)

logger = logging.getLogger(__name__)

LRD_MODELS = ("fgn_exact", "power_law")
COV_PRESETS = ("direct", "classical")
NORMALIZATIONS = ("exact", "empirical", "none")
HERMITE_MAX_ORDER = 4
EMBEDDING_TOL = 1e-12
MIN_SELF_SIMILARITY_REPLICATES = 500
MIN_HYPERCONTRACTIVITY_SAMPLES = 10_000
CALIBRATION_REPLICATES = 2000
BATCH_ROWS = 256


# ================================================================
# 型
# ================================================================

@dataclass(frozen=True)
class HurstParam:
    H: float

    def __post_init__(self):
        h = float(self.H)
        if not (0.5 < h < 1.0):
            raise DomainError(f"H={self.H} は開区間 (1/2, 1) にありません")
        object.__setattr__(self, "H", h)

    def __float__(self) -> float:
        return self.H


@dataclass(frozen=True)
class HermiteOrder:
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or int(self.k) != self.k:
            raise DomainError(f"k={self.k} は整数である必要があります")
        k = int(self.k)
        if not (1 <= k <= HERMITE_MAX_ORDER):
            raise DomainError(f"k={k} は 1..{HERMITE_MAX_ORDER} の範囲外です")
        object.__setattr__(self, "k", k)

    def __int__(self) -> int:
        return self.k


@dataclass(frozen=True)
class LrdSpec:
    """N: 系列長、cov_exponent: ρ(n) ~ n^e の e、model: 共分散モデル。"""
    N: int
    cov_exponent: float
    model: str = "power_law"

    def __post_init__(self):
        if int(self.N) < 2:
            raise DomainError(f"N={self.N} は 2 以上である必要があります")
        e = float(self.cov_exponent)
        # e = -1 は fgn_exact で i.i.d.（2H0 = 1）
        if not (-1.0 <= e < 0.0):
            raise DomainError(f"cov_exponent={self.cov_exponent} は [-1, 0) にありません")
        if self.model not in LRD_MODELS:
            raise DomainError(f"model={self.model} は {LRD_MODELS} のいずれかである必要があります")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "cov_exponent", e)

    def with_length(self, N: int) -> "LrdSpec":
        return LrdSpec(N=N, cov_exponent=self.cov_exponent, model=self.model)


@dataclass
class LrdSample:
    """生成結果。clipped は負の固有値を 0 に切り詰めたかどうか。"""
    values: np.ndarray
    clipped: bool = False
    min_eigenvalue: float = 0.0


@dataclass
class HermitePathApprox:
    t_grid: np.ndarray
    values: np.ndarray
    N: int
    H: float
    k: int
    norm_constant: float = 1.0
    clipped: bool = False


@dataclass
class HypercontractivityReport:
    k: int
    p: float
    ratio: float
    se: float
    ci: Tuple[float, float]
    bound: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = [float(self.ci[0]), float(self.ci[1])]
        return d


def _hurst(H: Union[HurstParam, float]) -> float:
    return float(H) if isinstance(H, HurstParam) else HurstParam(H).H


def _order(k: Union[HermiteOrder, int]) -> int:
    return int(k) if isinstance(k, HermiteOrder) else HermiteOrder(k).k


def cov_exponent_for(H: Union[HurstParam, float], k: Union[HermiteOrder, int], preset: str = "classical") -> float:
    """direct: 2H-2、classical（Dobrushin-Major）: (2H-2)/k。k=1 では一致する。"""
    h, kk = _hurst(H), _order(k)
    if preset == "direct":
        return 2.0 * h - 2.0
    if preset == "classical":
        return (2.0 * h - 2.0) / kk
    raise DomainError(f"cov_preset={preset} は {COV_PRESETS} のいずれかである必要があります")


# ================================================================
# 共分散と circulant embedding
# ================================================================

def lrd_covariance(spec: LrdSpec, n: Optional[int] = None) -> np.ndarray:
    """ρ(0), ..., ρ(n)（既定 n = spec.N - 1）。"""
    n = spec.N - 1 if n is None else int(n)
    lags = np.arange(n + 1, dtype=float)
    if spec.model == "power_law":
        return (1.0 + lags) ** spec.cov_exponent
    h2 = 2.0 + spec.cov_exponent  # 2H0
    rho = 0.5 * ((lags + 1.0) ** h2 - 2.0 * lags ** h2 + np.abs(lags - 1.0) ** h2)
    rho[0] = 1.0
    return rho


@lru_cache(maxsize=32)
def _embedding(spec: LrdSpec) -> Tuple[np.ndarray, float]:
    """circulant 行列の固有値と最小固有値（spec ごとにキャッシュ）。"""
    rho = lrd_covariance(spec, spec.N)
    row = np.concatenate([rho, rho[-2:0:-1]])
    eig = sfft.fft(row).real
    return eig, float(eig.min())


def _embedding_scale(spec: LrdSpec, strict: bool) -> Tuple[np.ndarray, bool, float]:
    eig, min_eig = _embedding(spec)
    clipped = False
    if min_eig < -EMBEDDING_TOL:
        if strict:
            raise EmbeddingError(
                f"circulant の最小固有値 {min_eig:.3e} が許容値 -{EMBEDDING_TOL:.0e} を下回りました "
                f"(N={spec.N}, e={spec.cov_exponent}, model={spec.model})",
                min_eigenvalue=min_eig,
            )
        logger.warning("circulant embedding: 最小固有値 %.3e を 0 に切り詰めます (N=%d)", min_eig, spec.N)
        clipped = True
    m = eig.size
    return np.sqrt(np.clip(eig, 0.0, None) / m), clipped, min_eig


def gen_lrd_batch(spec: LrdSpec, seeds: Sequence[Seed], strict: bool = False) -> LrdSample:
    """
    各シードから 1 本ずつ系列を生成し (len(seeds), N) 配列で返す。
    行 r は gen_lrd_gaussian(spec, seeds[r]) と同じ系列になる。
    """
    scale, clipped, min_eig = _embedding_scale(spec, strict)
    m = scale.size
    out = np.empty((len(seeds), spec.N))
    for i, s in enumerate(seeds):
        z = s.generator().standard_normal((2, m))
        w = (z[0] + 1j * z[1]) * scale
        out[i] = sfft.fft(w).real[: spec.N]
    return LrdSample(values=out, clipped=clipped, min_eigenvalue=min_eig)


def gen_lrd_gaussian(spec: LrdSpec, seed: Seed, strict: bool = False) -> LrdSample:
    """定常・平均 0 のガウス系列 1 本。同じ (spec, seed) なら同じ系列。"""
    batch = gen_lrd_batch(spec, [seed], strict=strict)
    return LrdSample(values=batch.values[0], clipped=batch.clipped, min_eigenvalue=batch.min_eigenvalue)


# ================================================================
# Hermite 多項式
# ================================================================

def hermite_polynomial(k: Union[HermiteOrder, int], x):
    """確率論者の Hermite 多項式 He_k（E[He_k(ξ)^2] = k!）。k = 0 は 1。"""
    kk = int(k)
    if kk < 0:
        raise DomainError(f"k={k} は非負である必要があります")
    coeffs = np.zeros(kk + 1)
    coeffs[kk] = 1.0
    result = hermeval(x, coeffs)
    return float(result) if np.ndim(result) == 0 else result


def hermite_orthogonality_check(kmax: int, samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """E[H_j(ξ) H_k(ξ)]（j, k = 0..kmax）の標本平均と標準誤差の行列。"""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise InsufficientReplicates(2, int(samples.size), "hermite_orthogonality_check")
    H = np.stack([hermite_polynomial(j, samples) for j in range(kmax + 1)])
    prod = H[:, None, :] * H[None, :, :]
    mean = prod.mean(axis=2)
    se = prod.std(axis=2, ddof=1) / math.sqrt(samples.size)
    return mean, se


# ================================================================
# 部分和と正規化
# ================================================================

def exact_partial_sum_variance(k: Union[HermiteOrder, int], H: Union[HurstParam, float], N: int, spec: LrdSpec) -> float:
    """
    Var(N^{-H} Σ_{n=1}^{N} H_k(ξ_n)) = N^{-2H} k! Σ_{|d|<N} (N-|d|) ρ(d)^k。
    E[H_k(ξ_n) H_k(ξ_m)] = k! ρ(n-m)^k による厳密値。
    """
    kk, h = _order(k), _hurst(H)
    N = int(N)
    rho = lrd_covariance(spec, N - 1)
    d = np.arange(N, dtype=float)
    weights = np.where(d == 0, N, 2.0 * (N - d))
    return float(N ** (-2.0 * h) * math.factorial(kk) * np.sum(weights * rho ** kk))


_calibration_cache: Dict[tuple, float] = {}
_calibration_lock = threading.Lock()


def _empirical_variance(kk: int, h: float, N: int, spec: LrdSpec, seed: Seed, replicates: int) -> float:
    seeds = [seed.derive("calibration", r) for r in range(replicates)]
    xi = gen_lrd_batch(spec.with_length(max(N, 2)), seeds).values[:, :N]
    s1 = N ** (-h) * hermite_polynomial(kk, xi).sum(axis=1)
    return float(np.var(s1, ddof=1))


def normalization_constant(
    k: Union[HermiteOrder, int],
    H: Union[HurstParam, float],
    N: int,
    spec: LrdSpec,
    calibration: str = "exact",
    seed: Optional[Seed] = None,
    replicates: int = CALIBRATION_REPLICATES,
) -> float:
    """Var S_N(1) = 1 とする定数 c。empirical はキー (k, H, N, spec, seed) ごとにキャッシュする。"""
    kk, h = _order(k), _hurst(H)
    if calibration == "none":
        return 1.0
    if calibration == "exact":
        return 1.0 / math.sqrt(exact_partial_sum_variance(kk, h, N, spec))
    if calibration != "empirical":
        raise DomainError(f"calibration={calibration} は {NORMALIZATIONS} のいずれかである必要があります")
    seed = seed or Seed(0)
    key = (kk, h, int(N), spec.cov_exponent, spec.model, seed.root, seed.stream, replicates)
    with _calibration_lock:
        cached = _calibration_cache.get(key)
    if cached is not None:
        return cached
    var = _empirical_variance(kk, h, int(N), spec, seed, replicates)
    if var <= 0:
        raise RegressionError("較正パスの分散が 0 です")
    c = 1.0 / math.sqrt(var)
    with _calibration_lock:
        _calibration_cache[key] = c
    logger.info("empirical calibration k=%d H=%.3f N=%d: c=%.6f", kk, h, N, c)
    return c


def _required_length(N: int, T: float) -> int:
    return int(math.floor(N * T + 1e-9))


def hermite_path(
    k: Union[HermiteOrder, int],
    H: Union[HurstParam, float],
    N: int,
    T: float,
    spec: LrdSpec,
    seed: Seed,
    t_grid: Optional[Sequence[float]] = None,
    normalize: bool = True,
    calibration: str = "exact",
    calibration_seed: Optional[Seed] = None,
) -> HermitePathApprox:
    """
    S_N(t) = c · N^{-H} Σ_{n=1}^{[Nt]} H_k(ξ_n)。t_grid を省略すると跳躍時刻 n/N 上で返す。
    normalize=False では c = 1（N^{-H} のみ）。
    empirical 較正のシードは calibration_seed（省略時は seed）。複数経路で共有するときは明示する。
    """
    kk, h = _order(k), _hurst(H)
    n_total = _required_length(N, T)
    if n_total > spec.N:
        raise LengthError(f"必要な系列長 N·T={n_total} が spec.N={spec.N} を超えています")
    sample = gen_lrd_gaussian(spec, seed)
    c = normalization_constant(kk, h, N, spec, calibration, calibration_seed or seed) if normalize else 1.0
    cums = np.concatenate([[0.0], np.cumsum(hermite_polynomial(kk, sample.values[:n_total]))])
    cums *= c * N ** (-h)
    if t_grid is None:
        t = np.arange(n_total + 1) / N
    else:
        t = np.asarray(t_grid, dtype=float)
        if np.any(t < 0) or np.any(t > T + 1e-12):
            raise DomainError("t_grid は [0, T] に含まれる必要があります")
    idx = np.floor(t * N + 1e-9).astype(int)
    return HermitePathApprox(
        t_grid=t, values=cums[idx], N=int(N), H=h, k=kk, norm_constant=c, clipped=sample.clipped,
    )


def hermite_increments(
    k: Union[HermiteOrder, int],
    H: Union[HurstParam, float],
    N: int,
    T: float,
    spec: LrdSpec,
    seeds: Sequence[Seed],
    fine: Optional[int] = None,
    normalize: bool = True,
    calibration: str = "exact",
    threads: Union[int, str, None] = 1,
    calibration_seed: Optional[Seed] = None,
) -> np.ndarray:
    """
    S_N の増分を細かい格子（1 単位時間あたり fine セル、既定 fine = N）に載せて (len(seeds), fine·T) で返す。
    跳躍 n/N はそれで終わるセル (n·fine/N - 1) に入れるので、格子点での累積和は S_N(i/fine) に一致する。
    """
    kk, h = _order(k), _hurst(H)
    fine = int(N) if fine is None else int(fine)
    if fine % int(N) != 0:
        raise DomainError(f"fine={fine} は N={N} の倍数である必要があります")
    n_total = _required_length(N, T)
    if n_total > spec.N:
        raise LengthError(f"必要な系列長 N·T={n_total} が spec.N={spec.N} を超えています")
    c = normalization_constant(kk, h, N, spec, calibration, calibration_seed) if normalize else 1.0
    step = fine // int(N)
    n_fine = _required_length(fine, T)

    def block(rows: List[int]) -> np.ndarray:
        xi = gen_lrd_batch(spec, [seeds[r] for r in rows]).values[:, :n_total]
        jumps = c * N ** (-h) * hermite_polynomial(kk, xi)
        if step == 1:
            return jumps
        out = np.zeros((len(rows), n_fine))
        out[:, step - 1::step][:, :n_total] = jumps
        return out

    blocks = run_units(block, chunked(range(len(seeds)), BATCH_ROWS), threads)
    if not blocks:
        return np.zeros((0, n_fine))
    return np.concatenate(blocks, axis=0)


# ================================================================
# 検証
# ================================================================

def self_similarity_check(
    paths: Sequence[HermitePathApprox],
    t_range: Tuple[float, float] = (0.1, 1.0),
    tolerance: float = 0.1,
    n_points: int = 20,
    seed: Optional[Seed] = None,
) -> RegressionReport:
    """log Var S_N(t) を log t に回帰し、傾き 2H ± tolerance で合格とする。"""
    paths = list(paths)
    if not paths:
        raise RegressionError("パスがありません")
    values = np.stack([p.values for p in paths])
    t = np.asarray(paths[0].t_grid, dtype=float)
    if np.all(values == values[:, :1]) or (len(paths) > 1 and np.all(np.var(values, axis=0) == 0)):
        raise RegressionError("パスの分散が 0 です")
    if len(paths) < MIN_SELF_SIMILARITY_REPLICATES:
        raise InsufficientReplicates(MIN_SELF_SIMILARITY_REPLICATES, len(paths), "self_similarity_check")
    in_range = np.flatnonzero((t >= t_range[0] - 1e-12) & (t <= t_range[1] + 1e-12) & (t > 0))
    if in_range.size > n_points:
        targets = np.geomspace(t[in_range[0]], t[in_range[-1]], n_points)
        in_range = np.unique(in_range[np.searchsorted(t[in_range], targets).clip(0, in_range.size - 1)])
    var = np.var(values[:, in_range], axis=0, ddof=1)
    H = paths[0].H
    return loglog_regression(
        t[in_range], var, theory=2.0 * H, tolerance=tolerance, formula="2H", seed=seed,
    )


def hypercontractivity_ratio(
    k: Union[HermiteOrder, int],
    p: float,
    samples: Sequence[float],
    n_boot: int = 200,
    seed: Optional[Seed] = None,
) -> HypercontractivityReport:
    """(Ê|F|^p)^{1/p} / (Ê|F|^2)^{1/2} とブートストラップ CI。上界は (p-1)^{k/2}。"""
    kk = _order(k)
    if p < 2:
        raise DomainError(f"p={p} は 2 以上である必要があります")
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0 or np.all(samples == 0):
        raise DomainError("L2 ノルムが 0 のため比を定義できません")
    if samples.size < MIN_HYPERCONTRACTIVITY_SAMPLES:
        raise InsufficientReplicates(MIN_HYPERCONTRACTIVITY_SAMPLES, int(samples.size), "hypercontractivity_ratio")

    def ratio(x: np.ndarray) -> float:
        return float(np.mean(np.abs(x) ** p) ** (1.0 / p) / np.sqrt(np.mean(x ** 2)))

    est, se, ci = bootstrap_statistic(samples, ratio, n_boot=n_boot, seed=seed)
    bound = (p - 1.0) ** (kk / 2.0)
    return HypercontractivityReport(
        k=kk, p=float(p), ratio=est, se=se, ci=ci, bound=bound, passed=bool(est <= bound + 3.0 * se),
    )


def paths_to_frame(paths: Sequence[HermitePathApprox]) -> pd.DataFrame:
    """CSV 出力用（列: t, value, replicate_id）。"""
    frames = [
        pd.DataFrame({"t": p.t_grid, "value": p.values, "replicate_id": r})
        for r, p in enumerate(paths)
    ]
    if not frames:
        return pd.DataFrame(columns=["t", "value", "replicate_id"])
    return pd.concat(frames, ignore_index=True)
