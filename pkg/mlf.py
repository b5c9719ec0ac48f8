"""
Mittag-Leffler 関数と Mainardi-Wright 関数の数値評価。
E_α(t), S_α(t) = t^{α-1} E_{α,α}(t) はストークス固有基底で対角なので、
モード j の乗数
    propagator:  E_α(-λ_j r^α)
    convolution: s_{α,λ}(r) = r^{α-1} E_{α,α}(-λ_j r^α)
    integrated:  R_{α,λ}(r) = r^α E_{α,α+1}(-λ_j r^α)   （s の原始関数, R' = s）
をここで計算する。

評価方式（2 領域）:
  - べき級数 Σ z^n / Γ(β+αn)。対数空間で項を作り、項が減少に転じて 1e-17 を下回ったら停止。
    打ち消し誤差の見積もり eps·Σ|項| が SERIES_TOL を超える負の z は使わない。
  - z < 0 は s^{α-β} / (s^α - z) の逆ラプラス変換を t=1 で fixed Talbot 法により評価。
    0<α<=1 では主枝上に極がなく、被積分関数は負の実軸の切断だけを持つ。
"""
import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gamma, gammaln, rgamma

from sim_errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

ML_TOL = 1e-10
SERIES_TOL = 1e-12
Z_LIMIT = 1e8
TALBOT_M = 24
TALBOT_M_CHECK = 32
_SERIES_MAX_TERMS = 20000
_EPS = np.finfo(float).eps


# ================================================================
# 型
# ================================================================

@dataclass(frozen=True)
class FracOrder:
    """Caputo 微分の次数 α。0 < α < 1。"""
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0) or math.isnan(a):
            raise DomainError(f"alpha={self.alpha} は開区間 (0, 1) にありません")
        object.__setattr__(self, "alpha", a)

    def __float__(self) -> float:
        return self.alpha


@dataclass(frozen=True)
class MLQuery:
    """E_{α,β}(z) の問い合わせ。α ∈ (0, 2], β > 0。"""
    alpha: float
    beta: float
    z: float

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (0.0 < a <= 2.0):
            raise DomainError(f"alpha={self.alpha} は (0, 2] にありません")
        if not b > 0.0:
            raise DomainError(f"beta={self.beta} は正である必要があります")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "z", float(self.z))


@dataclass(frozen=True)
class KernelQuery:
    """モード乗数の問い合わせ。alpha は FracOrder または (0, 1] の実数（α=1 は半群の場合）。"""
    alpha: Union[FracOrder, float]
    lam: float
    r: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", kernel_alpha(self.alpha))
        if not float(self.lam) > 0.0:
            raise DomainError(f"lambda={self.lam} は正である必要があります")
        if float(self.r) < 0.0:
            raise DomainError(f"r={self.r} は非負である必要があります")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "r", float(self.r))


@dataclass
class DecayReport:
    """sup_x (1+x)|E_{α,α}(-x)| の経験的定数。"""
    alpha: float
    C: float
    argmax: float
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def kernel_alpha(alpha: Union[FracOrder, float]) -> float:
    a = float(alpha)
    if not (0.0 < a <= 1.0):
        raise DomainError(f"alpha={alpha} は (0, 1] にありません")
    return a


# ================================================================
# E_{α,β}(z) の評価
# ================================================================

def _ml_series(alpha: float, beta: float, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """べき級数。戻り値は (値, 打ち消し誤差の見積もり)。"""
    z = np.asarray(z, dtype=float)
    total = np.full(z.shape, float(rgamma(beta)))
    mag = np.abs(total)
    if z.size == 0:
        return total, mag
    with np.errstate(divide="ignore"):
        logz = np.log(np.abs(z))
    negative = z < 0
    prev = np.full(z.shape, np.inf)
    for n in range(1, _SERIES_MAX_TERMS):
        logt = n * logz - gammaln(beta + alpha * n)
        term = np.exp(logt)
        if not np.all(np.isfinite(term)):
            raise ConvergenceError("級数の項がオーバーフローしました", achieved=float("inf"))
        signed = np.where(negative & (n % 2 == 1), -term, term)
        total += signed
        mag += term
        decreasing = np.all(term <= prev)
        prev = term
        if decreasing and np.all(term <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
        if decreasing and np.all(term == 0.0):
            break
    else:
        raise ConvergenceError("級数が規定項数内で収束しませんでした", achieved=float(np.max(prev)))
    return total, _EPS * mag * 4.0


@lru_cache(maxsize=8)
def _talbot_nodes(M: int) -> Tuple[np.ndarray, np.ndarray, float]:
    r = 2.0 * M / 5.0
    theta = np.arange(1, M) * np.pi / M
    cot = 1.0 / np.tan(theta)
    p = np.concatenate([[r + 0j], r * theta * (cot + 1j)])
    g = np.concatenate([[0.5 * np.exp(r) + 0j],
                        np.exp(p[1:]) * (1.0 + 1j * theta * (1.0 + cot ** 2) - 1j * cot)])
    return p, g, r / M


def _ml_talbot(alpha: float, beta: float, z: np.ndarray, M: int = TALBOT_M) -> np.ndarray:
    """fixed Talbot 法: E_{α,β}(z) = L^{-1}[s^{α-β}/(s^α - z)](1)。"""
    z = np.asarray(z, dtype=float)
    p, g, scale = _talbot_nodes(M)
    num = p ** (alpha - beta)
    pa = p ** alpha
    flat = z.reshape(-1)
    out = np.empty(flat.shape)
    # メモリを抑えるためブロックごとに評価
    block = 65536
    for i in range(0, flat.size, block):
        zb = flat[i:i + block]
        F = num[None, :] / (pa[None, :] - zb[:, None])
        out[i:i + block] = scale * np.real(F @ g)
    return out.reshape(z.shape)


def ml_array(alpha: float, beta: float, z, closed_form: bool = True) -> np.ndarray:
    """
    E_{α,β}(z) のベクトル評価（カーネル計算用）。
    z >= 0 または |z| <= 1 は級数、それ以外の z < 0 は fixed Talbot。
    α > 1 の負の z は級数のみ対応し、打ち消し誤差が大きければ ConvergenceError。
    closed_form=False のときは α = β = 1 でも exp に置き換えず、級数と Talbot で評価する。
    """
    alpha = float(alpha)
    beta = float(beta)
    z = np.asarray(z, dtype=float)
    if closed_form and alpha == 1.0 and beta == 1.0:
        return np.exp(z)
    out = np.empty(z.shape)
    series_mask = (z >= 0) | (np.abs(z) <= 1.0)
    if alpha > 1.0:
        series_mask = np.ones(z.shape, dtype=bool)
    if np.any(series_mask):
        vals, err = _ml_series(alpha, beta, z[series_mask])
        bad = (err > SERIES_TOL) & (z[series_mask] < 0)
        if np.any(bad) and alpha > 1.0:
            raise ConvergenceError(
                f"alpha={alpha} > 1 の負の引数で級数の打ち消し誤差が {float(err.max()):.2e} です",
                achieved=float(err.max()),
            )
        out[series_mask] = vals
        if np.any(bad):
            idx = np.flatnonzero(series_mask)[bad]
            out.flat[idx] = _ml_talbot(alpha, beta, z.flat[idx])
    contour_mask = ~series_mask
    if np.any(contour_mask):
        out[contour_mask] = _ml_talbot(alpha, beta, z[contour_mask])
    return out


def mittag_leffler(q: MLQuery) -> float:
    """
    E_{α,β}(z) = Σ_{n>=0} z^n / Γ(β+αn)。z ∈ [-1e8, 10] で絶対誤差 1e-10 を目標とする。
    Talbot 経路では節点数 24 と 32 の差を到達誤差として検査する。
    """
    if abs(q.z) > Z_LIMIT:
        raise DomainError(f"|z|={abs(q.z):.3g} は上限 {Z_LIMIT:.0e} を超えています")
    value = float(ml_array(q.alpha, q.beta, np.array([q.z]))[0])
    if not math.isfinite(value):
        raise ConvergenceError(f"E_{{{q.alpha},{q.beta}}}({q.z}) が有限値になりません", achieved=float("inf"))
    uses_contour = q.z < -1.0 and q.alpha <= 1.0 and not (q.alpha == 1.0 and q.beta == 1.0)
    if uses_contour:
        check = float(_ml_talbot(q.alpha, q.beta, np.array([q.z]), M=TALBOT_M_CHECK)[0])
        achieved = abs(check - value)
        if achieved > ML_TOL:
            raise ConvergenceError(
                f"E_{{{q.alpha},{q.beta}}}({q.z}) の到達誤差 {achieved:.2e} が {ML_TOL:.0e} を超えました",
                achieved=achieved,
            )
    return value


def ml_decay_check(alpha: Union[FracOrder, float], xs: Sequence[float]) -> DecayReport:
    """sup_x (1+x)|E_{α,α}(-x)| を返す。有限であれば |E_{α,α}(-x)| <= C(1+x)^{-1} の経験的 C。"""
    a = kernel_alpha(alpha)
    xs = np.asarray(list(xs), dtype=float)
    if xs.size == 0:
        raise DomainError("xs が空です")
    if np.any(xs <= 0) or not np.all(np.isfinite(xs)):
        raise DomainError("xs はすべて正の有限値である必要があります")
    vals = (1.0 + xs) * np.abs(ml_array(a, a, -xs))
    i = int(np.argmax(vals))
    return DecayReport(alpha=a, C=float(vals[i]), argmax=float(xs[i]), n_points=int(xs.size))


# ================================================================
# Mainardi-Wright 関数とモーメント
# ================================================================

def mainardi_wright_moment(alpha: Union[FracOrder, float], rho: float) -> float:
    """∫_0^∞ θ^ρ ξ_α(θ) dθ = Γ(1+ρ) / Γ(1+αρ)、ρ > -1。"""
    a = float(alpha)
    if not rho > -1.0:
        raise DomainError(f"rho={rho} は -1 より大きい必要があります")
    return float(gamma(1.0 + rho) / gamma(1.0 + a * rho))


def _mw_log_bound(alpha: float, theta: float, n: np.ndarray) -> np.ndarray:
    # |θ^n / (n! Γ(1-α(1+n)))| <= θ^n Γ(α(1+n)) / (π n!)
    return n * math.log(theta) + gammaln(alpha * (n + 1)) - gammaln(n + 1) - math.log(math.pi)


def _mw_plan(alpha: float, theta_max: float) -> Tuple[int, int]:
    """θ_max まで評価するのに必要な (項数, 10 進桁数)。"""
    n = np.arange(0, 200000, dtype=float)
    bound = _mw_log_bound(alpha, max(theta_max, 1e-3), n)
    peak = int(np.argmax(bound))
    peak_log10 = max(0.0, float(bound[peak]) / math.log(10.0))
    after = np.flatnonzero((n > peak) & (bound < math.log(1e-24)))
    if after.size == 0:
        raise ConvergenceError("ξ_α の級数項数を決められません", achieved=float("inf"))
    return int(after[0]) + 1, int(math.ceil(peak_log10)) + 25


@lru_cache(maxsize=16)
def _mw_coefficients(alpha: float, n_terms: int, dps: int) -> Tuple:
    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        coeffs = []
        fact = mpmath.mpf(1)
        for n in range(n_terms):
            if n > 0:
                fact *= n
            sign = -1 if n % 2 else 1
            coeffs.append(sign * mpmath.rgamma(1 - a * (1 + n)) / fact)
        return tuple(coeffs)


def _mw_eval(alpha: float, thetas: Iterable[float], theta_max: float) -> np.ndarray:
    n_terms, dps = _mw_plan(alpha, theta_max)
    coeffs = _mw_coefficients(alpha, n_terms, dps)
    out = []
    with mpmath.workdps(dps):
        for th in thetas:
            x = mpmath.mpf(th)
            acc = mpmath.mpf(0)
            for c in reversed(coeffs):
                acc = acc * x + c
            out.append(float(acc))
    return np.array(out)


def mainardi_wright(alpha: Union[FracOrder, float], theta: float) -> float:
    """
    ξ_α(θ) = Σ_n (-θ)^n / (n! Γ(1-α(1+n)))、θ >= 0。
    打ち消しが大きいので、最大項の桁数に合わせた拡張精度で和をとる。
    モーメントの検算専用で、ソルバーからは使わない。
    """
    a = float(FracOrder(float(alpha)))
    if theta < 0:
        raise DomainError(f"theta={theta} は非負である必要があります")
    if theta == 0:
        return float(rgamma(1.0 - a))
    return float(_mw_eval(a, [theta], theta)[0])


def mw_theta_cutoff(alpha: float, log_decay: float = 45.0) -> float:
    """ξ_α(θ) ~ exp(-(1-α) α^{α/(1-α)} θ^{1/(1-α)}) が e^{-log_decay} まで減衰する θ。"""
    c = (1.0 - alpha) * alpha ** (alpha / (1.0 - alpha))
    return (log_decay / c) ** (1.0 - alpha)


def mw_moment_quadrature(
    alpha: Union[FracOrder, float],
    rhos: Sequence[float],
    panels: int = 24,
    order: int = 16,
) -> Dict[float, float]:
    """
    ∫_0^∞ θ^ρ ξ_α(θ) dθ を θ = v² の置換と複合 Gauss-Legendre で求める。
    2v^{2ρ+1} ξ_α(v²) は v について滑らかなので、全 ρ で同じ節点を共有する。
    """
    a = float(FracOrder(float(alpha)))
    for rho in rhos:
        if not rho > -1.0:
            raise DomainError(f"rho={rho} は -1 より大きい必要があります")
    theta_max = mw_theta_cutoff(a)
    vmax = math.sqrt(theta_max)
    x, w = leggauss(order)
    edges = np.linspace(0.0, vmax, panels + 1)
    nodes: List[np.ndarray] = []
    weights: List[np.ndarray] = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    v = np.concatenate(nodes)
    wv = np.concatenate(weights)
    xi = _mw_eval(a, v ** 2, theta_max)
    return {float(rho): float(np.sum(wv * 2.0 * v ** (2.0 * rho + 1.0) * xi)) for rho in rhos}


# ================================================================
# モード乗数（カーネル）
# ================================================================

def propagator_kernel(q: KernelQuery) -> float:
    """E_α(r) のモード乗数 E_α(-λ r^α)。r = 0 では 1。"""
    if q.r == 0.0:
        return 1.0
    return mittag_leffler(MLQuery(q.alpha, 1.0, -q.lam * q.r ** q.alpha))


def convolution_kernel(q: KernelQuery) -> float:
    """S_α(r) のモード乗数 s_{α,λ}(r) = r^{α-1} E_{α,α}(-λ r^α)。r = 0 は特異なので拒否する。"""
    if q.r <= 0.0:
        raise DomainError("convolution_kernel は r = 0 で特異です（中点則などで r > 0 を渡してください）")
    return q.r ** (q.alpha - 1.0) * mittag_leffler(MLQuery(q.alpha, q.alpha, -q.lam * q.r ** q.alpha))


def integrated_kernel(q: KernelQuery) -> float:
    """R_{α,λ}(r) = ∫_0^r s_{α,λ}(u) du = r^α E_{α,α+1}(-λ r^α)。"""
    if q.r == 0.0:
        return 0.0
    return q.r ** q.alpha * mittag_leffler(MLQuery(q.alpha, q.alpha + 1.0, -q.lam * q.r ** q.alpha))


def propagator_multipliers(alpha: Union[FracOrder, float], lams, t) -> np.ndarray:
    """E_α(-λ t^α) を λ（先頭軸）× t（後続軸）で返す。t = 0 の列は 1。"""
    a = kernel_alpha(alpha)
    lams = np.asarray(lams, dtype=float)
    t = np.asarray(t, dtype=float)
    z = -np.multiply.outer(lams, t ** a)
    return ml_array(a, 1.0, z)


def kernel_values(alpha: Union[FracOrder, float], lams, r) -> np.ndarray:
    """s_{α,λ}(r) を λ × r の表で返す。r > 0 のみ。"""
    a = kernel_alpha(alpha)
    lams = np.asarray(lams, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("kernel_values: r はすべて正である必要があります")
    z = -np.multiply.outer(lams, r ** a)
    return ml_array(a, a, z) * r ** (a - 1.0)


def integrated_kernel_values(alpha: Union[FracOrder, float], lams, r) -> np.ndarray:
    """R_{α,λ}(r) = r^α E_{α,α+1}(-λ r^α) を λ × r の表で返す。"""
    a = kernel_alpha(alpha)
    lams = np.asarray(lams, dtype=float)
    r = np.asarray(r, dtype=float)
    z = -np.multiply.outer(lams, r ** a)
    return ml_array(a, a + 1.0, z) * r ** a


KERNEL_QUADRATURES = ("midpoint", "product")


def kernel_table(alpha: Union[FracOrder, float], lams, h: float, n: int, quadrature: str = "midpoint") -> np.ndarray:
    """
    経過時間セル [l·h, (l+1)·h]（l = 0..n-1）ごとの畳み込み重みを λ × l の表で返す。
      midpoint: s_{α,λ}((l+½)h)（r = 0 を評価しない）
      product:  セル平均 (R((l+1)h) - R(lh)) / h
    """
    if not h > 0:
        raise DomainError(f"h={h} は正である必要があります")
    if quadrature == "midpoint":
        return kernel_values(alpha, lams, (np.arange(n) + 0.5) * h)
    if quadrature == "product":
        R = integrated_kernel_values(alpha, lams, np.arange(n + 1) * h)
        return np.diff(R, axis=-1) / h
    raise DomainError(f"quadrature={quadrature} は {KERNEL_QUADRATURES} のいずれかである必要があります")
