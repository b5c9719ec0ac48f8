"""
重み付き空間 W_T での Picard 反復による mild 解
    u(t) = E_α(t)u0 + ∫_0^t S_α(t-s)[B(u(s)) + f(u(s))] ds + Z_k(t)
の構成。パラメータの許容判定、重み付きノルム、Hölder 指数の測定、増分の J1..J5 分解を含む。

時間離散化（dt 格子 t_n = n·dt、モード座標）:
  ∫_{t_m}^{t_{m+1}} s_{α,λ}(t_n - s) ds = R((n-m)dt) - R((n-m-1)dt) を厳密に計算し、
  セル上のデータは台形平均 (G_m + G_{m+1})/2 とする（kernel_rule="product"）。
  重みは n-m のみに依存するので、モードごとに FFT 畳み込みでまとめて評価する。
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.signal import fftconvolve

from convolution import ConvolutionConfig, zk_paths
from mlf import FracOrder, kernel_alpha, kernel_values, integrated_kernel_values, propagator_multipliers
from noise import HurstParam, _order
from regression import RegressionReport, loglog_regression
from seeding import Seed, run_units
from sim_errors import DomainError, GateError, InsufficientReplicates, ModelMismatch, NoContraction
from spectral import (
    SpectralField,
    SpectrumModel,
    bilinear_modal,
    eigenvalues,
    from_modal,
    modal_norms,
    random_field,
    to_modal,
)

logger = logging.getLogger(__name__)

FORCE_VARIANTS = ("zero", "linear_damping", "saturating")
INITIAL_GUESSES = ("forced", "zero")
KERNEL_RULES = ("product", "midpoint")
NO_CONTRACTION_STREAK = 3
MAX_HALVINGS = 6
MIN_HOLDER_REPLICATES = 1000
HOLDER_TOLERANCE = 0.07


# ================================================================
# パラメータ判定
# ================================================================

@dataclass
class GateCheck:
    name: str
    value: float
    holds: bool
    message: str


@dataclass
class GateDecision:
    """param_gate の結果。却下も値として返す。"""
    accepted: bool
    params: Optional["AdmissibleParams"]
    checks: List[GateCheck] = field(default_factory=list)

    @property
    def violations(self) -> List[str]:
        return [c.message for c in self.checks if not c.holds]

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "checks": [asdict(c) for c in self.checks]}


def _gate_checks(alpha: float, nu: float, H: float) -> List[GateCheck]:
    if 0.5 <= nu < 1.0:
        logger.info("nu=%.3g: 0 < nu < 1 の記述もありますが、より厳しい nu < 1/2 を課します", nu)
    g1 = alpha * (1.0 - nu) + 2.0 * H
    g2 = alpha * (nu + 1.0)
    return [
        GateCheck("alpha*(1-nu)+2H > 2", g1, g1 > 2.0,
                  f"alpha*(1-nu)+2H = {g1:.4g} {'>' if g1 > 2.0 else '<='} 2"),
        GateCheck("alpha*(nu+1) < 1", g2, g2 < 1.0,
                  f"alpha*(nu+1) = {g2:.4g} {'<' if g2 < 1.0 else '>='} 1"),
        GateCheck("0 < nu < 1/2", nu, 0.0 < nu < 0.5,
                  f"nu = {nu:.4g} {'in' if 0.0 < nu < 0.5 else 'not in'} (0, 1/2)"),
    ]


@dataclass(frozen=True)
class AdmissibleParams:
    """0 < ν < 1/2、α(1-ν)+2H > 2、α(ν+1) < 1 をすべて満たす (α, ν, H)。"""
    alpha: float
    nu: float
    H: float

    def __post_init__(self):
        a = float(FracOrder(float(self.alpha)))
        h = float(HurstParam(float(self.H)))
        nu = float(self.nu)
        failed = [c.message for c in _gate_checks(a, nu, h) if not c.holds]
        if failed:
            raise GateError(failed)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "H", h)

    @property
    def weight_exponent(self) -> float:
        """重み t^{α(ν+1)/2}。"""
        return self.alpha * (self.nu + 1.0) / 2.0


def param_gate(alpha: float, nu: float, H: float) -> GateDecision:
    """3 つの不等式をすべて評価し、受理なら AdmissibleParams を添えて返す。"""
    checks = _gate_checks(float(alpha), float(nu), float(H))
    if all(c.holds for c in checks):
        try:
            return GateDecision(True, AdmissibleParams(alpha, nu, H), checks)
        except DomainError as e:
            checks.append(GateCheck("range", float("nan"), False, str(e)))
    return GateDecision(False, None, checks)


def theta_diagnostics(params: AdmissibleParams) -> Dict[str, float]:
    """縮小性の議論に現れる時間指数 θ1, θ2, θ3（いずれも正）。"""
    a, nu, H = params.alpha, params.nu, params.H
    return {
        "theta1": a * (1.0 - 2.0 * nu) / 2.0,
        "theta2": min((2.0 - nu) * a / 2.0, a * (1.0 - nu) / 2.0),
        "theta3": (a * (1.0 - nu) + 2.0 * H - 2.0) / 2.0,
    }


def holder_theory(params: AdmissibleParams) -> float:
    """β = min{αν/2, (2-(2-ν)α)/2, (α(1-ν)+2H-2)/2}。"""
    a, nu, H = params.alpha, params.nu, params.H
    return min(a * nu / 2.0, (2.0 - (2.0 - nu) * a) / 2.0, (a * (1.0 - nu) + 2.0 * H - 2.0) / 2.0)


# ================================================================
# 外力
# ================================================================

@dataclass(frozen=True)
class LipschitzForce:
    """zero: f=0、linear_damping: f(u)=c·u、saturating: f(u)=c·u/(1+‖u‖_ν)。"""
    variant: str = "saturating"
    c: float = 0.1

    def __post_init__(self):
        if self.variant not in FORCE_VARIANTS:
            raise DomainError(f"force={self.variant} は {FORCE_VARIANTS} のいずれかである必要があります")

    @property
    def lipschitz_constant(self) -> float:
        if self.variant == "zero":
            return 0.0
        if self.variant == "linear_damping":
            return abs(self.c)
        return 2.0 * abs(self.c)

    def apply(self, model: SpectrumModel, modal: np.ndarray, nu: float) -> np.ndarray:
        """モード座標 (..., M) に作用させる。"""
        modal = np.asarray(modal, dtype=float)
        if self.variant == "zero" or self.c == 0:
            return np.zeros_like(modal)
        if self.variant == "linear_damping":
            return self.c * modal
        norm = modal_norms(model, modal, nu)
        return self.c * modal / (1.0 + norm)[..., None]


# ================================================================
# 設定と結果
# ================================================================

@dataclass(frozen=True)
class SolverConfig:
    params: AdmissibleParams
    k: int
    model: SpectrumModel
    u0: SpectralField
    T: float
    dt: float
    picard_tol: float = 1e-8
    picard_max_iter: int = 25
    force: LipschitzForce = LipschitzForce()
    p: float = 2.0
    replicates: int = 1
    seed: Seed = Seed(0)
    N_noise: Optional[int] = None
    noise_scale: float = 1.0
    convective: bool = True
    kernel_rule: str = "product"
    cov_preset: str = "classical"
    lrd_model: str = "power_law"
    normalize: bool = True
    calibration: str = "exact"
    max_halvings: int = MAX_HALVINGS
    threads: Union[int, str] = 1
    suite_id: str = "solve"

    def __post_init__(self):
        if not self.T > 0 or not self.dt > 0:
            raise DomainError(f"T={self.T}, dt={self.dt} はいずれも正である必要があります")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise DomainError(f"dt={self.dt} が T={self.T} を割り切りません")
        if not self.picard_tol > 0:
            raise DomainError(f"picard_tol={self.picard_tol} は正である必要があります")
        if self.u0.model != self.model:
            raise ModelMismatch("u0 のモデルが設定のモデルと一致しません")
        if self.convective and not self.model.is_torus:
            raise ModelMismatch("convective=True は torus モデルでのみ使えます（weyl_linear には B がありません）")
        if self.kernel_rule not in KERNEL_RULES:
            raise DomainError(f"kernel_rule={self.kernel_rule} は {KERNEL_RULES} のいずれかである必要があります")
        object.__setattr__(self, "k", _order(self.k))
        n_noise = self.N_noise if self.N_noise is not None else int(round(1.0 / self.dt))
        ratio = n_noise * self.dt
        if n_noise < 1 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise DomainError(f"N_noise={n_noise} は 1/dt の倍数である必要があります")
        object.__setattr__(self, "N_noise", int(n_noise))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def t_grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def noise_config(self) -> ConvolutionConfig:
        return ConvolutionConfig(
            alpha=self.params.alpha, nu=self.params.nu, H=self.params.H, k=self.k, model=self.model,
            t_grid=(self.n_steps * self.dt,), N_noise=self.N_noise, replicates=self.replicates,
            seed=self.seed, noise_scale=self.noise_scale, cov_preset=self.cov_preset,
            lrd_model=self.lrd_model, normalize=self.normalize, calibration=self.calibration,
            suite_id=self.suite_id, check_tail=False,
        )

    def echo(self) -> dict:
        d = {
            "alpha": self.params.alpha, "nu": self.params.nu, "H": self.params.H, "k": self.k,
            "T": self.T, "dt": self.dt, "picard_tol": self.picard_tol, "picard_max_iter": self.picard_max_iter,
            "force": self.force.variant, "force_c": self.force.c, "p": self.p, "replicates": self.replicates,
            "seed": self.seed.root, "N_noise": self.N_noise, "noise_scale": self.noise_scale,
            "convective": self.convective, "kernel_rule": self.kernel_rule, "cov_preset": self.cov_preset,
            "lrd_model": self.lrd_model,
        }
        d.update(self.model.describe())
        return d


@dataclass
class MildSolution:
    """dt 格子上の解（モード座標 (n_t, M)）とノルム成分。"""
    model: SpectrumModel
    params: AdmissibleParams
    t_grid: np.ndarray
    modal: np.ndarray
    u0: SpectralField
    noise: np.ndarray

    def field(self, i: int) -> SpectralField:
        if i == 0:
            return self.u0
        return from_modal(self.model, self.modal[i])

    @property
    def norms_nu(self) -> np.ndarray:
        return modal_norms(self.model, self.modal, self.params.nu)

    @property
    def norms_nu1(self) -> np.ndarray:
        return modal_norms(self.model, self.modal, self.params.nu + 1.0)

    def weighted_components(self, p: float = 2.0) -> Tuple[float, float]:
        return weighted_norm(self, self.params, p)


@dataclass
class PicardReport:
    residuals: List[float] = field(default_factory=list)
    ratios: List[float] = field(default_factory=list)
    contraction_factor: float = float("nan")
    converged: bool = False
    iterations: int = 0
    achieved_T: float = 0.0
    halvings: int = 0
    initial_guess: str = "forced"
    theta: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# ================================================================
# 線形部分
# ================================================================

def propagate_initial(u0: SpectralField, alpha, t: float) -> SpectralField:
    """E_α(t)u0（モードごとに E_α(-λ t^α) を掛ける）。t = 0 は u0 をそのまま返す。"""
    if t < 0:
        raise DomainError(f"t={t} は非負である必要があります")
    if t == 0:
        return u0
    mult = propagator_multipliers(kernel_alpha(alpha), eigenvalues(u0.model), np.array([t]))[:, 0]
    if u0.model.is_torus:
        return SpectralField(u0.model, u0.coeffs * mult[:, None])
    return SpectralField(u0.model, u0.coeffs * mult)


def initial_path(u0: SpectralField, alpha, t_grid: np.ndarray) -> np.ndarray:
    """E_α(t_n)u0 のモード座標 (n_t, M)。"""
    mult = propagator_multipliers(kernel_alpha(alpha), eigenvalues(u0.model), np.asarray(t_grid))
    path = (mult * to_modal(u0)[:, None]).T
    path[0] = to_modal(u0)
    return path


def product_weights(alpha, t_grid: Sequence[float], n: Optional[int] = None) -> np.ndarray:
    """
    w_{n,m} = ∫_{t_m}^{t_{m+1}} (t_n - s)^{α-1} ds = ((t_n - t_m)^α - (t_n - t_{m+1})^α)/α。
    n を与えるとその行（m = 0..n-1）、省略すると下三角行列を返す。
    """
    a = kernel_alpha(alpha)
    t = np.asarray(t_grid, dtype=float)

    def row(i: int) -> np.ndarray:
        return ((t[i] - t[:i]) ** a - (t[i] - t[1:i + 1]) ** a) / a

    if n is not None:
        return row(int(n))
    W = np.zeros((t.size, t.size))
    for i in range(1, t.size):
        W[i, :i] = row(i)
    return W


def cell_kernel_table(alpha, lams: np.ndarray, dt: float, n: int, rule: str = "product") -> np.ndarray:
    """
    W[j, l] = ∫_{l·dt}^{(l+1)dt} s_{α,λ_j}(r) dr（product）または dt·s((l+½)dt)（midpoint）。
    F(t_n) = Σ_{m<n} W[:, n-1-m] · Ḡ_m。
    """
    a = kernel_alpha(alpha)
    if rule == "product":
        R = integrated_kernel_values(a, lams, np.arange(n + 1) * dt)
        return np.diff(R, axis=-1)
    return dt * kernel_values(a, lams, (np.arange(n) + 0.5) * dt)


def _cell_data(G: np.ndarray) -> np.ndarray:
    return 0.5 * (G[:-1] + G[1:])


def _memory(W: np.ndarray, Gbar: np.ndarray) -> np.ndarray:
    """Σ_{m<n} W[:, n-1-m] Ḡ_m を n = 1..N について (N+1, M) で返す（n=0 は 0）。"""
    N = Gbar.shape[0]
    out = np.zeros((N + 1, Gbar.shape[1]))
    if N:
        out[1:] = fftconvolve(Gbar.T, W[:, :N], axes=-1)[:, :N].T
    return out


def nonlinearity(cfg: SolverConfig, modal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(B(u), f(u)) のモード座標パス。"""
    B = bilinear_modal(cfg.model, modal) if cfg.convective else np.zeros_like(modal)
    f = cfg.force.apply(cfg.model, modal, cfg.params.nu)
    return B, f


def deterministic_convolution(u_path: np.ndarray, cfg: SolverConfig, W: Optional[np.ndarray] = None) -> np.ndarray:
    """F(u)(t_n) ≈ ∫_0^{t_n} S_α(t_n - s)[B(u(s)) + f(u(s))] ds（モード座標 (n_t, M)）。"""
    u_path = np.asarray(u_path, dtype=float)
    if W is None:
        W = cell_kernel_table(cfg.params.alpha, eigenvalues(cfg.model), cfg.dt, u_path.shape[0] - 1, cfg.kernel_rule)
    B, f = nonlinearity(cfg, u_path)
    return _memory(W, _cell_data(B + f))


def weighted_norm(u_path: Union[MildSolution, np.ndarray], params: AdmissibleParams, p: float = 2.0,
                  model: Optional[SpectrumModel] = None, t_grid: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """
    (max_t ‖u(t)‖_ν^p, max_{t>0} t^{pα(ν+1)/2} ‖u(t)‖_{ν+1}^p)。期待値は呼び出し側でとる。
    """
    if isinstance(u_path, MildSolution):
        model, t_grid, modal = u_path.model, u_path.t_grid, u_path.modal
    else:
        modal = np.asarray(u_path, dtype=float)
        if model is None or t_grid is None:
            raise DomainError("配列を渡す場合は model と t_grid が必要です")
    t = np.asarray(t_grid, dtype=float)
    n_nu = modal_norms(model, modal, params.nu)
    n_nu1 = modal_norms(model, modal, params.nu + 1.0)
    pos = t > 0
    sup_nu = float(np.max(n_nu ** p)) if n_nu.size else 0.0
    weighted = float(np.max(t[pos] ** (p * params.weight_exponent) * n_nu1[pos] ** p)) if np.any(pos) else 0.0
    return sup_nu, weighted


def _residual(d: np.ndarray, cfg: SolverConfig, t: np.ndarray) -> float:
    a, b = weighted_norm(d, cfg.params, cfg.p, cfg.model, t)
    return float((a + b) ** (1.0 / cfg.p))


# ================================================================
# Picard 反復
# ================================================================

def noise_path(cfg: SolverConfig, replicate: int, tag: str = "") -> np.ndarray:
    """dt 格子上の Z_k（(n_t, M)、t=0 は 0）。noise_scale=0 なら生成しない。"""
    M = cfg.model.n_modes
    out = np.zeros((cfg.n_steps + 1, M))
    if cfg.noise_scale == 0:
        return out
    ncfg = cfg.noise_config()
    Z = zk_paths(ncfg, [replicate], tag=tag)[0]       # (M, n_cells)
    stride = int(round(cfg.N_noise * cfg.dt))
    out[1:] = Z[:, stride - 1::stride][:, :cfg.n_steps].T
    return out


def picard_solve(
    cfg: SolverConfig,
    replicate: int = 0,
    initial: str = "forced",
    Z: Optional[np.ndarray] = None,
) -> Tuple[MildSolution, PicardReport]:
    """
    u^{(m+1)} = E_α(·)u0 + F(u^{(m)}) + Z_k を重み付き残差が picard_tol 未満になるまで反復する。
    initial="forced" は u^{(0)} = E_α(·)u0 + Z_k、"zero" は 0 から始める。
    残差比 >= 1 が 3 回続くと NoContraction。
    """
    if initial not in INITIAL_GUESSES:
        raise DomainError(f"initial={initial} は {INITIAL_GUESSES} のいずれかである必要があります")
    t = cfg.t_grid
    Z = noise_path(cfg, replicate) if Z is None else Z
    base = initial_path(cfg.u0, cfg.params.alpha, t) + Z
    W = cell_kernel_table(cfg.params.alpha, eigenvalues(cfg.model), cfg.dt, cfg.n_steps, cfg.kernel_rule)
    U = base.copy() if initial == "forced" else np.zeros_like(base)
    report = PicardReport(initial_guess=initial, theta=theta_diagnostics(cfg.params), achieved_T=float(t[-1]))
    streak = 0
    for it in range(1, cfg.picard_max_iter + 1):
        U_new = base + deterministic_convolution(U, cfg, W)
        res = _residual(U_new - U, cfg, t)
        U = U_new
        report.residuals.append(res)
        report.iterations = it
        if len(report.residuals) >= 2 and report.residuals[-2] > 0:
            ratio = res / report.residuals[-2]
            report.ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
        logger.debug("picard iter=%d residual=%.3e", it, res)
        if res < cfg.picard_tol:
            report.converged = True
            break
        if streak >= NO_CONTRACTION_STREAK:
            raise NoContraction(
                f"Picard 残差比 >= 1 が {NO_CONTRACTION_STREAK} 回続きました（T={t[-1]:.4g}）",
                residuals=report.residuals,
            )
    if report.ratios:
        report.contraction_factor = float(max(report.ratios))
    U[0] = to_modal(cfg.u0)
    sol = MildSolution(model=cfg.model, params=cfg.params, t_grid=t, modal=U, u0=cfg.u0, noise=Z)
    return sol, report


def shrink_and_solve(cfg: SolverConfig, replicate: int = 0, initial: str = "forced") -> Tuple[MildSolution, PicardReport]:
    """NoContraction のたびに T を半分にして解き直す（最大 max_halvings 回）。"""
    current = cfg
    for halving in range(cfg.max_halvings + 1):
        try:
            sol, report = picard_solve(current, replicate, initial)
            report.halvings = halving
            return sol, report
        except NoContraction as e:
            if halving == cfg.max_halvings or current.n_steps < 2:
                raise
            steps = current.n_steps // 2
            logger.warning("%s → T を %.4g に縮めて再試行します", e, steps * cfg.dt)
            current = replace(current, T=steps * cfg.dt)
    raise NoContraction("T の縮小回数の上限に達しました", residuals=[])


def solve_replicates(cfg: SolverConfig, initial: str = "forced") -> List[Tuple[MildSolution, PicardReport]]:
    """全反復を独立に解く。結果は反復番号順。"""
    return run_units(lambda r: shrink_and_solve(cfg, r, initial), range(cfg.replicates), cfg.threads)


def default_u0(model: SpectrumModel, nu: float, norm: float, seed: Seed) -> SpectralField:
    """係数 ~ λ^{-1} の乱数場を ‖u0‖_ν = norm に正規化したもの。"""
    return random_field(model, seed.derive("u0"), decay=1.0, norm=norm, nu=nu)


# ================================================================
# Hölder 指数と増分分解
# ================================================================

def _grid_index(t_grid: np.ndarray, t: float) -> int:
    return int(np.argmin(np.abs(t_grid - t)))


def holder_estimate(
    solutions: Sequence[MildSolution],
    params: AdmissibleParams,
    pairs: Sequence[Tuple[float, float]],
    p: float = 2.0,
    tolerance: float = HOLDER_TOLERANCE,
    min_replicates: int = MIN_HOLDER_REPLICATES,
    seed: Optional[Seed] = None,
) -> RegressionReport:
    """
    log Ê‖u(t2) - u(t1)‖_ν^p を log(t2 - t1) に回帰し 1/p 倍した傾き。
    合格は片側（slope >= β - tolerance）。
    """
    solutions = list(solutions)
    if len(solutions) < min_replicates:
        raise InsufficientReplicates(min_replicates, len(solutions), "holder")
    t = solutions[0].t_grid
    model = solutions[0].model
    dts, moments = [], []
    for t1, t2 in pairs:
        i1, i2 = _grid_index(t, t1), _grid_index(t, t2)
        if i1 == i2:
            continue
        d = np.stack([s.modal[i2] - s.modal[i1] for s in solutions])
        moments.append(float(np.mean(modal_norms(model, d, params.nu) ** p)))
        dts.append(abs(t[i2] - t[i1]))
    beta = holder_theory(params)
    report = loglog_regression(dts, moments, scale=1.0 / p, formula="min(alpha*nu/2, (2-(2-nu)*alpha)/2, (alpha*(1-nu)+2H-2)/2)", seed=seed)
    report.theory = beta
    report.tolerance = tolerance
    report.passed = bool(report.slope >= beta - tolerance)
    return report


def increment_decomposition(sol: MildSolution, cfg: SolverConfig, t1: float, t2: float) -> Dict[str, Dict[str, float]]:
    """
    u(t2) - u(t1) = J1 + ... + J5 の各項の ‖·‖_ν と理論上の時間指数。
      J1: 初期項、J2/J4: [0, t1] の記憶項（B / f）、J3: (t1, t2] の B、J5: (t1, t2] の f と Z の増分
    """
    t = sol.t_grid
    n1, n2 = _grid_index(t, t1), _grid_index(t, t2)
    if not 0 < n1 < n2:
        raise DomainError("0 < t1 < t2 の格子点を指定してください")
    a, nu = cfg.params.alpha, cfg.params.nu
    W = cell_kernel_table(a, eigenvalues(cfg.model), cfg.dt, n2, cfg.kernel_rule)
    B, f = nonlinearity(cfg, sol.modal)
    Bb, fb = _cell_data(B), _cell_data(f)

    def split(Gb: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        past = np.zeros(Gb.shape[1])
        for m in range(n1):
            past += (W[:, n2 - 1 - m] - W[:, n1 - 1 - m]) * Gb[m]
        fresh = np.zeros(Gb.shape[1])
        for m in range(n1, n2):
            fresh += W[:, n2 - 1 - m] * Gb[m]
        return past, fresh

    J2, J3 = split(Bb)
    J4, f_fresh = split(fb)
    J1 = initial_path(sol.u0, a, np.array([t[n1], t[n2]]))
    J1 = J1[1] - J1[0]
    J5 = f_fresh + sol.noise[n2] - sol.noise[n1]
    terms = {"J1": J1, "J2": J2, "J3": J3, "J4": J4, "J5": J5}
    exponents = {
        "J1": a * nu / 2.0,
        "J2": (2.0 - (2.0 - nu) * a) / 2.0,
        "J3": (2.0 - nu) * a / 2.0,
        "J4": (2.0 - (2.0 - nu) * a) / 2.0,
        "J5": min((2.0 - nu) * a / 2.0, (a * (1.0 - nu) + 2.0 * cfg.params.H - 2.0) / 2.0),
    }
    total = sum(terms.values())
    out = {name: {"norm": float(modal_norms(cfg.model, v, nu)), "exponent": exponents[name]} for name, v in terms.items()}
    out["sum_gap"] = {"norm": float(modal_norms(cfg.model, total - (sol.modal[n2] - sol.modal[n1]), nu)), "exponent": float("nan")}
    return out


def solution_to_frame(sol: MildSolution) -> pd.DataFrame:
    """CSV 用（列: t, norm_nu, norm_nu1）。"""
    return pd.DataFrame({"t": sol.t_grid, "norm_nu": sol.norms_nu, "norm_nu1": sol.norms_nu1})
