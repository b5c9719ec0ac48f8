"""
空間側の計算: ストークス作用素の固有値モデル、分数 Sobolev ノルム、
S_α(r) の Hilbert-Schmidt ノルム、Helmholtz 射影、2 次元トーラス上の双線形項 B(u, v)。

スペクトルモデル:
  weyl_linear(c, J): λ_j = c·j（j = 1..J）。双線形項なし。線形の検証用。
  torus(K): [0, 2π)^2 上の発散ゼロ Fourier モード（0 < |k|∞ <= K）、λ = |k|^2。

トーラスの係数は波数ごとの複素 2 成分振幅 û(k)（k·û = 0、û(-k) = conj(û(k))）。
測度は正規化（|𝕋^2| = 1）し、‖u‖_{L2}^2 = Σ_k |û(k)|^2。
実のモード座標は τ_k = (-k_y, k_x)/|k|、a_k = û(k)·τ_k として
半平面側 k（添字 m）と相方 -k（添字 p）に r_m = √2 Re a_k, r_p = √2 Im a_k を割り当てる。
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import fft as sfft

from mlf import kernel_alpha, kernel_values
from seeding import Seed
from sim_errors import DomainError, ModelMismatch, TruncationError

logger = logging.getLogger(__name__)

SPECTRUM_VARIANTS = ("weyl_linear", "torus")
DIV_TOL = 1e-12
HS_TAIL_TOL = 0.01


# ================================================================
# 型
# ================================================================

@dataclass(frozen=True)
class SpectrumModel:
    variant: str
    c: float = 1.0
    J: int = 0
    K: int = 0

    def __post_init__(self):
        if self.variant not in SPECTRUM_VARIANTS:
            raise DomainError(f"model={self.variant} は {SPECTRUM_VARIANTS} のいずれかである必要があります")
        if self.variant == "weyl_linear":
            if not float(self.c) > 0:
                raise DomainError(f"c={self.c} は正である必要があります")
            if int(self.J) < 1:
                raise DomainError(f"J={self.J} は 1 以上である必要があります")
        else:
            if int(self.K) < 1:
                raise DomainError(f"K={self.K} は 1 以上である必要があります")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "J", int(self.J))
        object.__setattr__(self, "K", int(self.K))

    @classmethod
    def weyl_linear(cls, c: float, J: int) -> "SpectrumModel":
        return cls("weyl_linear", c=c, J=J)

    @classmethod
    def torus(cls, K: int) -> "SpectrumModel":
        return cls("torus", K=K)

    @property
    def is_torus(self) -> bool:
        return self.variant == "torus"

    @property
    def n_modes(self) -> int:
        return self.J if not self.is_torus else _torus_modes(self.K).kvec.shape[0]

    def describe(self) -> dict:
        if self.is_torus:
            return {"model": "torus", "K": self.K}
        return {"model": "weyl_linear", "c": self.c, "J": self.J}


@dataclass(frozen=True)
class SobolevIndex:
    nu: float

    def __post_init__(self):
        v = float(self.nu)
        if not (-2.0 <= v <= 2.0):
            raise DomainError(f"nu={self.nu} は [-2, 2] にありません")
        object.__setattr__(self, "nu", v)

    def __float__(self) -> float:
        return self.nu


@dataclass
class _TorusModes:
    kvec: np.ndarray      # (M, 2) int
    lam: np.ndarray       # (M,)
    partner: np.ndarray   # -k の添字
    half: np.ndarray      # 半平面側の添字
    half_partner: np.ndarray
    tau: np.ndarray       # (M, 2) 単位接ベクトル


@lru_cache(maxsize=16)
def _torus_modes(K: int) -> _TorusModes:
    r = np.arange(-K, K + 1)
    kx, ky = np.meshgrid(r, r, indexing="ij")
    kvec = np.stack([kx.ravel(), ky.ravel()], axis=1)
    kvec = kvec[np.any(kvec != 0, axis=1)]
    lam = (kvec ** 2).sum(axis=1).astype(float)
    order = np.lexsort((kvec[:, 1], kvec[:, 0], lam))
    kvec, lam = kvec[order], lam[order]
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(kvec)}
    partner = np.array([index[(-int(a), -int(b))] for a, b in kvec])
    is_half = (kvec[:, 0] > 0) | ((kvec[:, 0] == 0) & (kvec[:, 1] > 0))
    half = np.flatnonzero(is_half)
    norm = np.sqrt(lam)
    tau = np.stack([-kvec[:, 1] / norm, kvec[:, 0] / norm], axis=1)
    return _TorusModes(kvec=kvec, lam=lam, partner=partner, half=half, half_partner=partner[half], tau=tau)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    固有基底での係数。weyl_linear は実数 (J,)、torus は複素 (M, 2)。
    torus は発散ゼロと共役対称性を構築時に検査する。
    """
    model: SpectrumModel
    coeffs: np.ndarray

    def __post_init__(self):
        if self.model.is_torus:
            coeffs = np.asarray(self.coeffs, dtype=complex)
            modes = _torus_modes(self.model.K)
            if coeffs.shape != modes.kvec.shape:
                raise ModelMismatch(f"係数の形 {coeffs.shape} が torus(K={self.model.K}) と一致しません")
            scale = max(1.0, float(np.abs(coeffs).max(initial=0.0)))
            div = np.abs((coeffs * modes.kvec).sum(axis=1)).max(initial=0.0)
            if div > DIV_TOL * scale * math.sqrt(2.0) * self.model.K:
                raise DomainError(f"発散ゼロ条件を満たしません（max|k·û| = {div:.2e}）")
            asym = np.abs(coeffs[modes.partner] - np.conj(coeffs)).max(initial=0.0)
            if asym > DIV_TOL * scale:
                raise DomainError(f"共役対称性を満たしません（max = {asym:.2e}）")
        else:
            coeffs = np.asarray(self.coeffs, dtype=float)
            if coeffs.shape != (self.model.J,):
                raise ModelMismatch(f"係数の形 {coeffs.shape} が weyl_linear(J={self.model.J}) と一致しません")
        object.__setattr__(self, "coeffs", coeffs)

    def _check(self, other: "SpectralField") -> None:
        if other.model != self.model:
            raise ModelMismatch(f"モデルが一致しません: {self.model.describe()} と {other.model.describe()}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.model, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.model, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.model, self.coeffs * float(scalar))

    __rmul__ = __mul__


def zero_field(model: SpectrumModel) -> SpectralField:
    if model.is_torus:
        return SpectralField(model, np.zeros((model.n_modes, 2), dtype=complex))
    return SpectralField(model, np.zeros(model.J))


# ================================================================
# 固有値とノルム
# ================================================================

def eigenvalues(model: SpectrumModel) -> np.ndarray:
    """weyl_linear は (c, 2c, ..., Jc)、torus は |k|^2 の昇順（重複度込み）。"""
    if model.is_torus:
        return _torus_modes(model.K).lam.copy()
    return model.c * np.arange(1, model.J + 1, dtype=float)


def wavevectors(model: SpectrumModel) -> np.ndarray:
    if not model.is_torus:
        raise ModelMismatch("wavevectors は torus モデルのみです")
    return _torus_modes(model.K).kvec.copy()


def _nu(nu: Union[SobolevIndex, float]) -> float:
    return float(nu) if isinstance(nu, SobolevIndex) else SobolevIndex(nu).nu


def _mode_energy(u: SpectralField) -> np.ndarray:
    if u.model.is_torus:
        return (np.abs(u.coeffs) ** 2).sum(axis=1)
    return u.coeffs ** 2


def sobolev_norm(u: SpectralField, nu: Union[SobolevIndex, float], model: Optional[SpectrumModel] = None) -> float:
    """(Σ_j λ_j^ν |⟨u, e_j⟩|^2)^{1/2}。"""
    if model is not None and model != u.model:
        raise ModelMismatch(f"モデルが一致しません: {u.model.describe()} と {model.describe()}")
    v = _nu(nu)
    lam = eigenvalues(u.model)
    return float(math.sqrt(np.sum(lam ** v * _mode_energy(u))))


def modal_norms(model: SpectrumModel, modal: np.ndarray, nu: float) -> np.ndarray:
    """モード座標（最後の軸）から Ḣ^ν ノルムを計算する（時系列・反復をまとめて扱う）。"""
    lam = eigenvalues(model)
    return np.sqrt(np.sum(lam ** nu * np.asarray(modal) ** 2, axis=-1))


def physical_inner(u: SpectralField, v: SpectralField) -> float:
    """実空間の L2 内積（正規化測度）。"""
    if u.model != v.model:
        raise ModelMismatch("physical_inner: モデルが一致しません")
    if u.model.is_torus:
        return float(np.real(np.sum(u.coeffs * np.conj(v.coeffs))))
    return float(np.dot(u.coeffs, v.coeffs))


# ================================================================
# モード座標
# ================================================================

def from_modal(model: SpectrumModel, modal: np.ndarray) -> SpectralField:
    """実モード座標から SpectralField を作る。"""
    modal = np.asarray(modal, dtype=float)
    if not model.is_torus:
        return SpectralField(model, modal)
    return SpectralField(model, modal_to_amplitudes(model, modal))


def modal_to_amplitudes(model: SpectrumModel, modal: np.ndarray) -> np.ndarray:
    """(..., M) の実座標を (..., M, 2) の複素振幅にする。"""
    modes = _torus_modes(model.K)
    modal = np.asarray(modal, dtype=float)
    a = (modal[..., modes.half] + 1j * modal[..., modes.half_partner]) / math.sqrt(2.0)
    amp = np.zeros(modal.shape + (2,), dtype=complex)
    amp[..., modes.half, :] = a[..., None] * modes.tau[modes.half]
    amp[..., modes.half_partner, :] = np.conj(amp[..., modes.half, :])
    return amp


def amplitudes_to_modal(model: SpectrumModel, amp: np.ndarray) -> np.ndarray:
    modes = _torus_modes(model.K)
    amp = np.asarray(amp, dtype=complex)
    a = (amp[..., modes.half, :] * modes.tau[modes.half]).sum(axis=-1)
    modal = np.zeros(amp.shape[:-1])
    modal[..., modes.half] = math.sqrt(2.0) * a.real
    modal[..., modes.half_partner] = math.sqrt(2.0) * a.imag
    return modal


def to_modal(u: SpectralField) -> np.ndarray:
    if not u.model.is_torus:
        return u.coeffs.copy()
    return amplitudes_to_modal(u.model, u.coeffs)


def random_field(
    model: SpectrumModel,
    rng: Union[np.random.Generator, Seed],
    decay: float = 1.0,
    norm: Optional[float] = None,
    nu: float = 0.0,
) -> SpectralField:
    """係数の標準偏差が λ^{-decay} の乱数場。norm を与えると ‖u‖_ν = norm に正規化する。"""
    gen = rng.generator() if isinstance(rng, Seed) else rng
    lam = eigenvalues(model)
    modal = gen.standard_normal(lam.size) * lam ** (-decay)
    u = from_modal(model, modal)
    if norm is not None:
        current = sobolev_norm(u, nu)
        if current == 0:
            raise DomainError("ノルム 0 の場は正規化できません")
        u = u * (norm / current)
    return u


# ================================================================
# Hilbert-Schmidt ノルム
# ================================================================

@dataclass
class HsNormReport:
    value: float
    partial_sum: float
    tail: float
    tail_ratio: float
    n_modes: int

    def to_dict(self) -> dict:
        return asdict(self)


def hs_norm_salpha(
    alpha,
    nu: Union[SobolevIndex, float],
    r: float,
    model: SpectrumModel,
    tail_tol: Optional[float] = HS_TAIL_TOL,
) -> HsNormReport:
    """
    ‖S_α(r)‖_{HS, ν} = (Σ_j λ_j^ν s_{α,j}(r)^2)^{1/2}。
    打ち切り誤差は s ~ r^{α-1}(λ r^α)^{-1} の減衰と Weyl 則による積分比較で
    tail ≈ f(J)·J/(1-ν)（f(J) は最終項）と見積もる。tail_tol=None なら検査しない。
    """
    a = kernel_alpha(alpha)
    v = _nu(nu)
    if not v < 1.0:
        raise DomainError(f"nu={v} は 1 未満である必要があります")
    if not r > 0:
        raise DomainError(f"r={r} は正である必要があります")
    lam = eigenvalues(model)
    s = kernel_values(a, lam, np.array([r]))[:, 0]
    terms = lam ** v * s ** 2
    partial = float(terms.sum())
    tail = float(terms[-1] * lam.size / (1.0 - v))
    ratio = tail / partial if partial > 0 else math.inf
    if tail_tol is not None and ratio > tail_tol:
        raise TruncationError(
            f"HS ノルムの裾見積もりが部分和の {ratio:.2%} です（許容 {tail_tol:.0%}、J={lam.size}, r={r}）",
            tail_ratio=ratio,
        )
    return HsNormReport(value=math.sqrt(partial), partial_sum=partial, tail=tail, tail_ratio=ratio, n_modes=int(lam.size))


# ================================================================
# Helmholtz 射影と双線形項
# ================================================================

def _project_amplitudes(model: SpectrumModel, amp: np.ndarray) -> np.ndarray:
    kvec = _torus_modes(model.K).kvec.astype(float)
    lam = (kvec ** 2).sum(axis=1)
    kdot = (amp * kvec).sum(axis=-1)
    return amp - kvec * (kdot / lam)[..., None]


def helmholtz_project(field_or_amp: Union[SpectralField, np.ndarray], model: Optional[SpectrumModel] = None) -> SpectralField:
    """波数ごとに k に直交する成分へ射影する（冪等）。配列を渡す場合は model が必要。"""
    if isinstance(field_or_amp, SpectralField):
        model = field_or_amp.model
        amp = field_or_amp.coeffs
    else:
        amp = np.asarray(field_or_amp, dtype=complex)
    if model is None or not model.is_torus:
        raise ModelMismatch("helmholtz_project は torus モデルのみ対応します")
    return SpectralField(model, _project_amplitudes(model, amp))


@lru_cache(maxsize=16)
def collocation_size(K: int) -> int:
    """2/3 則: 3K+1 以上の高速 FFT 長。"""
    return int(sfft.next_fast_len(3 * K + 1))


def _to_grid(K: int, amp: np.ndarray) -> np.ndarray:
    # amp: (B, M, ...) -> (B, n, n, ...)
    n = collocation_size(K)
    kvec = _torus_modes(K).kvec
    grid = np.zeros((amp.shape[0], n, n) + amp.shape[2:], dtype=complex)
    grid[:, kvec[:, 0] % n, kvec[:, 1] % n] = amp
    return grid


def _physical(K: int, amp: np.ndarray) -> np.ndarray:
    n = collocation_size(K)
    return (sfft.ifft2(_to_grid(K, amp), axes=(1, 2)) * n * n).real


def _bilinear_amplitudes(model: SpectrumModel, u_amp: np.ndarray, v_amp: np.ndarray) -> np.ndarray:
    """(B, M, 2) の振幅どうしの B(u, v)。"""
    K = model.K
    n = collocation_size(K)
    kvec = _torus_modes(K).kvec
    u_phys = _physical(K, u_amp)                                  # (B, n, n, j)
    grad = 1j * kvec[None, :, :, None] * v_amp[:, :, None, :]     # (B, M, j, i): ∂_j v_i
    grad_phys = _physical(K, grad)                                # (B, n, n, j, i)
    conv = np.einsum("bxyj,bxyji->bxyi", u_phys, grad_phys)
    spec = sfft.fft2(conv, axes=(1, 2)) / (n * n)
    amp = spec[:, kvec[:, 0] % n, kvec[:, 1] % n]
    return -_project_amplitudes(model, amp)


def bilinear_B(u: SpectralField, v: SpectralField) -> SpectralField:
    """
    B(u, v) = -P[(u·∇)v] を擬スペクトル法で評価する。
    格子 n >= 3K+1 で積を取り、|k|∞ <= K の係数だけを戻す。
    """
    if not (u.model.is_torus and v.model.is_torus):
        raise ModelMismatch("bilinear_B は torus モデルのみ対応します（weyl_linear には積構造がありません）")
    if u.model != v.model:
        raise ModelMismatch("bilinear_B: u と v の打ち切りが一致しません")
    amp = _bilinear_amplitudes(u.model, u.coeffs[None], v.coeffs[None])[0]
    return SpectralField(u.model, amp)


def bilinear_modal(model: SpectrumModel, u_modal: np.ndarray, v_modal: Optional[np.ndarray] = None) -> np.ndarray:
    """
    モード座標 (..., M) で B(u, v) を返す（v 省略時は B(u, u)）。
    先頭の軸（時刻など）はまとめて FFT する。
    """
    if not model.is_torus:
        raise ModelMismatch("bilinear_B は torus モデルのみ対応します（weyl_linear には積構造がありません）")
    u_modal = np.asarray(u_modal, dtype=float)
    lead = u_modal.shape[:-1]
    M = u_modal.shape[-1]
    u_amp = modal_to_amplitudes(model, u_modal.reshape(-1, M))
    v_amp = u_amp if v_modal is None else modal_to_amplitudes(model, np.asarray(v_modal, dtype=float).reshape(-1, M))
    out = _bilinear_amplitudes(model, u_amp, v_amp)
    return amplitudes_to_modal(model, out).reshape(lead + (M,))


@dataclass
class BilinearAudit:
    nu: float
    K: int
    n_pairs: int
    C_hat: float
    C_lower: float
    ratios: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("ratios")
        return d


def bilinear_constant_audit(model: SpectrumModel, nu: float, n_pairs: int, seed: Seed, decay: float = 1.0) -> BilinearAudit:
    """
    ‖B(u,v)‖_ν <= Ĉ ‖u‖_{ν+1} ‖v‖_{ν+1} の経験的 Ĉ と、
    低いノルムの ‖B(u,v)‖_{ν-1} <= C ‖u‖_ν ‖v‖_ν の経験的 C。
    """
    ratios = []
    lower = []
    for i in range(n_pairs):
        gen = seed.derive("bilinear_audit", i).generator()
        u = random_field(model, gen, decay=decay)
        v = random_field(model, gen, decay=decay)
        b = bilinear_B(u, v)
        ratios.append(sobolev_norm(b, nu) / (sobolev_norm(u, nu + 1) * sobolev_norm(v, nu + 1)))
        lower.append(sobolev_norm(b, nu - 1) / (sobolev_norm(u, nu) * sobolev_norm(v, nu)))
    return BilinearAudit(
        nu=float(nu), K=model.K, n_pairs=n_pairs, C_hat=float(max(ratios)), C_lower=float(max(lower)),
        ratios=[float(x) for x in ratios],
    )


def field_to_frame(u: SpectralField) -> pd.DataFrame:
    """デバッグ用 CSV（mode, lambda, 係数成分）。"""
    lam = eigenvalues(u.model)
    if not u.model.is_torus:
        return pd.DataFrame({"mode": np.arange(1, lam.size + 1), "lambda": lam, "coeff": u.coeffs})
    kvec = _torus_modes(u.model.K).kvec
    return pd.DataFrame({
        "mode": np.arange(1, lam.size + 1),
        "lambda": lam,
        "kx": kvec[:, 0],
        "ky": kvec[:, 1],
        "re_x": u.coeffs[:, 0].real,
        "im_x": u.coeffs[:, 0].imag,
        "re_y": u.coeffs[:, 1].real,
        "im_y": u.coeffs[:, 1].imag,
    })
