"""
Mittag-Leffler 関数・Mainardi-Wright 関数・モード乗数の単体テスト。
期待値は閉じた形（e^z, erfcx, cos, Gamma 比）から取る。
"""
import math

import mpmath
import numpy as np
import pytest
from scipy.special import erfcx, gamma

from mlf import (
    FracOrder,
    KernelQuery,
    MLQuery,
    convolution_kernel,
    integrated_kernel,
    integrated_kernel_values,
    kernel_table,
    kernel_values,
    mainardi_wright,
    mainardi_wright_moment,
    ml_array,
    ml_decay_check,
    mittag_leffler,
    mw_moment_quadrature,
    propagator_kernel,
    propagator_multipliers,
)
from mlf import _ml_series, _ml_talbot
from sim_errors import DomainError


# --- 型の検査 ---


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.3, 1.5, float("nan")])
def test_FracOrder_開区間の外は拒否(alpha):
    with pytest.raises(DomainError):
        FracOrder(alpha)


def test_FracOrder_正常():
    assert float(FracOrder(0.4)) == 0.4


def test_MLQuery_範囲外():
    with pytest.raises(DomainError):
        MLQuery(0.0, 1.0, 0.0)
    with pytest.raises(DomainError):
        MLQuery(2.5, 1.0, 0.0)
    with pytest.raises(DomainError):
        MLQuery(0.5, 0.0, 0.0)


def test_KernelQuery_範囲外():
    with pytest.raises(DomainError):
        KernelQuery(0.5, 0.0, 1.0)
    with pytest.raises(DomainError):
        KernelQuery(0.5, 1.0, -0.1)
    with pytest.raises(DomainError):
        KernelQuery(1.2, 1.0, 0.1)


# --- E_{α,β}(z) の恒等式 ---


@pytest.mark.parametrize("z", [-30.0, -5.0, -0.5, 0.0, 0.7, 3.0])
def test_E11_は指数関数(z):
    assert mittag_leffler(MLQuery(1.0, 1.0, z)) == pytest.approx(math.exp(z), rel=1e-12)


def test_E11_は一般経路でも指数関数():
    """exp への置き換えを外しても、級数（|z|<=1, z>=0）と Talbot（z<-1）が e^z を再現する"""
    z = np.linspace(-50.0, 10.0, 61)
    general = ml_array(1.0, 1.0, z, closed_form=False)
    rel = np.abs(general - np.exp(z)) / np.maximum(1.0, np.exp(z))
    assert rel.max() <= 1e-10
    # 置き換えが外れていれば Talbot 側はビット単位では一致しない
    assert not np.array_equal(general[z < -1.0], np.exp(z[z < -1.0]))


def test_級数と_Talbot_の重なり区間():
    """z ∈ [-10, -5] では両方の評価法が使えるので、互いの差は級数の打ち消し誤差以内"""
    z = np.linspace(-10.0, -5.0, 11)
    for alpha, beta in [(0.9, 1.0), (0.9, 0.9), (0.95, 1.0)]:
        series, err = _ml_series(alpha, beta, z)
        contour = _ml_talbot(alpha, beta, z)
        assert err.max() < 1e-8
        assert np.all(np.abs(series - contour) <= err + 1e-12)


def _ml_oracle(alpha: float, z: float, dps: int = 40) -> float:
    """E_α(z) の級数を mpmath の拡張精度でそのまま足す"""
    with mpmath.workdps(dps):
        za = mpmath.mpf(z)
        a = mpmath.mpf(alpha)
        return float(mpmath.fsum(za ** n / mpmath.gamma(a * n + 1) for n in range(300)))


def test_伝播乗数は拡張精度の級数と一致():
    alpha, lam, t = 0.7, 3.0, 1.2
    expected = _ml_oracle(alpha, -lam * t ** alpha)
    assert propagator_kernel(KernelQuery(alpha, lam, t)) == pytest.approx(expected, abs=1e-10)
    assert propagator_multipliers(alpha, [lam], [t])[0, 0] == pytest.approx(expected, abs=1e-10)


def test_E_alpha_beta_の原点は逆ガンマ():
    assert mittag_leffler(MLQuery(0.5, 2.0, 0.0)) == pytest.approx(1.0)
    assert mittag_leffler(MLQuery(0.3, 0.7, 0.0)) == pytest.approx(1.0 / gamma(0.7))


@pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 20.0])
def test_E_half_は_erfcx(x):
    """E_{1/2,1}(-x) = exp(x^2) erfc(x)（級数側と Talbot 側の両方）"""
    val = ml_array(0.5, 1.0, np.array([-x]))[0]
    assert val == pytest.approx(erfcx(x), abs=1e-8)


def test_E12_は閉じた形():
    """E_{1,2}(z) = (e^z - 1)/z。z < -1 は Talbot 経路。"""
    for z in (-3.0, -12.0):
        assert mittag_leffler(MLQuery(1.0, 2.0, z)) == pytest.approx(math.expm1(z) / z, rel=1e-9)


def test_E21_は余弦():
    """alpha = 2 は級数のみ。E_{2,1}(-x^2) = cos(x)"""
    x = 2.0
    assert mittag_leffler(MLQuery(2.0, 1.0, -x * x)) == pytest.approx(math.cos(x), abs=1e-12)


def test_引数の上限():
    with pytest.raises(DomainError):
        mittag_leffler(MLQuery(0.5, 1.0, -2e8))


def test_ml_array_は形を保つ():
    z = -np.linspace(0.0, 40.0, 12).reshape(3, 4)
    out = ml_array(0.6, 0.6, z)
    assert out.shape == (3, 4)
    assert np.all(np.isfinite(out))


# --- 減衰境界 ---


def test_decay_check_有限():
    xs = np.geomspace(1e-3, 1e4, 30)
    d = ml_decay_check(0.5, xs)
    assert math.isfinite(d.C)
    assert d.C > 0
    assert d.argmax in xs
    assert d.n_points == 30


def test_decay_check_不正な点():
    with pytest.raises(DomainError):
        ml_decay_check(0.5, [])
    with pytest.raises(DomainError):
        ml_decay_check(0.5, [0.0, 1.0])


def test_decay_check_alpha1_は指数減衰():
    """(1+x)e^{-x} <= 1 なので C は 1 付近"""
    d = ml_decay_check(1.0, np.geomspace(1e-3, 1e4, 40))
    assert d.C <= 1.3
    assert d.C == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("alpha", [0.4, 0.6, 0.8])
def test_E_alpha_alpha_は正で単調非増加(alpha):
    x = np.concatenate([[0.0], np.geomspace(1e-3, 1e4, 80)])
    vals = ml_array(alpha, alpha, -x)
    assert np.all(vals > 0)
    assert np.all(np.diff(vals) <= 0)


@pytest.mark.parametrize("alpha", [0.5, 0.8])
def test_小さい_lambda_のカーネルは_r_のべき(alpha):
    """λ → 0 では s(r) ≈ r^{α-1}/Γ(α) なので両対数の傾きは α-1"""
    r = np.geomspace(1e-4, 1e-1, 25)
    s = kernel_values(alpha, [1e-10], r)[0]
    slope = np.polyfit(np.log(r), np.log(s), 1)[0]
    assert slope == pytest.approx(alpha - 1.0, abs=1e-3)


# --- Mainardi-Wright ---


def test_moment_閉じた形():
    assert mainardi_wright_moment(0.5, 1.0) == pytest.approx(1.0 / gamma(1.5))
    assert mainardi_wright_moment(0.3, 0.0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        mainardi_wright_moment(0.5, -1.0)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0, 3.0])
def test_mainardi_wright_half_はガウス型(theta):
    """ξ_{1/2}(θ) = exp(-θ^2/4)/√π"""
    expected = math.exp(-theta * theta / 4.0) / math.sqrt(math.pi)
    assert mainardi_wright(0.5, theta) == pytest.approx(expected, abs=1e-12)


def test_mainardi_wright_負の引数():
    with pytest.raises(DomainError):
        mainardi_wright(0.5, -1.0)


MOMENT_GRID = [(a, rho) for a in (0.4, 0.6, 0.8) for rho in (0.0, 0.5, 1.0, 2.0)]


@pytest.mark.parametrize("alpha,rho", MOMENT_GRID)
def test_moment_quadrature_は公式と一致(alpha, rho):
    quad = mw_moment_quadrature(alpha, [rho])
    assert quad[rho] == pytest.approx(mainardi_wright_moment(alpha, rho), abs=1e-6)


# --- モード乗数 ---


def test_カーネルの端点():
    assert propagator_kernel(KernelQuery(0.5, 2.0, 0.0)) == 1.0
    assert integrated_kernel(KernelQuery(0.5, 2.0, 0.0)) == 0.0
    with pytest.raises(DomainError):
        convolution_kernel(KernelQuery(0.5, 2.0, 0.0))


def test_R_の微分は_s():
    """R' = s を中心差分で確かめる"""
    a, lam, r, h = 0.6, 2.0, 0.5, 1e-5
    lo = integrated_kernel(KernelQuery(a, lam, r - h))
    hi = integrated_kernel(KernelQuery(a, lam, r + h))
    assert (hi - lo) / (2 * h) == pytest.approx(convolution_kernel(KernelQuery(a, lam, r)), rel=1e-6)


def test_alpha1_は半群():
    lam = np.array([1.0, 3.0])
    t = np.array([0.0, 0.4, 1.0])
    np.testing.assert_allclose(propagator_multipliers(1.0, lam, t), np.exp(-np.outer(lam, t)), rtol=1e-12)
    np.testing.assert_allclose(kernel_values(1.0, lam, t[1:]), np.exp(-np.outer(lam, t[1:])), rtol=1e-12)
    np.testing.assert_allclose(
        integrated_kernel_values(1.0, lam, t[1:]),
        -np.expm1(-np.outer(lam, t[1:])) / lam[:, None],
        rtol=1e-9,
    )


def test_kernel_values_は正の_r_のみ():
    with pytest.raises(DomainError):
        kernel_values(0.5, [1.0], [0.0, 0.1])


def test_kernel_table_midpoint():
    lam = np.array([1.0, 4.0])
    h = 0.01
    table = kernel_table(0.7, lam, h, 5, "midpoint")
    np.testing.assert_allclose(table, kernel_values(0.7, lam, (np.arange(5) + 0.5) * h))


def test_kernel_table_product_の和は_R():
    """セル平均 × h を足すと R(n·h) に戻る"""
    lam = np.array([1.0, 4.0, 9.0])
    h, n = 0.02, 25
    table = kernel_table(0.7, lam, h, n, "product")
    R = integrated_kernel_values(0.7, lam, np.array([n * h]))[:, 0]
    np.testing.assert_allclose(table.sum(axis=1) * h, R, rtol=1e-12)


def test_kernel_table_不正な指定():
    with pytest.raises(DomainError):
        kernel_table(0.7, [1.0], 0.0, 3)
    with pytest.raises(DomainError):
        kernel_table(0.7, [1.0], 0.1, 3, "simpson")
