"""
長期依存ガウス系列・Hermite 多項式・部分和近似の単体テスト。
統計的な検査は固定シードで、許容幅は標準誤差の 4 倍以上にとる。
"""
import math

import numpy as np
import pytest

from noise import (
    HermiteOrder,
    HermitePathApprox,
    HurstParam,
    LrdSpec,
    cov_exponent_for,
    exact_partial_sum_variance,
    gen_lrd_batch,
    gen_lrd_gaussian,
    hermite_increments,
    hermite_orthogonality_check,
    hermite_path,
    hermite_polynomial,
    hypercontractivity_ratio,
    lrd_covariance,
    normalization_constant,
    paths_to_frame,
    self_similarity_check,
)
from seeding import Seed
from sim_errors import DomainError, InsufficientReplicates, LengthError, RegressionError


# --- 型 ---


@pytest.mark.parametrize("H", [0.5, 1.0, 0.3])
def test_HurstParam_範囲外(H):
    with pytest.raises(DomainError):
        HurstParam(H)


@pytest.mark.parametrize("k", [0, 5, 2.5, True])
def test_HermiteOrder_範囲外(k):
    with pytest.raises(DomainError):
        HermiteOrder(k)


def test_LrdSpec_指数の範囲():
    LrdSpec(N=8, cov_exponent=-1.0, model="fgn_exact")
    with pytest.raises(DomainError):
        LrdSpec(N=8, cov_exponent=0.0)
    with pytest.raises(DomainError):
        LrdSpec(N=1, cov_exponent=-0.5)
    with pytest.raises(DomainError):
        LrdSpec(N=8, cov_exponent=-0.5, model="arfima")


# --- 共分散指数のプリセット ---


def test_cov_exponent_for():
    assert cov_exponent_for(0.8, 2, "direct") == pytest.approx(-0.4)
    assert cov_exponent_for(0.8, 2, "classical") == pytest.approx(-0.2)
    # k = 1 では一致
    assert cov_exponent_for(0.7, 1, "direct") == cov_exponent_for(0.7, 1, "classical")
    with pytest.raises(DomainError):
        cov_exponent_for(0.8, 1, "other")


def test_lrd_covariance():
    rho = lrd_covariance(LrdSpec(N=5, cov_exponent=-0.4))
    assert rho[0] == 1.0
    assert rho[1] == pytest.approx(2.0 ** -0.4)
    # 2H0 = 1 の fGn は i.i.d.
    iid = lrd_covariance(LrdSpec(N=6, cov_exponent=-1.0, model="fgn_exact"))
    np.testing.assert_allclose(iid, [1, 0, 0, 0, 0, 0], atol=1e-15)


# --- circulant embedding ---


def test_同じシードは同じ系列():
    spec = LrdSpec(N=64, cov_exponent=-0.3)
    a = gen_lrd_gaussian(spec, Seed(7).derive("x"))
    b = gen_lrd_gaussian(spec, Seed(7).derive("x"))
    c = gen_lrd_gaussian(spec, Seed(7).derive("y"))
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.allclose(a.values, c.values)


def test_batch_の各行は単独生成と一致():
    spec = LrdSpec(N=32, cov_exponent=-0.3)
    seeds = [Seed(1).derive(r) for r in range(3)]
    batch = gen_lrd_batch(spec, seeds)
    for r, s in enumerate(seeds):
        np.testing.assert_array_equal(batch.values[r], gen_lrd_gaussian(spec, s).values)


def test_経験共分散():
    spec = LrdSpec(N=16, cov_exponent=-0.4)
    seeds = [Seed(3).derive(r) for r in range(4000)]
    x = gen_lrd_batch(spec, seeds).values
    assert not gen_lrd_batch(spec, seeds[:1]).clipped
    assert np.mean(x[:, 0] ** 2) == pytest.approx(1.0, abs=0.1)
    assert np.mean(x[:, 0] * x[:, 1]) == pytest.approx(2.0 ** -0.4, abs=0.1)
    assert np.mean(x[:, 0] * x[:, 8]) == pytest.approx(9.0 ** -0.4, abs=0.1)


# --- Hermite 多項式 ---


def test_hermite_polynomial():
    x = np.array([-1.5, 0.0, 2.0])
    np.testing.assert_allclose(hermite_polynomial(0, x), 1.0)
    np.testing.assert_allclose(hermite_polynomial(2, x), x ** 2 - 1)
    np.testing.assert_allclose(hermite_polynomial(3, x), x ** 3 - 3 * x)
    assert hermite_polynomial(1, 0.5) == 0.5
    with pytest.raises(DomainError):
        hermite_polynomial(-1, x)


def test_直交性():
    xi = Seed(11).generator().standard_normal(200_000)
    mean, se = hermite_orthogonality_check(3, xi)
    expected = np.diag([1.0, 1.0, 2.0, 6.0])
    assert np.all(np.abs(mean - expected) <= 5 * se + 1e-12)


# --- 部分和の分散と正規化 ---


def test_iid_の部分和分散():
    """ρ = δ なら Var = N^{-2H} k! N"""
    spec = LrdSpec(N=16, cov_exponent=-1.0, model="fgn_exact")
    assert exact_partial_sum_variance(2, 0.75, 16, spec) == pytest.approx(0.5)
    c = normalization_constant(2, 0.75, 16, spec, "exact")
    assert c == pytest.approx(1.0 / math.sqrt(0.5))
    assert normalization_constant(2, 0.75, 16, spec, "none") == 1.0
    with pytest.raises(DomainError):
        normalization_constant(2, 0.75, 16, spec, "other")


def test_fgn_の部分和は_fBm():
    """k=1 の fGn では Var(Σ_{n<=N} ξ_n) = N^{2H0}"""
    spec = LrdSpec(N=64, cov_exponent=-0.5, model="fgn_exact")
    assert exact_partial_sum_variance(1, 0.75, 64, spec) == pytest.approx(1.0)


def test_empirical_較正はキャッシュされる():
    spec = LrdSpec(N=32, cov_exponent=-0.4)
    a = normalization_constant(1, 0.8, 32, spec, "empirical", Seed(5), replicates=200)
    b = normalization_constant(1, 0.8, 32, spec, "empirical", Seed(5), replicates=200)
    assert a == b
    assert a > 0


def test_正規化後の_S_N1_の分散は1():
    spec = LrdSpec(N=64, cov_exponent=-0.4)
    vals = [
        hermite_path(1, 0.8, 64, 1.0, spec, Seed(21).derive(r), t_grid=[1.0]).values[0]
        for r in range(2000)
    ]
    assert np.var(vals, ddof=1) == pytest.approx(1.0, abs=0.15)


# --- hermite_path / hermite_increments ---


def test_hermite_path_の格子():
    spec = LrdSpec(N=32, cov_exponent=-0.4)
    path = hermite_path(2, 0.8, 32, 1.0, spec, Seed(2))
    assert path.values.shape == (33,)
    assert path.values[0] == 0.0
    np.testing.assert_allclose(path.t_grid, np.arange(33) / 32)
    assert path.k == 2 and path.H == 0.8


def test_hermite_path_は長さ不足を拒否():
    spec = LrdSpec(N=16, cov_exponent=-0.4)
    with pytest.raises(LengthError):
        hermite_path(1, 0.8, 32, 1.0, spec, Seed(2))
    with pytest.raises(DomainError):
        hermite_path(1, 0.8, 16, 1.0, spec, Seed(2), t_grid=[0.5, 1.5])


def test_increments_の累積和は部分和():
    spec = LrdSpec(N=32, cov_exponent=-0.4)
    seeds = [Seed(9).derive(r) for r in range(3)]
    inc = hermite_increments(2, 0.8, 32, 1.0, spec, seeds)
    assert inc.shape == (3, 32)
    for r, s in enumerate(seeds):
        path = hermite_path(2, 0.8, 32, 1.0, spec, s)
        np.testing.assert_allclose(np.cumsum(inc[r]), path.values[1:], rtol=1e-10, atol=1e-12)


def test_increments_を細かい格子に載せる():
    spec = LrdSpec(N=16, cov_exponent=-0.4)
    seeds = [Seed(4).derive(r) for r in range(2)]
    coarse = hermite_increments(1, 0.8, 16, 1.0, spec, seeds)
    fine = hermite_increments(1, 0.8, 16, 1.0, spec, seeds, fine=64)
    assert fine.shape == (2, 64)
    # 跳躍 n/N は (n·4 - 1) 番目のセルに入る
    np.testing.assert_array_equal(fine[:, 3::4], coarse)
    mask = np.ones(64, dtype=bool)
    mask[3::4] = False
    assert np.all(fine[:, mask] == 0.0)
    with pytest.raises(DomainError):
        hermite_increments(1, 0.8, 16, 1.0, spec, seeds, fine=24)


def test_increments_はスレッド数に依存しない():
    spec = LrdSpec(N=16, cov_exponent=-0.4)
    seeds = [Seed(4).derive(r) for r in range(600)]
    a = hermite_increments(1, 0.8, 16, 1.0, spec, seeds, threads=1)
    b = hermite_increments(1, 0.8, 16, 1.0, spec, seeds, threads=3)
    np.testing.assert_array_equal(a, b)


# --- 自己相似性・超縮小性 ---


def test_自己相似性_fgn():
    """fGn (H0 = 0.75) の k=1 部分和は厳密に Var S_N(t) ∝ t^{1.5}"""
    spec = LrdSpec(N=1024, cov_exponent=-0.5, model="fgn_exact")
    t_grid = np.geomspace(0.1, 1.0, 12)
    paths = [hermite_path(1, 0.75, 1024, 1.0, spec, Seed(13).derive(r), t_grid=t_grid) for r in range(2000)]
    rep = self_similarity_check(paths, t_range=(0.1, 1.0), n_points=12, seed=Seed(1))
    assert rep.theory == pytest.approx(1.5)
    assert rep.passed
    assert rep.slope == pytest.approx(1.5, abs=0.1)


def test_自己相似性_反復不足と分散ゼロ():
    t = np.linspace(0.0, 1.0, 5)
    flat = [HermitePathApprox(t_grid=t, values=np.zeros(5), N=4, H=0.7, k=1) for _ in range(10)]
    with pytest.raises(RegressionError):
        self_similarity_check(flat)
    rng = np.random.default_rng(0)
    few = [HermitePathApprox(t_grid=t, values=np.cumsum(rng.standard_normal(5)), N=4, H=0.7, k=1) for _ in range(10)]
    with pytest.raises(InsufficientReplicates):
        self_similarity_check(few)


def test_超縮小性_ガウス():
    x = Seed(17).generator().standard_normal(20_000)
    rep = hypercontractivity_ratio(1, 4.0, x, seed=Seed(2))
    assert rep.bound == pytest.approx(math.sqrt(3.0))
    assert rep.ratio == pytest.approx(3.0 ** 0.25, abs=0.03)
    assert rep.passed
    assert rep.ci[0] <= rep.ci[1]


def test_超縮小性_引数の検査():
    x = Seed(17).generator().standard_normal(20_000)
    with pytest.raises(DomainError):
        hypercontractivity_ratio(1, 1.5, x)
    with pytest.raises(DomainError):
        hypercontractivity_ratio(1, 4.0, np.zeros(20_000))
    with pytest.raises(InsufficientReplicates):
        hypercontractivity_ratio(1, 4.0, x[:100])


def test_paths_to_frame():
    t = np.array([0.0, 0.5, 1.0])
    paths = [HermitePathApprox(t_grid=t, values=np.array([0.0, 1.0, 2.0]), N=2, H=0.7, k=1)] * 2
    df = paths_to_frame(paths)
    assert list(df.columns) == ["t", "value", "replicate_id"]
    assert len(df) == 6
    assert list(paths_to_frame([]).columns) == ["t", "value", "replicate_id"]
