"""
両対数回帰・ブートストラップ・平均と標準誤差の単体テスト
"""
import numpy as np
import pytest

from regression import bootstrap_statistic, loglog_regression, mean_with_se
from seeding import Seed
from sim_errors import RegressionError


def test_厳密なべき乗則():
    x = np.geomspace(0.01, 1.0, 10)
    rep = loglog_regression(x, 3.0 * x ** 0.41, theory=0.41, tolerance=0.05, formula="a")
    assert rep.slope == pytest.approx(0.41, abs=1e-12)
    assert rep.intercept == pytest.approx(np.log(3.0), abs=1e-12)
    # 残差 0 なら CI は一点につぶれる
    assert rep.ci[0] == pytest.approx(0.41, abs=1e-12)
    assert rep.ci[1] == pytest.approx(0.41, abs=1e-12)
    assert rep.passed is True
    assert rep.n_points == 10
    assert rep.to_dict()["ci"] == [rep.ci[0], rep.ci[1]]


def test_理論値から外れると不合格():
    x = np.geomspace(0.01, 1.0, 10)
    rep = loglog_regression(x, x ** 0.6, theory=0.41, tolerance=0.05)
    assert rep.passed is False
    assert loglog_regression(x, x ** 0.6).passed is None


def test_scale_は傾きと区間に掛かる():
    x = np.geomspace(0.001, 0.1, 8)
    rng = np.random.default_rng(0)
    y = x ** 1.0 * np.exp(0.05 * rng.standard_normal(8))
    full = loglog_regression(x, y, seed=Seed(1))
    half = loglog_regression(x, y, seed=Seed(1), scale=0.5)
    assert half.slope == pytest.approx(0.5 * full.slope)
    assert half.se == pytest.approx(0.5 * full.se)
    assert half.ci[0] == pytest.approx(0.5 * full.ci[0])
    neg = loglog_regression(x, y, seed=Seed(1), scale=-1.0)
    assert neg.ci[0] <= neg.ci[1]


def test_ブートストラップの再現性():
    x = np.geomspace(0.01, 1.0, 12)
    y = x ** 0.3 * np.exp(0.1 * np.random.default_rng(4).standard_normal(12))
    a = loglog_regression(x, y, seed=Seed(9), n_boot=200)
    b = loglog_regression(x, y, seed=Seed(9), n_boot=200)
    assert a.ci == b.ci
    assert a.ci[0] < a.slope < a.ci[1]


@pytest.mark.parametrize("x, y", [
    ([1.0, 2.0], [1.0, 2.0]),
    ([1.0, 2.0, np.nan], [1.0, 2.0, 3.0]),
    ([1.0, 2.0, 3.0], [1.0, 0.0, 3.0]),
    ([2.0, 2.0, 2.0], [1.0, 2.0, 3.0]),
    ([1.0, 2.0, 3.0], [1.0, 2.0]),
])
def test_退化したデータ(x, y):
    with pytest.raises(RegressionError):
        loglog_regression(x, y)


def test_bootstrap_statistic():
    samples = np.random.default_rng(2).standard_normal(2000)
    est, se, (lo, hi) = bootstrap_statistic(samples, np.mean, n_boot=200, seed=Seed(3))
    assert est == pytest.approx(samples.mean())
    assert se == pytest.approx(1.0 / np.sqrt(2000), rel=0.25)
    assert lo < est < hi


def test_mean_with_se():
    values = np.array([[1.0, 2.0], [3.0, 6.0]])
    mean, se = mean_with_se(values)
    np.testing.assert_allclose(mean, [2.0, 4.0])
    np.testing.assert_allclose(se, [1.0, 2.0])
    mean, se = mean_with_se(np.array([[5.0, 1.0]]))
    np.testing.assert_allclose(se, 0.0)
