"""
両対数回帰とブートストラップ。

指数の検証はすべてここを通す:
  slope = OLS(log x, log y)、CI は残差ブートストラップ（既定 1000 回）。
定数 C は仮定せず、指数だけを比較する。
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from seeding import Seed
from sim_errors import RegressionError

DEFAULT_BOOTSTRAP = 1000


@dataclass
class RegressionReport:
    slope: float
    intercept: float
    ci: Tuple[float, float]
    se: float
    n_points: int
    residual_std: float
    theory: Optional[float] = None
    tolerance: Optional[float] = None
    formula: str = ""
    passed: Optional[bool] = None
    extra: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ci"] = [float(self.ci[0]), float(self.ci[1])]
        return d


def _ols(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (y - y.mean())) / sxx)
    return slope, float(y.mean() - slope * xm)


def loglog_regression(
    x: Sequence[float],
    y: Sequence[float],
    theory: Optional[float] = None,
    tolerance: Optional[float] = None,
    formula: str = "",
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: Optional[Seed] = None,
    scale: float = 1.0,
) -> RegressionReport:
    """
    log y を log x に OLS で当てはめる。scale は傾きに掛ける係数
    （増分指数では 1/2 や 1/p を渡す）。
    theory と tolerance を与えると |slope - theory| <= tolerance を passed に入れる。
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise RegressionError(f"回帰点が不足しています（{x.size} 点、最低 3 点）")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise RegressionError("回帰データに非有限値が含まれます")
    if np.any(x <= 0) or np.any(y <= 0):
        raise RegressionError("両対数回帰には正の値が必要です（分散ゼロの系列など）")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise RegressionError("x がすべて同じ値です")
    slope, intercept = _ols(lx, ly)
    fitted = intercept + slope * lx
    resid = ly - fitted
    rng = (seed or Seed(0)).generator()
    boots = np.empty(n_boot)
    for b in range(n_boot):
        yb = fitted + rng.choice(resid, size=resid.size, replace=True)
        boots[b] = _ols(lx, yb)[0]
    lo, hi = np.quantile(boots, [0.025, 0.975])
    report = RegressionReport(
        slope=slope * scale,
        intercept=intercept,
        ci=(float(lo) * scale, float(hi) * scale),
        se=float(np.std(boots, ddof=1)) * abs(scale),
        n_points=int(x.size),
        residual_std=float(np.std(resid, ddof=min(2, x.size - 1))),
        theory=theory,
        tolerance=tolerance,
        formula=formula,
    )
    if report.ci[0] > report.ci[1]:
        report.ci = (report.ci[1], report.ci[0])
    if theory is not None and tolerance is not None:
        report.passed = bool(abs(report.slope - theory) <= tolerance)
    return report


def bootstrap_statistic(
    samples: np.ndarray,
    statistic: Callable[[np.ndarray], float],
    n_boot: int = 200,
    seed: Optional[Seed] = None,
) -> Tuple[float, float, Tuple[float, float]]:
    """(推定値, ブートストラップ標準誤差, 95% CI)。samples は先頭軸で再標本化する。"""
    samples = np.asarray(samples)
    rng = (seed or Seed(0)).generator()
    est = float(statistic(samples))
    n = samples.shape[0]
    vals = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        vals[b] = statistic(samples[idx])
    lo, hi = np.quantile(vals, [0.025, 0.975])
    return est, float(np.std(vals, ddof=1)), (float(lo), float(hi))


def mean_with_se(values: np.ndarray, axis: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """標本平均と標準誤差。"""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    mean = values.mean(axis=axis)
    se = values.std(axis=axis, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se
