"""
レポートの書き出しと読み込み。
CSV: UTF-8、ヘッダ行あり、小数点は「.」。JSON: キー順ソート、schema_version つき。
ファイル名は <suite>_report.json と <suite>_<表名>.csv。
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_SUFFIX = "_report.json"
# パラメータの組ごとに回すスイートの表は、先頭にこの列がつく
PARAM_COLUMNS = ["alpha", "nu", "hurst", "k"]

# 表名 -> 列（formats サブコマンドと docs/formats.md の元）
CSV_COLUMNS: Dict[str, List[str]] = {
    "mlf_check_moments": ["alpha", "rho", "quadrature", "exact", "abs_err"],
    "noise_check_variance": ["k", "H", "t", "variance"],
    "hs_scaling_hs_norm": PARAM_COLUMNS + ["r", "hs_sq", "tail_ratio"],
    "zk_scaling_second_moment": PARAM_COLUMNS + ["t", "mean_sq_norm", "ci_lo", "ci_hi"],
    "lp_bound_lp_bound": PARAM_COLUMNS + ["t", "ratio", "se", "ci_lo", "ci_hi", "bound", "passed"],
    "solve_norms": PARAM_COLUMNS + ["replicate", "t", "norm_nu", "norm_nu1"],
    "solve_picard_residuals": PARAM_COLUMNS + ["replicate", "iteration", "residual"],
    "holder_increment_terms": PARAM_COLUMNS + ["term", "norm", "exponent"],
    "nclt_nclt": PARAM_COLUMNS + ["N", "ks_statistic", "ci_lo", "ci_hi", "functional"],
}

REPORT_FIELDS: Dict[str, str] = {
    "schema_version": "整数。現在 1",
    "suite": "スイート名",
    "seed": "ルートシード",
    "config": "設定の写し（section -> key -> value）",
    "checks": "検査の一覧（name, estimate, theory, formula, tolerance, ci, passed, ...）",
    "details": "スイート固有の補足（θ 指数、到達 T など）",
    "artifacts": "同じディレクトリに書いた CSV の表名",
    "passed": "全検査が合格なら true",
    "wall_clock": "実行時間（秒）。再現性の比較からは除く",
}


def _clean(value: Any) -> Any:
    """JSON に書ける値へ変換する。非有限の浮動小数は null。"""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else None
    if value is None or isinstance(value, str):
        return value
    return str(value)


def write_report(report, out_dir: Union[str, Path]) -> Path:
    """report.tables を CSV に、report.to_dict() を JSON に書く。JSON のパスを返す。"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, frame in sorted(report.tables.items()):
        path = out / f"{report.suite}_{name}.csv"
        frame.to_csv(path, index=False, encoding="utf-8")
        logger.info("wrote %s (%d rows)", path, len(frame))
    json_path = out / f"{report.suite}{REPORT_SUFFIX}"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump(_clean(report.to_dict()), f, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")
    logger.info("wrote %s", json_path)
    return json_path


def load_reports(out_dir: Union[str, Path]) -> List[Dict[str, Any]]:
    """out_dir 以下の *_report.json をすべて読む。読めないファイルは警告して飛ばす。"""
    root = Path(out_dir)
    if not root.exists():
        return []
    reports = []
    for path in sorted(root.rglob(f"*{REPORT_SUFFIX}")):
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning("%s を読めません: %s", path, e)
            continue
        if not isinstance(data, dict) or data.get("schema_version") != SCHEMA_VERSION:
            logger.warning("%s は schema_version=%s に対応していません", path, SCHEMA_VERSION)
            continue
        data["_path"] = str(path)
        reports.append(data)
    return reports


def load_table(report: Dict[str, Any], name: str) -> pd.DataFrame:
    """load_reports の要素から CSV の表を読む。"""
    path = Path(report["_path"]).parent / f"{report['suite']}_{name}.csv"
    return pd.read_csv(path, encoding="utf-8")


def checks_frame(report: Dict[str, Any]) -> pd.DataFrame:
    """検査一覧を表にしたもの（app の表示用）。"""
    rows = []
    for c in report.get("checks", []):
        ci = c.get("ci") or [None, None]
        rows.append({
            "name": c.get("name"), "estimate": c.get("estimate"), "theory": c.get("theory"),
            "ci_lo": ci[0], "ci_hi": ci[1], "formula": c.get("formula"), "passed": c.get("passed"),
        })
    return pd.DataFrame(rows, columns=["name", "estimate", "theory", "ci_lo", "ci_hi", "formula", "passed"])


def strip_wall_clock(data: Dict[str, Any]) -> Dict[str, Any]:
    """再現性の比較用に wall_clock と _path を除いた写し。"""
    return {k: v for k, v in data.items() if k not in ("wall_clock", "_path")}
