"""
スイート実行とレポート書き出し（CSV / JSON、再現性、読み込み）の結合テスト
"""
import json
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from config_manager import DEFAULTS, parse_config
from report_writer import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    checks_frame,
    load_reports,
    load_table,
    strip_wall_clock,
    write_report,
)
from sim_errors import DomainError
from suites import SUITE_RUNNERS, ExperimentReport, execute_suite, run_suite

MLF_TEXT = """
[experiment]
suite = mlf_check
output_dir = {out}

[mlf]
alphas = 0.5
rhos = 1, 2
n_identity = 10
decay_points = 8
"""

ZK_TEXT = """
[experiment]
suite = zk_scaling
output_dir = {out}
threads = {threads}

[params]
alpha = 0.9
nu = 0.1
hurst = 0.8

[spectrum]
model = weyl_linear
J = 16

[noise]
N_noise = 256

[convolution]
t_min = 0.03125
t_max = 1
n_times = 8
replicates = 100
"""

SOLVE_TEXT = """
[experiment]
suite = solve
output_dir = {out}

[spectrum]
model = torus
K = 2

[noise]
N_noise = 500

[solver]
T = 0.02
dt = 0.002
replicates = 2
"""


def _cfg(text, **kw):
    return parse_config(text.format(**kw), defaults=DEFAULTS)


def _comparable(data):
    d = strip_wall_clock(data)
    d["config"] = {s: dict(v) for s, v in d["config"].items()}
    d["config"]["experiment"].pop("output_dir")
    d["config"]["experiment"].pop("threads")
    return d


def test_全スイートに実行関数がある():
    from config_manager import SUITES
    assert set(SUITE_RUNNERS) == set(SUITES)


# --- mlf_check ---


def test_mlf_check_を実行して書き出す(tmp_path):
    report = run_suite(_cfg(MLF_TEXT, out=tmp_path))
    assert report.passed
    assert (tmp_path / "mlf_check_report.json").exists()
    assert (tmp_path / "mlf_check_moments.csv").exists()

    loaded = load_reports(tmp_path)
    assert len(loaded) == 1
    data = loaded[0]
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["passed"] is True
    assert data["artifacts"] == ["moments"]
    assert data["config"]["mlf"]["alphas"] == [0.5]
    table = load_table(data, "moments")
    assert list(table.columns) == CSV_COLUMNS["mlf_check_moments"]
    assert len(table) == 2
    frame = checks_frame(data)
    assert len(frame) == len(report.checks)
    assert frame["passed"].all()
    assert all(c["formula"] for c in report.checks)


# --- zk_scaling の再現性 ---


def test_同じ設定とシードで同じレポート(tmp_path):
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    run_suite(_cfg(ZK_TEXT, out=a_dir, threads=1))
    run_suite(_cfg(ZK_TEXT, out=b_dir, threads=2))
    a, b = load_reports(a_dir)[0], load_reports(b_dir)[0]
    assert _comparable(a) == _comparable(b)
    pd.testing.assert_frame_equal(load_table(a, "second_moment"), load_table(b, "second_moment"))


def test_シードを変えると値が変わる(tmp_path):
    cfg = _cfg(ZK_TEXT, out=tmp_path / "a", threads=1)
    first = execute_suite(cfg)
    second = execute_suite(cfg.with_overrides(seed=12345))
    assert first.seed != second.seed
    assert not np.allclose(first.tables["second_moment"]["mean_sq_norm"], second.tables["second_moment"]["mean_sq_norm"])


def test_zk_scaling_の検査項目(tmp_path):
    report = execute_suite(_cfg(ZK_TEXT, out=tmp_path, threads=1))
    names = [c["name"] for c in report.checks]
    assert names == ["Z_k L2 growth", "discrete isometry at T"]
    growth = report.checks[0]
    assert growth["theory"] == pytest.approx(0.9 * 0.9 + 1.6 - 2.0)
    assert growth["n_points"] == 8
    assert list(report.tables["second_moment"].columns) == CSV_COLUMNS["zk_scaling_second_moment"]


def test_パラメータの組ごとに実行してまとめる(tmp_path):
    text = ZK_TEXT.replace("hurst = 0.8\n", "hurst = 0.8\nsets = 0.9 0.1 0.8; 0.7 0.3 0.9\n")
    report = execute_suite(_cfg(text, out=tmp_path, threads=1))
    labels = ["alpha=0.9, nu=0.1, H=0.8, k=1", "alpha=0.7, nu=0.3, H=0.9, k=1"]
    names = [c["name"] for c in report.checks]
    assert names == [f"{n} [{lab}]" for lab in labels for n in ("Z_k L2 growth", "discrete isometry at T")]
    growth = [c for c in report.checks if c["name"].startswith("Z_k L2 growth")]
    assert [c["theory"] for c in growth] == [pytest.approx(0.41), pytest.approx(0.29)]
    assert [(c["alpha"], c["nu"], c["hurst"], c["k"]) for c in growth] == [(0.9, 0.1, 0.8, 1), (0.7, 0.3, 0.9, 1)]
    table = report.tables["second_moment"]
    assert list(table.columns) == CSV_COLUMNS["zk_scaling_second_moment"]
    assert len(table) == 2 * 8
    assert sorted(table["alpha"].unique()) == [0.7, 0.9]
    assert [d["alpha"] for d in report.details["by_params"]] == [0.9, 0.7]


# --- solve ---


def test_小さな_torus_での_solve(tmp_path):
    report = run_suite(_cfg(SOLVE_TEXT, out=tmp_path))
    by_name = {c["name"]: c for c in report.checks}
    assert by_name["Picard converged"]["passed"]
    assert by_name["contraction factor"]["estimate"] < 1.0
    norms = report.tables["norms"]
    assert list(norms.columns) == CSV_COLUMNS["solve_norms"]
    assert sorted(norms["replicate"].unique()) == [0, 1]
    assert len(norms) == 2 * 11
    assert set(report.details) >= {"theta", "achieved_T", "iterations", "E_sup_norm_nu_p"}
    assert report.details["achieved_T"] == [pytest.approx(0.02)] * 2
    data = load_reports(tmp_path)[0]
    assert set(data["artifacts"]) == {"norms", "picard_residuals"}
    # どの検査にも式が添えてある
    assert all(c["formula"] for c in report.checks)


# --- ExperimentReport と report_writer ---


def test_ExperimentReport_の合否():
    report = ExperimentReport(suite="x", seed=1, config={})
    assert report.passed
    report.add_check("a", 1.0, True)
    report.add_check("b", 2.0, False, theory=1.0, ci=(0.5, 1.5), z_score=3.0)
    assert not report.passed
    assert report.checks[1]["ci"] == [0.5, 1.5]
    assert report.checks[1]["z_score"] == 3.0
    assert report.to_dict()["passed"] is False


def test_非有限の値は_null(tmp_path):
    report = ExperimentReport(suite="x", seed=1, config={"params": {"alpha": 0.5}})
    report.add_check("nan", float("nan"), False, theory=np.float64(np.inf))
    report.tables["t"] = pd.DataFrame({"a": [1, 2]})
    path = write_report(report, tmp_path)
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["checks"][0]["estimate"] is None
    assert data["checks"][0]["theory"] is None
    assert data["artifacts"] == ["t"]
    assert (tmp_path / "x_t.csv").exists()


def test_load_reports_は読めないファイルを飛ばす(tmp_path):
    (tmp_path / "broken_report.json").write_text("{", encoding="utf-8")
    (tmp_path / "old_report.json").write_text(json.dumps({"schema_version": 0, "suite": "old"}), encoding="utf-8")
    report = ExperimentReport(suite="ok", seed=1, config={})
    write_report(report, tmp_path / "sub")
    loaded = load_reports(tmp_path)
    assert [r["suite"] for r in loaded] == ["ok"]
    assert load_reports(tmp_path / "missing") == []


def test_未知のスイート(tmp_path):
    cfg = _cfg(MLF_TEXT, out=tmp_path)
    with pytest.raises(DomainError):
        execute_suite(replace(cfg, suite="bogus"))
