"""
config_manager の INI 解析・既定値・検証（行番号つき違反の収集、パラメータ条件）の単体テスト
"""
import json

import pytest

from config_manager import (
    DEFAULTS,
    SUITES,
    _bool,
    _int,
    config_schema,
    list_presets,
    load_config,
    load_defaults,
    parse_config,
)
from sim_errors import GateError, ParseError


def _parse(text):
    return parse_config(text, defaults=DEFAULTS)


# --- 基本 ---


def test_最小の設定():
    cfg = _parse("[experiment]\nsuite = mlf_check\n")
    assert cfg.suite == "mlf_check"
    assert cfg.seed == DEFAULTS["experiment"]["seed"]
    assert cfg.alpha == 0.7
    assert cfg.k == 1
    assert cfg.get("mlf", "alphas") == [0.4, 0.6, 0.8]
    assert cfg.get("mlf", "rhos") == [0.0, 0.5, 1.0, 2.0]
    assert cfg.get("noise", "normalize") is True
    assert cfg.root_seed.root == cfg.seed


def test_キーの上書きとコメント():
    text = "; コメント\n[experiment]\nsuite = hs_scaling\nseed = 7\n[hs_scaling]\nn_r = 5\n"
    cfg = _parse(text)
    assert cfg.seed == 7
    assert cfg.get("hs_scaling", "n_r") == 5


def test_違反は行番号つきでまとめて報告():
    text = (
        "[experiment]\n"
        "suite = zk_scaling\n"
        "[params]\n"
        "alpha = 1.5\n"
        "bogus = 1\n"
        "[spectrum]\n"
        "J = 0\n"
    )
    with pytest.raises(ParseError) as exc:
        _parse(text)
    assert [v[0] for v in exc.value.violations] == [4, 5, 7]
    assert "line 4" in str(exc.value)
    assert "bogus" in str(exc.value)


def test_未知のセクションとスイート():
    with pytest.raises(ParseError) as exc:
        _parse("[experiment]\nsuite = everything\n[extra]\nx = 1\n")
    lines = sorted(v[0] for v in exc.value.violations)
    assert lines == [2, 3]


def test_型の誤り():
    with pytest.raises(ParseError):
        _parse("[experiment]\nsuite = mlf_check\n[noise]\nnormalize = maybe\n")
    with pytest.raises(ParseError):
        _parse("[experiment]\nsuite = mlf_check\n[params]\nk = 1.5\n")
    with pytest.raises(ParseError):
        _parse("[experiment]\nsuite = mlf_check\nthreads = 0\n")


def test_重複セクション():
    with pytest.raises(ParseError) as exc:
        _parse("[experiment]\nsuite = mlf_check\n[experiment]\nseed = 1\n")
    assert exc.value.violations[0][0] == 3


# --- パラメータ条件 ---


def test_solve_は3条件を要求():
    text = "[experiment]\nsuite = solve\n[params]\nalpha = 0.8\nnu = 0.3\nhurst = 0.9\n[spectrum]\nmodel = torus\nK = 2\n"
    with pytest.raises(GateError) as exc:
        _parse(text)
    assert any("alpha*(nu+1)" in v for v in exc.value.violations)


def test_zk_scaling_は畳み込みの条件だけ():
    text = "[experiment]\nsuite = zk_scaling\n[params]\nalpha = 0.5\nnu = 0.5\nhurst = 0.6\n"
    with pytest.raises(GateError) as exc:
        _parse(text)
    assert "<= 2" in exc.value.violations[0]
    # 同じ値でも mlf_check には条件を課さない
    _parse(text.replace("zk_scaling", "mlf_check"))


def test_条件と整合性の違反をまとめて報告():
    # 条件違反（alpha*(nu+1) >= 1）と weyl_linear + convective の不整合を 1 回で返す
    text = "[experiment]\nsuite = solve\n[params]\nalpha = 0.8\nnu = 0.3\nhurst = 0.9\n"
    with pytest.raises(ParseError) as exc:
        _parse(text)
    messages = [m for _, m in exc.value.violations]
    assert any("alpha*(nu+1) = 1.04 >= 1" in m for m in messages)
    assert any("convective=true" in m for m in messages)
    assert (4, "alpha*(nu+1) = 1.04 >= 1") in exc.value.violations


def test_型の誤りがあれば条件は検査しない():
    text = "[experiment]\nsuite = solve\n[params]\nalpha = 0.8\nnu = 0.3\nhurst = 2\n[spectrum]\nmodel = torus\n"
    with pytest.raises(ParseError) as exc:
        _parse(text)
    assert [v[0] for v in exc.value.violations] == [6]


# --- パラメータの組 ---


def test_パラメータの組():
    text = (
        "[experiment]\nsuite = zk_scaling\n"
        "[params]\nhurst = 0.9\nk = 2\nsets = 0.9 0.1 0.8; 0.7 0.3; 0.5 0.5 0.95 1\n"
    )
    cfg = _parse(text)
    assert cfg.param_sets() == [(0.9, 0.1, 0.8, 2), (0.7, 0.3, 0.9, 2), (0.5, 0.5, 0.95, 1)]
    one = cfg.with_params(*cfg.param_sets()[1])
    assert (one.alpha, one.nu, one.hurst, one.k) == (0.7, 0.3, 0.9, 2)
    assert one.param_sets() == [(0.7, 0.3, 0.9, 2)]
    # 組ごとに乱数ストリームを分ける（ルートシードは同じ）
    other = cfg.with_params(*cfg.param_sets()[0])
    assert one.root_seed != other.root_seed
    assert one.root_seed.root == cfg.seed
    # 元の設定は変わらない
    assert cfg.alpha == 0.7 and len(cfg.get("params", "sets")) == 3


def test_sets_が空なら_params_の1組():
    cfg = _parse("[experiment]\nsuite = zk_scaling\n")
    assert cfg.get("params", "sets") == []
    assert cfg.param_sets() == [(0.7, 0.3, 0.9, 1)]


@pytest.mark.parametrize("sets", ["0.9", "0.9 0.1 0.8 1 5", "1.5 0.1", "0.9 0.1 0.3", "0.9 0.1 0.8 1.5"])
def test_sets_の型と範囲(sets):
    text = f"[experiment]\nsuite = mlf_check\n[params]\nsets = {sets}\n"
    with pytest.raises(ParseError) as exc:
        _parse(text)
    assert exc.value.violations[0][0] == 4


def test_条件は組ごとに検査():
    text = "[experiment]\nsuite = zk_scaling\n[params]\nsets = 0.9 0.1 0.8; 0.5 0.5 0.6\n"
    with pytest.raises(GateError) as exc:
        _parse(text)
    assert exc.value.violations == ["(alpha=0.5, nu=0.5, H=0.6) alpha*(1-nu)+2H = 1.45 <= 2"]


# --- 整合性 ---


def test_weyl_では双線形項を使えない():
    text = "[experiment]\nsuite = solve\n[spectrum]\nmodel = weyl_linear\n"
    with pytest.raises(ParseError) as exc:
        _parse(text)
    assert exc.value.violations[0][0] == 4


def test_dt_は_T_を割り切る():
    text = "[experiment]\nsuite = solve\n[spectrum]\nmodel = torus\n[solver]\nT = 0.1\ndt = 0.03\n"
    with pytest.raises(ParseError) as exc:
        _parse(text)
    assert exc.value.violations[0][0] == 7


def test_時刻範囲と_noise_check_の対():
    with pytest.raises(ParseError):
        _parse("[experiment]\nsuite = zk_scaling\n[convolution]\nt_min = 0.5\nt_max = 0.1\n")
    with pytest.raises(ParseError):
        _parse("[experiment]\nsuite = noise_check\n[noise_check]\nks = 1,2\nhursts = 0.8\n")


# --- ExperimentConfig ---


def test_with_overrides():
    cfg = _parse("[experiment]\nsuite = mlf_check\n")
    new = cfg.with_overrides(seed=7, threads="auto", output_dir="out/x")
    assert (new.seed, new.threads, new.output_dir) == (7, "auto", "out/x")
    assert new.echo()["experiment"]["seed"] == 7
    # 元は変わらない
    assert cfg.seed == DEFAULTS["experiment"]["seed"]
    assert cfg.threads == 1
    assert cfg.with_overrides() == cfg
    with pytest.raises(ValueError):
        cfg.with_overrides(threads="0")


def test_solver_config_は_N_noise_を_1_over_dt_の倍数に丸める():
    cfg = _parse("[experiment]\nsuite = solve\n[spectrum]\nmodel = torus\nK = 2\n")
    sc = cfg.solver_config()
    assert sc.N_noise == 1000
    assert sc.n_steps == 100
    assert sc.model.n_modes == cfg.spectrum_model().n_modes
    assert cfg.solver_config(replicates=9).replicates == 9


def test_nclt_config():
    cfg = load_config(next(p for p in list_presets() if p.stem == "nclt"))
    nc = cfg.nclt_config()
    assert nc.N_values == (64, 256, 1024)
    assert nc.N_ref == 8192
    assert nc.base.N_noise == 1024


def test_時刻格子と増分の組():
    cfg = _parse("[experiment]\nsuite = zk_increment\n[convolution]\nt_min = 0.01\nt_max = 1\nn_times = 3\n")
    assert cfg.scaling_times() == pytest.approx((0.01, 0.1, 1.0))
    pairs = cfg.increment_pairs()
    assert len(pairs) == DEFAULTS["convolution"]["n_pairs"]
    assert all(t1 == 0.5 and t2 > t1 for t1, t2 in pairs)


@pytest.mark.parametrize("path", list_presets(), ids=lambda p: p.stem)
def test_プリセットはすべて読める(path):
    cfg = load_config(path)
    assert cfg.suite == path.stem
    assert cfg.suite in SUITES


def test_プリセットは全スイートをそろえる():
    assert sorted(p.stem for p in list_presets()) == sorted(SUITES)


def test_プリセットは必要なパラメータの組をそろえる():
    cfgs = {p.stem: load_config(p) for p in list_presets()}
    assert cfgs["zk_scaling"].param_sets() == [(0.9, 0.1, 0.8, 1), (0.7, 0.3, 0.9, 1), (0.5, 0.5, 0.95, 1)]
    assert set(cfgs["zk_increment"].param_sets()) >= {(0.9, 0.1, 0.8, 1), (0.5, 0.5, 0.95, 1)}
    hs = cfgs["hs_scaling"]
    assert [(a, nu) for a, nu, _, _ in hs.param_sets()] == [(0.8, 0.2), (0.5, 0.5)]
    assert hs.get("spectrum", "J") == 4096
    assert hs.get("hs_scaling", "r_max") / hs.get("hs_scaling", "r_min") == pytest.approx(100.0)
    assert [k for _, _, _, k in cfgs["nclt"].param_sets()] == [1, 2]
    assert cfgs["mlf_check"].get("mlf", "alphas") == [0.4, 0.6, 0.8]
    assert cfgs["mlf_check"].get("mlf", "rhos") == [0.0, 0.5, 1.0, 2.0]


# --- 既定値とスキーマ ---


def test_load_defaults(tmp_path):
    assert load_defaults(tmp_path / "none.json") == DEFAULTS
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    assert load_defaults(broken) == DEFAULTS
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"params": {"alpha": 0.6}}), encoding="utf-8")
    merged = load_defaults(partial)
    assert merged["params"]["alpha"] == 0.6
    assert merged["params"]["nu"] == DEFAULTS["params"]["nu"]
    # DEFAULTS 自体は変更しない
    assert DEFAULTS["params"]["alpha"] == 0.7


def test_defaults_json_を使う(tmp_path):
    custom = tmp_path / "d.json"
    custom.write_text(json.dumps({"experiment": {"seed": 99}}), encoding="utf-8")
    cfg = parse_config("[experiment]\nsuite = mlf_check\n", defaults=load_defaults(custom))
    assert cfg.seed == 99


def test_config_schema():
    schema = config_schema()
    assert set(schema) == set(DEFAULTS)
    assert schema["params"]["alpha"]["type"] == "float"
    assert schema["params"]["alpha"]["default"] == 0.7
    assert schema["spectrum"]["model"]["type"] == "enum"
    assert "torus" in schema["spectrum"]["model"]["choices"]
    assert schema["experiment"]["output_dir"]["type"] == "str"
    assert all(entry["description"] for keys in schema.values() for entry in keys.values())


@pytest.mark.parametrize("text, expected", [("1", True), ("Yes", True), ("off", False), (" false ", False)])
def test_bool_変換(text, expected):
    assert _bool(text) is expected


def test_int_変換():
    assert _int("3") == 3
    assert _int("3.0") == 3
    with pytest.raises(ValueError):
        _int("3.5")
    with pytest.raises(ValueError):
        _bool("maybe")
