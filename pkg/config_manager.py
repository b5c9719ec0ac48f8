"""
設定管理モジュール
実験設定は INI 形式のテキスト（1 回の実行で 1 スイート。[params] sets で複数のパラメータの組を並べられる）。
書かれていないキーは config/defaults.json の値、それも無ければ DEFAULTS を使う。
解析時は最初のエラーで止めず、違反をすべて行番号つきで集める。
"""
import configparser
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from convolution import ConvolutionConfig, gate_value, increment_pairs
from nclt import FUNCTIONALS, NcltConfig
from noise import COV_PRESETS, LRD_MODELS, NORMALIZATIONS
from seeding import Seed
from sim_errors import GateError, ParseError
from solver import (
    FORCE_VARIANTS,
    INITIAL_GUESSES,
    KERNEL_RULES,
    AdmissibleParams,
    LipschitzForce,
    SolverConfig,
    default_u0,
    param_gate,
)
from spectral import SPECTRUM_VARIANTS, SpectrumModel

logger = logging.getLogger(__name__)

CONFIG_DIR = Path(__file__).resolve().parent / "config"
DEFAULTS_FILE = CONFIG_DIR / "defaults.json"
PRESETS_DIR = CONFIG_DIR / "presets"

SUITES = ("mlf_check", "noise_check", "hs_scaling", "zk_scaling", "zk_increment", "lp_bound", "solve", "holder", "nclt")
# α(1-ν)+2H > 2 だけを要求するスイートと、3 条件すべてを要求するスイート
CONVOLUTION_SUITES = ("zk_scaling", "zk_increment", "lp_bound")
SOLVER_SUITES = ("solve", "holder", "nclt")

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "experiment": {"suite": "mlf_check", "seed": 20240501, "output_dir": "output", "threads": "1"},
    "params": {"alpha": 0.7, "nu": 0.3, "hurst": 0.9, "k": 1, "sets": ""},
    "spectrum": {"model": "weyl_linear", "c": 1.0, "J": 64, "K": 8},
    "noise": {
        "N_noise": 1024, "cov_preset": "classical", "lrd_model": "power_law", "normalize": True,
        "calibration": "exact", "noise_mode": "cylindrical", "noise_scale": 1.0,
    },
    "convolution": {
        "t_min": 0.01, "t_max": 1.0, "n_times": 12, "replicates": 10000, "p": 4.0, "quadrature": "midpoint",
        "increment_t1": 0.5, "increment_min": 0.002, "increment_max": 0.2, "n_pairs": 10,
    },
    "solver": {
        "T": 0.1, "dt": 0.001, "picard_tol": 1e-8, "picard_max_iter": 25, "force": "saturating", "force_c": 0.1,
        "u0_norm": 0.1, "convective": True, "max_halvings": 6, "replicates": 4, "kernel_rule": "product",
        "initial_guess": "forced",
    },
    "holder": {"t1": 0.05, "increment_min": 0.002, "increment_max": 0.04, "n_pairs": 8, "replicates": 1000},
    "nclt": {"N_values": "64,256,1024", "functional": "norm_at_T", "N_ref_factor": 8, "replicates": 1000},
    "mlf": {"alphas": "0.4,0.6,0.8", "rhos": "0,0.5,1,2", "n_identity": 50, "decay_points": 40},
    "noise_check": {
        "ks": "1,2", "hursts": "0.8,0.7", "N": 8192, "replicates": 2000, "t_min": 0.05, "n_times": 20,
        "hyper_ks": "1,2,3", "hyper_samples": 100000, "hyper_p": 4.0, "kmax": 4,
    },
    "hs_scaling": {"r_min": 0.01, "r_max": 1.0, "n_r": 20},
}


# ================================================================
# スキーマ
# ================================================================

def _float(s: str) -> float:
    return float(s)


def _int(s: str) -> int:
    v = float(s)
    if v != int(v):
        raise ValueError(f"整数ではありません: {s}")
    return int(v)


def _bool(s: str) -> bool:
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"真偽値ではありません: {s}")


def _items(s) -> List[str]:
    if isinstance(s, (list, tuple)):
        return [str(x) for x in s]
    return [x for x in str(s).split(",") if x.strip()]


def _float_list(s) -> List[float]:
    return [float(x) for x in _items(s)]


def _int_list(s) -> List[int]:
    return [_int(x) for x in _items(s)]


def _threads(s: str) -> Any:
    if str(s).strip() == "auto":
        return "auto"
    n = _int(s)
    if n < 1:
        raise ValueError("threads は 1 以上または auto")
    return n


def _choice(options) -> Callable[[str], str]:
    def parse(s: str) -> str:
        v = str(s).strip()
        if v not in options:
            raise ValueError(f"{v} は {list(options)} のいずれかである必要があります")
        return v
    parse.options = tuple(options)
    return parse


def _between(lo: Optional[float], hi: Optional[float], lo_open: bool = True, hi_open: bool = True) -> Callable[[Any], Optional[str]]:
    def check(v) -> Optional[str]:
        vals = v if isinstance(v, list) else [v]
        for x in vals:
            if lo is not None and (x <= lo if lo_open else x < lo):
                return f"{x} は {'(' if lo_open else '['}{lo}, {hi if hi is not None else '∞'}{')' if hi_open else ']'} の範囲外です"
            if hi is not None and (x >= hi if hi_open else x > hi):
                return f"{x} は {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'} の範囲外です"
        return None
    return check


def _param_sets(s) -> List[List[Any]]:
    """「alpha nu [hurst [k]]」を ; で区切った並び。省略した hurst / k は [params] の値を使う。"""
    if isinstance(s, (list, tuple)):
        entries = [list(e) for e in s]
    else:
        entries = [e.split() for e in str(s).split(";") if e.strip()]
    out = []
    for e in entries:
        if not 2 <= len(e) <= 4:
            raise ValueError(f"パラメータの組 {' '.join(map(str, e))} は alpha nu [hurst [k]] の形である必要があります")
        e = e + [None] * (4 - len(e))
        out.append([float(e[0]), float(e[1]),
                    None if e[2] is None else float(e[2]),
                    None if e[3] is None else _int(e[3])])
    return out


_SET_CHECKS = (_between(0.0, 1.0), _between(-2.0, 2.0, False, False), _between(0.5, 1.0), _between(1, 4, False, False))


def _check_sets(v) -> Optional[str]:
    for row in v:
        for x, check in zip(row, _SET_CHECKS):
            msg = None if x is None else check(x)
            if msg:
                return msg
    return None


def resolve_param_sets(p: Dict[str, Any]) -> List[Tuple[float, float, float, int]]:
    """[params] を (alpha, nu, hurst, k) の並びにする。sets が空なら alpha / nu / hurst / k の 1 組。"""
    if not p.get("sets"):
        return [(p["alpha"], p["nu"], p["hurst"], p["k"])]
    return [(a, nu, p["hurst"] if h is None else h, p["k"] if k is None else k) for a, nu, h, k in p["sets"]]


# section -> key -> (変換関数, 範囲検査, 説明)
SCHEMA: Dict[str, Dict[str, Tuple[Callable, Optional[Callable], str]]] = {
    "experiment": {
        "suite": (_choice(SUITES), None, "実行するスイート"),
        "seed": (_int, _between(0, None, lo_open=False), "ルートシード"),
        "output_dir": (str, None, "CSV / JSON の出力先"),
        "threads": (_threads, None, "ワーカー数（整数または auto）"),
    },
    "params": {
        "alpha": (_float, _between(0.0, 1.0), "分数階 α ∈ (0, 1)"),
        "nu": (_float, _between(-2.0, 2.0, False, False), "Sobolev 指数 ν"),
        "hurst": (_float, _between(0.5, 1.0), "Hurst 指数 H ∈ (1/2, 1)"),
        "k": (_int, _between(1, 4, False, False), "Hermite 次数 k ∈ {1..4}"),
        "sets": (_param_sets, _check_sets, "複数のパラメータの組（alpha nu [hurst [k]] を ; 区切り）。空なら上の 1 組"),
    },
    "spectrum": {
        "model": (_choice(SPECTRUM_VARIANTS), None, "スペクトルモデル"),
        "c": (_float, _between(0.0, None), "weyl_linear の係数 c（λ_j = c·j）"),
        "J": (_int, _between(1, None, lo_open=False), "weyl_linear のモード数"),
        "K": (_int, _between(1, None, lo_open=False), "torus の波数上限 |k|∞ <= K"),
    },
    "noise": {
        "N_noise": (_int, _between(1, None, lo_open=False), "ノイズ格子の解像度（1 単位時間あたり）"),
        "cov_preset": (_choice(COV_PRESETS), None, "共分散指数のプリセット"),
        "lrd_model": (_choice(LRD_MODELS), None, "長期依存列の共分散モデル"),
        "normalize": (_bool, None, "Var S_N(1) = 1 に正規化する"),
        "calibration": (_choice(NORMALIZATIONS), None, "正規化の方法"),
        "noise_mode": (_choice(("cylindrical", "scalar")), None, "ノイズの空間構造"),
        "noise_scale": (_float, _between(0.0, None, lo_open=False), "ノイズ強度 σ"),
    },
    "convolution": {
        "t_min": (_float, _between(0.0, None), "スケーリング格子の最小時刻"),
        "t_max": (_float, _between(0.0, None), "スケーリング格子の最大時刻"),
        "n_times": (_int, _between(2, None, lo_open=False), "時刻数（対数等間隔）"),
        "replicates": (_int, _between(1, None, lo_open=False), "反復数"),
        "p": (_float, _between(2.0, None, lo_open=False), "Lp の p"),
        "quadrature": (_choice(("midpoint", "product")), None, "核のセル求積"),
        "increment_t1": (_float, _between(0.0, None), "増分の基準時刻 t1"),
        "increment_min": (_float, _between(0.0, None), "t2 - t1 の最小値"),
        "increment_max": (_float, _between(0.0, None), "t2 - t1 の最大値"),
        "n_pairs": (_int, _between(3, None, lo_open=False), "増分の組数"),
    },
    "solver": {
        "T": (_float, _between(0.0, None), "終端時刻"),
        "dt": (_float, _between(0.0, None), "時間刻み（T を割り切ること）"),
        "picard_tol": (_float, _between(0.0, None), "Picard 残差の許容値"),
        "picard_max_iter": (_int, _between(1, None, lo_open=False), "Picard 反復の上限"),
        "force": (_choice(FORCE_VARIANTS), None, "外力 f"),
        "force_c": (_float, None, "外力の係数 c"),
        "u0_norm": (_float, _between(0.0, None, lo_open=False), "初期値の ‖u0‖_ν"),
        "convective": (_bool, None, "双線形項 B を含める（torus のみ）"),
        "max_halvings": (_int, _between(0, None, lo_open=False), "T 半減の上限回数"),
        "replicates": (_int, _between(1, None, lo_open=False), "solve スイートの反復数"),
        "kernel_rule": (_choice(KERNEL_RULES), None, "記憶項の求積"),
        "initial_guess": (_choice(INITIAL_GUESSES), None, "Picard の初期推定"),
    },
    "holder": {
        "t1": (_float, _between(0.0, None), "増分の基準時刻 t1"),
        "increment_min": (_float, _between(0.0, None), "t2 - t1 の最小値"),
        "increment_max": (_float, _between(0.0, None), "t2 - t1 の最大値"),
        "n_pairs": (_int, _between(3, None, lo_open=False), "増分の組数"),
        "replicates": (_int, _between(1, None, lo_open=False), "反復数"),
    },
    "nclt": {
        "N_values": (_int_list, _between(1, None, lo_open=False), "部分和の解像度 N（カンマ区切り、昇順）"),
        "functional": (_choice(FUNCTIONALS), None, "比較する汎関数"),
        "N_ref_factor": (_int, _between(1, None, lo_open=False), "参照解の解像度 N_ref = 係数 × max(N)"),
        "replicates": (_int, _between(1, None, lo_open=False), "反復数"),
    },
    "mlf": {
        "alphas": (_float_list, _between(0.0, 1.0), "モーメント公式を検査する α"),
        "rhos": (_float_list, _between(-1.0, None), "モーメント次数 ρ"),
        "n_identity": (_int, _between(1, None, lo_open=False), "E_{1,1}(z) = e^z を検査する点数"),
        "decay_points": (_int, _between(1, None, lo_open=False), "減衰境界を検査する点数"),
    },
    "noise_check": {
        "ks": (_int_list, _between(1, 4, False, False), "自己相似性を検査する k（hursts と対）"),
        "hursts": (_float_list, _between(0.5, 1.0), "自己相似性を検査する H"),
        "N": (_int, _between(2, None, lo_open=False), "部分和の解像度"),
        "replicates": (_int, _between(1, None, lo_open=False), "経路数"),
        "t_min": (_float, _between(0.0, 1.0, hi_open=False), "回帰の最小時刻（最大は 1）"),
        "n_times": (_int, _between(3, None, lo_open=False), "回帰の時刻数"),
        "hyper_ks": (_int_list, _between(1, 4, False, False), "超縮小性を検査する k"),
        "hyper_samples": (_int, _between(1, None, lo_open=False), "超縮小性の標本数"),
        "hyper_p": (_float, _between(2.0, None, lo_open=False), "超縮小性の p"),
        "kmax": (_int, _between(1, 4, False, False), "直交性を検査する最大次数"),
    },
    "hs_scaling": {
        "r_min": (_float, _between(0.0, None), "r の最小値"),
        "r_max": (_float, _between(0.0, None), "r の最大値"),
        "n_r": (_int, _between(3, None, lo_open=False), "r の点数（対数等間隔）"),
    },
}


# ================================================================
# 既定値
# ================================================================

def load_defaults(path: Optional[Path] = None) -> Dict[str, Dict[str, Any]]:
    """DEFAULTS に defaults.json の内容を重ねたもの。ファイルが無い・壊れている場合は DEFAULTS。"""
    merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    path = DEFAULTS_FILE if path is None else Path(path)
    if not path.exists():
        return merged
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        logger.warning("%s を読めないため組み込みの既定値を使います: %s", path, e)
        return merged
    for sec, vals in data.items():
        if isinstance(vals, dict):
            merged.setdefault(sec, {}).update(vals)
    return merged


def list_presets() -> List[Path]:
    if not PRESETS_DIR.exists():
        return []
    return sorted(PRESETS_DIR.glob("*.ini"))


# ================================================================
# ExperimentConfig
# ================================================================

@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    seed: int
    output_dir: str
    threads: Any
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    # with_params で固定した (alpha, nu, hurst, k)。空でなければ乱数ストリームを組ごとに分ける
    param_key: Tuple = ()

    def get(self, section: str, key: str) -> Any:
        return self.sections[section][key]

    def with_overrides(self, seed: Optional[int] = None, threads: Any = None, output_dir: Optional[str] = None) -> "ExperimentConfig":
        """CLI の --seed / --threads / --out で上書きする。"""
        secs = {s: dict(v) for s, v in self.sections.items()}
        cfg = self
        if seed is not None:
            secs["experiment"]["seed"] = int(seed)
            cfg = replace(cfg, seed=int(seed))
        if threads is not None:
            t = _threads(str(threads))
            secs["experiment"]["threads"] = t
            cfg = replace(cfg, threads=t)
        if output_dir is not None:
            secs["experiment"]["output_dir"] = str(output_dir)
            cfg = replace(cfg, output_dir=str(output_dir))
        return replace(cfg, sections=secs)

    def echo(self) -> Dict[str, Dict[str, Any]]:
        """レポートに埋め込む設定の写し（再実行に十分）。"""
        return {s: {k: self.sections[s][k] for k in sorted(self.sections[s])} for s in sorted(self.sections)}

    @property
    def root_seed(self) -> Seed:
        if self.param_key:
            return Seed(self.seed).derive("params", *self.param_key)
        return Seed(self.seed)

    def param_sets(self) -> List[Tuple[float, float, float, int]]:
        return resolve_param_sets(self.sections["params"])

    def with_params(self, alpha: float, nu: float, hurst: float, k: int) -> "ExperimentConfig":
        """1 組のパラメータに固定した写し（sets は空にする）。"""
        key = (float(alpha), float(nu), float(hurst), int(k))
        secs = {s: dict(v) for s, v in self.sections.items()}
        secs["params"].update(alpha=key[0], nu=key[1], hurst=key[2], k=key[3], sets=[])
        return replace(self, sections=secs, param_key=key)

    @property
    def alpha(self) -> float:
        return self.get("params", "alpha")

    @property
    def nu(self) -> float:
        return self.get("params", "nu")

    @property
    def hurst(self) -> float:
        return self.get("params", "hurst")

    @property
    def k(self) -> int:
        return self.get("params", "k")

    def spectrum_model(self) -> SpectrumModel:
        s = self.sections["spectrum"]
        if s["model"] == "torus":
            return SpectrumModel.torus(s["K"])
        return SpectrumModel.weyl_linear(s["c"], s["J"])

    def scaling_times(self) -> Tuple[float, ...]:
        c = self.sections["convolution"]
        return tuple(float(t) for t in np.geomspace(c["t_min"], c["t_max"], c["n_times"]))

    def increment_pairs(self) -> List[Tuple[float, float]]:
        c = self.sections["convolution"]
        return increment_pairs(c["increment_t1"], c["increment_min"], c["increment_max"], c["n_pairs"])

    def holder_pairs(self) -> List[Tuple[float, float]]:
        h = self.sections["holder"]
        return increment_pairs(h["t1"], h["increment_min"], h["increment_max"], h["n_pairs"])

    def convolution_config(self, t_grid: Optional[Tuple[float, ...]] = None) -> ConvolutionConfig:
        n, c = self.sections["noise"], self.sections["convolution"]
        return ConvolutionConfig(
            alpha=self.alpha, nu=self.nu, H=self.hurst, k=self.k, model=self.spectrum_model(),
            t_grid=self.scaling_times() if t_grid is None else t_grid, N_noise=n["N_noise"],
            replicates=c["replicates"], p=c["p"], seed=self.root_seed, quadrature=c["quadrature"],
            noise_mode=n["noise_mode"], noise_scale=n["noise_scale"], cov_preset=n["cov_preset"],
            lrd_model=n["lrd_model"], normalize=n["normalize"], calibration=n["calibration"],
            threads=self.threads, suite_id=self.suite,
        )

    def solver_config(self, replicates: Optional[int] = None) -> SolverConfig:
        n, s = self.sections["noise"], self.sections["solver"]
        params = AdmissibleParams(self.alpha, self.nu, self.hurst)
        model = self.spectrum_model()
        per_unit = max(1, int(round(1.0 / s["dt"])))
        n_noise = max(per_unit, n["N_noise"] // per_unit * per_unit)
        if n_noise != n["N_noise"]:
            logger.info("N_noise=%d を 1/dt の倍数 %d に合わせました", n["N_noise"], n_noise)
        return SolverConfig(
            params=params, k=self.k, model=model,
            u0=default_u0(model, self.nu, s["u0_norm"], self.root_seed),
            T=s["T"], dt=s["dt"], picard_tol=s["picard_tol"], picard_max_iter=s["picard_max_iter"],
            force=LipschitzForce(s["force"], s["force_c"]), p=self.sections["convolution"]["p"],
            replicates=s["replicates"] if replicates is None else int(replicates), seed=self.root_seed,
            N_noise=n_noise, noise_scale=n["noise_scale"], convective=s["convective"],
            kernel_rule=s["kernel_rule"], cov_preset=n["cov_preset"], lrd_model=n["lrd_model"],
            normalize=n["normalize"], calibration=n["calibration"], max_halvings=s["max_halvings"],
            threads=self.threads, suite_id=self.suite,
        )

    def nclt_config(self) -> NcltConfig:
        c = self.sections["nclt"]
        return NcltConfig(
            base=self.solver_config(), N_values=tuple(c["N_values"]), functional=c["functional"],
            replicates=c["replicates"], N_ref_factor=c["N_ref_factor"],
        )


# ================================================================
# 解析
# ================================================================

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")


def _line_index(text: str) -> Dict[Tuple[str, str], int]:
    """(section, key) -> 行番号（1 始まり）。セクション見出しは key=""。"""
    index: Dict[Tuple[str, str], int] = {}
    section = ""
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, ""), i)
            continue
        m = _KEY_RE.match(line)
        if m and section:
            index.setdefault((section, m.group(1).strip()), i)
    return index


def _gate_violations(suite: str, secs: Dict[str, Dict[str, Any]]) -> List[str]:
    sets = resolve_param_sets(secs["params"])
    out: List[str] = []
    for a, nu, h, _k in sets:
        tag = f"(alpha={a:g}, nu={nu:g}, H={h:g}) " if len(sets) > 1 else ""
        if suite in SOLVER_SUITES:
            out.extend(tag + v for v in param_gate(a, nu, h).violations)
        elif suite in CONVOLUTION_SUITES:
            g = gate_value(a, nu, h)
            if not g > 2.0:
                out.append(f"{tag}alpha*(1-nu)+2H = {g:.4g} <= 2")
    return out


def _consistency(suite: str, secs: Dict[str, Dict[str, Any]], where: Callable[[str, str], int]) -> List[Tuple[int, str]]:
    """キーをまたぐ整合性の検査。型の検査で落ちたキーが関わる項目は飛ばす。"""
    out: List[Tuple[int, str]] = []

    def has(section: str, *keys: str) -> bool:
        return all(k in secs[section] for k in keys)

    c, s = secs["convolution"], secs["solver"]
    if has("convolution", "t_min", "t_max") and c["t_min"] >= c["t_max"]:
        out.append((where("convolution", "t_max"), "t_max は t_min より大きい必要があります"))
    if has("convolution", "increment_min", "increment_max") and c["increment_min"] >= c["increment_max"]:
        out.append((where("convolution", "increment_max"), "increment_max は increment_min より大きい必要があります"))
    if has("solver", "T", "dt"):
        steps = s["T"] / s["dt"]
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            out.append((where("solver", "dt"), f"dt={s['dt']} が T={s['T']} を割り切りません"))
    if (suite in SOLVER_SUITES and has("solver", "convective") and has("spectrum", "model")
            and s["convective"] and secs["spectrum"]["model"] != "torus"):
        out.append((where("spectrum", "model"), "convective=true には model=torus が必要です"))
    if suite == "nclt" and has("nclt", "N_values"):
        n = secs["nclt"]["N_values"]
        if len(n) < 2 or any(b <= a for a, b in zip(n, n[1:])):
            out.append((where("nclt", "N_values"), "N_values は長さ 2 以上の昇順である必要があります"))
    nc = secs["noise_check"]
    if suite == "noise_check" and has("noise_check", "ks", "hursts") and len(nc["ks"]) != len(nc["hursts"]):
        out.append((where("noise_check", "hursts"), "ks と hursts の長さが一致しません"))
    if suite == "holder" and has("holder", "t1", "increment_max") and has("solver", "T"):
        h = secs["holder"]
        if h["t1"] + h["increment_max"] > s["T"] + 1e-12:
            out.append((where("holder", "increment_max"), "t1 + increment_max は solver.T 以下である必要があります"))
    return out


def parse_config(text: str, defaults: Optional[Dict[str, Dict[str, Any]]] = None) -> ExperimentConfig:
    """
    INI テキストを検証済みの ExperimentConfig にする。
    型・範囲・整合性の違反はまとめて ParseError（パラメータ条件の違反も同じ一覧に入れる）。
    パラメータ条件の違反だけのときは GateError。
    """
    defaults = load_defaults() if defaults is None else defaults
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        lineno = getattr(e, "lineno", 0) or 0
        raise ParseError([(lineno, str(e).splitlines()[0])])

    index = _line_index(text)

    def where(section: str, key: str) -> int:
        return index.get((section, key), index.get((section, ""), 0))

    violations: List[Tuple[int, str]] = []
    for section in parser.sections():
        if section not in SCHEMA:
            violations.append((where(section, ""), f"未知のセクション [{section}]"))
            continue
        for key in parser[section]:
            if key not in SCHEMA[section]:
                violations.append((where(section, key), f"[{section}] の未知のキー {key}"))

    secs: Dict[str, Dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        secs[section] = {}
        for key, (conv, check, _doc) in keys.items():
            given = parser.has_option(section, key)
            raw = parser.get(section, key) if given else defaults.get(section, {}).get(key, DEFAULTS[section][key])
            try:
                value = conv(raw)
            except (TypeError, ValueError) as e:
                violations.append((where(section, key), f"{section}.{key}: {e}"))
                continue
            msg = check(value) if check else None
            if msg:
                violations.append((where(section, key), f"{section}.{key}: {msg}"))
                continue
            secs[section][key] = value

    exp = secs["experiment"]
    suite = exp.get("suite")
    gate: List[str] = []
    if suite is not None:
        if len(secs["params"]) == len(SCHEMA["params"]):
            gate = _gate_violations(suite, secs)
        violations.extend(_consistency(suite, secs, where))
    if violations:
        # パラメータ条件の違反も同じ一覧に [params] の行番号で入れる
        gate_line = where("params", "sets" if secs["params"].get("sets") else "alpha")
        violations.extend((gate_line, v) for v in gate)
        raise ParseError(sorted(violations, key=lambda v: v[0]))
    if gate:
        raise GateError(gate)
    return ExperimentConfig(suite=exp["suite"], seed=exp["seed"], output_dir=exp["output_dir"],
                            threads=exp["threads"], sections=secs)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config(f.read())


# ================================================================
# フォーマット一覧
# ================================================================

def config_schema() -> Dict[str, Dict[str, Dict[str, Any]]]:
    """`formats` サブコマンド用。section -> key -> {type, default, description}。"""
    out: Dict[str, Dict[str, Dict[str, Any]]] = {}
    for section, keys in SCHEMA.items():
        out[section] = {}
        for key, (conv, _check, doc) in keys.items():
            options = getattr(conv, "options", None)
            kind = "enum" if options else conv.__name__.lstrip("_")
            entry = {"type": kind, "default": DEFAULTS[section][key], "description": doc}
            if options:
                entry["choices"] = list(options)
            out[section][key] = entry
    return out
