"""
コマンドライン入口。
  python cli.py run --config config/presets/zk_scaling.ini [--seed S] [--threads N] [--out DIR]
  python cli.py gate --alpha A --nu V --hurst H
  python cli.py formats
終了コード: 0 = 全検査合格、1 = 不合格の検査あり、2 = 設定・パラメータの誤り、3 = 実行時エラー。
"""
import argparse
import json
import logging
import sys
from typing import List, Optional

from config_manager import config_schema, load_config
from error_display_util import format_error_display
from report_writer import CSV_COLUMNS, REPORT_FIELDS, SCHEMA_VERSION
from sim_errors import GateError, ParseError, SimulationError
from solver import param_gate
from suites import run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _setup_logging(verbose: int) -> None:
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="[%(levelname)s] %(name)s: %(message)s")


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config).with_overrides(seed=args.seed, threads=args.threads, output_dir=args.out)
    except (ParseError, GateError, ValueError, OSError) as e:
        print(format_error_display(e, "設定の読み込み"), file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_suite(cfg)
    except SimulationError as e:
        print(format_error_display(e, cfg.suite), file=sys.stderr)
        return EXIT_RUNTIME
    for c in report.checks:
        mark = "OK " if c["passed"] else "NG "
        theory = "" if c.get("theory") is None else f" (theory {c['theory']:.6g})"
        print(f"{mark}{c['name']}: {c['estimate']:.6g}{theory}")
    print(f"report: {cfg.output_dir}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _cmd_gate(args: argparse.Namespace) -> int:
    decision = param_gate(args.alpha, args.nu, args.hurst)
    for c in decision.checks:
        print(f"{'OK ' if c.holds else 'NG '}{c.message}")
    print("accepted" if decision.accepted else "rejected")
    return EXIT_OK if decision.accepted else EXIT_CONFIG


def _cmd_formats(_args: argparse.Namespace) -> int:
    doc = {
        "config": config_schema(),
        "csv": CSV_COLUMNS,
        "report": {"schema_version": SCHEMA_VERSION, "fields": REPORT_FIELDS},
    }
    print(json.dumps(doc, ensure_ascii=False, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description="時間分数階確率 Navier-Stokes のスペクトル・シミュレーションと検証スイート")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v で INFO、-vv で DEBUG")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="設定ファイルのスイートを実行する")
    run.add_argument("--config", required=True, help="INI 形式の設定ファイル")
    run.add_argument("--seed", type=int, default=None, help="ルートシードを上書き")
    run.add_argument("--threads", default=None, help="ワーカー数（整数または auto）")
    run.add_argument("--out", default=None, help="出力ディレクトリを上書き")
    run.set_defaults(func=_cmd_run)

    gate = sub.add_parser("gate", help="(alpha, nu, H) の 3 条件を表示する")
    gate.add_argument("--alpha", type=float, required=True)
    gate.add_argument("--nu", type=float, required=True)
    gate.add_argument("--hurst", type=float, required=True)
    gate.set_defaults(func=_cmd_gate)

    formats = sub.add_parser("formats", help="設定キーと CSV / JSON の形式を表示する")
    formats.set_defaults(func=_cmd_formats)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
