"""
エラー表示用ユーティリティ。
利用者向けに日本語の理由を上に、修正用に技術詳細を下に表示する。
"""
from sim_errors import (
    ConvergenceError,
    DomainError,
    EmbeddingError,
    GateError,
    InsufficientReplicates,
    LengthError,
    ModelMismatch,
    NoContraction,
    ParseError,
    RegressionError,
    TruncationError,
)


def _reason_ja(e: Exception, context: str) -> str:
    """例外の種類と内容から日本語の理由文を推測する。"""
    if isinstance(e, ParseError):
        return "設定ファイルの解析に失敗しました。行番号の箇所をご確認ください。"
    if isinstance(e, GateError):
        return "パラメータが理論の前提条件を満たしていません。alpha・nu・H の組を見直してください。"
    if isinstance(e, InsufficientReplicates):
        return f"反復回数が不足しています（最小 {e.required} 回）。replicates を増やしてください。"
    if isinstance(e, TruncationError):
        return "スペクトル打ち切りの誤差が大きすぎます。モード数 J を増やすか r を大きくしてください。"
    if isinstance(e, NoContraction):
        return "Picard 反復が収束しません。T を小さくしてください。"
    if isinstance(e, ConvergenceError):
        return "特殊関数の数値評価が許容誤差に達しませんでした。"
    if isinstance(e, EmbeddingError):
        return "長期依存ガウス系列の生成（circulant embedding）に失敗しました。共分散モデルをご確認ください。"
    if isinstance(e, LengthError):
        return "ノイズ系列の長さが不足しています。N や T を見直してください。"
    if isinstance(e, RegressionError):
        return "回帰に使うデータが退化しています（分散ゼロまたは点数不足）。"
    if isinstance(e, ModelMismatch):
        return "スペクトルモデルが一致しません。weyl_linear / torus の指定をご確認ください。"
    if isinstance(e, DomainError):
        return "引数が定義域の外です。"
    s = (str(e) or "").lower()
    if isinstance(e, (OSError, PermissionError)) or "permission" in s or "no such file" in s:
        return "ファイルの読み書きに失敗しました。出力先ディレクトリと権限をご確認ください。"
    if "json" in s or "parse" in s or "decode" in s:
        return "データの解析に失敗しました。入力内容をご確認ください。"
    if context:
        return f"{context}の処理中にエラーが発生しました。"
    return "予期しないエラーが発生しました。"


def format_error_display(e: Exception, context: str = "") -> str:
    """
    利用者向けに表示するエラー文を組み立てる。
    上に日本語の理由、下に「詳細（修正用）」として技術メッセージを残す。
    """
    reason = _reason_ja(e, context)
    detail = str(e).strip() or "(詳細なし)"
    return f"{reason}\n\n詳細（修正用）: {detail}"
