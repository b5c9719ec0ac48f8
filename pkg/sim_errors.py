"""
シミュレーション全体で使う例外クラス。
各モジュールはここで定義した例外だけを送出し、CLI / app は
error_display_util.format_error_display で利用者向けに表示する。
"""
from typing import List, Optional, Sequence


class SimulationError(Exception):
    """本パッケージの例外の基底クラス。"""


class DomainError(SimulationError, ValueError):
    """引数が定義域外（alpha, beta, rho, x など）。"""


class ConvergenceError(SimulationError):
    """数値計算が内部許容誤差を満たせなかった。achieved に到達誤差を保持する。"""

    def __init__(self, message: str, achieved: Optional[float] = None):
        super().__init__(message)
        self.achieved = achieved


class EmbeddingError(SimulationError):
    """circulant embedding の固有値が許容値を超えて負になった。"""

    def __init__(self, message: str, min_eigenvalue: float):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class LengthError(SimulationError):
    """元になる系列が短すぎる。"""


class InsufficientReplicates(SimulationError):
    """Monte Carlo の反復数が最小要件を下回る。"""

    def __init__(self, required: int, got: int, context: str = ""):
        where = f"{context}: " if context else ""
        super().__init__(f"{where}replicates={got} は最小 {required} 未満です")
        self.required = required
        self.got = got


class RegressionError(SimulationError):
    """回帰データが退化している（分散ゼロ、点数不足、非正値など）。"""


class TruncationError(SimulationError):
    """スペクトル打ち切りの裾見積もりが許容比を超えた。"""

    def __init__(self, message: str, tail_ratio: float):
        super().__init__(message)
        self.tail_ratio = tail_ratio


class ModelMismatch(SimulationError):
    """SpectralField のモデルが一致しない、またはモデルが操作に対応しない。"""


class GateError(SimulationError):
    """パラメータ条件（alpha*(1-nu)+2H>2 など）を満たさない。"""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("; ".join(self.violations))


class NoContraction(SimulationError):
    """Picard 反復が縮小しない（残差比 >= 1 が連続した）。"""

    def __init__(self, message: str, residuals: Sequence[float]):
        super().__init__(message)
        self.residuals = list(residuals)


class ParseError(SimulationError):
    """設定テキストの違反一覧。各要素は (行番号, メッセージ)。"""

    def __init__(self, violations: Sequence[tuple]):
        self.violations = list(violations)
        lines = []
        for lineno, msg in self.violations:
            prefix = f"line {lineno}: " if lineno else ""
            lines.append(f"{prefix}{msg}")
        super().__init__("\n".join(lines))
