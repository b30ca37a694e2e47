"""例外定義.

数値計算の各段階で発生するエラーを表す例外クラス群。
計算を続行できない「フラグ」はここで定義する例外として送出する。
"""


class SpectralError(Exception):
    """robin_spectraの基底例外."""


class PoleError(SpectralError):
    """関数の極で評価しようとした場合のエラー."""

    def __init__(self, message: str, location: complex, order: int = 1) -> None:
        """初期化.

        Args:
            message: エラーメッセージ
            location: 極の位置（推定値）
            order: 極の位数（推定値）

        """
        super().__init__(message)
        self.location = location
        self.order = order


class ScatteringPoleError(PoleError):
    """散乱係数φの極."""


class DomainError(SpectralError):
    """定義域外の引数."""


class CutoffOverflowError(SpectralError):
    """格子和の打ち切りが予算を超えた場合のエラー."""


class NonFiniteSampleError(SpectralError):
    """円周上の標本値が有限でない場合のエラー."""

    def __init__(self, message: str, node: complex) -> None:
        """初期化."""
        super().__init__(message)
        self.node = node


class IndeterminateGammaError(SpectralError):
    """PとQが同時に消えてγが不定となる場合のエラー."""


class DegenerateDenominatorError(SpectralError):
    """β(γ)の分母が退化した場合のエラー."""


class NonConvergenceError(SpectralError):
    """反復法が収束しなかった場合のエラー."""


class RamificationError(SpectralError):
    """分岐点（自己対の消失）を検出した場合のエラー."""

    def __init__(self, message: str, location: complex) -> None:
        """初期化."""
        super().__init__(message)
        self.location = location


class StepCollapseError(SpectralError):
    """曲線追跡のステップ幅が下限を下回った場合のエラー."""

    def __init__(self, message: str, gamma: complex, s: complex) -> None:
        """初期化."""
        super().__init__(message)
        self.gamma = gamma
        self.s = s


class PoleCrossingError(SpectralError):
    """追跡経路がγの極を横切る場合のエラー."""


class TailTooLargeError(SpectralError):
    """Fourier級数の打ち切り誤差が許容値を超える場合のエラー."""


class ExcludedParameterError(SpectralError):
    """公式が除外している s（0, 1, 1/2 など）での評価."""


class QuadratureBudgetError(SpectralError):
    """数値積分が予算内で収束しなかった場合のエラー."""


class DegenerateTruncationError(SpectralError):
    """選んだηで定数項が退化した（γ=∞など）場合のエラー."""


class EtaExhaustedError(SpectralError):
    """候補のηがすべて退化した場合のエラー."""


class NonUnimodularLimitError(SpectralError):
    """β(1/2) が ±1 にならない場合のエラー."""


class RadiusExhaustedError(SpectralError):
    """円板連鎖が目標点に届かない場合のエラー."""


class DegeneratePairingError(SpectralError):
    """s=1/2 での自己対の極限も退化した場合のエラー."""
