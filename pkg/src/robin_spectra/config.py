"""設定管理モジュール.

環境変数から数値計算・ログの設定を読み込み、パッケージ全体で使用する設定を管理する。
"""

from pathlib import Path

from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def _as_float_list(v: str | list[float]) -> list[float]:
    if isinstance(v, str):
        return [float(item) for item in v.split(",") if item.strip()]
    return [float(item) for item in v]


class Settings(BaseSettings):
    """アプリケーション設定.

    環境変数から設定を読み込む。.envファイルもサポート。
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # 切断設定
    eta: float = Field(
        default=2.0,
        description="切断高さη（η > eta_floor）",
    )
    eta_floor: float = Field(
        default=1.0,
        description="ηの許容下限p（モジュラー曲面では1）",
    )
    eta_candidates: str | list[float] = Field(
        default=[1.5, 2.0, 3.0, 5.0],
        description="Ψ写像が退化したときに試すηの候補",
    )
    newton_tol: float = Field(
        default=1e-13,
        description="Newton法の相対許容誤差",
    )
    max_iter: int = Field(
        default=50,
        description="Newton法の最大反復回数",
    )

    # 特殊関数設定
    contour_nodes: int = Field(
        default=64,
        description="Cauchy積分の台形則ノード数",
    )
    derivative_radius: float = Field(
        default=0.01,
        description="s方向の正則微分に使う円の半径",
    )
    bessel_exponent_clamp: float = Field(
        default=700.0,
        description="Bessel積分の指数クランプ値",
    )

    # 曲面設定
    convergence_margin: float = Field(
        default=0.1,
        description="Eisenstein級数の直接和に要求する Re s ≥ 1 + δ のδ",
    )
    lattice_row_budget: int = Field(
        default=400,
        description="直接和で許容する格子行数の上限",
    )
    oracle_tol: float = Field(
        default=1e-13,
        description="定数項オラクルの許容誤差",
    )
    fourier_terms: int = Field(
        default=12,
        description="固有関数データに保持するFourier係数の数M_max",
    )

    # 根探索設定
    max_subdivision_depth: int = Field(
        default=12,
        description="偏角原理による矩形分割の最大深さ",
    )
    infinity_threshold: float = Field(
        default=1e-10,
        description="|Q| < 閾値·|η^s| でγ=∞とみなす閾値",
    )
    ramification_threshold: float = Field(
        default=1e-6,
        description="分岐点判定の相対閾値",
    )
    half_point_radius: float = Field(
        default=1e-6,
        description="s=1/2 の対数形式を使う円の半径",
    )

    # 解析接続設定
    continuation_order: int = Field(
        default=24,
        description="各円板で保持するTaylor係数の次数上限",
    )
    disc_radius_factor: float = Field(
        default=0.6,
        description="円板半径 = 係数 × 特異点（標本化境界）までの距離",
    )
    sampling_floor: float = Field(
        default=1.1,
        description="定数項オラクルで標本化できる Re s の下限",
    )
    sample_heights: str | list[float] = Field(
        default=[1.05, 1.5],
        description="βを抽出する2つの高さ y1, y2",
    )
    max_disc_radius: float = Field(
        default=2.5,
        description="標本化円の最大半径",
    )

    # ログ設定
    log_level: str = Field(
        default="INFO",
        description="ログレベル",
    )
    log_file: Path = Field(
        default=Path("logs/robin_spectra.log"),
        description="ログファイルパス",
    )
    log_rotation: str = Field(
        default="1 day",
        description="ログローテーション設定",
    )
    log_retention: str = Field(
        default="30 days",
        description="ログ保持期間",
    )

    @field_validator("eta_candidates", mode="after")
    @classmethod
    def ensure_float_list(cls, v: str | list[float]) -> list[float]:
        """文字列またはリストを浮動小数点のリストに変換."""
        return _as_float_list(v)

    @field_validator("sample_heights", mode="after")
    @classmethod
    def validate_sample_heights(cls, v: str | list[float]) -> list[float]:
        """標本化高さの検証."""
        v = _as_float_list(v)
        if len(v) != 2 or v[0] == v[1] or min(v) <= 0:
            raise ValueError(
                f"Invalid sample heights: {v}. Must be two distinct positive values"
            )
        return v

    @field_validator("newton_tol")
    @classmethod
    def validate_newton_tol(cls, v: float) -> float:
        """Newton許容誤差の検証."""
        if v < 1e-14:
            raise ValueError(f"Invalid newton tolerance: {v}. Must be >= 1e-14")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """ログレベルの検証."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Invalid log level: {v}. Must be one of {valid_levels}")
        return v_upper

    @model_validator(mode="after")
    def validate_eta(self) -> "Settings":
        """ηが許容下限より大きいことを検証."""
        if self.eta <= self.eta_floor:
            raise ValueError(
                f"Invalid eta: {self.eta}. Must be greater than eta_floor={self.eta_floor}"
            )
        return self


# グローバル設定インスタンス
settings = Settings()
