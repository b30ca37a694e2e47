"""データモデル定義.

スペクトル点・定数項係数・円板連鎖など、各モジュールで受け渡すデータモデルを定義する。
"""

import cmath
import math
from enum import Enum
from pathlib import Path

from dotenv import dotenv_values
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from .config import Settings

# γ=∞（Dirichlet条件）の表現
INFINITY = complex(math.inf, 0.0)

# s=1/2 で対数形式に切り替える許容幅
HALF_POINT_TOL = 1e-9


def is_infinite(value: complex) -> bool:
    """値が∞（またはNaN）かどうか."""
    return cmath.isinf(value) or cmath.isnan(value)


def parse_complex(text: str) -> complex:
    """"0.5+3i" や "inf" のような文字列を複素数に変換.

    Args:
        text: 数値文字列（虚数単位は i または j）

    Returns:
        複素数（"inf" は INFINITY）

    Raises:
        ValueError: 解釈できない場合

    """
    cleaned = text.strip().replace(" ", "").lower()
    if cleaned in ("inf", "+inf", "infinity"):
        return INFINITY
    return complex(cleaned.replace("i", "j"))


class DiscSpec(BaseModel):
    """Cauchy積分に使う円板."""

    model_config = ConfigDict(frozen=True)

    center: complex = Field(..., description="中心")
    radius: float = Field(..., gt=0, description="半径")
    order: int = Field(..., ge=0, le=256, description="Taylor係数の次数")


class Window(BaseModel):
    """s平面の矩形領域."""

    model_config = ConfigDict(frozen=True)

    re_min: float = Field(..., description="実部の下限")
    re_max: float = Field(..., description="実部の上限")
    im_min: float = Field(..., description="虚部の下限")
    im_max: float = Field(..., description="虚部の上限")

    @model_validator(mode="after")
    def validate_bounds(self) -> "Window":
        """上下限の順序を検証."""
        if self.re_min > self.re_max or self.im_min > self.im_max:
            raise ValueError(f"Invalid window: {self}")
        return self

    @classmethod
    def parse(cls, text: str) -> "Window":
        """"re_min,re_max,im_min,im_max" 形式の文字列から生成.

        Args:
            text: カンマ区切りの4つの数値

        Returns:
            矩形領域

        Raises:
            ValueError: 形式が不正な場合

        """
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"Invalid window: {text!r}. Expected 4 values")
        re_min, re_max, im_min, im_max = (float(p) for p in parts)
        return cls(re_min=re_min, re_max=re_max, im_min=im_min, im_max=im_max)

    @property
    def is_empty(self) -> bool:
        """面積が0かどうか."""
        return self.re_min == self.re_max or self.im_min == self.im_max

    def contains(self, s: complex, slack: float = 0.0) -> bool:
        """点が（余裕を含めて）領域内にあるか."""
        return (
            self.re_min - slack <= s.real <= self.re_max + slack
            and self.im_min - slack <= s.imag <= self.im_max + slack
        )


class SurfacePoint(BaseModel):
    """上半平面の点 z = x + iy."""

    model_config = ConfigDict(frozen=True)

    x: float = Field(..., ge=-0.5, le=0.5, description="実部（基本領域の幅に正規化）")
    y: float = Field(..., gt=0, description="虚部")

    @property
    def z(self) -> complex:
        """複素数としての値."""
        return complex(self.x, self.y)


class TruncationConfig(BaseModel):
    """切断高さηとNewton法の設定."""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(..., description="切断高さη")
    eta_floor: float = Field(default=1.0, gt=0, description="ηの許容下限p")
    newton_tol: float = Field(default=1e-13, ge=1e-14, description="Newton法の許容誤差")
    max_iter: int = Field(default=50, gt=0, description="Newton法の最大反復回数")

    @model_validator(mode="after")
    def validate_eta(self) -> "TruncationConfig":
        """η > p を検証."""
        if self.eta <= self.eta_floor:
            raise ValueError(
                f"Invalid eta: {self.eta}. Must be greater than eta_floor={self.eta_floor}"
            )
        return self

    @classmethod
    def from_settings(cls, settings: Settings) -> "TruncationConfig":
        """グローバル設定から生成."""
        return cls(
            eta=settings.eta,
            eta_floor=settings.eta_floor,
            newton_tol=settings.newton_tol,
            max_iter=settings.max_iter,
        )

    def with_eta(self, eta: float) -> "TruncationConfig":
        """ηだけを差し替えた設定を返す."""
        return TruncationConfig(
            eta=eta,
            eta_floor=self.eta_floor,
            newton_tol=self.newton_tol,
            max_iter=self.max_iter,
        )


class SpectralPoint(BaseModel):
    """固有値曲線上の点 (s, ŝ, λ, γ, η)."""

    model_config = ConfigDict(frozen=True)

    s: complex = Field(..., description="スペクトルパラメータ")
    gamma: complex = Field(..., description="Robinパラメータ（∞はINFINITY）")
    eta: float = Field(..., description="切断高さ")
    multiplicity: int = Field(default=1, ge=1, description="根の重複度")
    ramified: bool = Field(default=False, description="分岐点フラグ")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def s_hat(self) -> complex:
        """ŝ = 1 − s."""
        return 1 - self.s

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lam(self) -> complex:
        """固有値 λ = s(1 − s)."""
        return self.s * (1 - self.s)

    @property
    def is_dirichlet(self) -> bool:
        """γ=∞（Dirichlet条件）かどうか."""
        return is_infinite(self.gamma)


class ConstantTermCoeffs(BaseModel):
    """定数項 a·y^s + b·y^{1−s}（s=1/2 では a√y + b·ln(y)√y）の係数."""

    model_config = ConfigDict(frozen=True)

    a: complex = Field(..., description="y^s（対数形式では√y）の係数")
    b: complex = Field(..., description="y^{1−s}（対数形式ではln(y)√y）の係数")
    log_form: bool = Field(default=False, description="s=1/2 の対数形式かどうか")

    @model_validator(mode="after")
    def validate_nonzero(self) -> "ConstantTermCoeffs":
        """(a, b) ≠ (0, 0) を検証."""
        if self.a == 0 and self.b == 0:
            raise ValueError("Invalid constant term: a and b vanish simultaneously")
        return self

    def swapped(self) -> "ConstantTermCoeffs":
        """s ↔ 1−s に対応する係数の入れ替え."""
        if self.log_form:
            return self
        return ConstantTermCoeffs(a=self.b, b=self.a)


class EigenfunctionData(BaseModel):
    """固有関数の定数項とFourier係数."""

    point: SpectralPoint = Field(..., description="スペクトル点")
    coeffs: ConstantTermCoeffs = Field(..., description="定数項の係数")
    fourier: dict[int, complex] = Field(
        default_factory=dict,
        description="Fourier係数 a_m（a_m = a_{−m}、m > 0 のみ保持）",
    )
    truncated: bool = Field(default=True, description="η より上で定数項を切り落とすか")

    @field_validator("fourier")
    @classmethod
    def validate_fourier(cls, v: dict[int, complex]) -> dict[int, complex]:
        """a_m = a_{−m} を検証し、正のmに正規化."""
        normalized: dict[int, complex] = {}
        for m, value in v.items():
            if m == 0:
                raise ValueError("Invalid Fourier index: 0 belongs to the constant term")
            key = abs(m)
            if key in normalized and abs(normalized[key] - value) > 1e-12 * (
                abs(value) + 1e-300
            ):
                raise ValueError(f"Invalid Fourier coefficients: a_{m} != a_{-m}")
            normalized[key] = value
        return dict(sorted(normalized.items()))

    def coefficient(self, m: int) -> complex:
        """a_m を返す（未保持なら0）."""
        return self.fourier.get(abs(m), 0j)


class PairingMethod(str, Enum):
    """自己対の計算方法."""

    MSR_FORMULA = "msr_formula"
    QUADRATURE = "quadrature"


class PairingValue(BaseModel):
    """切断Eisenstein級数の自己対 (M^η[s], M^η[s̄])."""

    value: complex = Field(..., description="値")
    via: PairingMethod = Field(..., description="計算方法")
    pole: bool = Field(default=False, description="βの極にあたるか")

    @model_validator(mode="after")
    def validate_finite(self) -> "PairingValue":
        """極フラグがない限り有限."""
        if not self.pole and is_infinite(self.value):
            raise ValueError("Invalid pairing: non-finite value without pole flag")
        return self


class PoleFlag(BaseModel):
    """検出した極."""

    model_config = ConfigDict(frozen=True)

    location: complex = Field(..., description="位置の推定値")
    order: int = Field(..., ge=1, description="位数の推定値")


class Disc(BaseModel):
    """Taylor円板."""

    center: complex = Field(..., description="中心")
    radius: float = Field(..., gt=0, description="収束半径の推定値")
    coeffs: list[complex] = Field(..., description="除去済み関数のTaylor係数")
    sample_radius: float = Field(..., gt=0, description="係数を求めた円の半径")
    noise: float = Field(default=0.0, ge=0, description="スケール済み係数の雑音水準")
    sampled: bool = Field(default=True, description="格子和から直接標本化したか")

    @field_validator("coeffs")
    @classmethod
    def validate_coeffs(cls, v: list[complex]) -> list[complex]:
        """係数が有限であることを検証."""
        if not v or any(is_infinite(c) for c in v):
            raise ValueError("Invalid disc coefficients: must be finite and nonempty")
        return v


class DiscChain(BaseModel):
    """βの解析接続を運ぶ円板列."""

    discs: list[Disc] = Field(default_factory=list, description="円板（経路順）")
    pole_flags: list[PoleFlag] = Field(default_factory=list, description="検出した極")

    @model_validator(mode="after")
    def validate_overlap(self) -> "DiscChain":
        """連続する円板が重なることを検証."""
        for prev, nxt in zip(self.discs, self.discs[1:], strict=False):
            if abs(nxt.center - prev.center) >= prev.radius:
                raise ValueError(
                    f"Invalid chain: discs at {prev.center} and {nxt.center} do not overlap"
                )
        return self


class PathSpec(BaseModel):
    """s平面またはγ平面の経路."""

    waypoints: list[complex] = Field(..., min_length=2, description="経由点")
    max_step: float = Field(default=0.5, gt=0, description="最大ステップ幅")
    min_step: float = Field(default=1e-6, gt=0, description="最小ステップ幅")

    @model_validator(mode="after")
    def validate_steps(self) -> "PathSpec":
        """min_step ≤ max_step を検証."""
        if self.min_step > self.max_step:
            raise ValueError(
                f"Invalid path steps: min_step={self.min_step} > max_step={self.max_step}"
            )
        return self

    @classmethod
    def parse(cls, text: str, **kwargs: float) -> "PathSpec":
        """"a;b;c" 形式の文字列から生成（単一点は長さ0の経路）."""
        points = [parse_complex(p) for p in text.split(";") if p.strip()]
        if len(points) == 1:
            points.append(points[0])
        return cls(waypoints=points, **kwargs)

    @property
    def length(self) -> float:
        """経路長."""
        return sum(
            abs(b - a) for a, b in zip(self.waypoints, self.waypoints[1:], strict=False)
        )


class EigenfunctionKind(str, Enum):
    """固有関数の種類."""

    TRUNCATED_SERIES = "truncated_series"
    CONJUGATED_SERIES = "conjugated_series"
    DERIVATIVE_SERIES = "derivative_series"


class RamificationPoint(BaseModel):
    """分岐点の候補."""

    s: complex = Field(..., description="位置")
    order: int = Field(..., ge=1, description="γ'(s) の零点の位数")
    pairing_ratio: float = Field(..., description="|自己対| / 典型スケール")
    verified: bool = Field(..., description="自己対の消失を確認できたか")


class CheckResult(BaseModel):
    """検証項目の結果."""

    name: str = Field(..., description="検証項目名")
    tolerance: float = Field(..., description="許容値")
    observed: float = Field(..., description="観測値")
    minimum: bool = Field(default=False, description="許容値を下限として扱うか")
    message: str = Field(default="", description="失敗時のエラー内容")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        """許容値を満たすかどうか."""
        if not math.isfinite(self.observed):
            return False
        if self.minimum:
            return self.observed >= self.tolerance
        return self.observed <= self.tolerance


# 設定ファイルのキーとRunConfigのフィールドの対応
_RUN_CONFIG_ALIASES = {
    "gamma": "gamma_values",
    "out": "output_path",
    "check": "checks",
}


class RunConfig(BaseModel):
    """CLIの実行設定.

    key=value 形式の設定ファイルとコマンドラインのフラグから組み立てる。
    同名のキーはフラグが優先する。
    """

    eta: float = Field(default=2.0, gt=1, description="切断高さη")
    window: Window = Field(
        default=Window(re_min=0.0, re_max=1.0, im_min=0.0, im_max=30.0),
        description="s平面の探索窓",
    )
    gamma_values: list[complex] = Field(
        default_factory=lambda: [INFINITY], description="Robinパラメータの一覧"
    )
    path: str | None = Field(default=None, description="経路（\"a;b;c\" 形式）")
    max_step: float = Field(default=0.5, gt=0, description="経路の最大ステップ幅")
    tol: float | None = Field(default=None, gt=0, description="許容誤差の上書き")
    output_path: Path | None = Field(default=None, description="CSVの出力先")
    phi_scale: complex = Field(default=1 + 0j, description="φに掛ける係数（故障注入用）")
    checks: list[str] = Field(default_factory=list, description="実行する検証項目")

    @field_validator("window", mode="before")
    @classmethod
    def parse_window(cls, v: object) -> object:
        """文字列の窓を変換."""
        return Window.parse(v) if isinstance(v, str) else v

    @field_validator("gamma_values", mode="before")
    @classmethod
    def parse_gamma_values(cls, v: object) -> object:
        """カンマ区切りのγを変換（"inf" はDirichlet条件）."""
        if isinstance(v, str):
            return [parse_complex(item) for item in v.split(",") if item.strip()]
        if isinstance(v, list | tuple):
            return [parse_complex(item) if isinstance(item, str) else item for item in v]
        return v

    @field_validator("phi_scale", mode="before")
    @classmethod
    def parse_phi_scale(cls, v: object) -> object:
        """文字列の係数を変換."""
        return parse_complex(v) if isinstance(v, str) else v

    @field_validator("checks", mode="before")
    @classmethod
    def parse_checks(cls, v: object) -> object:
        """カンマ区切りの検証項目名を変換."""
        if isinstance(v, str):
            return [item.strip() for item in v.split(",") if item.strip()]
        return v

    @field_validator("path")
    @classmethod
    def validate_path(cls, v: str | None) -> str | None:
        """経路が解釈できることを検証."""
        if v is not None:
            PathSpec.parse(v)
        return v

    @property
    def path_spec(self) -> PathSpec:
        """経路（未指定なら ValueError）."""
        if self.path is None:
            raise ValueError("Invalid run config: path is required")
        return PathSpec.parse(self.path, max_step=self.max_step)

    @classmethod
    def from_sources(
        cls, config_file: Path | None = None, **overrides: object
    ) -> "RunConfig":
        """設定ファイルとフラグから生成.

        Args:
            config_file: key=value 形式の設定ファイル
            **overrides: フラグの値（None は未指定として無視）

        Returns:
            実行設定

        Raises:
            ValueError: 未知のキーや不正な値がある場合

        """
        values: dict[str, object] = {}
        if config_file is not None:
            for key, value in dotenv_values(config_file).items():
                name = key.strip().lower().replace("-", "_")
                name = _RUN_CONFIG_ALIASES.get(name, name)
                if name not in cls.model_fields:
                    raise ValueError(f"Invalid config key: {key}")
                if value is not None:
                    values[name] = value
        for key, value in overrides.items():
            if value is None or value == ():
                continue
            values[_RUN_CONFIG_ALIASES.get(key, key)] = (
                list(value) if isinstance(value, tuple) else value
            )
        return cls.model_validate(values)
