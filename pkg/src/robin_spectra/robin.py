"""Robin条件モジュール.

固定した切断高さηでの対応 s ↔ λ ↔ γ を扱う。
定数項の汎関数 Q = M₀(η), P = M₀'(η)、Robin条件 P + γQ = 0 の根、
η方向の流れ、切断Fourier級数の評価を提供する。
"""

import cmath
import math
from collections.abc import Callable
from functools import lru_cache

import numpy as np
from loguru import logger

from .config import settings
from .exceptions import (
    DegenerateDenominatorError,
    DegenerateTruncationError,
    DomainError,
    ExcludedParameterError,
    IndeterminateGammaError,
    TailTooLargeError,
)
from .models import (
    HALF_POINT_TOL,
    INFINITY,
    ConstantTermCoeffs,
    DiscSpec,
    EigenfunctionData,
    SpectralPoint,
    SurfacePoint,
    TruncationConfig,
    Window,
    is_infinite,
)
from .modular_surface import ScatteringData, modular_surface
from .rootfinding import ZeroFinder
from .special_functions import bessel_k, holo_derivative

# 1/2 の近くで半級数を使う範囲と、その係数を求める円の半径
HALF_SERIES_RANGE = 0.02
HALF_SERIES_RADIUS = 0.1
HALF_SERIES_ORDER = 24

# 出力するスペクトル点に課す Robin 残差の上限
ROBIN_RESIDUAL_TOL = 1e-9


def lambda_of_s(s: complex) -> complex:
    """λ = s(1 − s)."""
    s = complex(s)
    return s * (1 - s)


def s_of_lambda(lam: complex) -> complex:
    """λ = s(1−s) の標準的な根 s = 1/2 + √(1/4 − λ).

    平方根は実部 ≥ 0、実部が0のときは虚部 ≥ 0 の枝を取る。
    """
    root = cmath.sqrt(0.25 - complex(lam))
    if root.real < 0 or (root.real == 0 and root.imag < 0):
        root = -root
    return 0.5 + root


def _as_coeffs(beta: complex | ConstantTermCoeffs, s: complex) -> ConstantTermCoeffs:
    if isinstance(beta, ConstantTermCoeffs):
        return beta
    if abs(s - 0.5) <= HALF_POINT_TOL:
        # y^s + βy^{1−s} は s=1/2 で (1+β)√y
        if 1 + beta == 0:
            raise DegenerateTruncationError(f"Constant term 1+beta vanishes at s={s}")
        return ConstantTermCoeffs(a=1 + complex(beta), b=0, log_form=True)
    return ConstantTermCoeffs(a=1, b=complex(beta))


def constant_term_PQ(
    s: complex, beta: complex | ConstantTermCoeffs, cfg: TruncationConfig
) -> tuple[complex, complex]:
    """定数項の汎関数 Q = M₀[s](η), P = M₀'[s](η).

    Args:
        s: スペクトルパラメータ
        beta: βの値（定数項 y^s + βy^{1−s}）または係数 (a, b)
        cfg: 切断設定

    Returns:
        (Q, P)

    """
    s = complex(s)
    coeffs = _as_coeffs(beta, s)
    eta = cfg.eta
    a, b = coeffs.a, coeffs.b
    if coeffs.log_form:
        root = math.sqrt(eta)
        log_eta = math.log(eta)
        q = root * (a + b * log_eta)
        p = a / (2 * root) + b * (log_eta + 2) / (2 * root)
        return q, p
    q = a * eta**s + b * eta ** (1 - s)
    p = a * s * eta ** (s - 1) + b * (1 - s) * eta ** (-s)
    return q, p


class ConstantTermFamily:
    """正則な定数項の族 A(s)y^s + B(s)y^{1−s}.

    (A, B) = (φの分母, φの分子) とすると族はsについて整関数になり、
    βの極やs=1でも Q̂, P̂ を評価できる。β(1/2) = −1 の曲面では
    s=1/2 で族が恒等的に消えるため (s−1/2) で割り、1/2 の近くでは
    Taylor級数で評価する。割った族の s=1/2 での値は対数形式の定数項になる。
    """

    def __init__(self, surface: ScatteringData, eta: float) -> None:
        """初期化.

        Args:
            surface: 散乱データ
            eta: 切断高さ

        """
        self.surface = surface
        self.eta = eta
        self.log_eta = math.log(eta)
        a_half = complex(surface.denominator(0.5))
        b_half = complex(surface.numerator(0.5))
        self.divided = abs(a_half + b_half) <= 1e-12 * (abs(a_half) + abs(b_half))
        self._half_series: np.ndarray | None = None
        self._log_coeffs: ConstantTermCoeffs | None = None

    def weights(self, s: complex) -> tuple[complex, complex]:
        """(A(s), B(s))."""
        return complex(self.surface.denominator(s)), complex(self.surface.numerator(s))

    def raw(self, s: complex) -> np.ndarray:
        """割る前の [Q̂(s), P̂(s)]."""
        s = complex(s)
        a, b = self.weights(s)
        up = self.eta**s
        down = self.eta ** (1 - s)
        q = a * up + b * down
        p = a * s * up / self.eta + b * (1 - s) * down / self.eta
        return np.array([q, p])

    @property
    def half_series(self) -> np.ndarray:
        """族（割る場合は割った族）の s=1/2 でのTaylor係数（形状 (次数+1, 2)）."""
        if self._half_series is None:
            disc = DiscSpec(
                center=0.5, radius=HALF_SERIES_RADIUS, order=HALF_SERIES_ORDER + 1
            )
            coeffs = holo_derivative(self.raw, disc)
            self._half_series = coeffs[1:] if self.divided else coeffs[:-1]
        return self._half_series

    def log_coeffs(self) -> ConstantTermCoeffs:
        """s=1/2 での対数形式の係数 a = A'+B', b = A−B."""
        if self._log_coeffs is None:
            if not self.divided:
                a, b = self.weights(0.5)
                self._log_coeffs = ConstantTermCoeffs(a=a + b, b=0, log_form=True)
            else:
                series = holo_derivative(
                    lambda s: np.array(self.weights(s)),
                    DiscSpec(center=0.5, radius=HALF_SERIES_RADIUS, order=1),
                )
                self._log_coeffs = ConstantTermCoeffs(
                    a=series[1, 0] + series[1, 1],
                    b=series[0, 0] - series[0, 1],
                    log_form=True,
                )
        return self._log_coeffs

    def near_half(self, s: complex) -> bool:
        """半級数で評価する範囲か."""
        return self.divided and abs(s - 0.5) < HALF_SERIES_RANGE

    def __call__(self, s: complex) -> tuple[complex, complex]:
        """(Q̂(s), P̂(s))."""
        s = complex(s)
        if self.near_half(s):
            t = s - 0.5
            powers = t ** np.arange(self.half_series.shape[0])
            q, p = powers @ self.half_series
            return complex(q), complex(p)
        q, p = self.raw(s)
        if self.divided:
            return complex(q / (s - 0.5)), complex(p / (s - 0.5))
        return complex(q), complex(p)

    def scales(self, s: complex) -> tuple[float, float]:
        """Q̂, P̂ の典型的な大きさ（項ごとの絶対値の和）."""
        s = complex(s)
        if self.near_half(s):
            coeffs = self.log_coeffs()
            root = math.sqrt(self.eta)
            magnitude = abs(coeffs.a) + abs(coeffs.b) * max(1.0, abs(self.log_eta))
            return root * magnitude, magnitude * (1 + abs(self.log_eta)) / root
        a, b = self.weights(s)
        up = abs(self.eta**s)
        down = abs(self.eta ** (1 - s))
        scale_q = abs(a) * up + abs(b) * down
        scale_p = (abs(a * s) * up + abs(b * (1 - s)) * down) / self.eta
        if self.divided:
            distance = abs(s - 0.5)
            return scale_q / distance, scale_p / distance
        return scale_q, scale_p

    def coeffs(self, s: complex) -> ConstantTermCoeffs:
        """s での定数項の係数（__call__ と同じ正規化、1/2 では対数形式）."""
        s = complex(s)
        if self.divided and abs(s - 0.5) <= HALF_POINT_TOL:
            return self.log_coeffs()
        a, b = self.weights(s)
        if self.divided:
            return ConstantTermCoeffs(a=a / (s - 0.5), b=b / (s - 0.5))
        return ConstantTermCoeffs(a=a, b=b)


@lru_cache(maxsize=64)
def constant_term_family(surface: ScatteringData, eta: float) -> ConstantTermFamily:
    """曲面と高さごとに定数項の族を共有する."""
    return ConstantTermFamily(surface, eta)


def family_for(
    cfg: TruncationConfig, surface: ScatteringData | None = None
) -> ConstantTermFamily:
    """設定に対応する定数項の族."""
    return constant_term_family(surface or modular_surface(), cfg.eta)


def gamma_of_s(
    s: complex, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> complex:
    """Robinパラメータ γ(s) = −P(s)/Q(s).

    Args:
        s: スペクトルパラメータ
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）

    Returns:
        γ(s)（Q(s) = 0 のときは INFINITY）

    Raises:
        IndeterminateGammaError: P と Q が同時に消える場合

    """
    family = family_for(cfg, surface)
    q, p = family(s)
    scale_q, scale_p = family.scales(s)
    threshold = settings.infinity_threshold
    if abs(q) <= threshold * scale_q:
        if abs(p) <= threshold * scale_p:
            raise IndeterminateGammaError(f"P and Q vanish simultaneously at s={s}")
        return INFINITY
    return -p / q


def beta_from_gamma(gamma: complex, s: complex, cfg: TruncationConfig) -> complex:
    """(s, γ) を Robin 条件に適合させる β.

    β = −(γη^s + sη^{s−1}) / (γη^{1−s} + (1−s)η^{−s})、γ=∞ では −η^{2s−1}。

    Raises:
        DegenerateDenominatorError: 分母が閾値を下回る場合

    """
    s = complex(s)
    eta = cfg.eta
    if is_infinite(gamma):
        return -(eta ** (2 * s - 1))
    gamma = complex(gamma)
    first = gamma * eta ** (1 - s)
    second = (1 - s) * eta ** (-s)
    denominator = first + second
    if abs(denominator) <= settings.infinity_threshold * (abs(first) + abs(second)):
        raise DegenerateDenominatorError(
            f"beta(gamma) denominator vanishes at s={s}, gamma={gamma}"
        )
    return -(gamma * eta**s + s * eta ** (s - 1)) / denominator


def robin_function(
    gamma: complex, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> Callable[[complex], complex]:
    """Robin条件の関数 F(s) = P̂(s) + γQ̂(s)（γ=∞ では Q̂(s)）."""
    family = family_for(cfg, surface)
    if is_infinite(gamma):
        return lambda s: family(s)[0]
    gamma = complex(gamma)

    def f(s: complex) -> complex:
        q, p = family(s)
        return p + gamma * q

    return f


def robin_residual(point: SpectralPoint, surface: ScatteringData | None = None) -> float:
    """スペクトル点での Robin 条件の相対残差.

    |P + γQ| / (|P| + |γQ|)（γ=∞ では |Q| / |η^s|）をスケールつきで評価する。
    """
    family = constant_term_family(surface or modular_surface(), point.eta)
    q, p = family(point.s)
    scale_q, scale_p = family.scales(point.s)
    if point.is_dirichlet:
        return abs(q) / scale_q
    gamma = complex(point.gamma)
    return abs(p + gamma * q) / (scale_p + abs(gamma) * scale_q)


def solve_robin_roots(
    gamma: complex,
    window: Window,
    cfg: TruncationConfig,
    surface: ScatteringData | None = None,
) -> list[SpectralPoint]:
    """矩形領域内の Robin 固有値 s をすべて求める.

    Args:
        gamma: Robinパラメータ（INFINITY でDirichlet条件）
        window: s平面の矩形
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）

    Returns:
        スペクトル点のリスト（Im s、Re s の順）

    Raises:
        NonConvergenceError: 根探索が収束しない場合

    """
    f = robin_function(gamma, cfg, surface)
    finder = ZeroFinder(
        f,
        tol=cfg.newton_tol,
        max_iter=cfg.max_iter,
        max_depth=settings.max_subdivision_depth,
        ramification_threshold=settings.ramification_threshold,
    )
    points: list[SpectralPoint] = []
    for root in finder.find(window):
        point = SpectralPoint(
            s=root.location,
            gamma=gamma,
            eta=cfg.eta,
            multiplicity=root.multiplicity,
            ramified=root.ramified,
        )
        residual = robin_residual(point, surface)
        if residual > ROBIN_RESIDUAL_TOL:
            logger.warning(
                f"Dropping root s={root.location}: Robin residual {residual:.3e}"
            )
            continue
        points.append(point)
    logger.info(f"Found {len(points)} roots for gamma={gamma} in {window}")
    return points


def eta_flow(s: complex, coeffs: ConstantTermCoeffs, eta: float) -> tuple[complex, complex]:
    """高さの関数としてのRobinパラメータ γ_s(η) = −v₀'(η)/v₀(η) とその η 微分.

    Args:
        s: スペクトルパラメータ
        coeffs: 定数項の係数
        eta: 高さ

    Returns:
        (γ_s(η), dγ_s/dη)（v₀(η) = 0 のときは両方 INFINITY）

    """
    s = complex(s)
    a, b = coeffs.a, coeffs.b
    if coeffs.log_form:
        log_eta = math.log(eta)
        root = math.sqrt(eta)
        value = root * (a + b * log_eta)
        slope = (a + b * (log_eta + 2)) / (2 * root)
        curvature = -(a + b * log_eta) / (4 * eta * root)
        if value == 0:
            return INFINITY, INFINITY
        return -slope / value, (slope**2 - curvature * value) / value**2

    value = a * eta**s + b * eta ** (1 - s)
    scale = abs(a * eta**s) + abs(b * eta ** (1 - s))
    if abs(value) < settings.infinity_threshold * scale:
        return INFINITY, INFINITY
    slope = a * s * eta ** (s - 1) + b * (1 - s) * eta ** (-s)
    numerator = (
        a**2 * s * eta ** (2 * s - 2)
        + 4 * a * b * s * (1 - s) / eta
        + b**2 * (1 - s) * eta ** (-2 * s)
    )
    return -slope / value, numerator / value**2


def constant_term_value(coeffs: ConstantTermCoeffs, s: complex, y: float) -> complex:
    """定数項 v₀(y)."""
    if coeffs.log_form:
        return math.sqrt(y) * (coeffs.a + coeffs.b * math.log(y))
    return coeffs.a * y**s + coeffs.b * y ** (1 - s)


def _tail_estimate(data: EigenfunctionData, y: float) -> float:
    if not data.fourier:
        return 0.0
    s = data.point.s
    terms = max(data.fourier)
    largest = max(abs(v) for v in data.fourier.values())
    nu = s - 0.5
    next_term = bessel_k(nu, 2 * math.pi * (terms + 1) * y).value
    growth = (terms + 1) ** (abs(nu.real) + 1)
    tail = 2 * largest * growth * math.sqrt(y) * abs(next_term)
    return tail / (1 - math.exp(-2 * math.pi * y))


def evaluate_truncated(
    z: SurfacePoint, data: EigenfunctionData, tol: float = 1e-10
) -> complex:
    """切断級数 Σ a_m√yK_{s−½}(2π|m|y)e^{2πimx}（y ≤ η では定数項を加える）.

    Args:
        z: 評価点
        data: 固有関数のデータ
        tol: Fourier級数の打ち切り誤差の許容値

    Returns:
        切断級数の値

    Raises:
        TailTooLargeError: 打ち切り誤差の推定値が tol を超える場合

    """
    s = data.point.s
    tail = _tail_estimate(data, z.y)
    if tail > tol:
        raise TailTooLargeError(
            f"Fourier tail {tail:.3e} exceeds {tol:.1e} at y={z.y} with "
            f"{len(data.fourier)} terms"
        )
    total = 0j
    for m, coefficient in data.fourier.items():
        kernel = bessel_k(s - 0.5, 2 * math.pi * m * z.y).value
        total += 2 * coefficient * math.sqrt(z.y) * kernel * math.cos(2 * math.pi * m * z.x)
    if not data.truncated or z.y <= data.point.eta:
        total += constant_term_value(data.coeffs, s, z.y)
    return total


def indicator_pairing(
    coeffs: ConstantTermCoeffs,
    s: complex,
    y1: float,
    y2: float,
    cfg: TruncationConfig | None = None,
) -> complex:
    """定数項と帯 [y1, y2] の指示関数の対 ∫ v₀(y) dy/y².

    Args:
        coeffs: 定数項の係数
        s: スペクトルパラメータ（0, 1 以外）
        y1: 帯の下端
        y2: 帯の上端
        cfg: 切断設定（指定すると帯が p < y1, y2 ≤ η の切断領域にあることを検証）

    Returns:
        a(y₂^{s−1}−y₁^{s−1})/(s−1) − b(y₂^{−s}−y₁^{−s})/s

    Raises:
        ExcludedParameterError: s ∈ {0, 1} の場合
        DomainError: 帯が切断領域からはみ出す場合
        ValueError: 0 < y1 < y2 でない場合

    """
    s = complex(s)
    if not 0 < y1 < y2:
        raise ValueError(f"Invalid strip: y1={y1}, y2={y2}")
    if cfg is not None and not cfg.eta_floor < y1 < y2 <= cfg.eta:
        raise DomainError(
            f"Strip [{y1}, {y2}] must lie in ({cfg.eta_floor}, {cfg.eta}]"
        )
    if coeffs.log_form:
        # ∫√y dy/y² = −2y^{−½}, ∫ln(y)√y dy/y² = −2y^{−½}(ln y + 2)
        def antiderivative(y: float) -> complex:
            root = math.sqrt(y)
            return -2 * coeffs.a / root - 2 * coeffs.b * (math.log(y) + 2) / root

        return antiderivative(y2) - antiderivative(y1)
    if s in (0, 1):
        raise ExcludedParameterError(f"Indicator pairing is excluded at s={s}")
    a, b = coeffs.a, coeffs.b
    return a * (y2 ** (s - 1) - y1 ** (s - 1)) / (s - 1) - b * (y2 ** (-s) - y1 ** (-s)) / s


def strip_pairing(coeffs: ConstantTermCoeffs, s: complex, y1: float, y2: float) -> complex:
    """定数項の2乗の帯積分 ∫_{y1}^{y2} v₀(y)² dy/y²."""
    s = complex(s)
    a, b = coeffs.a, coeffs.b
    if coeffs.log_form:
        l1, l2 = math.log(y1), math.log(y2)
        return a**2 * (l2 - l1) + a * b * (l2**2 - l1**2) + b**2 * (l2**3 - l1**3) / 3
    cross = 2 * a * b * math.log(y2 / y1)
    if abs(2 * s - 1) <= HALF_POINT_TOL:
        return (a + b) ** 2 * math.log(y2 / y1)
    up = a**2 * (y2 ** (2 * s - 1) - y1 ** (2 * s - 1)) / (2 * s - 1)
    down = b**2 * (y2 ** (1 - 2 * s) - y1 ** (1 - 2 * s)) / (1 - 2 * s)
    return up + cross + down
