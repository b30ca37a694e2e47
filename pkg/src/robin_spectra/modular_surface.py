"""モジュラー曲面モジュール.

PSL(2,ℤ)\\ℍ の散乱係数φ、収束域 Re s > 1 での Eisenstein 級数の直接和、
Fourier係数の公式、定数項オラクルを提供する。
散乱データは分子・分母の整関数の組として保持し、他の曲面にも差し替えられる。
"""

import math
from collections.abc import Callable
from functools import lru_cache

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from .config import settings
from .exceptions import (
    CutoffOverflowError,
    DomainError,
    NonConvergenceError,
    PoleError,
    ScatteringPoleError,
)
from .models import SurfacePoint
from .rootfinding import circle_winding
from .special_functions import (
    gamma_fn,
    reciprocal_gamma,
    regularized_zeta,
    riemann_zeta,
    zeta_tail,
)

SQRT_PI = math.sqrt(math.pi)

# 行和の直接和の範囲 |d + cx| ≤ T の下限
_ROW_WINDOW_MIN = 60.0

# 行末尾の積分を展開する二項級数の項数
_BINOMIAL_TERMS = 24

# 極の位数推定に使う円の半径
_POLE_PROBE_RADIUS = 1e-3


class ScatteringData(BaseModel):
    """曲面のカスプの散乱データ.

    散乱係数は φ(s) = numerator(s) / denominator(s) で与える。
    fourier は分母を掛けた（極を持たない）Fourier係数 m ↦ a_m(s)·denominator(s)。
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field(..., description="曲面の名前")
    numerator: Callable[[complex], complex] = Field(..., description="φの分子")
    denominator: Callable[[complex], complex] = Field(..., description="φの分母")
    cusp_width: float = Field(default=1.0, gt=0, description="カスプ幅")
    eta_floor: float = Field(default=1.0, gt=0, description="ηの許容下限p")
    pole_hints: tuple[complex, ...] = Field(default=(), description="既知の極")
    fourier: Callable[[int, complex], complex] | None = Field(
        default=None, description="分母を掛けたFourier係数"
    )

    def pole_order(self, s: complex) -> int:
        """s の近くの極の位数を分母・分子の零点数の差で推定."""
        try:
            den_zeros = circle_winding(self.denominator, s, _POLE_PROBE_RADIUS)
            num_zeros = circle_winding(self.numerator, s, _POLE_PROBE_RADIUS)
        except NonConvergenceError:
            return 1
        return max(1, den_zeros - num_zeros)

    def phi(self, s: complex) -> complex:
        """散乱係数 φ(s).

        Args:
            s: スペクトルパラメータ

        Returns:
            φ(s)

        Raises:
            ScatteringPoleError: s がφの極の場合（位数の推定値付き）

        """
        s = complex(s)
        numerator = complex(self.numerator(s))
        denominator = complex(self.denominator(s))
        if numerator != 0 and abs(denominator) <= 1e-14 * abs(numerator):
            order = self.pole_order(s)
            raise ScatteringPoleError(
                f"Scattering coefficient of {self.name} has a pole "
                f"of order {order} at s={s}",
                location=s,
                order=order,
            )
        return numerator / denominator

    def distance_to_poles(self, s: complex) -> float:
        """既知の極までの最短距離（極がなければ∞）."""
        if not self.pole_hints:
            return math.inf
        return min(abs(s - p) for p in self.pole_hints)


def xi_function(w: complex) -> complex:
    """Riemannの完備ゼータ ξ(w) = ½w(w−1)π^{−w/2}Γ(w/2)ζ(w).

    Re w < 1/2 では ξ(w) = ξ(1−w) で折り返す。
    """
    w = complex(w)
    if w.real < 0.5:
        w = 1 - w
    return 0.5 * w * math.pi ** (-w / 2) * gamma_fn(w / 2) * regularized_zeta(w)


def _modular_numerator(s: complex) -> complex:
    return s * xi_function(2 * s - 1)


def _modular_denominator(s: complex) -> complex:
    return (s - 1) * xi_function(2 * s)


def divisor_sigma(n: int, power: complex) -> complex:
    """約数関数 σ_k(n) = Σ_{d|n} d^k."""
    n = abs(n)
    return sum(complex(d) ** power for d in range(1, n + 1) if n % d == 0)


def regularized_fourier_coefficient(m: int, s: complex, divided: bool = False) -> complex:
    """分母 (s−1)ξ(2s) を掛けたFourier係数 2|m|^{s−½}σ_{1−2s}(|m|)·s(s−1)(2s−1).

    Args:
        m: 0でない整数
        s: スペクトルパラメータ
        divided: (s−½) で割った値を返すか

    Returns:
        極を持たないFourier係数

    """
    if m == 0:
        raise DomainError("Fourier index m must be nonzero")
    s = complex(s)
    factor = 2.0 if divided else 2 * s - 1
    return 2 * abs(m) ** (s - 0.5) * divisor_sigma(m, 1 - 2 * s) * s * (s - 1) * factor


def fourier_coefficient(m: int, s: complex) -> complex:
    """E(z,s) の √y·K_{s−½}(2π|m|y)·e^{2πimx} の係数 a_m(s).

    a_m(s) = 2π^s|m|^{s−½}σ_{1−2s}(|m|) / (Γ(s)ζ(2s))。

    Args:
        m: 0でない整数
        s: スペクトルパラメータ

    Returns:
        a_m(s)

    Raises:
        DomainError: m = 0 の場合
        PoleError: ζ(2s) = 0 の場合

    """
    if m == 0:
        raise DomainError("Fourier index m must be nonzero")
    s = complex(s)
    if 2 * s == 1:
        return 0j
    zeta_2s = riemann_zeta(2 * s)
    if zeta_2s == 0:
        raise PoleError(f"zeta(2s) vanishes at s={s}", location=s)
    return (
        2
        * math.pi**s
        * abs(m) ** (s - 0.5)
        * divisor_sigma(m, 1 - 2 * s)
        * reciprocal_gamma(s)
        / zeta_2s
    )


@lru_cache(maxsize=1)
def modular_surface() -> ScatteringData:
    """PSL(2,ℤ) の散乱データ（カスプ幅1、p=1）."""
    return ScatteringData(
        name="PSL(2,Z)",
        numerator=_modular_numerator,
        denominator=_modular_denominator,
        cusp_width=1.0,
        eta_floor=1.0,
        pole_hints=(1.0 + 0j,),
        fourier=regularized_fourier_coefficient,
    )


def scattering_phi(s: complex) -> complex:
    """モジュラー曲面の散乱係数 φ(s) = √π Γ(s−½)ζ(2s−1) / (Γ(s)ζ(2s))."""
    return modular_surface().phi(s)


def _zero(_: complex) -> complex:
    return 0j


def _one(_: complex) -> complex:
    return 1 + 0j


def zero_scattering_surface(eta_floor: float = 1.0) -> ScatteringData:
    """β ≡ 0 の模型曲面（定数項が y^s だけ）."""
    return ScatteringData(
        name="zero-scattering", numerator=_zero, denominator=_one, eta_floor=eta_floor
    )


def continued_surface(
    beta: Callable[[complex], complex],
    pole_hints: tuple[complex, ...] = (),
    eta_floor: float = 1.0,
) -> ScatteringData:
    """解析接続で得たβから散乱データを作る."""
    return ScatteringData(
        name="continued",
        numerator=beta,
        denominator=_one,
        eta_floor=eta_floor,
        pole_hints=pole_hints,
    )


def scaled_surface(surface: ScatteringData, factor: complex) -> ScatteringData:
    """φ を定数倍した散乱データ（故障注入用）."""

    def numerator(s: complex) -> complex:
        return factor * surface.numerator(s)

    def fourier(m: int, s: complex) -> complex:
        return factor * surface.fourier(m, s) if surface.fourier else 0j

    logger.warning(f"Scattering coefficient of {surface.name} scaled by {factor}")
    return surface.model_copy(
        update={
            "name": f"{surface.name}*{factor}",
            "numerator": numerator,
            "fourier": fourier if surface.fourier else None,
        }
    )


def lattice_row_cutoff(y: float, s: complex, tol: float) -> int:
    """直接和で明示的に足す格子の行数C.

    行 c > C の行和と行積分の差は e^{−2πcy} 程度なので、
    Γ(s)・π^s による拡大分を見込んで tol を下回る C を選ぶ。
    """
    s = complex(s)
    budget = (
        math.log(1 / tol) + s.real * math.log(math.pi) + 0.5 * math.pi * abs(s.imag) + 5
    )
    return max(1, math.ceil(budget / (2 * math.pi * y)))


def _row_tail(edge: np.ndarray, a: np.ndarray, s: complex) -> np.ndarray:
    """Σ_{j≥1} h(T+j), h(t) = (t²+a²)^{−s} をEuler–Maclaurinで閉じる."""
    u = edge**2 + a**2
    log_u = np.log(u)

    integral = np.zeros_like(edge, dtype=complex)
    binomial = 1 + 0j
    for k in range(_BINOMIAL_TERMS):
        integral += (
            binomial
            * a ** (2 * k)
            * np.exp((1 - 2 * s - 2 * k) * np.log(edge))
            / (2 * s + 2 * k - 1)
        )
        binomial *= (-s - k) / (k + 1)

    h0 = np.exp(-s * log_u)
    h1 = -2 * s * edge * np.exp((-s - 1) * log_u)
    h3 = 12 * s * (s + 1) * edge * np.exp((-s - 2) * log_u) - 8 * s * (s + 1) * (
        s + 2
    ) * edge**3 * np.exp((-s - 3) * log_u)
    return integral - h0 / 2 - h1 / 12 + h3 / 720


def _row_sums(x: np.ndarray, y: np.ndarray, s: complex, rows: int) -> np.ndarray:
    """Σ_{c=1}^{rows} Σ_d ((cx+d)² + c²y²)^{−s} を各点 (x, y) について計算."""
    total = np.zeros_like(x, dtype=complex)
    for c in range(1, rows + 1):
        a = c * y
        window = max(_ROW_WINDOW_MIN, 4 * float(a.max()), 4 * abs(s))
        shift = c * x
        d = np.arange(
            math.floor(-window - shift.max()), math.ceil(window - shift.min()) + 1
        )
        t = d[np.newaxis, :] + shift[:, np.newaxis]
        inside = np.abs(t) <= window
        terms = np.exp(-s * np.log(t**2 + (a**2)[:, np.newaxis]))
        total += np.where(inside, terms, 0).sum(axis=1)
        right_edge = np.where(inside, t, -np.inf).max(axis=1)
        left_edge = -np.where(inside, t, np.inf).min(axis=1)
        total += _row_tail(right_edge, a, s) + _row_tail(left_edge, a, s)
    return total


def eisenstein_grid(
    x: np.ndarray, y: np.ndarray | float, s: complex, tol: float = 1e-10
) -> np.ndarray:
    """点の配列 (x, y) での E(x+iy, s)（yはスカラーでも配列でもよい）.

    Raises:
        DomainError: Re s < 1 + δ の場合
        CutoffOverflowError: 最も低い点で必要な行数が予算を超える場合

    """
    s = complex(s)
    _check_convergent(s)
    x = np.asarray(x, dtype=float).ravel()
    y = np.broadcast_to(np.asarray(y, dtype=float), x.shape).ravel()
    if y.min() <= 0:
        raise DomainError(f"Points must lie in the upper half-plane, got y={y.min()}")
    rows = lattice_row_cutoff(float(y.min()), s, tol)
    if rows > settings.lattice_row_budget:
        raise CutoffOverflowError(
            f"Lattice cutoff C={rows} exceeds budget {settings.lattice_row_budget} "
            f"(y={y.min()}, s={s}, tol={tol})"
        )
    far_rows = (
        y ** (1 - 2 * s)
        * SQRT_PI
        * gamma_fn(s - 0.5)
        * reciprocal_gamma(s)
        * zeta_tail(2 * s - 1, rows + 1)
    )
    lattice = _row_sums(x, y, s, rows) + far_rows
    return y**s + y**s / riemann_zeta(2 * s) * lattice


def _check_convergent(s: complex) -> None:
    if s.real < 1 + settings.convergence_margin:
        raise DomainError(
            f"Direct summation requires Re s >= {1 + settings.convergence_margin}, "
            f"got s={s}"
        )


def eisenstein_direct_sum(
    z: SurfacePoint | complex, s: complex, tol: float = 1e-10
) -> complex:
    """Eisenstein級数 E(z,s) を格子和から直接計算.

    互いに素な (c,d) の和を格子全体の和 / 2ζ(2s) として行ごとに足す。
    行 c ≤ C は |d + cx| ≤ T を直接、その外側をEuler–Maclaurinで閉じ、
    行 c > C は行積分 √πΓ(s−½)/Γ(s)·(cy)^{1−2s} で置き換える。

    Args:
        z: 上半平面の点
        s: スペクトルパラメータ（Re s ≥ 1 + δ）
        tol: 許容誤差

    Returns:
        E(z,s)

    Raises:
        DomainError: Re s < 1 + δ または Im z ≤ 0 の場合
        CutoffOverflowError: 必要な行数が予算を超える場合

    """
    point = z.z if isinstance(z, SurfacePoint) else complex(z)
    s = complex(s)
    if point.imag <= 0:
        raise DomainError(f"Point must lie in the upper half-plane, got z={point}")
    _check_convergent(s)
    return complex(eisenstein_grid(np.array([point.real]), point.imag, s, tol)[0])


def period_average(f: Callable[[np.ndarray], np.ndarray], nodes: int) -> complex:
    """周期1の関数の台形則による平均 ∫₀¹ f(x) dx."""
    x = np.arange(nodes) / nodes
    return complex(np.mean(f(x)))


def _period_nodes(y: float, s: complex, tol: float) -> int:
    return max(16, lattice_row_cutoff(y, s, tol) + 4)


def constant_term_oracle(y: float, s: complex, tol: float = 1e-13) -> complex:
    """直接和のx平均による定数項 ∫₀¹ E(x+iy, s) dx.

    Args:
        y: 高さ（y > p）
        s: スペクトルパラメータ（Re s ≥ 1.1）
        tol: 許容誤差

    Returns:
        定数項の値（y^s + φ(s)y^{1−s} の独立な評価）

    Raises:
        DomainError: y ≤ p または Re s < 1.1 の場合

    """
    s = complex(s)
    floor = modular_surface().eta_floor
    if y <= floor:
        raise DomainError(f"Constant term oracle requires y > {floor}, got y={y}")
    _check_convergent(s)
    nodes = _period_nodes(y, s, tol)
    return period_average(lambda x: eisenstein_grid(x, y, s, tol), nodes)


def fourier_mode_oracle(m: int, y: float, s: complex, tol: float = 1e-13) -> complex:
    """直接和から第mフーリエモード ∫₀¹ E(x+iy, s)e^{−2πimx} dx を求める."""
    s = complex(s)
    _check_convergent(s)
    nodes = _period_nodes(y, s, tol) + 2 * abs(m)
    return period_average(
        lambda x: eisenstein_grid(x, y, s, tol) * np.exp(-2j * math.pi * m * x), nodes
    )
