"""Maass–Selberg関係モジュール.

切断Eisenstein級数の自己対をMaass–Selberg関係と基本領域上の数値積分の
2通りで求める。自己対から λ'(γ) を計算し、自己対が消える点（分岐点）の
探索と、s微分による一般化固有関数（Jordan鎖）の残差の検証も提供する。
"""

import math

import numpy as np
from loguru import logger
from numpy.polynomial import polynomial
from scipy.special import roots_legendre

from .config import settings
from .exceptions import (
    DegeneratePairingError,
    DomainError,
    ExcludedParameterError,
    QuadratureBudgetError,
    RamificationError,
)
from .models import (
    HALF_POINT_TOL,
    INFINITY,
    DiscSpec,
    PairingMethod,
    PairingValue,
    RamificationPoint,
    SpectralPoint,
    TruncationConfig,
    Window,
)
from .modular_surface import (
    ScatteringData,
    eisenstein_grid,
    fourier_coefficient,
    scattering_phi,
)
from .robin import HALF_SERIES_ORDER, HALF_SERIES_RANGE, ConstantTermFamily, family_for
from .rootfinding import ZeroFinder
from .special_functions import bessel_k, holo_derivative

# 基本領域の曲線部分の上端
CURVED_PART_TOP = 1.2

# 数値積分のノード数（隣り合う段の値を比べて収束を判定する）
QUADRATURE_LEVELS = (16, 32, 64, 96)

# カスプ部分の y 積分のノード数
_CUSP_NODES = 24

# 分岐点の探索で s 微分に使う円周のノード数
_SCAN_NODES = 8


def _family_taylor(
    family: ConstantTermFamily, s: complex, nodes: int | None = None
) -> np.ndarray:
    """[Q̂, P̂] の s での1次までのTaylor係数（形状 (2, 2)）."""
    return holo_derivative(
        lambda z: np.array(family(z)),
        DiscSpec(center=s, radius=settings.derivative_radius, order=1),
        nodes,
    )


def wronskian(family: ConstantTermFamily, s: complex, nodes: int | None = None) -> complex:
    """N(s) = ∂_sP̂·Q̂ − P̂·∂_sQ̂."""
    coeffs = _family_taylor(family, s, nodes)
    (q, p), (dq, dp) = coeffs[0], coeffs[1]
    return complex(dp * q - p * dq)


def pairing_scale(family: ConstantTermFamily, s: complex) -> float:
    """自己対の典型的な大きさ."""
    scale_q, scale_p = family.scales(s)
    spread = max(abs(2 * complex(s) - 1), 2 * HALF_SERIES_RANGE)
    return scale_q * (scale_p + scale_q * abs(family.log_eta)) / spread


def family_pairing(family: ConstantTermFamily, s: complex) -> complex:
    """族の切断級数の自己対 B̂(s) = N(s)/(2s−1).

    1/2 の近くでは半級数の多項式演算で N の0次の項を落として割る。

    Raises:
        DegeneratePairingError: N(1/2) ≠ 0（1/2 で自己対が極を持つ）の場合

    """
    s = complex(s)
    t = s - 0.5
    if abs(t) >= HALF_SERIES_RANGE:
        return wronskian(family, s) / (2 * s - 1)

    series = family.half_series
    q_series, p_series = series[:, 0], series[:, 1]
    product = polynomial.polysub(
        polynomial.polymul(polynomial.polyder(p_series), q_series),
        polynomial.polymul(p_series, polynomial.polyder(q_series)),
    )[:HALF_SERIES_ORDER]
    scale = abs(q_series[0] * p_series[1]) + abs(p_series[0] * q_series[1]) + 1e-300
    if abs(product[0]) > 1e-8 * scale:
        raise DegeneratePairingError(
            f"Pairing has a pole at s=1/2 (N(1/2)={product[0]:.3e})"
        )
    return complex(polynomial.polyval(t, product[1:]) / 2)


def truncated_pairing_msr(
    s: complex, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> PairingValue:
    """Maass–Selberg関係による切断級数 y^s + β(s)y^{1−s} の自己対.

    (∂_sP·Q − P·∂_sQ) / (2s−1) を正則な族で計算し、定数項の
    y^s の係数が1になるよう正規化する。

    Args:
        s: スペクトルパラメータ
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）

    Returns:
        自己対（βの極では pole=True）

    Raises:
        DegeneratePairingError: s=1/2 で切断級数が消えるか自己対が極を持つ場合

    """
    s = complex(s)
    family = family_for(cfg, surface)
    t = s - 0.5
    if family.divided and abs(t) <= HALF_POINT_TOL:
        raise DegeneratePairingError(
            "Truncated series y^s + beta*y^(1-s) vanishes identically at s=1/2"
        )
    a, b = family.weights(s)
    if abs(a) <= 1e-14 * (abs(a) + abs(b)):
        logger.warning(f"Scattering coefficient has a pole at s={s}; pairing is infinite")
        return PairingValue(value=INFINITY, via=PairingMethod.MSR_FORMULA, pole=True)
    normalization = a / t if family.divided else a
    value = family_pairing(family, s) / normalization**2
    return PairingValue(value=value, via=PairingMethod.MSR_FORMULA)


def lambda_prime_of_gamma(
    point: SpectralPoint, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> complex:
    """固有値の γ 微分 λ'(γ) = v₀(η)² / (v, v̄).

    Args:
        point: Robin条件を満たすスペクトル点
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）

    Returns:
        λ'(γ)（Dirichlet点では0）

    Raises:
        RamificationError: 自己対が閾値を下回る場合

    """
    if point.is_dirichlet:
        return 0j
    family = family_for(cfg, surface)
    q, _ = family(point.s)
    pairing = family_pairing(family, point.s)
    scale = pairing_scale(family, point.s)
    if abs(pairing) < settings.ramification_threshold * scale:
        raise RamificationError(
            f"Self-pairing {abs(pairing):.3e} vanishes at s={point.s}", location=point.s
        )
    return q**2 / pairing


def _cusp_tail(s: complex, eta: float, fourier: dict[int, complex]) -> complex:
    """η より上の Σ_m 2a_m² ∫ K_{s−½}(2πmy)² dy/y."""
    nodes, weights = roots_legendre(_CUSP_NODES)
    total = 0j
    for m, coefficient in fourier.items():
        length = 40.0 / (4 * math.pi * m)
        y = eta + 0.5 * length * (nodes + 1)
        kernel = np.array([bessel_k(s - 0.5, 2 * math.pi * m * yi).value for yi in y])
        total += 2 * coefficient**2 * np.sum(0.5 * length * weights * kernel**2 / y)
    return complex(total)


def _fundamental_domain_integral(s: complex, eta: float, nodes: int) -> complex:
    """η より下の ∫∫ E(z,s)² dx dy/y²（曲線部分と長方形部分）."""
    gl_nodes, gl_weights = roots_legendre(nodes)
    top = min(CURVED_PART_TOP, eta)

    # |x| ≤ 1/2, √(1−x²) ≤ y ≤ top
    x = 0.5 * gl_nodes
    x_weights = 0.5 * gl_weights
    floor = np.sqrt(1 - x**2)
    half_height = 0.5 * (top - floor)
    y = floor[:, np.newaxis] + half_height[:, np.newaxis] * (gl_nodes[np.newaxis, :] + 1)
    weights = (x_weights * half_height)[:, np.newaxis] * gl_weights[np.newaxis, :]
    values = eisenstein_grid(np.repeat(x, nodes), y.ravel(), s).reshape(y.shape)
    total = complex(np.sum(weights * values**2 / y**2))

    if eta > top:
        # xは周期的なので台形則
        x_rect = np.arange(nodes) / nodes - 0.5
        y_rect = top + 0.5 * (eta - top) * (gl_nodes + 1)
        y_weights = 0.5 * (eta - top) * gl_weights
        grid_x, grid_y = np.meshgrid(x_rect, y_rect)
        values = eisenstein_grid(grid_x.ravel(), grid_y.ravel(), s).reshape(grid_y.shape)
        total += complex(np.sum(y_weights[:, np.newaxis] * values**2 / grid_y**2) / nodes)
    return total


def pairing_quadrature_oracle(
    s: complex, cfg: TruncationConfig, tol: float = 1e-6
) -> PairingValue:
    """基本領域上の数値積分による切断Eisenstein級数の自己対 ∫ E^η(z,s)² dμ.

    曲線部分はGauss–Legendre、長方形部分は x に台形則、η より上は
    Fourier係数の2乗とBessel関数の積分で求める。ノード数を増やして
    隣り合う段の差が tol 以下になれば収束とする。

    Args:
        s: スペクトルパラメータ（Re s > 1.1）
        cfg: 切断設定（モジュラー曲面）
        tol: 相対許容誤差

    Returns:
        自己対

    Raises:
        DomainError: Re s ≤ 1.1 の場合
        QuadratureBudgetError: 最大のノード数でも収束しない場合

    """
    s = complex(s)
    if s.real <= settings.sampling_floor:
        raise DomainError(f"Quadrature oracle requires Re s > {settings.sampling_floor}")
    fourier = {m: fourier_coefficient(m, s) for m in range(1, settings.fourier_terms + 1)}
    tail = _cusp_tail(s, cfg.eta, fourier)

    previous: complex | None = None
    for nodes in QUADRATURE_LEVELS:
        value = _fundamental_domain_integral(s, cfg.eta, nodes) + tail
        logger.debug(f"Pairing quadrature with {nodes} nodes: {value}")
        if previous is not None and abs(value - previous) <= tol * abs(value):
            return PairingValue(value=value, via=PairingMethod.QUADRATURE)
        previous = value
    raise QuadratureBudgetError(
        f"Pairing quadrature at s={s} did not reach {tol:.1e} "
        f"with {QUADRATURE_LEVELS[-1]} nodes"
    )


def ramification_scan(
    window: Window, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> list[RamificationPoint]:
    """γ'(s) の零点（自己対の消える点）を探す.

    γ'(s) = −N(s)/Q̂(s)² なので N の零点を数え、s=1/2 を除いて
    各点で自己対が消えていることを確かめる。

    Args:
        window: s平面の矩形
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）

    Returns:
        分岐点の候補のリスト（見つからなければ空）

    """
    family = family_for(cfg, surface)
    finder = ZeroFinder(
        lambda s: wronskian(family, s, _SCAN_NODES),
        tol=1e-10,
        max_iter=cfg.max_iter,
        max_depth=settings.max_subdivision_depth,
        ramification_threshold=settings.ramification_threshold,
    )
    points: list[RamificationPoint] = []
    for root in finder.find(window):
        if abs(root.location - 0.5) <= 1e-6:
            continue
        location = root.location
        ratio = abs(family_pairing(family, location)) / pairing_scale(family, location)
        verified = ratio <= 1e-6
        if not verified:
            logger.warning(
                f"Zero of gamma'(s) at {location} has pairing ratio {ratio:.3e}"
            )
        points.append(
            RamificationPoint(
                s=root.location,
                order=root.multiplicity,
                pairing_ratio=ratio,
                verified=verified,
            )
        )
    logger.info(f"Ramification scan of {window} found {len(points)} candidates")
    return points


def jordan_chain_residual(
    s: complex, cfg: TruncationConfig, surface: ScatteringData | None = None
) -> float:
    """s微分 N = ∂_sM₀ が −y²N'' = λN + λ'(s)M₀ を満たすかの相対残差.

    定数項 M₀ = A(s)y^s + B(s)y^{1−s} の y 微分は閉じた式で、
    A', B' は円周上の台形則で求める。y ∈ {η/2, 3η/4, η} での最大値を返す。

    Raises:
        ExcludedParameterError: s が 1/2 に近すぎる場合

    """
    s = complex(s)
    if abs(s - 0.5) <= 1e-6:
        raise ExcludedParameterError(
            f"Jordan chain residual is excluded near s=1/2, got s={s}"
        )
    family = family_for(cfg, surface)
    taylor = holo_derivative(
        lambda z: np.array(family.weights(z)),
        DiscSpec(center=s, radius=settings.derivative_radius, order=1),
    )
    (a, b), (da, db) = taylor[0], taylor[1]
    lam = s * (1 - s)
    lam_prime = 1 - 2 * s

    residual = 0.0
    for y in (cfg.eta / 2, 0.75 * cfg.eta, cfg.eta):
        up, down, log_y = y**s, y ** (1 - s), math.log(y)
        m0 = a * up + b * down
        n = da * up + a * up * log_y + db * down - b * down * log_y
        # (y^α)'' = α(α−1)y^{α−2}, (y^α ln y)'' = α(α−1)y^{α−2}ln y + (2α−1)y^{α−2}
        y2_n2 = (
            da * s * (s - 1) * up
            + a * (s * (s - 1) * up * log_y + (2 * s - 1) * up)
            + db * (1 - s) * (-s) * down
            - b * ((1 - s) * (-s) * down * log_y + (1 - 2 * s) * down)
        )
        lhs = -y2_n2
        rhs = lam * n + lam_prime * m0
        scale = abs(y2_n2) + abs(lam * n) + abs(lam_prime * m0)
        residual = max(residual, abs(lhs - rhs) / scale)
    return residual
