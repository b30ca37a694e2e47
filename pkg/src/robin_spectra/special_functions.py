"""複素特殊関数モジュール.

ガンマ関数、Riemannゼータ関数、複素次数の変形Bessel関数K、
および円周上の台形則によるTaylor係数（正則微分）を提供する。
すべて純粋関数で、共有される可変状態を持たない。
"""

import cmath
import math
from collections.abc import Callable
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import bernoulli, factorial, roots_legendre

from .config import settings
from .exceptions import (
    DomainError,
    NonConvergenceError,
    NonFiniteSampleError,
    PoleError,
)
from .models import DiscSpec

# Lanczos近似（g=7, 9項）
LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)

# Euler–Maclaurin補正項の数
ZETA_CORRECTION_TERMS = 12

_BERNOULLI = bernoulli(2 * ZETA_CORRECTION_TERMS)
_EULER_MACLAURIN_WEIGHTS = tuple(
    float(_BERNOULLI[2 * k]) / float(factorial(2 * k, exact=True))
    for k in range(1, ZETA_CORRECTION_TERMS + 1)
)

# Bessel積分の打ち切り：被積分関数が最大値の e^{-50} を下回る点まで積分する
_BESSEL_TAIL_EXPONENT = 50.0
_BESSEL_NODES, _BESSEL_WEIGHTS = roots_legendre(20)
_BESSEL_PANEL_WIDTH = 0.5
# 区間あたりの許容誤差（正規化した被積分関数、区間幅あたり）
_BESSEL_PANEL_TOL = 1e-14
_BESSEL_MAX_LEVELS = 40

_HALF_LOG_TWO_PI = 0.5 * math.log(2 * math.pi)


class BesselValue(NamedTuple):
    """K_ν(x) の値とアンダーフローフラグ."""

    value: complex
    underflow: bool


def _is_nonpositive_integer(z: complex) -> bool:
    return z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real)


def _lanczos_log_gamma(z: complex) -> complex:
    # Re z >= 1/2 を前提とする
    z -= 1
    x = LANCZOS_COEFFICIENTS[0]
    for i, c in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        x += c / (z + i)
    t = z + LANCZOS_G + 0.5
    return _HALF_LOG_TWO_PI + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def gamma_fn(z: complex) -> complex:
    """ガンマ関数 Γ(z).

    Re z < 1/2 では相反公式 Γ(z)Γ(1−z) = π/sin(πz) を使う。

    Args:
        z: 引数

    Returns:
        Γ(z)

    Raises:
        PoleError: z が0以下の整数の場合

    """
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise PoleError(f"Gamma function has a pole at z={z}", location=z)
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * gamma_fn(1 - z))
    return cmath.exp(_lanczos_log_gamma(z))


def reciprocal_gamma(z: complex) -> complex:
    """1/Γ(z)（0以下の整数では0）."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        return 0j
    return 1 / gamma_fn(z)


def _euler_maclaurin_parts(s: complex, start: int) -> tuple[complex, complex, complex]:
    """Σ_{k≥start} k^{−s} を (有限和, N^{1−s}, 補正項) に分解.

    Σ_{k≥start} k^{−s} = 有限和 + N^{1−s}/(s−1) + 補正項。
    """
    n = max(start, 10 + 2 * math.ceil(abs(s.imag)))
    k = np.arange(start, n, dtype=float)
    head = complex(np.sum(np.exp(-s * np.log(k)))) if k.size else 0j

    log_n = math.log(n)
    pole_part = cmath.exp((1 - s) * log_n)
    correction = 0.5 * cmath.exp(-s * log_n)
    rising = s
    power = cmath.exp((-s - 1) * log_n)
    for j, weight in enumerate(_EULER_MACLAURIN_WEIGHTS):
        correction += weight * rising * power
        rising *= (s + 2 * j + 1) * (s + 2 * j + 2)
        power /= n * n
    return head, pole_part, correction


def zeta_tail(s: complex, start: int = 1) -> complex:
    """部分ゼータ和 Σ_{k≥start} k^{−s}.

    Re s ≤ 1 では解析接続された値を返す。

    Args:
        s: 引数（s ≠ 1）
        start: 和の開始添字（1以上）

    Returns:
        Σ_{k≥start} k^{−s}

    Raises:
        PoleError: s = 1 の場合

    """
    s = complex(s)
    if s == 1:
        raise PoleError("Riemann zeta has a pole at s=1", location=1)
    if start < 1:
        raise DomainError(f"Invalid start index: {start}")
    head, pole_part, correction = _euler_maclaurin_parts(s, start)
    return head + pole_part / (s - 1) + correction


def riemann_zeta(s: complex) -> complex:
    """Riemannゼータ関数 ζ(s).

    Re s ≥ 0 ではEuler–Maclaurin和（N ≈ 10+2|Im s| 項、Bernoulli補正12項）、
    Re s < 0 では関数等式で Re s > 1 に折り返す。

    Args:
        s: 引数

    Returns:
        ζ(s)

    Raises:
        PoleError: s = 1 の場合

    """
    s = complex(s)
    if s == 1:
        raise PoleError("Riemann zeta has a pole at s=1", location=1)
    if s.real < 0:
        return (
            2**s
            * math.pi ** (s - 1)
            * cmath.sin(math.pi * s / 2)
            * gamma_fn(1 - s)
            * riemann_zeta(1 - s)
        )
    return zeta_tail(s, 1)


def regularized_zeta(s: complex) -> complex:
    """極を除いた (s−1)ζ(s)（s=1 で1）."""
    s = complex(s)
    if s.real < 0:
        return (s - 1) * riemann_zeta(s)
    head, pole_part, correction = _euler_maclaurin_parts(s, 1)
    return pole_part + (s - 1) * (head + correction)


def _bessel_contour_shift(nu: complex, x: complex) -> float:
    """積分路 t ↦ t + iθ の θ（鞍点の虚部、|θ| ≤ π/2 − 2/|Im ν|）."""
    if x.imag != 0 or nu.imag == 0:
        return 0.0
    cap = max(0.0, math.pi / 2 - 2 / abs(nu.imag))
    saddle = cmath.asinh(nu / x).imag
    return max(-cap, min(cap, saddle))


def _bessel_window(damping: float, slope: float) -> tuple[float, float, float]:
    """exp(−damping·cosh u + slope·u) の最大の指数と、e^{−50} まで落ちる区間."""

    def exponent(u: float) -> float:
        return -damping * math.cosh(u) + slope * u

    center = math.asinh(slope / damping)
    peak = exponent(center)
    bounds = []
    for direction in (-1.0, 1.0):
        step = 1.0
        while peak - exponent(center + direction * step) < _BESSEL_TAIL_EXPONENT:
            step *= 1.5
        bounds.append(center + direction * step)
    return peak, bounds[0], bounds[1]


def _legendre_panels(
    f: Callable[[np.ndarray], np.ndarray], a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    half = 0.5 * (b - a)
    t = (0.5 * (a + b))[:, None] + half[:, None] * _BESSEL_NODES[None, :]
    return half * (f(t) @ _BESSEL_WEIGHTS)


def bessel_k_integral(nu: complex, x: complex) -> complex:
    """積分表示 ½∫_{−∞}^{∞} e^{−x cosh t + νt} dt による K_ν(x).

    実数の x では積分路を t ↦ t + iθ に平行移動し、θ を鞍点 asinh(ν/x) の
    虚部に合わせる。大きな Im ν で被積分関数の振動による桁落ちを避けるため。
    被積分関数は最大値で正規化し、区間ごとの適応Gauss–Legendre則で積分する。

    Args:
        nu: 次数
        x: 引数（Re x > 0）

    Returns:
        K_ν(x)

    Raises:
        DomainError: Re x ≤ 0 の場合
        NonConvergenceError: 区間の分割が上限に達した場合

    """
    nu = complex(nu)
    x = complex(x)
    if x.real <= 0:
        raise DomainError(f"Bessel integral requires Re x > 0, got x={x}")
    theta = _bessel_contour_shift(nu, x)
    peak, lower, upper = _bessel_window(x.real * math.cos(theta), nu.real)
    shift = peak - nu.imag * theta

    def integrand(u: np.ndarray) -> np.ndarray:
        t = u + 1j * theta
        return np.exp(-x * np.cosh(t) + nu * t - shift)

    edges = np.linspace(
        lower, upper, math.ceil((upper - lower) / _BESSEL_PANEL_WIDTH) + 1
    )
    a, b = edges[:-1], edges[1:]
    total = 0j
    for _ in range(_BESSEL_MAX_LEVELS):
        mid = 0.5 * (a + b)
        coarse = _legendre_panels(integrand, a, b)
        fine = _legendre_panels(integrand, a, mid) + _legendre_panels(integrand, mid, b)
        done = np.abs(fine - coarse) <= _BESSEL_PANEL_TOL * (b - a)
        total += complex(np.sum(fine[done]))
        a = np.concatenate((a[~done], mid[~done]))
        b = np.concatenate((mid[~done], b[~done]))
        if a.size == 0:
            return 0.5 * cmath.exp(shift) * total
    raise NonConvergenceError(f"Bessel integral for nu={nu}, x={x} did not converge")


@lru_cache(maxsize=8192)
def _bessel_k_cached(nu: complex, x: float) -> complex:
    return bessel_k_integral(nu, x)


def bessel_k(nu: complex, x: float) -> BesselValue:
    """変形Bessel関数 K_ν(x)（x > 0 の実数）.

    Args:
        nu: 次数（|Re ν| ≤ 20）
        x: 引数（x > 0）

    Returns:
        値とアンダーフローフラグ

    Raises:
        DomainError: x ≤ 0 または |Re ν| > 20 の場合

    """
    nu = complex(nu)
    if x <= 0:
        raise DomainError(f"Bessel K requires x > 0, got x={x}")
    if abs(nu.real) > 20:
        raise DomainError(f"Bessel K requires |Re nu| <= 20, got nu={nu}")
    if x > settings.bessel_exponent_clamp:
        return BesselValue(0j, True)
    # K_ν = K_{−ν}：キャッシュのキーを揃える
    if nu.real < 0 or (nu.real == 0 and nu.imag < 0):
        nu = -nu
    return BesselValue(_bessel_k_cached(nu, float(x)), False)


def circle_nodes(center: complex, radius: float, nodes: int) -> np.ndarray:
    """円周上の等間隔ノード."""
    theta = 2 * math.pi * np.arange(nodes) / nodes
    return center + radius * np.exp(1j * theta)


def holo_derivative(
    f: Callable[[complex], complex | np.ndarray],
    spec: DiscSpec,
    nodes: int | None = None,
) -> np.ndarray:
    """円周上の台形則でTaylor係数 f^{(k)}(center)/k! を求める.

    fがベクトル値の場合は成分ごとに係数を返す（形状 (order+1, 成分数)）。

    Args:
        f: 閉円板上で正則な関数
        spec: 中心・半径・次数
        nodes: 台形則のノード数（省略時は設定値）

    Returns:
        Taylor係数の配列

    Raises:
        NonFiniteSampleError: ノード上でfが有限値を返さない場合
        ValueError: 次数がノード数以上の場合

    """
    n = nodes or settings.contour_nodes
    if spec.order >= n:
        raise ValueError(f"Invalid order {spec.order} for {n} contour nodes")

    points = circle_nodes(spec.center, spec.radius, n)
    samples = []
    for point in points:
        node = complex(point)
        try:
            value = f(node)
        except PoleError as e:
            raise NonFiniteSampleError(
                f"Pole hit at contour node {node}: {e}", node=node
            ) from e
        if not np.all(np.isfinite(value)):
            raise NonFiniteSampleError(
                f"Non-finite sample at contour node {node}", node=node
            )
        samples.append(value)

    coeffs = np.fft.fft(np.asarray(samples, dtype=complex), axis=0) / n
    scale = spec.radius ** -np.arange(spec.order + 1, dtype=float)
    if coeffs.ndim > 1:
        scale = scale[:, np.newaxis]
    return coeffs[: spec.order + 1] * scale
