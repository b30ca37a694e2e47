"""検証スイートモジュール.

各モジュールの不変量（関数等式、オラクルとの一致、Robin固有値の実性、
λ'(γ) の公式、Maass–Selberg関係、解析接続など）を机上規模で確かめる。
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from loguru import logger

from .continuation import BetaContinuation, continue_beta, half_point_analysis
from .exceptions import ScatteringPoleError, SpectralError
from .maass_selberg import (
    jordan_chain_residual,
    lambda_prime_of_gamma,
    pairing_quadrature_oracle,
    truncated_pairing_msr,
)
from .models import (
    INFINITY,
    CheckResult,
    PathSpec,
    SpectralPoint,
    TruncationConfig,
    Window,
)
from .modular_surface import ScatteringData, constant_term_oracle, modular_surface
from .robin import solve_robin_roots
from .tracing import lambda_prime_fd, trace_curve

# 臨界線上の seed を探す窓
SEED_WINDOW = Window(re_min=0.4, re_max=0.6, im_min=1.0, im_max=15.0)

# Robin固有値の実性を確かめる窓
REALITY_WINDOW = Window(re_min=0.0, re_max=1.0, im_min=0.0, im_max=30.0)

JORDAN_POINTS = (
    0.8 + 3j,
    2.3,
    0.2 + 7.5j,
    1.5 + 1j,
    -0.7 + 2j,
    3 + 4j,
    0.6 + 12j,
    1.1 - 2j,
    0.35 + 0.8j,
    2 + 9j,
)

# Dirichlet極限で追跡するγの終点
DIRICHLET_GAMMA = 1e5


@dataclass
class Check:
    """検証項目."""

    name: str
    tolerance: float
    run: Callable[[ScatteringData, TruncationConfig], float]
    minimum: bool = False


def critical_line_seed(cfg: TruncationConfig, surface: ScatteringData) -> SpectralPoint:
    """γ=0 の臨界線上の最初の根."""
    roots = solve_robin_roots(0, SEED_WINDOW, cfg, surface)
    if not roots:
        raise SpectralError(f"No gamma=0 root in {SEED_WINDOW}")
    return roots[0]


def check_functional_equation(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """[−1,2]×[0,10] の20×20格子での max |φ(s)φ(1−s) − 1|."""
    worst = 0.0
    for re in np.linspace(-1, 2, 20):
        for im in np.linspace(0, 10, 20):
            s = complex(re, im)
            try:
                product = surface.phi(s) * surface.phi(1 - s)
            except ScatteringPoleError:
                continue
            worst = max(worst, abs(product - 1))
    return worst


def check_oracle_agreement(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """9組の (y, s) での max |E₀ − (y^s + φ(s)y^{1−s})|."""
    worst = 0.0
    for y in (1.5, 2.0, 3.0):
        for s in (1.8, 2.3, 2 + 2j):
            expected = y**s + surface.phi(s) * y ** (1 - s)
            worst = max(worst, abs(constant_term_oracle(y, s) - expected))
    return worst


def check_robin_reality(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """実のγと∞で、根の臨界線または実軸からの最大距離."""
    worst = 0.0
    for gamma in (-2, 0, 1, 5, INFINITY):
        for point in solve_robin_roots(gamma, REALITY_WINDOW, cfg, surface):
            worst = max(worst, min(abs(point.s.real - 0.5), abs(point.s.imag)))
    return worst


def check_derivative_formula(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """γ: 0 → 4 の追跡で λ' の公式と差分の最大相対誤差."""
    seed = critical_line_seed(cfg, surface)
    path = PathSpec(waypoints=[0, 1, 2, 3, 4], max_step=0.05)
    points = trace_curve(path, seed, cfg, surface)[1:]
    if len(points) < 20:
        raise SpectralError(f"Only {len(points)} checkpoints along the traced curve")
    worst = 0.0
    for point in points:
        formula = lambda_prime_of_gamma(point, cfg, surface)
        fd = lambda_prime_fd(point, cfg, surface)
        worst = max(worst, abs(formula - fd) / abs(formula))
    return worst


def check_maass_selberg(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """Maass–Selberg関係と数値積分の最大相対偏差."""
    worst = 0.0
    for eta in (1.5, 2.0):
        local = cfg.with_eta(eta)
        for s in (1.5, 1.8, 2 + 1j):
            msr = truncated_pairing_msr(s, local, surface).value
            quadrature = pairing_quadrature_oracle(s, local).value
            worst = max(worst, abs(msr - quadrature) / abs(quadrature))
    return worst


def check_dirichlet_limit(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """γ → ∞ の追跡の終点と Q の零点の距離."""
    seed = critical_line_seed(cfg, surface)
    path = PathSpec(waypoints=[0, DIRICHLET_GAMMA])
    terminal = trace_curve(path, seed, cfg, surface)[-1].s
    window = Window(
        re_min=terminal.real - 0.05,
        re_max=terminal.real + 0.05,
        im_min=terminal.imag - 0.05,
        im_max=terminal.imag + 0.05,
    )
    roots = solve_robin_roots(INFINITY, window, cfg, surface)
    if not roots:
        raise SpectralError(f"No Dirichlet root near {terminal}")
    return min(abs(root.s - terminal) for root in roots)


def check_continuation(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """接続した β と φ の最大差（s=0.75 と s=0.5+3i）."""
    worst = 0.0
    for text in ("2;0.75", "2;3+3i;0.5+3i"):
        path = PathSpec.parse(text)
        value, _ = continue_beta(path)
        worst = max(worst, abs(value - surface.phi(path.waypoints[-1])))
    return worst


def check_half_point(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """|β(1/2) + 1|（定数項が消えなければ∞）."""
    continuation = BetaContinuation()
    continuation.extend(PathSpec.parse("4;0.5"))
    beta_half, m_vanishes = half_point_analysis(cfg, continuation)
    if not m_vanishes:
        return float("inf")
    return abs(continuation(0.5) - beta_half)


def check_uniqueness(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """γ=0 と γ=1 の根の集合の最小距離."""
    window = Window(re_min=0.0, re_max=1.0, im_min=0.0, im_max=15.0)
    first = solve_robin_roots(0, window, cfg, surface)
    second = solve_robin_roots(1, window, cfg, surface)
    distances = [abs(a.s - b.s) for a in first for b in second]
    return min(distances, default=float("inf"))


def check_lambda_prime_decay(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """γ ∈ {10, 10², 10³, 10⁴} での |λ'| の連続する比の最大値."""
    checkpoints = [10.0, 1e2, 1e3, 1e4]
    seed = critical_line_seed(cfg, surface)
    points = trace_curve(PathSpec(waypoints=[0, *checkpoints]), seed, cfg, surface)
    slopes = [
        abs(lambda_prime_of_gamma(point, cfg, surface))
        for point in points
        if complex(point.gamma).real in checkpoints
    ]
    return max(b / a for a, b in zip(slopes, slopes[1:], strict=False))


def check_jordan_chain(surface: ScatteringData, cfg: TruncationConfig) -> float:
    """10点での Jordan 鎖の最大残差."""
    return max(jordan_chain_residual(s, cfg, surface) for s in JORDAN_POINTS)


CHECKS: tuple[Check, ...] = (
    Check("scattering_functional_equation", 1e-9, check_functional_equation),
    Check("oracle_agreement", 1e-6, check_oracle_agreement),
    Check("robin_reality", 1e-8, check_robin_reality),
    Check("derivative_formula", 1e-5, check_derivative_formula),
    Check("maass_selberg", 1e-3, check_maass_selberg),
    Check("dirichlet_limit", 1e-4, check_dirichlet_limit),
    Check("continuation", 1e-4, check_continuation),
    Check("half_point", 1e-6, check_half_point),
    Check("uniqueness", 1e-7, check_uniqueness, minimum=True),
    Check("lambda_prime_decay", 1 - 1e-12, check_lambda_prime_decay),
    Check("jordan_chain", 1e-8, check_jordan_chain),
)


def check_names() -> list[str]:
    """検証項目名の一覧."""
    return [check.name for check in CHECKS]


def run_verification(
    surface: ScatteringData | None = None,
    cfg: TruncationConfig | None = None,
    tol_override: float | None = None,
    only: Sequence[str] | None = None,
) -> list[CheckResult]:
    """検証スイートを実行する.

    計算中の例外は観測値 NaN の失敗として記録し、残りの項目を続ける。

    Args:
        surface: 散乱データ（省略時はモジュラー曲面）
        cfg: 切断設定（省略時は η=2）
        tol_override: すべての許容値をこの値に置き換える
        only: 実行する検証項目名（省略時はすべて）

    Returns:
        各項目の結果

    Raises:
        ValueError: 未知の検証項目名が指定された場合

    """
    surface = surface or modular_surface()
    cfg = cfg or TruncationConfig(eta=2.0)
    if only is not None:
        unknown = set(only) - set(check_names())
        if unknown:
            raise ValueError(f"Invalid check names: {sorted(unknown)}")

    results: list[CheckResult] = []
    for check in CHECKS:
        if only is not None and check.name not in only:
            continue
        tolerance = tol_override if tol_override is not None else check.tolerance
        logger.info(f"Running check {check.name}")
        try:
            observed = float(check.run(surface, cfg))
            message = ""
        except SpectralError as e:
            logger.error(f"Check {check.name} raised {type(e).__name__}: {e}")
            observed = float("nan")
            message = f"{type(e).__name__}: {e}"
        result = CheckResult(
            name=check.name,
            tolerance=tolerance,
            observed=observed,
            minimum=check.minimum,
            message=message,
        )
        status = "passed" if result.passed else "FAILED"
        logger.info(
            f"Check {check.name} {status}: "
            f"observed {observed:.3e}, tolerance {tolerance:.1e}"
        )
        results.append(result)
    return results
