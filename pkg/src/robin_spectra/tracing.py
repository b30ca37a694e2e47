"""固有値曲線の追跡モジュール.

γ平面の経路に沿って Robin 固有値 s(γ) を予測子・修正子法で追う。
予測子は λ'(γ) の公式、修正子は Robin 条件に対するNewton法を使う。
"""

import cmath

from loguru import logger

from .exceptions import (
    NonConvergenceError,
    PoleCrossingError,
    RamificationError,
    StepCollapseError,
)
from .maass_selberg import lambda_prime_of_gamma
from .models import PathSpec, SpectralPoint, TruncationConfig, is_infinite
from .modular_surface import ScatteringData
from .robin import (
    ROBIN_RESIDUAL_TOL,
    lambda_of_s,
    robin_function,
    robin_residual,
    s_of_lambda,
)
from .rootfinding import newton_polish

# 予測値から修正値までの許容距離（予測ステップに対する比）
CORRECTOR_RATIO = 0.25


def nearest_branch(lam: complex, reference: complex) -> complex:
    """λ = s(1−s) の2つの解のうち reference に近いほう."""
    s = s_of_lambda(lam)
    return s if abs(s - reference) <= abs(1 - s - reference) else 1 - s


def _solve_at(
    gamma: complex,
    start: complex,
    cfg: TruncationConfig,
    surface: ScatteringData | None,
) -> complex:
    f = robin_function(gamma, cfg, surface)
    return newton_polish(f, start, cfg.newton_tol, cfg.max_iter)


def lambda_prime_fd(
    point: SpectralPoint,
    cfg: TruncationConfig,
    surface: ScatteringData | None = None,
    h: float | None = None,
) -> complex:
    """γ±h でRobin条件を解き直した中心差分の λ'(γ).

    Args:
        point: スペクトル点（γは有限）
        cfg: 切断設定
        surface: 散乱データ（省略時はモジュラー曲面）
        h: 差分幅（省略時は 1e−4·(1+|γ|)）

    Returns:
        λ'(γ) の差分近似

    """
    gamma = complex(point.gamma)
    h = h or 1e-4 * (1 + abs(gamma))
    s_plus = _solve_at(gamma + h, point.s, cfg, surface)
    s_minus = _solve_at(gamma - h, point.s, cfg, surface)
    return (lambda_of_s(s_plus) - lambda_of_s(s_minus)) / (2 * h)


class CurveTracer:
    """予測子・修正子法による s(γ) の追跡.

    ステップ幅は |Δγ| / (1+|γ|) で測り、失敗すると半分、
    成功すると2倍（max_step まで）にする。
    """

    def __init__(
        self,
        path: PathSpec,
        cfg: TruncationConfig,
        surface: ScatteringData | None = None,
    ) -> None:
        """初期化.

        Args:
            path: γ平面の経路
            cfg: 切断設定
            surface: 散乱データ（省略時はモジュラー曲面）

        """
        self.path = path
        self.cfg = cfg
        self.surface = surface
        # 追跡済みの点（失敗しても途中までを保持する）
        self.points: list[SpectralPoint] = []

    def _predict(self, point: SpectralPoint, gamma: complex) -> tuple[complex, bool]:
        """λ + Δγ·λ'(γ) から予測した s と分岐点フラグ."""
        try:
            slope = lambda_prime_of_gamma(point, self.cfg, self.surface)
        except RamificationError as e:
            logger.warning(
                f"Ramification flag at s={e.location}; using a constant predictor"
            )
            return point.s, True
        if is_infinite(slope):
            raise PoleCrossingError(f"lambda'(gamma) is not finite at s={point.s}")
        lam = point.lam + (gamma - complex(point.gamma)) * slope
        return nearest_branch(lam, point.s), False

    def _try_step(self, point: SpectralPoint, gamma: complex) -> SpectralPoint | None:
        predicted, ramified = self._predict(point, gamma)
        if abs(predicted - point.s) > self.path.max_step:
            return None
        try:
            s = _solve_at(gamma, predicted, self.cfg, self.surface)
        except NonConvergenceError:
            return None
        if not cmath.isfinite(s):
            raise PoleCrossingError(f"Corrector left the finite plane at gamma={gamma}")
        allowed = CORRECTOR_RATIO * abs(predicted - point.s) + 1e-8 * (1 + abs(s))
        if not ramified and abs(s - predicted) > allowed:
            logger.debug(f"Corrector jumped {abs(s - predicted):.3e} at gamma={gamma}")
            return None
        candidate = SpectralPoint(s=s, gamma=gamma, eta=self.cfg.eta, ramified=ramified)
        if robin_residual(candidate, self.surface) > ROBIN_RESIDUAL_TOL:
            return None
        return candidate

    def _segment(self, point: SpectralPoint, target: complex) -> int:
        added = 0
        step = self.path.max_step
        while complex(point.gamma) != target:
            gamma = complex(point.gamma)
            remaining = target - gamma
            length = step * (1 + abs(gamma))
            if abs(remaining) <= length:
                nxt = target
            else:
                nxt = gamma + remaining / abs(remaining) * length
            candidate = self._try_step(point, nxt)
            if candidate is None:
                step /= 2
                if step < self.path.min_step:
                    raise StepCollapseError(
                        f"Step collapsed below {self.path.min_step} at gamma={gamma}",
                        gamma=gamma,
                        s=point.s,
                    )
                continue
            point = candidate
            self.points.append(point)
            added += 1
            step = min(2 * step, self.path.max_step)
        return added

    def trace(self, seed: SpectralPoint) -> list[SpectralPoint]:
        """経路を追跡する.

        Args:
            seed: 経路の始点でRobin条件を満たすスペクトル点

        Returns:
            追跡したスペクトル点（seed と各経由点を含む）

        Raises:
            ValueError: seed が始点と合わない場合
            StepCollapseError: ステップ幅が下限を下回った場合
            PoleCrossingError: 経路がγの極を横切る場合

        """
        start = self.path.waypoints[0]
        mismatch = abs(complex(seed.gamma) - start) > 1e-12 * (1 + abs(start))
        if seed.is_dirichlet or mismatch:
            raise ValueError(
                f"Invalid seed: gamma={seed.gamma} does not match path start {start}"
            )
        if robin_residual(seed, self.surface) > ROBIN_RESIDUAL_TOL:
            raise ValueError(f"Invalid seed: s={seed.s} violates the Robin condition")

        self.points = [seed]
        for target in self.path.waypoints[1:]:
            if self._segment(self.points[-1], complex(target)) == 0:
                self.points.append(self.points[-1])
        logger.info(
            f"Traced {len(self.points)} points from s={seed.s} to s={self.points[-1].s}"
        )
        return list(self.points)


def trace_curve(
    path: PathSpec,
    seed: SpectralPoint,
    cfg: TruncationConfig,
    surface: ScatteringData | None = None,
) -> list[SpectralPoint]:
    """γ平面の経路に沿って固有値曲線を追跡する."""
    return CurveTracer(path, cfg, surface).trace(seed)
