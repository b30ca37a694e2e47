"""解析接続モジュール.

収束域 Re s > 1.1 での格子和の標本だけから散乱係数 β(s) を円板の連鎖で
接続する。極は係数の比から検出して取り除き、Ψ写像 s ↦ λ ↦ γ ↦ v、
s=1/2 での極限、固有関数の分類を提供する。
"""

import math

import numpy as np
from loguru import logger
from tenacity import RetryError, Retrying, retry_if_exception_type, stop_after_attempt

from .config import settings
from .exceptions import (
    DegenerateTruncationError,
    EtaExhaustedError,
    NonUnimodularLimitError,
    RadiusExhaustedError,
    StepCollapseError,
)
from .models import (
    HALF_POINT_TOL,
    INFINITY,
    ConstantTermCoeffs,
    Disc,
    DiscChain,
    EigenfunctionData,
    EigenfunctionKind,
    PathSpec,
    PoleFlag,
    SpectralPoint,
    TruncationConfig,
)
from .modular_surface import constant_term_oracle, fourier_coefficient
from .robin import constant_term_PQ
from .special_functions import circle_nodes

# 円板あたりの標本数
CONTINUATION_NODES = 128

# これより小さい円では標本化しない
MIN_SAMPLE_RADIUS = 0.3

# 比判定で極とみなす z_k のばらつきの上限
POLE_SPREAD = 0.05

# 比判定に使う末尾の係数の数
RATIO_WINDOW = 8

_MAX_DEFLATIONS = 3

# 既定の経路（始点は収束域内）
RECOMMENDED_PATHS = ("2;0.75", "2;3+3i;0.5+3i", "4;0.5")
HALF_POINT_PATH = "4;0.5"


def beta_from_samples(s: complex) -> complex:
    """2つの高さの定数項オラクルから β(s) を取り出す.

    β = (E₀(y₁)y₂^s − E₀(y₂)y₁^s) / (y₁^{1−s}y₂^s − y₂^{1−s}y₁^s)
    """
    s = complex(s)
    y1, y2 = settings.sample_heights
    e1 = constant_term_oracle(y1, s, settings.oracle_tol)
    e2 = constant_term_oracle(y2, s, settings.oracle_tol)
    numerator = e1 * y2**s - e2 * y1**s
    denominator = y1 ** (1 - s) * y2**s - y2 ** (1 - s) * y1**s
    return numerator / denominator


def sampling_radius(center: complex) -> float:
    """中心 center で標本化できる円の半径（円周が Re s ≥ 1.1 に収まる）."""
    return min(
        settings.disc_radius_factor * (center.real - 1),
        center.real - settings.sampling_floor,
        settings.max_disc_radius,
    )


def deflation(s: complex | np.ndarray, flags: list[PoleFlag]) -> complex | np.ndarray:
    """Π (s − p)^k."""
    factor = np.ones_like(s, dtype=complex) if isinstance(s, np.ndarray) else 1 + 0j
    for flag in flags:
        factor = factor * (s - flag.location) ** flag.order
    return factor


def detect_pole(
    coeffs: np.ndarray, sample_radius: float, noise: float
) -> tuple[complex, int] | None:
    """末尾のTaylor係数の比から最も近い極を推定する.

    c_k/c_{k−1} ≈ (1/z₀)(1 + (m−1)/k) を 1/k について直線で当てはめ、
    中心からの位置 z₀ と位数 m を返す。係数が雑音に埋もれているか、
    比が揃わない場合は None。
    """
    order = len(coeffs) - 1
    ks = np.arange(max(2, order - RATIO_WINDOW), order + 1)
    scaled = np.abs(coeffs[ks]) * sample_radius**ks
    if np.any(scaled <= 1e3 * noise) or np.any(coeffs[ks - 1] == 0):
        return None

    ratios = coeffs[ks] / coeffs[ks - 1]
    design = np.vstack([np.ones(len(ks)), 1 / ks]).T.astype(complex)
    (intercept, slope), *_ = np.linalg.lstsq(design, ratios, rcond=None)
    if intercept == 0:
        return None
    multiplicity = max(1, round((slope / intercept).real + 1))
    z0 = 1 / intercept
    estimates = (1 + (multiplicity - 1) / ks) / ratios
    if np.max(np.abs(estimates - z0)) > POLE_SPREAD * abs(z0):
        return None
    return complex(z0), multiplicity


def _radius_estimate(scaled: np.ndarray, sample_radius: float, noise: float) -> float:
    """スケール済み係数の減衰から収束半径を下から見積もる."""
    order = len(scaled) - 1
    head = max(np.max(np.abs(scaled)), 1e-300)
    tail = max(abs(scaled[-1]), noise, 1e-300 * head)
    return sample_radius * max(1.0, (head / tail) ** (1 / order))


def _disc_error(disc: Disc, distance: float) -> tuple[float, int]:
    """円板の級数で距離 distance の点を評価したときの誤差の見積もりと打ち切り次数.

    雑音の拡大 noise·(d/r)^K と打ち切り |c_K|d^K·(d/R)/(1−d/R) の和が
    最小になる次数 K を選ぶ。
    """
    if distance >= disc.radius:
        return math.inf, 0
    ratio = distance / disc.radius
    top = len(disc.coeffs) - 1
    best = (math.inf, 0)
    for order in range(top + 1):
        growth = (distance / disc.sample_radius) ** order
        if order < top:
            omitted = abs(disc.coeffs[order + 1]) * distance ** (order + 1)
        else:
            omitted = abs(disc.coeffs[top]) * distance**top * ratio
        error = disc.noise * max(1.0, growth) + omitted / (1 - ratio)
        if error < best[0]:
            best = (error, order)
    return best


def _disc_value(disc: Disc, s: complex, order: int) -> complex:
    coeffs = disc.coeffs[: order + 1]
    return complex(np.polynomial.polynomial.polyval(s - disc.center, coeffs))


class BetaContinuation:
    """βを運ぶ円板の連鎖.

    収束域で標本化できる中心では格子和から係数を求め、それ以外では
    最良の円板の多項式を中心だけずらして記録する。
    """

    def __init__(self, order: int | None = None) -> None:
        """初期化.

        Args:
            order: 各円板で保持するTaylor係数の次数（省略時は設定値）

        """
        self.order = order or settings.continuation_order
        self.chain = DiscChain()

    @property
    def sampled_discs(self) -> list[Disc]:
        """格子和から直接標本化した円板."""
        return [disc for disc in self.chain.discs if disc.sampled]

    def sample_disc(self, center: complex) -> Disc:
        """center で β を標本化し、既知の極と新しく見つけた極を取り除いた円板を作る."""
        radius = sampling_radius(center)
        nodes = circle_nodes(center, radius, CONTINUATION_NODES)
        betas = np.array([beta_from_samples(complex(z)) for z in nodes])
        powers = radius ** np.arange(self.order + 1, dtype=float)

        for _ in range(_MAX_DEFLATIONS + 1):
            values = betas * deflation(nodes, self.chain.pole_flags)
            spectrum = np.fft.fft(values) / CONTINUATION_NODES
            noise = float(np.max(np.abs(spectrum[CONTINUATION_NODES // 2 + 1 : -3])))
            coeffs = spectrum[: self.order + 1] / powers
            pole = detect_pole(coeffs, radius, noise)
            if pole is None:
                break
            z0, multiplicity = pole
            flag = PoleFlag(location=center + z0, order=multiplicity)
            logger.info(
                f"Detected pole of beta near {flag.location} (order {multiplicity})"
            )
            self.chain.pole_flags.append(flag)

        scaled = spectrum[: self.order + 1]
        estimate = _radius_estimate(scaled, radius, noise)
        logger.debug(
            f"Sampled disc at {center}: radius {radius:.3f}, "
            f"convergence estimate {estimate:.3f}, noise {noise:.2e}"
        )
        return Disc(
            center=center,
            radius=estimate,
            coeffs=[complex(c) for c in coeffs],
            sample_radius=radius,
            noise=noise,
            sampled=True,
        )

    def best_disc(self, s: complex) -> tuple[Disc, float, int]:
        """s を最も小さい誤差で評価できる標本化済みの円板と誤差、打ち切り次数."""
        candidates = [
            (disc, *_disc_error(disc, abs(s - disc.center))) for disc in self.sampled_discs
        ]
        if not candidates:
            raise RadiusExhaustedError(f"No sampled disc available for s={s}")
        return min(candidates, key=lambda item: item[1])

    def _reexpand(self, center: complex) -> Disc:
        parent, error, order = self.best_disc(center)
        if not math.isfinite(error):
            raise RadiusExhaustedError(f"No disc of the chain reaches s={center}")
        shift = center - parent.center
        coeffs = np.zeros(len(parent.coeffs), dtype=complex)
        # p(c + t) を t の多項式に展開
        for k, coefficient in enumerate(parent.coeffs[: order + 1]):
            coeffs[: k + 1] += coefficient * np.array(
                [math.comb(k, j) * shift ** (k - j) for j in range(k + 1)]
            )
        return Disc(
            center=center,
            radius=parent.radius - abs(shift),
            coeffs=[complex(c) for c in coeffs],
            sample_radius=parent.sample_radius,
            noise=error,
            sampled=False,
        )

    def add_disc(self, center: complex) -> Disc:
        """center に円板を追加する."""
        if sampling_radius(center) >= MIN_SAMPLE_RADIUS:
            disc = self.sample_disc(center)
        else:
            disc = self._reexpand(center)
        self.chain = DiscChain(
            discs=[*self.chain.discs, disc], pole_flags=self.chain.pole_flags
        )
        return disc

    def extend(self, path: PathSpec) -> None:
        """経路に沿って円板を並べる.

        Raises:
            StepCollapseError: 次の中心までの距離が最小ステップを下回る場合
            RadiusExhaustedError: どの円板も次の中心に届かない場合

        """
        current = complex(path.waypoints[0])
        if not self.chain.discs:
            self.add_disc(current)
        for waypoint in path.waypoints[1:]:
            target = complex(waypoint)
            while abs(target - current) > 1e-14:
                reach = 0.5 * self.chain.discs[-1].radius
                if reach < path.min_step:
                    raise StepCollapseError(
                        f"Continuation step collapsed at s={current}",
                        gamma=INFINITY,
                        s=current,
                    )
                remaining = target - current
                step = min(abs(remaining), reach)
                if step == abs(remaining):
                    current = target
                else:
                    current += remaining / abs(remaining) * step
                self.add_disc(current)

    def estimate(self, s: complex) -> tuple[complex, float]:
        """β(s) とその誤差の見積もり."""
        s = complex(s)
        for flag in self.chain.pole_flags:
            if abs(s - flag.location) <= 1e-12 * (1 + abs(flag.location)):
                return INFINITY, 0.0
        disc, error, order = self.best_disc(s)
        factor = deflation(s, self.chain.pole_flags)
        return _disc_value(disc, s, order) / factor, error / abs(factor)

    def __call__(self, s: complex) -> complex:
        """β(s)（Re s < 1/2 では 1/β(1−s)）."""
        s = complex(s)
        if s.real < 0.5:
            return 1 / self.estimate(1 - s)[0]
        return self.estimate(s)[0]


def continue_beta(path: PathSpec, tol: float = 1e-4) -> tuple[complex, DiscChain]:
    """収束域の標本から経路の終点まで β を解析接続する.

    Args:
        path: 始点の実部が 1.1 より大きい経路
        tol: 許容誤差

    Returns:
        終点での β と円板の連鎖

    Raises:
        ValueError: 始点が収束域外の場合
        RadiusExhaustedError: 誤差の見積もりが tol を超える場合

    """
    start = complex(path.waypoints[0])
    if sampling_radius(start) < MIN_SAMPLE_RADIUS:
        raise ValueError(f"Invalid continuation start: s={start} is not sampleable")
    target = complex(path.waypoints[-1])
    mirrored = target.real < 0.5
    if mirrored:
        # β(s) = 1/β(1−s)
        path = PathSpec(
            waypoints=[*path.waypoints[:-1], 1 - target],
            max_step=path.max_step,
            min_step=path.min_step,
        )

    continuation = BetaContinuation()
    continuation.extend(path)
    value, error = continuation.estimate(complex(path.waypoints[-1]))
    if error > tol * max(1.0, abs(value)):
        raise RadiusExhaustedError(
            f"Continuation to s={target} has error estimate {error:.2e} > {tol:.1e}"
        )
    if mirrored:
        value = 1 / value
    logger.info(f"Continued beta to s={target}: {value} (error estimate {error:.2e})")
    return value, continuation.chain


def _default_path(s0: complex) -> PathSpec:
    if sampling_radius(s0) >= MIN_SAMPLE_RADIUS:
        return PathSpec(waypoints=[s0, s0])
    return PathSpec(waypoints=[2, s0])


def _truncation_at(
    s0: complex, beta: complex, cfg: TruncationConfig
) -> tuple[SpectralPoint, ConstantTermCoeffs]:
    q, p = constant_term_PQ(s0, beta, cfg)
    if abs(s0 - 0.5) <= HALF_POINT_TOL:
        coeffs = ConstantTermCoeffs(a=1 + beta, b=0, log_form=True)
    else:
        coeffs = ConstantTermCoeffs(a=1, b=beta)
    scale = abs(cfg.eta**s0) + abs(beta * cfg.eta ** (1 - s0))
    if abs(q) <= settings.infinity_threshold * scale:
        raise DegenerateTruncationError(f"Q vanishes at s={s0} for eta={cfg.eta}")
    return SpectralPoint(s=s0, gamma=-p / q, eta=cfg.eta), coeffs


def psi_map(
    s0: complex, cfg: TruncationConfig, beta: complex | None = None
) -> tuple[SpectralPoint, EigenfunctionData]:
    """Ψ写像 s ↦ λ ↦ γ ↦ v.

    γ=∞ や定数項の退化が起きたら、設定された候補のηを順に試す。

    Args:
        s0: スペクトルパラメータ
        cfg: 切断設定
        beta: β(s0)（省略時は解析接続で求める）

    Returns:
        スペクトル点と固有関数データ

    Raises:
        EtaExhaustedError: どのηでも退化する場合

    """
    s0 = complex(s0)
    if beta is None:
        beta, _ = continue_beta(_default_path(s0))
    etas = [cfg.eta, *(eta for eta in settings.eta_candidates if eta != cfg.eta)]
    etas = [eta for eta in etas if eta > cfg.eta_floor]

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(len(etas)),
            retry=retry_if_exception_type(DegenerateTruncationError),
        ):
            with attempt:
                eta = etas[attempt.retry_state.attempt_number - 1]
                if attempt.retry_state.attempt_number > 1:
                    logger.warning(f"Retrying psi map at s={s0} with eta={eta}")
                point, coeffs = _truncation_at(s0, beta, cfg.with_eta(eta))
    except RetryError as e:
        raise EtaExhaustedError(f"No admissible eta in {etas} for s={s0}") from e

    fourier = {m: fourier_coefficient(m, s0) for m in range(1, settings.fourier_terms + 1)}
    data = EigenfunctionData(point=point, coeffs=coeffs, fourier=fourier)
    logger.info(f"Psi map at s={s0}: gamma={point.gamma}, eta={point.eta}")
    return point, data


def half_point_analysis(
    cfg: TruncationConfig, continuation: BetaContinuation | None = None
) -> tuple[complex, bool]:
    """s=1/2 での β の極限と定数項の退化.

    接続した β を 1/2 のまわりの小さな円で平均し、|β(1/2)| = 1 を確かめて
    ±1 のどちらかを返す。

    Returns:
        (β(1/2), 1+β(1/2) が消えるか)

    Raises:
        NonUnimodularLimitError: |β(1/2)| が1から 1e−6 より離れる場合

    """
    if continuation is None:
        continuation = BetaContinuation()
        continuation.extend(PathSpec.parse(HALF_POINT_PATH))
    nodes = circle_nodes(0.5, settings.half_point_radius, 8)
    raw = complex(np.mean([continuation(complex(z)) for z in nodes]))
    deviation = abs(abs(raw) - 1)
    logger.info(
        f"Continued beta(1/2) = {raw} (| |beta| - 1 | = {deviation:.2e}, eta={cfg.eta})"
    )
    if deviation > 1e-6 or abs(raw.imag) > 1e-6:
        raise NonUnimodularLimitError(f"beta(1/2) = {raw} is not +-1")
    beta_half = complex(math.copysign(1.0, raw.real))
    return beta_half, beta_half == -1


def classify_eigenfunction(
    s: complex, cfg: TruncationConfig, chain: DiscChain | None = None
) -> EigenfunctionKind:
    """固有関数の種類を判定する.

    s=1/2 で β(1/2) = +1 なら微分した級数、βの極では共役な級数、
    それ以外は切断級数。

    Args:
        s: スペクトルパラメータ
        cfg: 切断設定
        chain: s の近くまで接続した円板の連鎖（省略時は収束域から s まで接続する）

    Returns:
        固有関数の種類

    Raises:
        RadiusExhaustedError: 連鎖を s まで延ばせない場合
        StepCollapseError: 連鎖のステップ幅が崩壊した場合

    """
    s = complex(s)
    if abs(s - 0.5) <= HALF_POINT_TOL:
        beta_half, _ = half_point_analysis(cfg)
        if beta_half == 1:
            return EigenfunctionKind.DERIVATIVE_SERIES
        return EigenfunctionKind.TRUNCATED_SERIES
    if chain is None:
        continuation = BetaContinuation()
        continuation.extend(_default_path(s))
        chain = continuation.chain
    for flag in chain.pole_flags:
        if abs(s - flag.location) <= 1e-6 * (1 + abs(flag.location)):
            return EigenfunctionKind.CONJUGATED_SERIES
    return EigenfunctionKind.TRUNCATED_SERIES
