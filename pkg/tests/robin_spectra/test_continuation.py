"""解析接続モジュールのテスト."""

import math

import numpy as np
import pytest

from src.robin_spectra.continuation import (
    BetaContinuation,
    beta_from_samples,
    classify_eigenfunction,
    continue_beta,
    detect_pole,
    half_point_analysis,
    psi_map,
    sampling_radius,
)
from src.robin_spectra.exceptions import EtaExhaustedError
from src.robin_spectra.models import (
    INFINITY,
    DiscChain,
    EigenfunctionKind,
    PathSpec,
    TruncationConfig,
    Window,
)
from src.robin_spectra.modular_surface import scattering_phi
from src.robin_spectra.robin import robin_residual, solve_robin_roots


@pytest.fixture(scope="module")
def cfg() -> TruncationConfig:
    """η=2 の切断設定."""
    return TruncationConfig(eta=2.0)


@pytest.fixture(scope="module")
def continued_075() -> tuple[complex, DiscChain]:
    """s=2 から s=0.75 への接続."""
    return continue_beta(PathSpec.parse("2;0.75"))


class TestSampling:
    """標本化のテスト."""

    def test_beta_from_samples(self) -> None:
        """2つの高さから取り出した β は φ と一致."""
        s = 2.3 + 0.4j
        assert abs(beta_from_samples(s) - scattering_phi(s)) < 1e-9

    def test_sampling_radius(self) -> None:
        """半径は Re s = 1 までの距離の0.6倍で、円周は Re s ≥ 1.1 に収まる."""
        assert abs(sampling_radius(2 + 0j) - 0.6) < 1e-12
        assert abs(sampling_radius(4 + 1j) - 1.8) < 1e-12
        assert sampling_radius(10 + 0j) == 2.5
        assert sampling_radius(1.2 + 0j) < 0.3


class TestDetectPole:
    """係数の比による極の検出のテスト."""

    @staticmethod
    def coefficients(z0: complex, order: int) -> np.ndarray:
        """1/(z0 − t)^order のTaylor係数."""
        k = np.arange(25)
        if order == 1:
            return 1 / z0 ** (k + 1)
        return (k + 1) / z0 ** (k + 2)

    def test_simple_pole(self) -> None:
        """1位の極の位置と位数."""
        z0 = -1.0 + 0.2j
        pole = detect_pole(self.coefficients(z0, 1), 0.6, 1e-16)
        assert pole is not None
        assert abs(pole[0] - z0) < 1e-10
        assert pole[1] == 1

    def test_double_pole(self) -> None:
        """2位の極."""
        z0 = 1.5j
        pole = detect_pole(self.coefficients(z0, 2), 0.6, 1e-16)
        assert pole is not None
        assert abs(pole[0] - z0) < 1e-8
        assert pole[1] == 2

    def test_entire_function(self) -> None:
        """指数関数には極がない."""
        k = np.arange(25)
        coeffs = np.array([1 / math.factorial(int(j)) for j in k], dtype=complex)
        assert detect_pole(coeffs, 0.6, 1e-40) is None

    def test_below_noise(self) -> None:
        """係数が雑音に埋もれていれば検出しない."""
        coeffs = self.coefficients(-5.0, 1)
        assert detect_pole(coeffs, 0.6, 1e-10) is None


class TestContinueBeta:
    """β の解析接続のテスト."""

    def test_zero_length_path(self) -> None:
        """長さ0の経路では標本からそのまま β(s_start)."""
        value, chain = continue_beta(PathSpec.parse("2"))
        assert abs(value - scattering_phi(2)) < 1e-8
        assert len(chain.discs) == 1

    def test_target_075(self, continued_075: tuple[complex, DiscChain]) -> None:
        """s=0.75 で閉じた式と 1e−4 で一致."""
        value, _ = continued_075
        expected = scattering_phi(0.75)
        assert abs(value - expected) < 1e-4 * max(1, abs(expected))

    def test_pole_at_one_flagged(self, continued_075: tuple[complex, DiscChain]) -> None:
        """s=1 の極を検出して記録する."""
        _, chain = continued_075
        assert any(abs(flag.location - 1) < 1e-6 for flag in chain.pole_flags)

    def test_chain_overlap(self, continued_075: tuple[complex, DiscChain]) -> None:
        """連続する円板は重なる."""
        _, chain = continued_075
        for prev, nxt in zip(chain.discs, chain.discs[1:], strict=False):
            assert abs(nxt.center - prev.center) < prev.radius

    def test_invalid_start(self) -> None:
        """始点が収束域外なら拒否."""
        with pytest.raises(ValueError):
            continue_beta(PathSpec.parse("1.2;0.75"))

    def test_conjugate_path(self) -> None:
        """共役な経路では共役な値."""
        upper, _ = continue_beta(PathSpec.parse("2;1.2+0.5i"))
        lower, _ = continue_beta(PathSpec.parse("2;1.2-0.5i"))
        assert abs(upper - lower.conjugate()) < 1e-9

    @pytest.mark.slow
    def test_critical_line_target(self) -> None:
        """s=0.5+3i へ Re s の大きい側を回って接続."""
        value, _ = continue_beta(PathSpec.parse("2;3+3i;0.5+3i"))
        expected = scattering_phi(0.5 + 3j)
        assert abs(value - expected) < 1e-4

    @pytest.mark.slow
    def test_left_half_target(self) -> None:
        """Re s < 1/2 では関数等式 β(s) = 1/β(1−s) を使う."""
        value, _ = continue_beta(PathSpec.parse("2;0.25"))
        expected = scattering_phi(0.25)
        assert abs(value - expected) < 1e-4 * max(1, abs(expected))

    def test_functional_equation(self, continued_075: tuple[complex, DiscChain]) -> None:
        """接続した β(0.75) と閉じた式の φ(0.25) の積は1."""
        value, _ = continued_075
        assert abs(value * scattering_phi(0.25) - 1) < 1e-4

    def test_evaluate_pole(self) -> None:
        """検出した極の上では∞."""
        continuation = BetaContinuation()
        continuation.extend(PathSpec.parse("2"))
        flag = continuation.chain.pole_flags[0]
        value, _ = continuation.estimate(flag.location)
        assert value == INFINITY


class TestPsiMap:
    """Ψ写像のテスト."""

    def test_generic_point(self, cfg: TruncationConfig) -> None:
        """s0=2.3 では γ 有限で Robin 残差 ≤ 1e−9."""
        point, data = psi_map(2.3, cfg, beta=scattering_phi(2.3))
        assert not point.is_dirichlet
        assert robin_residual(point) <= 1e-9
        assert data.coeffs.a == 1
        assert len(data.fourier) == 12

    def test_symmetry(self, cfg: TruncationConfig) -> None:
        """s0 と 1−s0 で λ と γ が同じ."""
        s0 = 0.3 + 2j
        point, _ = psi_map(s0, cfg, beta=scattering_phi(s0))
        mirror, _ = psi_map(1 - s0, cfg, beta=scattering_phi(1 - s0))
        assert abs(point.lam - mirror.lam) < 1e-12
        assert abs(point.gamma - mirror.gamma) < 1e-9 * abs(point.gamma)

    def test_dirichlet_root_retry(self, cfg: TruncationConfig) -> None:
        """η=2 のDirichlet根では別のηで有限のγ."""
        window = Window(re_min=0.4, re_max=0.6, im_min=1, im_max=15)
        root = solve_robin_roots(INFINITY, window, cfg)[0]
        point, _ = psi_map(root.s, cfg, beta=scattering_phi(root.s))
        assert point.eta != 2.0
        assert not point.is_dirichlet

    def test_eta_exhausted(self, cfg: TruncationConfig) -> None:
        """s=1/2、β=−1 ではどのηでも定数項が消える."""
        with pytest.raises(EtaExhaustedError):
            psi_map(0.5, cfg, beta=-1)

    @pytest.mark.slow
    def test_continued_beta(self, cfg: TruncationConfig) -> None:
        """β を省略すると標本から求める."""
        point, data = psi_map(2.3, cfg)
        assert abs(data.coeffs.b - scattering_phi(2.3)) < 1e-8
        assert robin_residual(point) <= 1e-9


class TestHalfPoint:
    """s=1/2 での極限のテスト."""

    @pytest.mark.slow
    def test_modular_surface(self, cfg: TruncationConfig) -> None:
        """モジュラー曲面では β(1/2) = −1 で定数項が消える."""
        beta_half, m_vanishes = half_point_analysis(cfg)
        assert abs(beta_half + 1) < 1e-6
        assert abs(beta_half**2 - 1) < 1e-8
        assert m_vanishes


class TestClassifyEigenfunction:
    """固有関数の分類のテスト."""

    def test_generic(
        self, cfg: TruncationConfig, continued_075: tuple[complex, DiscChain]
    ) -> None:
        """極から離れた s は切断級数."""
        _, chain = continued_075
        kind = classify_eigenfunction(0.5 + 9j, cfg, chain)
        assert kind == EigenfunctionKind.TRUNCATED_SERIES

    def test_pole_without_chain(self, cfg: TruncationConfig) -> None:
        """連鎖を渡さなくても s=1 の極を接続で見つけて共役な級数."""
        kind = classify_eigenfunction(1.0, cfg)
        assert kind == EigenfunctionKind.CONJUGATED_SERIES

    def test_regular_point_without_chain(self, cfg: TruncationConfig) -> None:
        """連鎖を渡さない場合も極でない点は切断級数."""
        kind = classify_eigenfunction(1.5, cfg)
        assert kind == EigenfunctionKind.TRUNCATED_SERIES

    def test_pole_flag(
        self, cfg: TruncationConfig, continued_075: tuple[complex, DiscChain]
    ) -> None:
        """βの極では共役な級数."""
        _, chain = continued_075
        flag = chain.pole_flags[0]
        kind = classify_eigenfunction(flag.location, cfg, chain)
        assert kind == EigenfunctionKind.CONJUGATED_SERIES

    @pytest.mark.slow
    def test_half_point(self, cfg: TruncationConfig) -> None:
        """β(1/2) = −1 なので1/2でも微分した級数ではない."""
        kind = classify_eigenfunction(0.5, cfg)
        assert kind != EigenfunctionKind.DERIVATIVE_SERIES
