"""Robin条件モジュールのテスト."""

import math

import numpy as np
import pytest
from scipy import integrate

from src.robin_spectra.exceptions import (
    DegenerateDenominatorError,
    DomainError,
    ExcludedParameterError,
    IndeterminateGammaError,
    TailTooLargeError,
)
from src.robin_spectra.models import (
    INFINITY,
    ConstantTermCoeffs,
    EigenfunctionData,
    SpectralPoint,
    SurfacePoint,
    TruncationConfig,
    Window,
    is_infinite,
)
from src.robin_spectra.modular_surface import (
    ScatteringData,
    constant_term_oracle,
    eisenstein_direct_sum,
    fourier_coefficient,
    scattering_phi,
)
from src.robin_spectra.robin import (
    HALF_SERIES_RANGE,
    beta_from_gamma,
    constant_term_PQ,
    constant_term_value,
    eta_flow,
    evaluate_truncated,
    family_for,
    gamma_of_s,
    indicator_pairing,
    lambda_of_s,
    robin_residual,
    s_of_lambda,
    solve_robin_roots,
    strip_pairing,
)


@pytest.fixture
def cfg() -> TruncationConfig:
    """η=2 の切断設定."""
    return TruncationConfig(eta=2.0)


def eisenstein_data(s: complex, eta: float, terms: int = 12) -> EigenfunctionData:
    """Eisenstein級数の固有関数データ."""
    return EigenfunctionData(
        point=SpectralPoint(s=s, gamma=0, eta=eta),
        coeffs=ConstantTermCoeffs(a=1, b=scattering_phi(s)),
        fourier={m: fourier_coefficient(m, s) for m in range(1, terms + 1)},
    )


class TestLambdaMaps:
    """s ↔ λ の対応のテスト."""

    def test_lambda_of_s(self) -> None:
        """λ(1/2) = 1/4、λ(2) = −2、λ(s) = λ(1−s)."""
        assert lambda_of_s(0.5) == 0.25
        assert lambda_of_s(2) == -2
        s = 0.3 + 4j
        assert abs(lambda_of_s(s) - lambda_of_s(1 - s)) < 1e-14

    def test_s_of_lambda(self) -> None:
        """標準的な枝."""
        assert s_of_lambda(0.25) == 0.5
        assert s_of_lambda(0) == 1
        assert s_of_lambda(-2) == 2

    def test_critical_line_branch(self) -> None:
        """臨界線上では Im s ≥ 0 の代表を返す."""
        assert abs(s_of_lambda(lambda_of_s(0.5 - 6j)) - (0.5 + 6j)) < 1e-12

    def test_round_trip(self) -> None:
        """λ(s(λ)) = λ."""
        rng = np.random.default_rng(3)
        for lam in rng.normal(scale=20, size=20) + 1j * rng.normal(scale=20, size=20):
            assert abs(lambda_of_s(s_of_lambda(lam)) - lam) < 1e-12 * max(1.0, abs(lam))


class TestConstantTermPQ:
    """定数項の汎関数のテスト."""

    def test_pure_power(self, cfg: TruncationConfig) -> None:
        """β=0, s=2, η=2 で Q=4, P=4."""
        q, p = constant_term_PQ(2, 0, cfg)
        assert q == pytest.approx(4)
        assert p == pytest.approx(4)

    def test_log_form(self, cfg: TruncationConfig) -> None:
        """a=0, b=1 の対数形式で Q = ln(η)√η, P = (ln η + 2)/(2√η)."""
        coeffs = ConstantTermCoeffs(a=0, b=1, log_form=True)
        q, p = constant_term_PQ(0.5, coeffs, cfg)
        eta = cfg.eta
        assert q == pytest.approx(math.log(eta) * math.sqrt(eta))
        assert p == pytest.approx((math.log(eta) + 2) / (2 * math.sqrt(eta)))

    def test_half_point_beta(self, cfg: TruncationConfig) -> None:
        """s=1/2 で β を与えると (1+β)√y."""
        q, p = constant_term_PQ(0.5, 0.3, cfg)
        assert q == pytest.approx(1.3 * math.sqrt(2))
        assert p == pytest.approx(1.3 / (2 * math.sqrt(2)))

    def test_coefficient_swap(self, cfg: TruncationConfig) -> None:
        """(a, b) at s と (b, a) at 1−s は同じ値."""
        s = 0.7 + 3.2j
        coeffs = ConstantTermCoeffs(a=1.5 - 0.2j, b=0.4 + 1j)
        q1, p1 = constant_term_PQ(s, coeffs, cfg)
        q2, p2 = constant_term_PQ(1 - s, coeffs.swapped(), cfg)
        assert abs(q1 - q2) < 1e-13
        assert abs(p1 - p2) < 1e-13

    def test_against_oracle(self, cfg: TruncationConfig) -> None:
        """s=2.3 で定数項オラクルとその高さ微分に一致."""
        s = 2.3
        q, p = constant_term_PQ(s, scattering_phi(s), cfg)
        h = 0.01
        values = [constant_term_oracle(cfg.eta + k * h, s) for k in (-2, -1, 1, 2)]
        derivative = (values[0] - 8 * values[1] + 8 * values[2] - values[3]) / (12 * h)
        assert abs(q - constant_term_oracle(cfg.eta, s)) < 1e-9
        assert abs(p - derivative) < 1e-6 * abs(p)


class TestConstantTermFamily:
    """正則な定数項の族のテスト."""

    def test_modular_family_is_divided(self, cfg: TruncationConfig) -> None:
        """β(1/2) = −1 なので (s−1/2) で割る."""
        assert family_for(cfg).divided

    def test_matches_power_form(self, cfg: TruncationConfig) -> None:
        """族の比は y^s + φ(s)y^{1−s} の汎関数の比と一致."""
        s = 0.8 + 5j
        q_hat, p_hat = family_for(cfg)(s)
        q, p = constant_term_PQ(s, scattering_phi(s), cfg)
        assert abs(p_hat / q_hat - p / q) < 1e-10 * abs(p / q)

    def test_half_series_continuity(self, cfg: TruncationConfig) -> None:
        """半級数の境界の内外で値がつながる."""
        family = family_for(cfg)
        t = HALF_SERIES_RANGE * (1 - 1e-9) * (0.6 + 0.8j)
        inside = family(0.5 + t)
        raw = family.raw(0.5 + t) / t
        assert abs(inside[0] - raw[0]) < 1e-9 * abs(raw[0])
        assert abs(inside[1] - raw[1]) < 1e-9 * abs(raw[1])

    def test_log_coeffs_at_half(self, cfg: TruncationConfig) -> None:
        """s=1/2 の値は対数形式の係数による Q, P."""
        family = family_for(cfg)
        q_hat, p_hat = family(0.5)
        q, p = constant_term_PQ(0.5, family.log_coeffs(), cfg)
        assert abs(q_hat - q) < 1e-9 * abs(q)
        assert abs(p_hat - p) < 1e-9 * abs(p)


class TestGammaOfS:
    """γ(s) のテスト."""

    def test_round_trip_with_beta(self, cfg: TruncationConfig) -> None:
        """β(γ(s)) = φ(s)."""
        s = 2.3
        gamma = gamma_of_s(s, cfg)
        assert not is_infinite(gamma)
        assert abs(beta_from_gamma(gamma, s, cfg) - scattering_phi(s)) < 1e-10

    def test_dirichlet_points(self, cfg: TruncationConfig) -> None:
        """Q の零点では γ=∞."""
        window = Window(re_min=0.4, re_max=0.6, im_min=0.5, im_max=25)
        roots = solve_robin_roots(INFINITY, window, cfg)
        assert roots
        for point in roots:
            assert is_infinite(gamma_of_s(point.s, cfg))

    def test_indeterminate(self, cfg: TruncationConfig) -> None:
        """P と Q が同時に消える族では不定."""
        degenerate = ScatteringData(
            name="degenerate", numerator=lambda s: 0j, denominator=lambda s: 0j
        )
        with pytest.raises(IndeterminateGammaError):
            gamma_of_s(2.0, cfg, degenerate)

    def test_real_on_critical_line(self, cfg: TruncationConfig) -> None:
        """臨界線上ではγは実数."""
        gamma = gamma_of_s(0.5 + 7.3j, cfg)
        assert abs(gamma.imag) < 1e-9 * max(1.0, abs(gamma))


class TestBetaFromGamma:
    """β(γ) のテスト."""

    def test_dirichlet_limit(self, cfg: TruncationConfig) -> None:
        """γ=∞ では −η^{2s−1}."""
        assert beta_from_gamma(INFINITY, 2.0, cfg) == pytest.approx(-8)

    def test_pure_power(self, cfg: TruncationConfig) -> None:
        """s=2, γ=−s/η では β=0."""
        assert abs(beta_from_gamma(-1.0, 2.0, cfg)) < 1e-15

    def test_degenerate(self, cfg: TruncationConfig) -> None:
        """分母が消える γ."""
        s = 2.0
        gamma = -(1 - s) * cfg.eta**-s / cfg.eta ** (1 - s)
        with pytest.raises(DegenerateDenominatorError):
            beta_from_gamma(gamma, s, cfg)


class TestSolveRobinRoots:
    """Robin固有値の探索のテスト."""

    def test_recovers_constructed_root(self, cfg: TruncationConfig) -> None:
        """γ = γ(s*) から s* を再現."""
        target = 0.5 + 6j
        gamma = gamma_of_s(target, cfg)
        window = Window(re_min=0.3, re_max=0.7, im_min=5.7, im_max=6.3)
        roots = solve_robin_roots(gamma, window, cfg)
        assert any(abs(p.s - target) < 1e-10 for p in roots)
        assert all(robin_residual(p) <= 1e-9 for p in roots)

    def test_dirichlet_residual(self, cfg: TruncationConfig) -> None:
        """γ=∞ の根は |Q| が閾値以下."""
        window = Window(re_min=0, re_max=1, im_min=0.5, im_max=25)
        roots = solve_robin_roots(INFINITY, window, cfg)
        for point in roots:
            assert point.is_dirichlet
            assert robin_residual(point) <= 1e-9

    def test_constant_eigenfunction(self, cfg: TruncationConfig) -> None:
        """γ=0 では s=1（定数関数）が根."""
        window = Window(re_min=0.9, re_max=1.1, im_min=-0.1, im_max=0.1)
        roots = solve_robin_roots(0, window, cfg)
        assert len(roots) == 1
        assert abs(roots[0].s - 1) < 1e-10

    def test_reality_small_window(self, cfg: TruncationConfig) -> None:
        """実数γの根は実軸上か臨界線上."""
        window = Window(re_min=0, re_max=1, im_min=0, im_max=25)
        roots = solve_robin_roots(1.0, window, cfg)
        assert roots
        for point in roots:
            assert abs(point.s.real - 0.5) <= 1e-8 or abs(point.s.imag) <= 1e-8

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma", [-2.0, 0.0, 1.0, 5.0, INFINITY])
    def test_reality_full_window(self, cfg: TruncationConfig, gamma: complex) -> None:
        """[0,1]×[0,30] のすべての根が実軸上か臨界線上."""
        window = Window(re_min=0, re_max=1, im_min=0, im_max=30)
        roots = solve_robin_roots(gamma, window, cfg)
        for point in roots:
            assert abs(point.s.real - 0.5) <= 1e-8 or abs(point.s.imag) <= 1e-8

    def test_distinct_gammas_disjoint(self, cfg: TruncationConfig) -> None:
        """異なるγの根は共有されない."""
        window = Window(re_min=0, re_max=1, im_min=0.5, im_max=10)
        first = solve_robin_roots(0.0, window, cfg)
        second = solve_robin_roots(1.0, window, cfg)
        for p in first:
            assert all(abs(p.s - q.s) > 1e-7 for q in second)


class TestEtaFlow:
    """η方向の流れのテスト."""

    def test_single_power(self) -> None:
        """b=0 では γ = −s/η, γ' = s/η²."""
        s, eta = 2.3 + 0.5j, 2.0
        gamma, slope = eta_flow(s, ConstantTermCoeffs(a=1, b=0), eta)
        assert abs(gamma + s / eta) < 1e-14
        assert abs(slope - s / eta**2) < 1e-14

    def test_against_finite_difference(self) -> None:
        """閉じた式の微分は中心差分と一致."""
        s = 2.3
        coeffs = ConstantTermCoeffs(a=1, b=scattering_phi(s))
        h = 1e-5
        _, slope = eta_flow(s, coeffs, 2.0)
        upper, lower = eta_flow(s, coeffs, 2.0 + h)[0], eta_flow(s, coeffs, 2.0 - h)[0]
        difference = (upper - lower) / (2 * h)
        assert abs(slope - difference) <= 1e-7 * abs(slope)

    def test_log_form_against_finite_difference(self) -> None:
        """対数形式でも中心差分と一致."""
        coeffs = ConstantTermCoeffs(a=0.3, b=-0.5, log_form=True)
        h = 1e-5
        _, slope = eta_flow(0.5, coeffs, 3.0)
        upper = eta_flow(0.5, coeffs, 3.0 + h)[0]
        lower = eta_flow(0.5, coeffs, 3.0 - h)[0]
        difference = (upper - lower) / (2 * h)
        assert abs(slope - difference) <= 1e-7 * abs(slope)

    def test_constant_function(self) -> None:
        """s=1, a=1, b=0 で γ = −1/η."""
        gamma, _ = eta_flow(1, ConstantTermCoeffs(a=1, b=0), 2.0)
        assert gamma == -0.5

    def test_zero_of_constant_term(self) -> None:
        """v₀(η) = 0 では∞."""
        s, eta = 2.0, 2.0
        gamma, slope = eta_flow(s, ConstantTermCoeffs(a=1, b=-(eta ** (2 * s - 1))), eta)
        assert is_infinite(gamma)
        assert is_infinite(slope)


class TestEvaluateTruncated:
    """切断級数の評価のテスト."""

    def test_zero_above_eta(self) -> None:
        """η より上で Fourier 係数がすべて0なら0."""
        data = EigenfunctionData(
            point=SpectralPoint(s=2.3, gamma=0, eta=2.0),
            coeffs=ConstantTermCoeffs(a=1, b=0.5),
        )
        assert evaluate_truncated(SurfacePoint(x=0.1, y=3.0), data) == 0

    def test_jump_at_eta(self) -> None:
        """y = η をまたぐと定数項の分だけ不連続."""
        s, eta = 2.3, 2.0
        data = eisenstein_data(s, eta)
        below = evaluate_truncated(SurfacePoint(x=0.2, y=eta), data)
        above = evaluate_truncated(SurfacePoint(x=0.2, y=eta + 1e-10), data)
        expected = -constant_term_value(data.coeffs, s, eta)
        assert abs((above - below) - expected) < 1e-6

    def test_matches_direct_sum_below_eta(self) -> None:
        """y < η では Eisenstein 級数そのもの."""
        s = 2.3
        data = eisenstein_data(s, 2.0)
        z = SurfacePoint(x=0.3, y=1.4)
        assert abs(evaluate_truncated(z, data) - eisenstein_direct_sum(z, s)) < 1e-5

    def test_matches_direct_sum_above_eta(self) -> None:
        """y > η では定数項を除いた Eisenstein 級数."""
        s = 2.3
        data = eisenstein_data(s, 2.0)
        z = SurfacePoint(x=-0.2, y=2.5)
        expected = eisenstein_direct_sum(z, s) - constant_term_value(data.coeffs, s, z.y)
        assert abs(evaluate_truncated(z, data) - expected) < 1e-5

    def test_tail_too_large(self) -> None:
        """係数が足りなければ打ち切り誤差のエラー."""
        data = eisenstein_data(2.3, 2.0, terms=1)
        with pytest.raises(TailTooLargeError):
            evaluate_truncated(SurfacePoint(x=0, y=0.9), data)


class TestIndicatorPairing:
    """帯の指示関数との対のテスト."""

    def test_closed_forms(self) -> None:
        """単項の定数項."""
        coeffs = ConstantTermCoeffs(a=1, b=0)
        assert indicator_pairing(coeffs, 2, 1, 2) == pytest.approx(1)
        coeffs = ConstantTermCoeffs(a=0, b=1)
        assert indicator_pairing(coeffs, 2, 1, 2) == pytest.approx(3 / 8)

    def test_against_quadrature(self) -> None:
        """s=2.3, (1, φ) で数値積分と一致."""
        s = 2.3
        coeffs = ConstantTermCoeffs(a=1, b=scattering_phi(s))
        expected, _ = integrate.quad(
            lambda y: constant_term_value(coeffs, s, y).real / y**2,
            1.2,
            1.8,
            epsabs=1e-14,
        )
        assert abs(indicator_pairing(coeffs, s, 1.2, 1.8) - expected) < 1e-9

    def test_log_form(self) -> None:
        """対数形式の数値積分と一致."""
        coeffs = ConstantTermCoeffs(a=0.7, b=-0.4, log_form=True)
        expected, _ = integrate.quad(
            lambda y: constant_term_value(coeffs, 0.5, y).real / y**2,
            1.1,
            2.5,
            epsabs=1e-14,
        )
        assert abs(indicator_pairing(coeffs, 0.5, 1.1, 2.5) - expected) < 1e-9

    def test_excluded(self) -> None:
        """s ∈ {0, 1} は除外."""
        with pytest.raises(ExcludedParameterError):
            indicator_pairing(ConstantTermCoeffs(a=1, b=1), 1, 1.2, 1.8)

    def test_strip_inside_truncation(self, cfg: TruncationConfig) -> None:
        """切断領域の中の帯は設定を渡しても同じ値."""
        coeffs = ConstantTermCoeffs(a=1, b=scattering_phi(2.3))
        plain = indicator_pairing(coeffs, 2.3, 1.2, 2.0)
        assert indicator_pairing(coeffs, 2.3, 1.2, 2.0, cfg) == plain

    @pytest.mark.parametrize(("y1", "y2"), [(1.2, 2.5), (0.9, 1.8), (1.0, 1.8)])
    def test_strip_outside_truncation(
        self, cfg: TruncationConfig, y1: float, y2: float
    ) -> None:
        """η より上や p 以下にはみ出す帯は定義域外."""
        with pytest.raises(DomainError):
            indicator_pairing(ConstantTermCoeffs(a=1, b=0), 2, y1, y2, cfg)


class TestStripPairing:
    """定数項の2乗の帯積分のテスト."""

    @pytest.mark.parametrize(
        ("coeffs", "s"),
        [
            (ConstantTermCoeffs(a=1, b=0.3 - 0.2j), 1.7 + 0.4j),
            (ConstantTermCoeffs(a=0.7, b=-0.4, log_form=True), 0.5),
            (ConstantTermCoeffs(a=1.2, b=0.5), 0.5),
        ],
    )
    def test_against_quadrature(self, coeffs: ConstantTermCoeffs, s: complex) -> None:
        """数値積分と一致."""

        def integrand(y: float) -> complex:
            return constant_term_value(coeffs, s, y) ** 2 / y**2

        re, _ = integrate.quad(lambda y: integrand(y).real, 2.0, 3.5, epsabs=1e-14)
        im, _ = integrate.quad(lambda y: integrand(y).imag, 2.0, 3.5, epsabs=1e-14)
        assert abs(strip_pairing(coeffs, s, 2.0, 3.5) - complex(re, im)) < 1e-9
