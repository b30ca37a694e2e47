"""モジュラー曲面のテスト."""

import math

import mpmath
import numpy as np
import pytest

from src.robin_spectra.exceptions import (
    CutoffOverflowError,
    DomainError,
    ScatteringPoleError,
)
from src.robin_spectra.models import SurfacePoint
from src.robin_spectra.modular_surface import (
    constant_term_oracle,
    divisor_sigma,
    eisenstein_direct_sum,
    fourier_coefficient,
    fourier_mode_oracle,
    modular_surface,
    period_average,
    regularized_fourier_coefficient,
    scaled_surface,
    scattering_phi,
    xi_function,
    zero_scattering_surface,
)
from src.robin_spectra.special_functions import bessel_k


def constant_term(y: float, s: complex) -> complex:
    """閉じた式による定数項 y^s + φ(s)y^{1−s}."""
    return y**s + scattering_phi(s) * y ** (1 - s)


class TestScatteringPhi:
    """散乱係数のテスト."""

    def test_half_point(self) -> None:
        """φ(1/2) = −1."""
        assert abs(scattering_phi(0.5) + 1) < 1e-8

    def test_functional_equation(self) -> None:
        """φ(s)φ(1−s) = 1."""
        s = 0.3 + 0.7j
        assert abs(scattering_phi(s) * scattering_phi(1 - s) - 1) < 1e-9

    def test_functional_equation_grid(self) -> None:
        """[−1,2]×[0,10] の20×20格子で関数等式."""
        checked = 0
        for re in np.linspace(-1, 2, 20):
            for im in np.linspace(0, 10, 20):
                s = complex(re, im)
                try:
                    product = scattering_phi(s) * scattering_phi(1 - s)
                except ScatteringPoleError:
                    continue
                assert abs(product - 1) <= 1e-9
                checked += 1
        assert checked >= 390

    def test_conjugation_symmetry(self) -> None:
        """φ(s̄) = φ(s)̄."""
        for s in (0.2 + 3.1j, 1.7 + 0.4j, -0.6 + 8.8j):
            conjugated = scattering_phi(s.conjugate())
            assert abs(conjugated - scattering_phi(s).conjugate()) < 1e-10

    def test_classical_formula(self) -> None:
        """√πΓ(s−½)ζ(2s−1)/(Γ(s)ζ(2s)) と一致."""
        s = mpmath.mpc(2.3, 0.4)
        expected = complex(
            mpmath.sqrt(mpmath.pi)
            * mpmath.gamma(s - 0.5)
            * mpmath.zeta(2 * s - 1)
            / (mpmath.gamma(s) * mpmath.zeta(2 * s))
        )
        assert abs(scattering_phi(2.3 + 0.4j) - expected) < 1e-12 * abs(expected)

    def test_pole_at_one(self) -> None:
        """s=1 は1位の極."""
        with pytest.raises(ScatteringPoleError) as exc_info:
            scattering_phi(1)
        assert exc_info.value.order == 1

    def test_xi_symmetry(self) -> None:
        """ξ(w) = ξ(1−w)、ξ(0) = ξ(1) = 1/2."""
        assert abs(xi_function(0.3 + 2j) - xi_function(0.7 - 2j)) < 1e-14
        assert abs(xi_function(1) - 0.5) < 1e-14
        assert abs(xi_function(0) - 0.5) < 1e-14


class TestSurfaces:
    """散乱データの差し替えのテスト."""

    def test_zero_scattering(self) -> None:
        """模型曲面ではφ ≡ 0."""
        assert zero_scattering_surface().phi(2 + 1j) == 0

    def test_scaled_surface(self) -> None:
        """定数倍した曲面は関数等式を破る."""
        tampered = scaled_surface(modular_surface(), 1.001)
        s = 0.3 + 0.7j
        assert abs(tampered.phi(s) * tampered.phi(1 - s) - 1) > 1e-3

    def test_instance_constants(self) -> None:
        """カスプ幅1、p=1."""
        surface = modular_surface()
        assert surface.cusp_width == 1
        assert surface.eta_floor == 1


class TestEisensteinDirectSum:
    """Eisenstein級数の直接和のテスト."""

    def test_value_at_i(self) -> None:
        """E(i,2) = 30G/π²（Gはカタラン定数）."""
        expected = 30 * float(mpmath.catalan) / math.pi**2
        value = eisenstein_direct_sum(SurfacePoint(x=0, y=1), 2, tol=1e-10)
        assert abs(value - expected) < 1e-9

    def test_periodicity(self) -> None:
        """z ↦ z+1 で不変."""
        z = 0.3 + 1.1j
        shifted = eisenstein_direct_sum(z + 1, 2.3)
        assert abs(eisenstein_direct_sum(z, 2.3) - shifted) < 1e-10

    def test_automorphy(self) -> None:
        """z ↦ −1/z で不変."""
        z = 0.2 + 0.9j
        s = 1.8 + 1.5j
        assert abs(eisenstein_direct_sum(z, s) - eisenstein_direct_sum(-1 / z, s)) < 1e-9

    def test_divergent_region(self) -> None:
        """Re s < 1.1 は定義域外."""
        with pytest.raises(DomainError):
            eisenstein_direct_sum(1j, 1.05)

    def test_lower_half_plane(self) -> None:
        """Im z ≤ 0 は定義域外."""
        with pytest.raises(DomainError):
            eisenstein_direct_sum(0.1 - 1j, 2)

    def test_cutoff_overflow(self) -> None:
        """カスプから遠い点では行数が予算を超える."""
        with pytest.raises(CutoffOverflowError):
            eisenstein_direct_sum(0.001j, 2, tol=1e-10)


class TestConstantTermOracle:
    """定数項オラクルのテスト."""

    def test_matches_closed_form(self) -> None:
        """y=2, s=2.3 で y^s + φ(s)y^{1−s}."""
        assert abs(constant_term_oracle(2, 2.3) - constant_term(2, 2.3)) < 1e-6

    @pytest.mark.parametrize("y", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("s", [1.8, 2.3, 2 + 2j])
    def test_oracle_agreement(self, y: float, s: complex) -> None:
        """3つの高さと3つのsで閉じた式と一致."""
        assert abs(constant_term_oracle(y, s) - constant_term(y, s)) < 1e-6

    def test_large_height(self) -> None:
        """y=8 では y^s が支配的."""
        ratio = constant_term_oracle(8, 2.3) / 8**2.3
        assert abs(ratio - 1) < 1e-3

    def test_fourier_orthogonality(self) -> None:
        """m=±1 の項を引いても平均は変わらない."""
        y, s = 2.0, 2.3
        kernel = bessel_k(s - 0.5, 2 * math.pi * y).value
        mode = fourier_coefficient(1, s) * math.sqrt(y) * kernel

        def reduced(x: np.ndarray) -> np.ndarray:
            values = np.array([eisenstein_direct_sum(complex(xi, y), s) for xi in x])
            return values - 2 * mode * np.cos(2 * math.pi * x)

        assert abs(period_average(reduced, 24) - constant_term_oracle(y, s)) < 1e-10

    def test_floor(self) -> None:
        """y ≤ p は定義域外."""
        with pytest.raises(DomainError):
            constant_term_oracle(1.0, 2.3)


class TestFourierCoefficient:
    """Fourier係数のテスト."""

    def test_even_in_m(self) -> None:
        """a_m = a_{−m}."""
        assert fourier_coefficient(3, 0.5 + 4j) == fourier_coefficient(-3, 0.5 + 4j)

    def test_against_mode_oracle(self) -> None:
        """a_1(2.3) を直接和のFourier積分と比較."""
        y, s = 2.0, 2.3
        kernel = math.sqrt(y) * bessel_k(s - 0.5, 2 * math.pi * y).value
        observed = fourier_mode_oracle(1, y, s) / kernel
        expected = fourier_coefficient(1, s)
        assert abs(observed - expected) < 1e-5 * abs(expected)

    def test_functional_equation(self) -> None:
        """a_m(s) = φ(s)·a_m(1−s)."""
        s = 2.3
        for m in (1, 2, 6):
            lhs = fourier_coefficient(m, s)
            rhs = scattering_phi(s) * fourier_coefficient(m, 1 - s)
            assert abs(lhs - rhs) < 1e-10 * abs(lhs)

    def test_regularized(self) -> None:
        """分母を掛けた係数は a_m·(s−1)ξ(2s)、(s−½) で割った形と整合."""
        s = 0.8 + 2.5j
        surface = modular_surface()
        expected = fourier_coefficient(4, s) * surface.denominator(s)
        observed = regularized_fourier_coefficient(4, s)
        assert abs(observed - expected) < 1e-10 * abs(expected)
        divided = regularized_fourier_coefficient(4, s, divided=True)
        assert abs(divided * (s - 0.5) - observed) < 1e-12 * abs(observed)

    def test_divisor_sigma(self) -> None:
        """σ_1(6) = 12."""
        assert divisor_sigma(6, 1) == 12

    def test_zero_index(self) -> None:
        """m=0 は定数項の係数."""
        with pytest.raises(DomainError):
            fourier_coefficient(0, 2)
