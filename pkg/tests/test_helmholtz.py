"""Tests for helmholtz module."""

import numpy as np
import pytest

from src.errors import ConfigError, DomainError, SingularSystemError
from src.helmholtz import (
    build_preconditioned,
    build_system,
    exact_solution,
    predicted_preconditioned_spectrum,
    shifted_wavenumber
)
from src.models import HelmholtzProblem


@pytest.fixture
def robin_system():
    """The k=10, n=4 Robin system (kh = 0.625)."""
    return build_system(HelmholtzProblem(k=10.0, n=4))


@pytest.fixture
def dirichlet_validation_system():
    """Uncorrected Dirichlet-Dirichlet system for the closed-form preconditioned spectrum."""
    return build_system(HelmholtzProblem(k=10.0, n=4, bc_right=None, dispersion_correction=False))


class TestShiftedWavenumber:
    """Tests for shifted_wavenumber function."""

    def test_reference_value(self):
        """Test k=10, h=1/16 against the closed form."""
        expected = np.sqrt(2.0 * (1.0 - np.cos(0.625))) * 16.0
        assert shifted_wavenumber(10.0, 1.0 / 16.0) == pytest.approx(expected, rel=1e-12)

    def test_small_h_limit(self):
        """Test that k_hat tends to k as h goes to zero."""
        assert abs(shifted_wavenumber(10.0, 1e-4) - 10.0) < 1e-5

    def test_k_hat_below_k(self):
        """Test that the shifted wavenumber is smaller than k for 0 < kh < pi."""
        for kh in (0.1, 0.625, 1.0, 2.0):
            assert shifted_wavenumber(kh, 1.0) < kh

    @pytest.mark.parametrize("k,h", [(np.pi, 1.0), (4.0, 1.0), (0.0, 0.1), (-1.0, 0.1)])
    def test_out_of_domain_raises(self, k, h):
        """Test that kh outside (0, pi) raises DomainError."""
        with pytest.raises(DomainError):
            shifted_wavenumber(k, h)


class TestHelmholtzProblem:
    """Tests for HelmholtzProblem validation."""

    def test_coarse_mesh_rejected(self):
        """Test that kh >= 1 is rejected."""
        with pytest.raises(DomainError):
            HelmholtzProblem(k=20.0, n=4)

    def test_nonpositive_k_rejected(self):
        """Test that k <= 0 is rejected."""
        with pytest.raises(DomainError):
            HelmholtzProblem(k=0.0, n=4)

    def test_unknown_source_rejected(self):
        """Test that an unknown source tag is rejected."""
        with pytest.raises(DomainError):
            HelmholtzProblem(k=10.0, n=4, source="gaussian")


class TestBuildSystem:
    """Tests for build_system function."""

    def test_robin_dimensions(self, robin_system):
        """Test that the Robin system has one unknown per node x_1..x_N."""
        assert robin_system.N == 16
        assert robin_system.grid[0] == pytest.approx(1.0 / 16.0)
        assert robin_system.grid[-1] == pytest.approx(1.0)
        assert robin_system.boundary == "robin"

    def test_dirichlet_dimensions(self, dirichlet_validation_system):
        """Test that u(1) = 0 is eliminated without a Robin condition."""
        assert dirichlet_validation_system.N == 15
        assert dirichlet_validation_system.boundary == "dirichlet"

    def test_interior_rows(self, robin_system):
        """Test interior stencil entries and h^2-scaled right-hand side."""
        A = robin_system.A.toarray()
        h = robin_system.h
        k_hat = robin_system.k_hat

        assert A[5, 4] == -1.0
        assert A[5, 6] == -1.0
        assert A[5, 5] == pytest.approx(2.0 - (k_hat * h) ** 2, abs=1e-15)
        assert robin_system.b[5] == pytest.approx(-h ** 2 * np.sin(10.0 * robin_system.grid[5]), abs=1e-15)

    def test_robin_row(self, robin_system):
        """Test the halved ghost-point row at x = 1."""
        A = robin_system.A.toarray()
        h = robin_system.h
        k_hat = robin_system.k_hat

        expected = 1.0 - 0.5 * (k_hat * h) ** 2 - 1j * 10.0 * h
        assert A[-1, -1] == pytest.approx(expected, abs=1e-15)
        assert A[-1, -2] == -1.0
        assert robin_system.b[-1] == pytest.approx(-0.5 * h ** 2 * np.sin(10.0), abs=1e-15)

    def test_complex_symmetric(self, robin_system):
        """Test that A equals its (non-conjugated) transpose."""
        A = robin_system.A.toarray()
        np.testing.assert_array_equal(A, A.T)

    def test_robin_uses_shifted(self, robin_system):
        """Test that the shifted wavenumber can be used in the Robin relation."""
        shifted = build_system(HelmholtzProblem(k=10.0, n=4, robin_uses_shifted=True))
        h = robin_system.h
        difference = shifted.A[15, 15] - robin_system.A[15, 15]
        assert difference == pytest.approx(-1j * h * (robin_system.k_hat - 10.0), abs=1e-14)

    @pytest.mark.parametrize("k,n", [
        (k, n) for k in (10.0, 30.0) for n in range(4, 10) if k * 2.0 ** -n < 1.0
    ])
    def test_dispersion_free(self, k, n):
        """Test that the corrected stencil annihilates e^{ikx} at interior nodes."""
        system = build_system(HelmholtzProblem(k=k, n=n, source="zero"))
        wave = np.exp(1j * k * system.grid)
        residual = (system.A @ wave)[1:-1]
        assert np.max(np.abs(residual)) <= 1e-12

    def test_discretization_error_decreases(self):
        """Test that the dense solve approaches the exact solution as n grows."""
        errors = []
        for n in range(4, 8):
            system = build_system(HelmholtzProblem(k=10.0, n=n))
            x = np.linalg.solve(system.A.toarray(), system.b)
            u = exact_solution(10.0, system.grid)
            errors.append(np.linalg.norm(x - u) / np.linalg.norm(u))

        assert all(later < earlier for earlier, later in zip(errors, errors[1:]))

    def test_singular_system_raises(self):
        """Test that k^2 on a discrete Dirichlet eigenvalue is rejected."""
        k = 8.0 * np.sin(np.pi / 8.0)
        problem = HelmholtzProblem(k=k, n=2, bc_right=None, dispersion_correction=False)
        with pytest.raises(SingularSystemError):
            build_system(problem)


class TestExactSolution:
    """Tests for exact_solution function."""

    def test_left_boundary(self):
        """Test u(0) = 0."""
        assert exact_solution(10.0, 0.0) == 0

    def test_radiation_condition(self):
        """Test u'(1) - ik u(1) = 0 by central differences."""
        k, d = 10.0, 1e-6
        derivative = (exact_solution(k, 1.0 + d) - exact_solution(k, 1.0 - d)) / (2 * d)
        assert abs(derivative - 1j * k * exact_solution(k, 1.0)) < 1e-8

    @pytest.mark.parametrize("x", [0.25, 0.5, 0.75])
    def test_pde_residual(self, x):
        """Test -u'' - k^2 u = -sin(kx) with a fourth-order difference."""
        k, d = 10.0, 1e-3
        values = exact_solution(k, x + d * np.arange(-2, 3))
        second = (-values[0] + 16 * values[1] - 30 * values[2] + 16 * values[3] - values[4]) / (12 * d ** 2)
        residual = -second - k ** 2 * values[2] + np.sin(k * x)
        assert abs(residual) < 1e-6

    def test_vectorized(self):
        """Test that arrays are evaluated elementwise."""
        x = np.linspace(0, 1, 5)
        u = exact_solution(10.0, x)
        assert u.shape == (5,)
        assert u[2] == pytest.approx(exact_solution(10.0, 0.5), abs=1e-15)


class TestBuildPreconditioned:
    """Tests for build_preconditioned function."""

    def test_closed_form_spectrum(self, dirichlet_validation_system):
        """Test eigenvalues of PA against (mu^2 - k^2)/(mu^2 + k^2)."""
        pre = build_preconditioned(dirichlet_validation_system, "real_shift")
        computed = np.sort(np.linalg.eigvals(pre.PA).real)
        expected = np.sort(predicted_preconditioned_spectrum(10.0, 4, "real_shift").real)
        np.testing.assert_allclose(computed, expected, atol=1e-10)

    @pytest.mark.parametrize("mode", ["real_shift", "imaginary_shift"])
    def test_spectrum_in_unit_disc(self, dirichlet_validation_system, mode):
        """Test |lambda(PA)| <= 1 for both shifts."""
        pre = build_preconditioned(dirichlet_validation_system, mode)
        assert np.max(np.abs(np.linalg.eigvals(pre.PA))) <= 1.0 + 1e-12

    @pytest.mark.parametrize("mode", ["real_shift", "imaginary_shift"])
    def test_condition_number_reduced(self, dirichlet_validation_system, mode):
        """Test kappa(PA)/kappa(A) <= 0.2 on the Dirichlet system at k=10, kh=0.625."""
        plain = build_preconditioned(dirichlet_validation_system, "none")
        pre = build_preconditioned(dirichlet_validation_system, mode)
        assert pre.kappa_estimate / plain.kappa_estimate <= 0.2

    @pytest.mark.parametrize("mode", ["real_shift", "imaginary_shift"])
    def test_condition_number_reduced_robin(self, robin_system, mode):
        """Test that both shifts lower kappa on the Robin system."""
        plain = build_preconditioned(robin_system, "none")
        pre = build_preconditioned(robin_system, mode)
        assert pre.kappa_estimate < plain.kappa_estimate

    def test_condition_number_linear_in_k(self):
        """Test that kappa(PA)/k stays within a factor 4 for k in {10, 20, 40} at kh = 0.625."""
        ratios = []
        for k, n in ((10.0, 4), (20.0, 5), (40.0, 6)):
            system = build_system(HelmholtzProblem(k=k, n=n))
            ratios.append(build_preconditioned(system, "real_shift").kappa_estimate / k)
        assert max(ratios) / min(ratios) <= 4.0

    def test_same_solution(self, robin_system):
        """Test that PA x = Pb has the solution of A x = b."""
        pre = build_preconditioned(robin_system, "imaginary_shift")
        x = np.linalg.solve(robin_system.A.toarray(), robin_system.b)
        np.testing.assert_allclose(pre.PA @ x, pre.Pb, atol=1e-12)

    def test_none_passes_through(self, robin_system):
        """Test that mode 'none' leaves A and b unchanged."""
        pre = build_preconditioned(robin_system, "none")
        np.testing.assert_array_equal(pre.PA, robin_system.A.toarray())
        np.testing.assert_array_equal(pre.Pb, robin_system.b)

    def test_unknown_mode_raises(self, robin_system):
        """Test that an unknown mode raises ConfigError."""
        with pytest.raises(ConfigError):
            build_preconditioned(robin_system, "multigrid")
