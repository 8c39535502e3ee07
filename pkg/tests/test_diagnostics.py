"""Tests for diagnostics module."""

import numpy as np
import pytest

from src.dds import build_damped
from src.diagnostics import (
    build_cost_model,
    condition_report,
    error_metrics,
    fit_decay_rate,
    fit_order,
    hermitian_norm,
    measurement_report,
    pairwise_orders,
    query_cost,
    recovery_index_set
)
from src.errors import RecoveryDomainError
from src.helmholtz import build_system
from src.models import HelmholtzProblem, QueryCostModel
from src.schrod import build_schrod_system, evolve, init_profile, recover


def evolved(A, b, epsilon, psi="exp", m=8, LR=None, T=None):
    """Run a damped system through evolution and point recovery."""
    damped = build_damped(A, b, epsilon / 3.0, T=T)
    schrod = build_schrod_system(damped, epsilon / 3.0, psi=psi, m=m, LR=LR)
    W0 = init_profile(schrod.psi, schrod.grid, schrod.Vf0)
    state = evolve(schrod, W0)
    recover(state, schrod)
    return damped, schrod, state


@pytest.fixture(scope="module")
def scalar_run():
    """A = [1], b = [1], exp profile on a fine symmetric grid."""
    return evolved(np.array([[1.0]]), np.array([1.0]), 1e-3, psi="exp", m=10, LR=(20.0, 20.0), T=4.0)


@pytest.fixture(scope="module")
def helmholtz_run():
    """The k=10, n=4 Helmholtz system at the automatic stopping time."""
    system = build_system(HelmholtzProblem(k=10.0, n=4))
    damped, schrod, state = evolved(system.A, system.b, 1e-3, psi="cubic", m=8)
    return system, damped, schrod, state


class TestErrorMetrics:
    """Tests for error_metrics function."""

    def test_identical(self):
        """Test that v = reference gives zero error."""
        ref = np.array([1.0, 2.0j, -3.0])
        assert error_metrics(ref, ref) == {'l2_rel': 0.0, 'linf_rel': 0.0}

    def test_doubled(self):
        """Test that v = 2 reference gives unit error."""
        ref = np.array([1.0, 2.0j, -3.0])
        result = error_metrics(2 * ref, ref)
        assert result['l2_rel'] == pytest.approx(1.0)
        assert result['linf_rel'] == pytest.approx(1.0)

    def test_length_mismatch(self):
        """Test that vectors of different length raise ValueError."""
        with pytest.raises(ValueError):
            error_metrics(np.ones(3), np.ones(4))

    def test_zero_reference(self):
        """Test that a zero reference raises ValueError."""
        with pytest.raises(ValueError):
            error_metrics(np.ones(3), np.zeros(3))


class TestFits:
    """Tests for fit_decay_rate, fit_order and pairwise_orders functions."""

    def test_decay_rate(self):
        """Test recovery of an exponential rate."""
        t = np.linspace(0, 10, 11)
        assert fit_decay_rate(t, 3.0 * np.exp(-0.7 * t)) == pytest.approx(0.7)

    def test_order(self):
        """Test recovery of an algebraic order."""
        h = np.array([0.1, 0.05, 0.025])
        assert fit_order(h, 5.0 * h ** 2) == pytest.approx(2.0)

    def test_pairwise(self):
        """Test consecutive observed orders."""
        h = np.array([0.1, 0.05, 0.025])
        orders = pairwise_orders(h, h ** 3)
        assert np.isnan(orders[0])
        np.testing.assert_allclose(orders[1:], 3.0)

    def test_too_few_points(self):
        """Test that a single positive point raises ValueError."""
        with pytest.raises(ValueError):
            fit_order([0.1, 0.05], [1.0, 0.0])


class TestConditionReport:
    """Tests for condition_report function."""

    def test_diagonal(self):
        """Test kappa of diag(1, 4)."""
        report = condition_report(np.diag([1.0, 4.0]))
        assert report['kappa'] == pytest.approx(4.0)


class TestMeasurementReport:
    """Tests for measurement_report function."""

    def test_profile_ratio_bound(self, scalar_run):
        """Test Ce0^2/Ce^2 <= (1/(2e))(1 + 5 dp) for psi = e^{-|p|}."""
        damped, schrod, state = scalar_run
        report = measurement_report(state, schrod.grid, "exp", damped.b, damped.T)
        bound = (1.0 / (2.0 * np.e)) * (1.0 + 5.0 * schrod.grid.dp)
        assert report.Ce0 ** 2 / report.Ce ** 2 <= bound
        assert report.Ce0 <= report.Ce

    def test_probability_chain(self, scalar_run):
        """Test Pv = Pr0 Pr_star P_proj and probabilities in [0, 1]."""
        damped, schrod, state = scalar_run
        report = measurement_report(state, schrod.grid, "exp", damped.b, damped.T)
        assert report.Pv == pytest.approx(report.Pr0 * report.Pr_star * report.P_proj, abs=1e-10)
        assert report.Pv_head == pytest.approx(
            report.Pr0_head * report.Pr_star_head * report.P_proj_head, abs=1e-10
        )
        for value in (report.Pr_star, report.P_proj, report.Pv, report.Pr_star_head, report.P_proj_head):
            assert 0.0 <= value <= 1.0
        assert 0.0 <= report.Pr0 <= 1.0 + 1e-8

    def test_chain_uses_full_state(self, helmholtz_run):
        """Test each factor against norms of the full lifted state."""
        system, damped, schrod, state = helmholtz_run
        report = measurement_report(state, schrod.grid, schrod.psi, damped.b, damped.T)
        W = state.W
        indices = report.recovery_indices
        Vf = state.recovered_Vf
        N = system.N

        assert W.shape[1] == 4 * N
        assert report.Pr0 == pytest.approx(state.norm_ratio ** 2, rel=1e-10)
        assert report.Pr_star == pytest.approx(np.sum(np.abs(W[indices]) ** 2) / np.sum(np.abs(W) ** 2), rel=1e-10)
        assert report.P_proj == pytest.approx(np.sum(np.abs(Vf[:N]) ** 2) / np.sum(np.abs(Vf) ** 2), rel=1e-10)
        assert report.Pv == pytest.approx(report.Pr0 * report.Pr_star * report.P_proj, rel=1e-10)

    def test_head_chain_dominates(self, helmholtz_run):
        """Test that dropping the r block can only raise the projection factor."""
        system, damped, schrod, state = helmholtz_run
        report = measurement_report(state, schrod.grid, schrod.psi, damped.b, damped.T)
        assert report.P_proj <= report.P_proj_head + 1e-12
        assert report.Pr0_head <= report.Pr0 + 1e-12

    def test_recovery_indices(self, scalar_run):
        """Test that the index set covers p in [1/2, 2]."""
        damped, schrod, state = scalar_run
        report = measurement_report(state, schrod.grid, "exp", damped.b, damped.T)
        nodes = schrod.grid.nodes[report.recovery_indices]
        assert nodes.min() >= 0.5 - 1e-12
        assert nodes.max() <= 2.0

    def test_repeats_bounded_by_condition(self, helmholtz_run):
        """Test g <= 10 kappa log(1/epsilon) on the Helmholtz system."""
        system, damped, schrod, state = helmholtz_run
        report = measurement_report(state, schrod.grid, schrod.psi, damped.b, damped.T)
        kappa = condition_report(system.A)['kappa']
        assert report.g_repeats <= 10.0 * kappa * np.log(1e3)

    @pytest.mark.parametrize("k,n", [(10.0, 4), (20.0, 5), (30.0, 6)])
    def test_repeats_bounded_across_wavenumbers(self, k, n):
        """Test g <= 10 kappa log(1/epsilon) as k grows."""
        system = build_system(HelmholtzProblem(k=k, n=n))
        damped, schrod, state = evolved(system.A, system.b, 1e-3, psi="cubic", m=8)
        report = measurement_report(state, schrod.grid, schrod.psi, damped.b, damped.T)
        kappa = condition_report(system.A)['kappa']
        assert report.g_repeats <= 10.0 * kappa * np.log(1e3)

    def test_empty_index_set(self, scalar_run):
        """Test that a cap below p_diamond raises RecoveryDomainError."""
        _, schrod, _ = scalar_run
        with pytest.raises(RecoveryDomainError):
            recovery_index_set(schrod.grid, p_diamond=0.5, exp_cap=0.4)


class TestQueryCost:
    """Tests for query_cost and build_cost_model functions."""

    def _model(self, T=10.0):
        return QueryCostModel(
            alpha_H=2.0, nu_max=30.0, delta=1e-4, kappa=50.0,
            epsilon=1e-3, eta0=5.0, T=T, g_repeats=12.0, wavenumber=10.0
        )

    def test_formula(self):
        """Test be_queries = g (alpha nu T + log(1/delta)) and sp_queries = g."""
        cost = query_cost(self._model())
        assert cost['be_queries'] == pytest.approx(12.0 * (2.0 * 30.0 * 10.0 + np.log(1e4)))
        assert cost['sp_queries'] == 12.0
        assert cost['headline_kappa'] == pytest.approx(2500.0 * np.log(1e3) ** 2)
        assert cost['headline_wavenumber'] == pytest.approx(100.0 * np.log(1e3) ** 2)

    def test_linear_in_time(self):
        """Test that doubling T doubles the leading term."""
        assert query_cost(self._model(T=20.0))['be_leading'] == pytest.approx(
            2.0 * query_cost(self._model(T=10.0))['be_leading']
        )

    def test_nonpositive_field_rejected(self):
        """Test that non-positive model inputs raise ValueError."""
        with pytest.raises(ValueError):
            QueryCostModel(alpha_H=0.0, nu_max=1.0, delta=0.1, kappa=1.0,
                           epsilon=0.1, eta0=1.0, T=1.0, g_repeats=1.0)

    def test_alpha_covers_hamiltonians(self, helmholtz_run):
        """Test alpha_H >= ||H1||, ||H2|| and delta = epsilon ||v|| / eta0."""
        system, damped, schrod, state = helmholtz_run
        report = measurement_report(state, schrod.grid, schrod.psi, damped.b, damped.T)
        kappa = condition_report(system.A)['kappa']
        model = build_cost_model(schrod, state, report, 1e-3, kappa, wavenumber=10.0)

        assert model.alpha_H >= hermitian_norm(schrod.H1)
        assert model.alpha_H >= hermitian_norm(schrod.H2)
        assert model.delta == pytest.approx(1e-3 * np.linalg.norm(state.recovered_v) / state.norm0)
        assert query_cost(model)['be_queries'] > 0
