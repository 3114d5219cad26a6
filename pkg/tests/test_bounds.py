"""
Testes dos limites de erro de estado e de custo
"""

import numpy as np
import pytest

from core.bounds import (BoundContext, cloud_cost_bound, cloud_state_bound, delta_sequence, local_cost_bound,
                         local_state_bound, local_state_bounds, propagate_error)
from core.errors import ConfigurationError, DimensionError


def closed_form_cloud_cost(ctx: BoundContext, eps: float, k: int) -> float:
    """Forma fechada das somas geométricas do limite de custo da nuvem."""
    r = ctx.rate
    m = ctx.N - k
    if r == 1.0:
        return ctx.L_phi * (eps * m + ctx.omega * m * (m - 1) / 2.0) + ctx.L_psi * (eps + ctx.omega * m)
    geo = (r ** m - 1.0) / (r - 1.0)
    stage = ctx.L_phi * (eps * geo + ctx.omega / (r - 1.0) * (geo - m))
    return stage + ctx.L_psi * (r ** m * eps + ctx.omega * geo)


class TestBoundContext:
    def test_rate(self, scalar_ctx):
        assert scalar_ctx.rate == pytest.approx(0.95)

    def test_negative_constant_rejected(self):
        with pytest.raises(ConfigurationError):
            BoundContext(a=0.5, L_f=-0.1, M_f=0.0, omega=0.0, L_phi=1.0, L_psi=1.0, N=3)

    def test_with_changes(self, scalar_ctx):
        assert scalar_ctx.with_changes(omega=0.0).omega == 0.0
        assert scalar_ctx.omega == 0.02


class TestCloudBounds:
    def test_terminal_delta(self, scalar_ctx):
        deltas = delta_sequence(scalar_ctx, 0.5, 10)
        assert deltas.shape == (11,)
        assert deltas[0] == 0.5
        assert deltas[-1] == pytest.approx(0.459874, abs=1e-6)

    def test_zero_steps_returns_eps(self, scalar_ctx):
        assert propagate_error(scalar_ctx, 0.3, 0) == 0.3

    def test_state_bound_is_propagation(self, scalar_ctx):
        assert cloud_state_bound(scalar_ctx, 0.1, 2, 5) == pytest.approx(propagate_error(scalar_ctx, 0.1, 3))

    def test_state_bound_rejects_bad_indices(self, scalar_ctx):
        with pytest.raises(ConfigurationError):
            cloud_state_bound(scalar_ctx, 0.1, 5, 5)
        with pytest.raises(ConfigurationError):
            cloud_state_bound(scalar_ctx, 0.1, 5, 11)

    @pytest.mark.parametrize('rate', [0.5, 0.95, 1.0, 1.5])
    def test_summed_form_matches_closed_form(self, rate):
        rng = np.random.default_rng(int(rate * 100))
        for _ in range(20):
            L_f = float(rng.uniform(0.0, 0.3)) if rate != 1.0 else 0.25
            ctx = BoundContext(
                a=rate - L_f, L_f=L_f, M_f=0.0, omega=float(rng.uniform(0.0, 0.1)),
                L_phi=float(rng.uniform(0.0, 2.0)), L_psi=float(rng.uniform(0.0, 2.0)),
                N=int(rng.integers(1, 15))
            )
            eps = float(rng.uniform(0.0, 1.0))
            k = int(rng.integers(0, ctx.N + 1))
            assert cloud_cost_bound(ctx, eps, k) == pytest.approx(closed_form_cloud_cost(ctx, eps, k), rel=1e-9)

    def test_cost_bound_at_horizon_is_terminal_term(self, scalar_ctx):
        assert cloud_cost_bound(scalar_ctx, 0.2, 10) == pytest.approx(np.sqrt(2.0) * 0.2)

    def test_cost_bound_is_monotone_in_eps(self, scalar_ctx):
        values = [cloud_cost_bound(scalar_ctx, eps, 3) for eps in (0.0, 0.1, 0.5, 2.0)]
        assert values == sorted(values)


class TestLocalBounds:
    @pytest.fixture
    def small_ctx(self):
        return BoundContext(a=0.5, L_f=0.1, M_f=0.0, omega=0.1, L_phi=1.0, L_psi=np.sqrt(2.0), N=3)

    def test_recursion_values(self, small_ctx):
        xi = local_state_bounds(small_ctx, [(1.0, 0.0)] * 3, 0)
        assert np.allclose(xi, [0.0, 0.2, 0.32, 0.392])

    def test_single_bound_matches_recursion(self, small_ctx):
        assert local_state_bound(small_ctx, [(1.0, 0.0)] * 2, 0, 2) == pytest.approx(0.32)

    def test_cost_bound_example(self, small_ctx):
        expected = 0.2 + 0.32 + np.sqrt(2.0) * 0.392
        assert local_cost_bound(small_ctx, [(1.0, 0.0)] * 3, 0) == pytest.approx(expected)

    def test_last_step_has_only_terminal_term(self, small_ctx):
        assert local_cost_bound(small_ctx, [(1.0, 0.0)], 2) == pytest.approx(np.sqrt(2.0) * 0.2)

    def test_zero_gauges_and_zero_omega(self, small_ctx):
        ctx = small_ctx.with_changes(omega=0.0)
        assert local_cost_bound(ctx, [(0.0, 0.0)] * 3, 0) == 0.0

    def test_wrong_gauge_count(self, small_ctx):
        with pytest.raises(DimensionError):
            local_cost_bound(small_ctx, [(1.0, 0.0)] * 2, 0)

    def test_negative_gauge(self, small_ctx):
        with pytest.raises(ConfigurationError):
            local_state_bounds(small_ctx, [(-1.0, 0.0)], 0)

    def test_out_of_range_t(self, small_ctx):
        with pytest.raises(ConfigurationError):
            local_cost_bound(small_ctx, [], 3)
