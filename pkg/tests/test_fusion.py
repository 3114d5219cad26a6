"""
Testes das políticas de chaveamento nuvem/local
"""

import numpy as np
import pytest

from core.bounds import cloud_cost_bound, delta_sequence
from core.controllers import CloudPlan, LocalPlan, LocalStatus
from core.errors import ConfigurationError
from core.fusion import (Choice, EpsMode, FusionPolicy, SwitchDecision, SwitchPolicy, optimal_switch_oracle,
                         switch_constrained, switch_unconstrained)
from core.trajopt import SolveStatus


@pytest.fixture
def cloud_plan(scalar_ctx):
    deltas = delta_sequence(scalar_ctx, 0.5, 10)
    return CloudPlan(
        controls=np.zeros((10, 1)),
        states=np.zeros((11, 1)),
        cost_to_go=np.linspace(20.0, 0.0, 11),
        deltas=deltas,
        eta=np.array([cloud_cost_bound(scalar_ctx, deltas[k], k) for k in range(11)]),
        ctx=scalar_ctx,
        tightened=(),
        status=SolveStatus.OPTIMAL,
        delta0=0.5,
    )


def local_plan(t: int, J_bar: float, eta_bar: float, status: LocalStatus = LocalStatus.FRESH) -> LocalPlan:
    controls = None if status is LocalStatus.INFEASIBLE else np.zeros((10 - t, 1))
    states = None if controls is None else np.zeros((11 - t, 1))
    return LocalPlan(t=t, status=status, controls=controls, states=states, J_bar=J_bar, eta_bar=eta_bar)


class TestSwitchRules:
    def test_unconstrained_examples(self):
        assert switch_unconstrained(5.0, 1.0, 7.0, 0.5) is Choice.CLOUD
        assert switch_unconstrained(5.0, 3.0, 7.0, 0.5) is Choice.LOCAL

    def test_tie_goes_to_cloud(self):
        assert switch_unconstrained(5.0, 1.0, 5.5, 0.5) is Choice.CLOUD

    def test_trust_condition_forces_local(self):
        assert switch_constrained(1.0, 0.1, 9.0, 1.0, eps_meas=0.2, delta_t=0.3) is Choice.CLOUD
        assert switch_constrained(1.0, 0.1, 9.0, 1.0, eps_meas=0.4, delta_t=0.3) is Choice.LOCAL

    def test_infinite_local_cost_chooses_cloud(self):
        assert switch_unconstrained(1e9, 1e9, float('inf'), float('inf')) is Choice.CLOUD

    def test_monotone_in_local_cost(self):
        choices = [switch_unconstrained(5.0, 1.0, j_bar, 0.5) for j_bar in np.linspace(0.0, 12.0, 25)]
        first_cloud = choices.index(Choice.CLOUD)
        assert all(choice is Choice.CLOUD for choice in choices[first_cloud:])

    def test_oracle(self):
        assert optimal_switch_oracle(3.0, 2.0) is Choice.CLOUD
        assert optimal_switch_oracle(2.0, 2.0) is Choice.CLOUD
        assert optimal_switch_oracle(1.0, 2.0) is Choice.LOCAL


class TestSwitchDecision:
    def test_cost_sign(self):
        decision = SwitchDecision(0, Choice.CLOUD, 3.0, 4.0, 0.0, 0.5, True)
        assert decision.cost_sign == 1
        assert SwitchDecision(0, Choice.LOCAL, 4.0, 3.0, 0.0, 0.5, True).cost_sign == -1
        assert SwitchDecision(0, Choice.CLOUD, 4.0, float('inf'), 0.0, 0.5, True).cost_sign == 1

    def test_to_dict(self):
        data = SwitchDecision(2, Choice.LOCAL, 1.0, 0.5, 0.1, 0.4, True, 0.2).to_dict()
        assert data['choice'] == 'local'
        assert data['t'] == 2 and data['eta_hat'] == 0.2


class TestFusionPolicy:
    def test_invalid_policy(self):
        with pytest.raises(ConfigurationError):
            FusionPolicy('sometimes')
        with pytest.raises(ConfigurationError):
            FusionPolicy('constrained', 'guess')

    def test_measured_eps_tightens_cloud_bound(self, cloud_plan):
        measured = FusionPolicy(SwitchPolicy.CONSTRAINED, EpsMode.MEASURED)
        budget = FusionPolicy(SwitchPolicy.CONSTRAINED, EpsMode.DELTA)
        assert measured.cloud_worst_case(cloud_plan, 3, 0.0) < budget.cloud_worst_case(cloud_plan, 3, 0.0)
        assert budget.cloud_worst_case(cloud_plan, 3, 0.0) == pytest.approx(cloud_plan.cost_to_go[3]
                                                                            + cloud_plan.eta[3])

    def test_untrusted_measurement_falls_back_to_budget(self, cloud_plan):
        policy = FusionPolicy()
        big = float(cloud_plan.deltas[3]) + 1.0
        assert policy.cloud_worst_case(cloud_plan, 3, big) == pytest.approx(cloud_plan.cost_to_go[3]
                                                                            + cloud_plan.eta[3])

    def test_decide_prefers_cheaper_local(self, cloud_plan):
        decision = FusionPolicy().decide(3, cloud_plan, local_plan(3, 1.0, 0.1), eps_meas=0.0)
        assert decision.choice is Choice.LOCAL
        assert decision.trust_ok
        assert decision.cost_sign == -1

    def test_decide_prefers_cheaper_cloud(self, cloud_plan):
        decision = FusionPolicy().decide(3, cloud_plan, local_plan(3, 100.0, 5.0), eps_meas=0.0)
        assert decision.choice is Choice.CLOUD
        assert decision.eta_hat == pytest.approx(cloud_plan.eta_at(0.0, 3))

    def test_trust_violation_selects_local(self, cloud_plan):
        eps = float(cloud_plan.deltas[3]) + 0.1
        constrained = FusionPolicy('constrained').decide(3, cloud_plan, local_plan(3, 100.0, 5.0), eps)
        unconstrained = FusionPolicy('unconstrained').decide(3, cloud_plan, local_plan(3, 100.0, 5.0), eps)
        assert constrained.choice is Choice.LOCAL and not constrained.trust_ok
        assert unconstrained.choice is Choice.CLOUD

    def test_no_local_controls_means_cloud(self, cloud_plan):
        infeasible = local_plan(3, float('inf'), float('inf'), LocalStatus.INFEASIBLE)
        assert FusionPolicy('always_local').decide(3, cloud_plan, infeasible, 0.0).choice is Choice.CLOUD
        assert FusionPolicy().decide(3, cloud_plan, None, 0.0).choice is Choice.CLOUD

    def test_carryover_plan_is_never_preferred_by_cost(self, cloud_plan):
        carry = local_plan(3, float('inf'), float('inf'), LocalStatus.FAIL_SAFE_CARRYOVER)
        decision = FusionPolicy('unconstrained').decide(3, cloud_plan, carry, 0.0)
        assert decision.choice is Choice.CLOUD
        assert decision.cost_sign == 1

    def test_fixed_policies(self, cloud_plan):
        plan = local_plan(3, 1.0, 0.1)
        assert FusionPolicy('always_cloud').decide(3, cloud_plan, plan, 0.0).choice is Choice.CLOUD
        assert FusionPolicy('always_local').decide(3, cloud_plan, local_plan(3, 1e6, 0.0), 0.0).choice \
            is Choice.LOCAL
