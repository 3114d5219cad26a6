"""
Testes de custos de estágio, terminal e custo-a-ir
"""

import numpy as np
import pytest

from core.costs import CostSpec, WeightedNormCost, check_lipschitz, cost_to_go, cost_to_go_sequence, total_cost
from core.errors import ConfigurationError, DimensionError, NumericError
from core.models import NormKind, SampleBox


class TestWeightedNormCost:
    def test_lipschitz_constants_of_scalar_cost(self, scalar_cost):
        assert scalar_cost.L_phi == pytest.approx(1.0)
        assert scalar_cost.L_psi == pytest.approx(np.sqrt(2.0))

    def test_stage_and_terminal_values(self, scalar_cost):
        assert scalar_cost.stage_cost([-2.0], [1.0]) == pytest.approx(2.0 + np.sqrt(5.0))
        assert scalar_cost.terminal_cost([-3.0]) == pytest.approx(3.0 * np.sqrt(2.0))

    def test_quadratic_weights_use_matrix_root(self):
        structure = WeightedNormCost.from_quadratic_weights([4.0, 9.0], [1.0])
        assert np.allclose(structure.S_x, np.diag([2.0, 3.0]))
        assert structure.p == 2
        assert structure.terminal(np.array([1.0, 0.0])) == pytest.approx(2.0)

    def test_l1_cost_in_two_norm_uses_equivalence_constant(self):
        structure = WeightedNormCost(np.eye(2), np.eye(1), np.eye(2), p=1)
        cost = CostSpec.from_weighted_norms(structure, N=3, norm_kind=NormKind.TWO)
        assert cost.L_phi == pytest.approx(np.sqrt(2.0))

    def test_indefinite_weights_rejected(self):
        with pytest.raises(ConfigurationError):
            WeightedNormCost.from_quadratic_weights([[1.0, 0.0], [0.0, -1.0]], [1.0])

    def test_unsupported_p_rejected(self):
        with pytest.raises(ConfigurationError):
            WeightedNormCost([[1.0]], [[1.0]], [[1.0]], p=3)

    def test_lipschitz_check_accepts_declared_constants(self, scalar_cost):
        check_lipschitz(scalar_cost, SampleBox([10.0], [3.0]))

    def test_lipschitz_check_rejects_small_constant(self):
        cost = CostSpec(phi=lambda x, u: float(2.0 * abs(x[0])), psi=lambda x: 0.0, L_phi=1.0, L_psi=0.0, N=2)
        with pytest.raises(ConfigurationError):
            check_lipschitz(cost, SampleBox([5.0], [1.0]))


class TestCostEvaluation:
    def test_total_cost_of_local_optimum(self, scalar_cost):
        states = [[-10.0], [-4.5], [-0.375]] + [[0.0]] * 8
        controls = [[3.0], [3.0], [0.28125]] + [[0.0]] * 7
        expected = 10.0 + 4.5 + 0.375 + np.sqrt(5.0) * (3.0 + 3.0 + 0.28125)
        assert total_cost(scalar_cost, states, controls) == pytest.approx(expected)

    def test_cost_to_go_sequence_ends_in_terminal_cost(self, scalar_cost):
        states = [[float(-k)] for k in range(11)]
        controls = [[0.5]] * 10
        seq = cost_to_go_sequence(scalar_cost, states, controls)
        assert seq.shape == (11,)
        assert seq[-1] == pytest.approx(np.sqrt(2.0) * 10.0)
        assert seq[0] == pytest.approx(total_cost(scalar_cost, states, controls))
        assert np.all(np.diff(seq) <= 0)

    def test_cost_to_go_matches_sequence(self, scalar_cost):
        states = [[float(k) / 3.0] for k in range(11)]
        controls = [[-0.2]] * 10
        seq = cost_to_go_sequence(scalar_cost, states, controls)
        assert cost_to_go(scalar_cost, states[4:], controls[4:], k=4) == pytest.approx(seq[4])

    def test_wrong_lengths_raise(self, scalar_cost):
        with pytest.raises(DimensionError):
            total_cost(scalar_cost, [[0.0]] * 10, [[0.0]] * 10)
        with pytest.raises(DimensionError):
            cost_to_go(scalar_cost, [[0.0]] * 3, [[0.0]] * 2, k=5)

    def test_non_finite_cost_raises(self):
        cost = CostSpec(phi=lambda x, u: float('nan'), psi=lambda x: 0.0, L_phi=0.0, L_psi=0.0, N=1)
        with pytest.raises(NumericError):
            total_cost(cost, [[0.0], [0.0]], [[0.0]])

    def test_invalid_horizon(self):
        with pytest.raises(ConfigurationError):
            CostSpec(phi=lambda x, u: 0.0, psi=lambda x: 0.0, L_phi=0.0, L_psi=0.0, N=0)
