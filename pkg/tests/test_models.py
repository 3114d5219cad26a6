"""
Testes de modelos, steppers, perturbações e constantes de Lipschitz
"""

import numpy as np
import pytest

from core.errors import ConfigurationError, DimensionError, NumericError
from core.models import (DisturbanceKind, DisturbanceSpec, ExpressionNonlinearity, NormKind, SampleBox,
                         Stepper, SystemModel, TimeVaryingModel, build_nonlinearity, check_lipschitz, discretize,
                         dual_norm, estimate_lipschitz, induced_norm, jacobian_bound, rollout,
                         scalar_sine_nonlinearity, step_cloud, step_local, step_true, vector_norm,
                         zero_nonlinearity)


class TestNorms:
    def test_vector_norms(self):
        v = np.array([3.0, -4.0])
        assert vector_norm(v, NormKind.ONE) == pytest.approx(7.0)
        assert vector_norm(v, NormKind.TWO) == pytest.approx(5.0)
        assert vector_norm(v, NormKind.INF) == pytest.approx(4.0)

    def test_dual_norm_pairs(self):
        v = np.array([3.0, -4.0])
        assert dual_norm(v, NormKind.ONE) == pytest.approx(4.0)
        assert dual_norm(v, NormKind.INF) == pytest.approx(7.0)
        assert dual_norm(v, NormKind.TWO) == pytest.approx(5.0)

    def test_induced_norm_of_scalar(self):
        assert induced_norm([[0.75]], NormKind.TWO) == pytest.approx(0.75)

    def test_parse_rejects_unknown(self):
        with pytest.raises(ConfigurationError):
            NormKind.parse('three')


class TestSystemModel:
    def test_a_is_computed(self, scalar_model):
        assert scalar_model.a == pytest.approx(0.75)
        assert scalar_model.n == 1 and scalar_model.m == 1

    def test_inconsistent_a_rejected(self):
        with pytest.raises(ConfigurationError):
            SystemModel(A=[[0.75]], B=[[1.0]], f=zero_nonlinearity(1), L_f=0.0, M_f=0.0, a=0.8)

    def test_nonzero_origin_rejected(self):
        def shifted(x, u):
            return np.array([1e-3])
        with pytest.raises(ConfigurationError):
            SystemModel(A=[[0.5]], B=[[1.0]], f=shifted, L_f=0.0, M_f=0.0)

    def test_negative_lipschitz_rejected(self):
        with pytest.raises(ConfigurationError):
            SystemModel(A=[[0.5]], B=[[1.0]], f=zero_nonlinearity(1), L_f=-0.1, M_f=0.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            SystemModel(A=[[0.5, 0.0], [0.0, 0.5]], B=np.ones((3, 1)), f=zero_nonlinearity(2), L_f=0.0, M_f=0.0)

    def test_lipschitz_box_check_runs_at_construction(self):
        with pytest.raises(ConfigurationError):
            SystemModel(A=[[0.75]], B=[[1.0]], f=scalar_sine_nonlinearity(0.1), L_f=0.001, M_f=0.0,
                        lipschitz_box=SampleBox([10.0], [3.0]))

    def test_lipschitz_checked_on_default_box(self):
        """Sem caixa declarada, L_f subestimado é rejeitado na caixa padrão"""
        with pytest.raises(ConfigurationError):
            SystemModel(A=[[0.75]], B=[[1.0]], f=scalar_sine_nonlinearity(0.1), L_f=0.001, M_f=0.0)

    def test_default_check_box(self, scalar_model):
        box = scalar_model.check_box
        assert box.x_bound[0] == pytest.approx(10.0)
        assert box.u_bound[0] == pytest.approx(10.0)

    def test_verification_can_be_disabled(self):
        model = SystemModel(A=[[0.75]], B=[[1.0]], f=scalar_sine_nonlinearity(0.1), L_f=0.001, M_f=0.0,
                            verify_lipschitz=False)
        assert model.L_f == pytest.approx(0.001)

    def test_box_contains(self):
        box = SampleBox([5.0], [3.0])
        assert box.contains([-4.9], [3.0])
        assert not box.contains([-10.0], [0.0])
        assert box.contains([5.05], [0.0], tol=0.1)


class TestSteppers:
    def test_cloud_step(self, scalar_model):
        expected = 0.75 * -10.0 + 3.0 + (-1.0 - np.sin(-1.0))
        assert step_cloud(scalar_model, [-10.0], [3.0])[0] == pytest.approx(expected)

    def test_local_step_drops_nonlinearity(self, scalar_model):
        assert step_local(scalar_model, [-10.0], [3.0])[0] == pytest.approx(-4.5)

    def test_true_step_adds_disturbance(self, scalar_model):
        cloud = step_cloud(scalar_model, [2.0], [0.5])
        true = step_true(scalar_model, [2.0], [0.5], [0.01])
        assert true[0] == pytest.approx(cloud[0] + 0.01)

    def test_rollout_shape_and_start(self, scalar_model):
        states = rollout(scalar_model, Stepper.LOCAL, [-10.0], [[3.0], [3.0], [0.0]])
        assert states.shape == (4, 1)
        assert states[0, 0] == -10.0
        assert states[2, 0] == pytest.approx(-0.375)

    def test_rollout_true_requires_disturbances(self, scalar_model):
        with pytest.raises(DimensionError):
            rollout(scalar_model, Stepper.TRUE, [0.0], [[0.0]])

    def test_rollout_rejects_disturbances_for_models(self, scalar_model):
        with pytest.raises(DimensionError):
            rollout(scalar_model, Stepper.CLOUD, [0.0], [[0.0]], [[0.0]])

    def test_rollout_overflow_raises(self):
        model = SystemModel(A=[[1e308]], B=[[1.0]], f=zero_nonlinearity(1), L_f=0.0, M_f=0.0)
        with pytest.raises(NumericError):
            rollout(model, Stepper.LOCAL, [10.0], [[0.0]])

    def test_time_varying_stage_is_clamped(self):
        stages = tuple(
            SystemModel(A=[[a]], B=[[1.0]], f=zero_nonlinearity(1), L_f=0.0, M_f=0.0) for a in (0.5, 0.9)
        )
        model = TimeVaryingModel(stages)
        assert model.a == pytest.approx(0.9)
        assert model.stage(-2) is stages[0]
        assert model.stage(7) is stages[1]
        assert step_local(model, [1.0], [0.0], t=1)[0] == pytest.approx(0.9)


class TestLipschitz:
    def test_estimate_close_to_analytic_supremum(self, scalar_model):
        L_est, M_est = estimate_lipschitz(scalar_model, SampleBox([10.0], [3.0]), n_samples=2000, seed=0)
        assert L_est == pytest.approx(0.1 - 0.1 * np.cos(1.0), abs=1e-3)
        assert L_est <= scalar_model.L_f
        assert M_est == pytest.approx(0.0, abs=1e-9)

    def test_estimate_warns_when_exceeding(self, caplog):
        model = SystemModel(A=[[0.75]], B=[[1.0]], f=scalar_sine_nonlinearity(0.1), L_f=0.01, M_f=0.0,
                            verify_lipschitz=False)
        estimate_lipschitz(model, SampleBox([10.0], [3.0]), n_samples=200)
        assert any("excede" in record.message for record in caplog.records)

    def test_check_passes_for_valid_constants(self, scalar_model):
        check_lipschitz(scalar_model, SampleBox([10.0], [3.0]))

    def test_jacobian_bound_of_linear_map_is_zero(self):
        L, M = jacobian_bound(zero_nonlinearity(2), SampleBox([1.0, 1.0], [1.0]), NormKind.TWO, n_samples=20)
        assert L == 0.0 and M == 0.0

    def test_jacobian_bound_margin(self):
        f = scalar_sine_nonlinearity(0.1)
        L1, _ = jacobian_bound(f, SampleBox([10.0], [1.0]), NormKind.TWO, n_samples=100, seed=3)
        L2, _ = jacobian_bound(f, SampleBox([10.0], [1.0]), NormKind.TWO, n_samples=100, seed=3, margin=1.5)
        assert L2 == pytest.approx(1.5 * L1)


class TestDisturbances:
    @pytest.mark.parametrize('kind', [NormKind.ONE, NormKind.TWO, NormKind.INF])
    def test_uniform_samples_inside_ball(self, kind):
        spec = DisturbanceSpec(omega=0.02, dim=3, norm_kind=kind)
        samples = spec.sampler(5).sample_sequence(300)
        assert samples.shape == (300, 3)
        assert max(vector_norm(w, kind) for w in samples) <= 0.02 + 1e-15

    def test_same_seed_same_sequence(self):
        spec = DisturbanceSpec(omega=0.1, dim=2)
        assert np.array_equal(spec.sampler(11).sample_sequence(20), spec.sampler(11).sample_sequence(20))
        assert not np.array_equal(spec.sampler(11).sample_sequence(20), spec.sampler(12).sample_sequence(20))

    def test_vertex_samples_on_boundary(self):
        spec = DisturbanceSpec(omega=0.02, dim=1, kind=DisturbanceKind.VERTEX, amplitude=0.5)
        samples = spec.sampler(0).sample_sequence(50)
        assert np.allclose(np.abs(samples), 0.5)

    def test_zero_kind(self):
        spec = DisturbanceSpec(omega=0.3, dim=2, kind='zero')
        assert not np.any(spec.sampler(1).sample_sequence(10))

    def test_negative_omega_rejected(self):
        with pytest.raises(ConfigurationError):
            DisturbanceSpec(omega=-1.0, dim=1)


class TestDiscretizationAndNonlinearities:
    def test_euler_matrices(self):
        A_c = np.array([[0.0, 1.0], [-2.0, -0.5]])
        B_c = np.array([[0.0], [1.0]])

        def rhs(x, u):
            return A_c @ x + B_c @ u + np.array([0.0, -x[0] ** 3])

        A, B, f = discretize(rhs, A_c, B_c, 0.1)
        assert np.allclose(A, np.eye(2) + 0.1 * A_c)
        assert np.allclose(B, 0.1 * B_c)
        assert np.array_equal(f(np.zeros(2), np.zeros(1)), np.zeros(2))
        assert f(np.array([1.0, 0.0]), np.zeros(1))[1] == pytest.approx(-0.1)

    def test_rk4_remainder_vanishes_for_linear_rhs(self):
        A_c = np.array([[0.0, 1.0], [-1.0, 0.0]])
        B_c = np.array([[0.0], [1.0]])
        A, B, f = discretize(lambda x, u: A_c @ x + B_c @ u, A_c, B_c, 0.05, 'rk4')
        assert np.allclose(f(np.array([0.3, -0.2]), np.array([1.0])), 0.0, atol=1e-12)

    def test_expression_terms(self):
        f = ExpressionNonlinearity([
            {'row': 0, 'var': 'x1', 'kind': 'sin', 'coef': 2.0},
            {'row': 1, 'var': 'u0', 'kind': 'power', 'power': 3.0, 'coef': 0.5},
            {'row': 1, 'var': 'x0', 'kind': 'cos'},
        ], n=2, m=1)
        out = f(np.array([0.0, np.pi / 2]), np.array([-2.0]))
        assert out[0] == pytest.approx(2.0)
        assert out[1] == pytest.approx(-4.0)
        assert np.array_equal(f(np.zeros(2), np.zeros(1)), np.zeros(2))

    def test_expression_rejects_bad_variable(self):
        with pytest.raises(ConfigurationError):
            ExpressionNonlinearity([{'row': 0, 'var': 'z0'}], n=1, m=1)

    def test_builtin_registry(self):
        f = build_nonlinearity({'builtin': 'scalar_sine', 'gain': 0.1}, 1, 1)
        assert f(np.array([-10.0]), np.zeros(1))[0] == pytest.approx(-1.0 + np.sin(1.0))
        with pytest.raises(ConfigurationError):
            build_nonlinearity('unknown', 1, 1)
