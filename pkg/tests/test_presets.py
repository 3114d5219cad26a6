"""
Testes dos presets e dos construtores de modelos
"""

import numpy as np
import pytest

from core.errors import ConfigurationError
from core.models import NormKind, TimeVaryingModel, finite_difference_jacobians
from core.presets import PresetLibrary, PresetName, build_model, reference_heading, reference_steering


class TestPresetLibrary:
    def test_names(self):
        assert set(PresetLibrary.names()) == {'example1', 'example2', 'example3', 'degenerate'}

    def test_get_preset_returns_copy(self):
        document = PresetLibrary.get_preset(PresetName.EXAMPLE1)
        document['x0'][0] = 99.0
        assert PresetLibrary.get_preset('example1')['x0'] == [-10.0]

    def test_unknown_preset(self):
        with pytest.raises(ConfigurationError, match="desconhecido"):
            PresetLibrary.get_preset('pendulo')


class TestModelBuilders:
    def test_unknown_type(self):
        with pytest.raises(ConfigurationError):
            build_model({'type': 'quadrotor'}, 10, NormKind.TWO)

    def test_cart_pole_linear_part_is_linearization(self):
        params = PresetLibrary.get_preset('example2')['model']
        model = build_model(params, 30, NormKind.TWO)
        jac_x, jac_u = finite_difference_jacobians(model.f, np.zeros(4), np.zeros(1))
        assert np.allclose(jac_x, 0.0, atol=1e-6)
        assert np.allclose(jac_u, 0.0, atol=1e-6)
        assert model.L_f > 0
        assert model.A.shape == (4, 4) and model.B.shape == (4, 1)
        assert np.array_equal(model.check_box.x_bound, [2.0, 5.0, 1.0, 6.0])
        assert np.array_equal(model.check_box.u_bound, [100.0])

    def test_cart_pole_operating_box_required(self):
        params = PresetLibrary.get_preset('example2')['model']
        params.pop('operating_box')
        with pytest.raises(ConfigurationError, match="operating_box"):
            build_model(params, 30, NormKind.TWO)

    def test_vehicle_stages(self):
        params = PresetLibrary.get_preset('example3')['model']
        model = build_model(params, 12, NormKind.TWO)
        assert isinstance(model, TimeVaryingModel)
        assert model.horizon == 12
        stage = model.stage(5)
        jac_x, jac_u = finite_difference_jacobians(stage.f, np.zeros(3), np.zeros(2))
        assert np.allclose(jac_x, 0.0, atol=1e-6)
        assert np.allclose(jac_u, 0.0, atol=1e-6)
        assert model.L_f >= stage.L_f
        assert stage.lipschitz_box is not None
        assert np.array_equal(stage.check_box.u_bound, [2.0, 0.3])

    def test_reference_path(self):
        params = {'dt': 0.05, 'speed': 5.0, 'wheelbase': 2.7, 'steer_amplitude': 0.1, 'steer_frequency': 0.5}
        steer = reference_steering(params, 4)
        assert steer[0] == 0.0
        assert steer[2] == pytest.approx(0.1 * np.sin(0.05))
        heading = reference_heading(params, 4)
        assert heading.shape == (5,)
        assert heading[2] == pytest.approx(0.05 * 5.0 / 2.7 * steer[1])
