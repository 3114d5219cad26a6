#!/usr/bin/env python3
"""
Presets de experimentos
Documentos de configuração dos três exemplos de referência e construtores
dos modelos físicos (carro-pêndulo e veículo em coordenadas de erro)
"""

import copy
import logging
from enum import Enum
from typing import Any, Callable, Dict, List

import numpy as np

from .errors import ConfigurationError
from .models import (DiscretizationScheme, NormKind, SampleBox, SystemModel, TimeVaryingModel, AnyModel,
                     build_nonlinearity, discretize, jacobian_bound)

logger = logging.getLogger(__name__)


class PresetName(Enum):
    """Presets disponíveis"""
    EXAMPLE1 = "example1"
    EXAMPLE2 = "example2"
    EXAMPLE3 = "example3"
    DEGENERATE = "degenerate"


class PresetLibrary:
    """Documentos de configuração predefinidos"""

    PRESETS: Dict[PresetName, Dict[str, Any]] = {
        PresetName.EXAMPLE1: {
            'name': 'example1',
            'description': 'Sistema escalar com não linearidade senoidal e erro inicial injetado',
            'norm': 'two',
            'model': {
                'type': 'linear',
                'A': [[0.75]],
                'B': [[1.0]],
                'nonlinearity': {'builtin': 'scalar_sine', 'gain': 0.1},
                'L_f': 0.2,
                'M_f': 0.0,
            },
            'cost': {
                'type': 'weighted_norm',
                'N': 10,
                'p': 1,
                'S_x': [[1.0]],
                'S_u': [[float(np.sqrt(5.0))]],
                'S_f': [[float(np.sqrt(2.0))]],
            },
            'constraints': [{'T': 10, 'box': [2.5]}],
            'control_bound': [3.0],
            'gauge': {'type': 'default'},
            'x0': [-10.0],
            'delay': {'delta_t': 0, 'prediction_mode': 'hold_state', 'explicit_eps0': 0.5,
                      'injected_error': [-0.5]},
            'disturbance': {'omega': 0.02, 'kind': 'uniform'},
            'fusion': {'policy': 'constrained', 'eps_mode': 'measured'},
            'solver': {},
            'simulation': {'mode': 'fused', 'seeds': [0], 'relax_local_on_failure': True,
                           'verify_trials': 1000},
        },
        PresetName.EXAMPLE2: {
            'name': 'example2',
            'description': 'Carro-pêndulo invertido amortecido (modelo local linearizado na origem)',
            'norm': 'two',
            'model': {
                'type': 'cart_pole',
                'cart_mass': 1.0,
                'pole_mass': 1.0,
                'length': 0.5,
                'damping': 10.0,
                'gravity': 9.81,
                'dt': 0.1,
                'scheme': 'euler',
                'operating_box': {'x_bound': [2.0, 5.0, 1.0, 6.0], 'u_bound': [100.0]},
                'lipschitz_margin': 1.2,
                'lipschitz_samples': 400,
            },
            'cost': {
                'type': 'quadratic_weights',
                'N': 30,
                'Q': [3.0, 0.4, 3.0, 0.4],
                'R': [1e-5],
            },
            'constraints': [],
            'control_bound': [100.0],
            'gauge': {'type': 'default'},
            'x0': [0.0, 0.0, 0.6, 0.0],
            'delay': {'delta_t': 2, 'prediction_mode': 'forward_simulate'},
            'disturbance': {'omega': 1e-3, 'kind': 'uniform'},
            'fusion': {'policy': 'constrained', 'eps_mode': 'measured'},
            'solver': {'max_iter': 500},
            'simulation': {'mode': 'fused', 'seeds': [0], 'relax_local_on_failure': True,
                           'verify_trials': 20, 'terminal_threshold': 0.1},
        },
        PresetName.EXAMPLE3: {
            'name': 'example3',
            'description': 'Veículo (bicicleta cinemática) seguindo referência curva em coordenadas de erro',
            'norm': 'two',
            'model': {
                'type': 'vehicle_error',
                'wheelbase': 2.7,
                'speed': 5.0,
                'steer_amplitude': 0.1,
                'steer_frequency': 0.5,
                'dt': 0.05,
                'operating_box': {'x_bound': [1.0, 1.0, 0.2], 'u_bound': [2.0, 0.3]},
                'lipschitz_margin': 1.2,
                'lipschitz_samples': 200,
            },
            'cost': {
                'type': 'quadratic_weights',
                'N': 60,
                'Q': [3.0, 3.0, 0.01],
                'R': [0.001, 0.001],
            },
            'constraints': [],
            'control_bound': [2.0, 0.3],
            'gauge': {'type': 'default'},
            'x0': [0.5, -0.5, 0.05],
            'delay': {'delta_t': 2, 'prediction_mode': 'forward_simulate'},
            'disturbance': {'omega': 1e-3, 'kind': 'uniform'},
            'fusion': {'policy': 'constrained', 'eps_mode': 'measured'},
            'solver': {'max_iter': 500},
            'simulation': {'mode': 'fused', 'seeds': [0], 'relax_local_on_failure': True,
                           'verify_trials': 20},
        },
        PresetName.DEGENERATE: {
            'name': 'degenerate',
            'description': 'Sem perturbação, sem não linearidade e sem atraso: os três modos coincidem',
            'norm': 'two',
            'model': {
                'type': 'linear',
                'A': [[0.9, 0.1], [0.0, 0.8]],
                'B': [[0.0], [1.0]],
                'nonlinearity': 'zero',
                'L_f': 0.0,
                'M_f': 0.0,
            },
            'cost': {
                'type': 'weighted_norm',
                'N': 8,
                'p': 1,
                'S_x': [[1.0, 0.0], [0.0, 1.0]],
                'S_u': [[1.0]],
                'S_f': [[2.0, 0.0], [0.0, 2.0]],
            },
            'constraints': [{'T': 8, 'box': [1.0, 1.0]}],
            'control_bound': [2.0],
            'gauge': {'type': 'default'},
            'x0': [3.0, -1.0],
            'delay': {'delta_t': 0, 'prediction_mode': 'hold_state'},
            'disturbance': {'omega': 0.0, 'kind': 'zero'},
            'fusion': {'policy': 'constrained', 'eps_mode': 'measured'},
            'solver': {},
            'simulation': {'mode': 'fused', 'seeds': [0], 'relax_local_on_failure': True,
                           'verify_trials': 5},
        },
    }

    @classmethod
    def names(cls) -> List[str]:
        return [name.value for name in cls.PRESETS]

    @classmethod
    def get_preset(cls, name: Any) -> Dict[str, Any]:
        """Cópia profunda do documento do preset"""
        try:
            key = name if isinstance(name, PresetName) else PresetName(str(name))
        except ValueError as e:
            raise ConfigurationError(
                f"Preset '{name}' desconhecido. Disponíveis: {', '.join(cls.names())}"
            ) from e
        return copy.deepcopy(cls.PRESETS[key])


# === Construtores de modelos ===

def _operating_box(params: Dict[str, Any]) -> SampleBox:
    box = params.get('operating_box')
    if not box:
        raise ConfigurationError("model.operating_box: obrigatório para estimar L_f e M_f")
    return SampleBox(box['x_bound'], box['u_bound'])


def build_linear_model(params: Dict[str, Any], N: int, norm_kind: NormKind) -> SystemModel:
    """Modelo dado diretamente por A, B, f e constantes de Lipschitz."""
    A = np.atleast_2d(np.asarray(params['A'], dtype=float))
    B = np.asarray(params['B'], dtype=float).reshape(A.shape[0], -1)
    f = build_nonlinearity(params.get('nonlinearity', 'zero'), A.shape[0], B.shape[1])
    box = params.get('lipschitz_box')
    return SystemModel(
        A=A, B=B, f=f, L_f=float(params.get('L_f', 0.0)), M_f=float(params.get('M_f', 0.0)),
        a=params.get('a'), norm_kind=norm_kind, name=params.get('name', 'linear'),
        lipschitz_box=SampleBox(box['x_bound'], box['u_bound']) if box else None,
    )


def cart_pole_dynamics(params: Dict[str, Any]) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """
    Lado direito contínuo do carro-pêndulo com estado (z, ż, θ, θ̇) e θ = 0 para cima.

    Args:
        params: cart_mass, pole_mass, length, damping, gravity
    """
    m_c = float(params.get('cart_mass', 1.0))
    m_p = float(params.get('pole_mass', 1.0))
    length = float(params.get('length', 0.5))
    k_d = float(params.get('damping', 10.0))
    g = float(params.get('gravity', 9.81))

    def rhs(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        _, z_dot, theta, theta_dot = x
        s, c = np.sin(theta), np.cos(theta)
        z_ddot = (u[0] - k_d * z_dot - m_p * length * theta_dot ** 2 * s + m_p * g * s * c) / (m_c + m_p * s ** 2)
        theta_ddot = (z_ddot * c + g * s) / length
        return np.array([z_dot, z_ddot, theta_dot, theta_ddot])

    return rhs


def build_cart_pole_model(params: Dict[str, Any], N: int, norm_kind: NormKind) -> SystemModel:
    """Discretiza o carro-pêndulo; a parte linear é a linearização na origem."""
    m_c = float(params.get('cart_mass', 1.0))
    m_p = float(params.get('pole_mass', 1.0))
    length = float(params.get('length', 0.5))
    k_d = float(params.get('damping', 10.0))
    g = float(params.get('gravity', 9.81))

    A_c = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -k_d / m_c, m_p * g / m_c, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, -k_d / (m_c * length), (m_p * g / m_c + g) / length, 0.0],
    ])
    B_c = np.array([[0.0], [1.0 / m_c], [0.0], [1.0 / (m_c * length)]])
    A, B, f = discretize(cart_pole_dynamics(params), A_c, B_c, float(params.get('dt', 0.1)),
                         DiscretizationScheme(params.get('scheme', 'euler')))

    box = _operating_box(params)
    L_f, M_f = jacobian_bound(
        f, box, norm_kind, int(params.get('lipschitz_samples', 400)),
        int(params.get('lipschitz_seed', 0)), float(params.get('lipschitz_margin', 1.2)),
    )
    logger.info("Carro-pêndulo: L_f=%.4g, M_f=%.4g na caixa de operação", L_f, M_f)
    return SystemModel(A=A, B=B, f=f, L_f=L_f, M_f=M_f, norm_kind=norm_kind, name='cart_pole',
                       lipschitz_box=box)


def reference_heading(params: Dict[str, Any], steps: int) -> np.ndarray:
    """Rumo φ_ref integrado a partir de φ_ref(0) = 0 pela referência de esterçamento."""
    wheelbase = float(params.get('wheelbase', 2.7))
    speed = float(params.get('speed', 5.0))
    dt = float(params.get('dt', 0.05))
    steer = reference_steering(params, steps)
    heading = np.zeros(steps + 1)
    for t in range(steps):
        heading[t + 1] = heading[t] + dt * speed / wheelbase * steer[t]
    return heading


def reference_steering(params: Dict[str, Any], steps: int) -> np.ndarray:
    """γ_ref(t) = amplitude·sin(frequência·t·ΔT)"""
    dt = float(params.get('dt', 0.05))
    amplitude = float(params.get('steer_amplitude', 0.1))
    frequency = float(params.get('steer_frequency', 0.5))
    return amplitude * np.sin(frequency * np.arange(steps) * dt)


def _vehicle_stage(params: Dict[str, Any], heading: float, steer: float, norm_kind: NormKind,
                   box: SampleBox, t: int) -> SystemModel:
    """Estágio t do modelo de erro do veículo (Euler)."""
    wheelbase = float(params.get('wheelbase', 2.7))
    speed = float(params.get('speed', 5.0))
    dt = float(params.get('dt', 0.05))
    s_ref, c_ref = np.sin(heading), np.cos(heading)

    A_c = np.array([[0.0, 0.0, -speed * s_ref], [0.0, 0.0, speed * c_ref], [0.0, 0.0, 0.0]])
    B_c = np.array([[c_ref, 0.0], [s_ref, 0.0], [steer / wheelbase, speed / wheelbase]])

    def f(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        phi, v = x[2], u[0]
        return dt * np.array([
            (np.cos(phi + heading) - c_ref) * (v + speed) + speed * s_ref * phi,
            (np.sin(phi + heading) - s_ref) * (v + speed) - speed * c_ref * phi,
            v * u[1] / wheelbase,
        ])

    L_f, M_f = jacobian_bound(
        f, box, norm_kind, int(params.get('lipschitz_samples', 200)),
        int(params.get('lipschitz_seed', 0)) + t, float(params.get('lipschitz_margin', 1.2)),
    )
    return SystemModel(A=np.eye(3) + dt * A_c, B=dt * B_c, f=f, L_f=L_f, M_f=M_f,
                       norm_kind=norm_kind, name=f'vehicle_error[{t}]', lipschitz_box=box)


def build_vehicle_model(params: Dict[str, Any], N: int, norm_kind: NormKind) -> TimeVaryingModel:
    """Modelo variante no tempo com um estágio por passo do horizonte."""
    box = _operating_box(params)
    heading = reference_heading(params, N)
    steer = reference_steering(params, N)
    steps = tuple(_vehicle_stage(params, heading[t], steer[t], norm_kind, box, t) for t in range(N))
    model = TimeVaryingModel(steps, name='vehicle_error')
    logger.info("Veículo: a=%.4g, L_f=%.4g, M_f=%.4g (máximos por estágio)", model.a, model.L_f, model.M_f)
    return model


MODEL_BUILDERS: Dict[str, Callable[[Dict[str, Any], int, NormKind], AnyModel]] = {
    'linear': build_linear_model,
    'cart_pole': build_cart_pole_model,
    'vehicle_error': build_vehicle_model,
}


def build_model(params: Dict[str, Any], N: int, norm_kind: NormKind) -> AnyModel:
    """Constrói o modelo pelo campo `type` da seção model."""
    kind = params.get('type', 'linear')
    if kind not in MODEL_BUILDERS:
        raise ConfigurationError(f"model.type: '{kind}' desconhecido ({', '.join(MODEL_BUILDERS)})")
    return MODEL_BUILDERS[kind](params, N, norm_kind)
