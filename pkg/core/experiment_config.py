#!/usr/bin/env python3
"""
Configuração de experimentos
Resolução preset → JSON do usuário → overrides pontuados, validação do
documento e construção dos objetos do domínio
"""

import copy
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import BoundContext
from .controllers import DelaySpec, PredictionMode
from .costs import CostSpec, WeightedNormCost
from .errors import ConfigValidationError, ConfigurationError
from .fusion import EpsMode, FusionPolicy, SwitchPolicy
from .geometry import ControlBox, PolytopeConstraint, UnitBallPolytope
from .models import AnyModel, DisturbanceKind, DisturbanceSpec, NormKind, TimeVaryingModel, as_vector
from .presets import MODEL_BUILDERS, PresetLibrary, build_model
from .trajopt import SolverOptions

logger = logging.getLogger(__name__)


class SimMode(Enum):
    """Modos de operação do laço fechado"""
    FUSED = "fused"
    CLOUD_ONLY = "cloud"
    LOCAL_ONLY = "local"

    @classmethod
    def parse(cls, value: Any) -> 'SimMode':
        if isinstance(value, cls):
            return value
        aliases = {'cloud_only': 'cloud', 'local_only': 'local'}
        return cls(aliases.get(str(value), str(value)))


class ConfigConstants:
    """Chaves e valores aceitos no documento de configuração."""
    TOP_LEVEL_KEYS = (
        'name', 'description', 'preset', 'norm', 'model', 'cost', 'constraints', 'control_bound',
        'gauge', 'x0', 'delay', 'disturbance', 'fusion', 'solver', 'simulation', 'output_dir',
    )
    REQUIRED_KEYS = ('model', 'cost', 'x0', 'disturbance')
    COST_TYPES = ('weighted_norm', 'quadratic_weights')
    GAUGE_TYPES = ('default', 'box', 'explicit')
    DELAY_KEYS = ('delta_t', 'prediction_mode', 'explicit_eps0', 'injected_error')
    SIMULATION_KEYS = ('mode', 'seeds', 'relax_local_on_failure', 'verify_trials', 'terminal_threshold')


# === Montagem do documento ===

def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Mescla recursiva; listas e escalares do override substituem os da base."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text: str) -> Tuple[List[str], Any]:
    """
    Interpreta 'a.b.c=valor'. O valor é lido como JSON e, se não for
    JSON válido, fica como string.
    """
    if '=' not in text:
        raise ConfigValidationError([f"{text}: override deve ter a forma chave=valor"])
    key, raw = text.split('=', 1)
    keys = [part for part in key.strip().split('.') if part]
    if not keys:
        raise ConfigValidationError([f"{text}: chave vazia no override"])
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return keys, value


def apply_overrides(document: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Aplica overrides pontuados em ordem."""
    result = copy.deepcopy(document)
    for text in overrides:
        keys, value = parse_override(text)
        node = result
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = value
    return result


def load_document(path: str) -> Dict[str, Any]:
    """Lê um documento JSON de configuração."""
    try:
        with open(path, 'r', encoding='utf-8') as file:
            document = json.load(file)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Arquivo de configuração não encontrado: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{os.path.basename(path)}: JSON inválido ({e.msg}, linha {e.lineno})"]) from e
    if not isinstance(document, dict):
        raise ConfigValidationError([f"{os.path.basename(path)}: o documento deve ser um objeto JSON"])
    return document


def resolve_document(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Sequence[str] = ()
) -> Dict[str, Any]:
    """
    Documento resolvido: preset, depois JSON do usuário, depois overrides.

    Um JSON com chave `preset` herda desse preset quando --preset não é dado.
    """
    user = load_document(config_path) if config_path else {}
    base_name = preset or user.get('preset')
    document = PresetLibrary.get_preset(base_name) if base_name else {}
    document = deep_merge(document, user)
    if base_name:
        document['preset'] = base_name
    return apply_overrides(document, overrides)


def canonical_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def config_hash(document: Dict[str, Any]) -> str:
    """sha256 do JSON canônico do documento resolvido"""
    return hashlib.sha256(canonical_json(document).encode('utf-8')).hexdigest()


# === Validação ===

def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _is_number_list(value: Any) -> bool:
    return isinstance(value, list) and len(value) > 0 and all(_is_number(v) for v in value)


def _validate_top_level(document: Dict[str, Any], problems: List[str]) -> None:
    for key in document:
        if key not in ConfigConstants.TOP_LEVEL_KEYS:
            problems.append(f"{key}: chave desconhecida")
    for key in ConfigConstants.REQUIRED_KEYS:
        if key not in document:
            problems.append(f"{key}: seção obrigatória ausente")
    if 'norm' in document and str(document['norm']) not in [kind.value for kind in NormKind]:
        problems.append(f"norm: '{document['norm']}' não é one, two ou inf")
    if 'x0' in document and not _is_number_list(document['x0']):
        problems.append("x0: deve ser lista não vazia de números")


def _validate_model(document: Dict[str, Any], problems: List[str]) -> None:
    model = document.get('model')
    if model is None:
        return
    if not isinstance(model, dict):
        problems.append("model: deve ser um objeto")
        return
    kind = model.get('type', 'linear')
    if kind not in MODEL_BUILDERS:
        problems.append(f"model.type: '{kind}' desconhecido")
    if kind == 'linear':
        for key in ('A', 'B'):
            if key not in model:
                problems.append(f"model.{key}: obrigatório para modelos lineares")
        for key in ('L_f', 'M_f'):
            if key in model and (not _is_number(model[key]) or model[key] < 0):
                problems.append(f"model.{key}: deve ser número não negativo")


def _validate_cost(document: Dict[str, Any], problems: List[str]) -> Optional[int]:
    """Valida a seção de custo e devolve N quando válido."""
    cost = document.get('cost')
    if cost is None:
        return None
    if not isinstance(cost, dict):
        problems.append("cost: deve ser um objeto")
        return None
    kind = cost.get('type', 'weighted_norm')
    if kind not in ConfigConstants.COST_TYPES:
        problems.append(f"cost.type: '{kind}' desconhecido")
    N = cost.get('N')
    if not isinstance(N, int) or isinstance(N, bool) or N < 1:
        problems.append("cost.N: deve ser inteiro ≥ 1")
        N = None
    if kind == 'weighted_norm':
        if cost.get('p', 2) not in (1, 2):
            problems.append("cost.p: deve ser 1 ou 2")
        for key in ('S_x', 'S_u', 'S_f'):
            if key not in cost:
                problems.append(f"cost.{key}: obrigatório para weighted_norm")
    elif kind == 'quadratic_weights':
        for key in ('Q', 'R'):
            if key not in cost:
                problems.append(f"cost.{key}: obrigatório para quadratic_weights")
    return N


def _validate_constraints(document: Dict[str, Any], N: Optional[int], problems: List[str]) -> None:
    constraints = document.get('constraints', [])
    if not isinstance(constraints, list):
        problems.append("constraints: deve ser uma lista")
        return
    for index, item in enumerate(constraints):
        prefix = f"constraints[{index}]"
        if not isinstance(item, dict):
            problems.append(f"{prefix}: deve ser um objeto")
            continue
        T = item.get('T')
        if not isinstance(T, int) or isinstance(T, bool) or T < 1:
            problems.append(f"{prefix}.T: deve ser inteiro ≥ 1")
        elif N is not None and T > N:
            problems.append(f"{prefix}.T: T={T} excede o horizonte N={N}")
        if 'box' in item:
            if not _is_number_list(item['box']) or min(item['box']) < 0:
                problems.append(f"{prefix}.box: deve ser lista de semi-larguras não negativas")
        elif 'G' not in item or 'g' not in item:
            problems.append(f"{prefix}: requer 'box' ou o par 'G', 'g'")


def _validate_enum_field(section: Dict[str, Any], key: str, prefix: str, enum_cls: Any,
                         problems: List[str]) -> None:
    if key in section:
        try:
            enum_cls(section[key])
        except ValueError:
            allowed = ', '.join(item.value for item in enum_cls)
            problems.append(f"{prefix}.{key}: '{section[key]}' inválido ({allowed})")


def _validate_delay(document: Dict[str, Any], problems: List[str]) -> None:
    delay = document.get('delay', {})
    if not isinstance(delay, dict):
        problems.append("delay: deve ser um objeto")
        return
    for key in delay:
        if key not in ConfigConstants.DELAY_KEYS:
            problems.append(f"delay.{key}: chave desconhecida")
    delta_t = delay.get('delta_t', 0)
    if not isinstance(delta_t, int) or isinstance(delta_t, bool) or delta_t < 0:
        problems.append("delay.delta_t: deve ser inteiro ≥ 0")
    _validate_enum_field(delay, 'prediction_mode', 'delay', PredictionMode, problems)
    eps0 = delay.get('explicit_eps0')
    if eps0 is not None and (not _is_number(eps0) or eps0 < 0):
        problems.append("delay.explicit_eps0: deve ser número não negativo")
    injected = delay.get('injected_error')
    if injected is not None and not _is_number_list(injected):
        problems.append("delay.injected_error: deve ser lista de números")


def _validate_disturbance(document: Dict[str, Any], problems: List[str]) -> None:
    disturbance = document.get('disturbance')
    if disturbance is None:
        return
    if not isinstance(disturbance, dict):
        problems.append("disturbance: deve ser um objeto")
        return
    omega = disturbance.get('omega')
    if not _is_number(omega) or omega < 0:
        problems.append("disturbance.omega: deve ser número não negativo")
    amplitude = disturbance.get('amplitude')
    if amplitude is not None and (not _is_number(amplitude) or amplitude < 0):
        problems.append("disturbance.amplitude: deve ser número não negativo")
    _validate_enum_field(disturbance, 'kind', 'disturbance', DisturbanceKind, problems)


def _validate_fusion_and_solver(document: Dict[str, Any], problems: List[str]) -> None:
    fusion = document.get('fusion', {})
    if not isinstance(fusion, dict):
        problems.append("fusion: deve ser um objeto")
    else:
        _validate_enum_field(fusion, 'policy', 'fusion', SwitchPolicy, problems)
        _validate_enum_field(fusion, 'eps_mode', 'fusion', EpsMode, problems)

    solver = document.get('solver', {})
    if not isinstance(solver, dict):
        problems.append("solver: deve ser um objeto")
    else:
        known = SolverOptions().to_dict()
        for key in solver:
            if key not in known:
                problems.append(f"solver.{key}: opção desconhecida")


def _validate_simulation(document: Dict[str, Any], problems: List[str]) -> None:
    simulation = document.get('simulation', {})
    if not isinstance(simulation, dict):
        problems.append("simulation: deve ser um objeto")
        return
    for key in simulation:
        if key not in ConfigConstants.SIMULATION_KEYS:
            problems.append(f"simulation.{key}: chave desconhecida")
    if 'mode' in simulation:
        try:
            SimMode.parse(simulation['mode'])
        except ValueError:
            problems.append(f"simulation.mode: '{simulation['mode']}' inválido (fused, cloud, local)")
    seeds = simulation.get('seeds', [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        problems.append("simulation.seeds: deve ser lista de inteiros")
    trials = simulation.get('verify_trials', 0)
    if not isinstance(trials, int) or isinstance(trials, bool) or trials < 0:
        problems.append("simulation.verify_trials: deve ser inteiro ≥ 0")
    threshold = simulation.get('terminal_threshold')
    if threshold is not None and (not isinstance(threshold, (int, float)) or isinstance(threshold, bool)
                                  or threshold < 0):
        problems.append("simulation.terminal_threshold: deve ser número ≥ 0")


def validate_document(document: Dict[str, Any]) -> None:
    """
    Valida o documento e reúne todos os problemas numa única exceção.

    Raises:
        ConfigValidationError: com a lista de chaves ofensoras
    """
    problems: List[str] = []
    _validate_top_level(document, problems)
    _validate_model(document, problems)
    N = _validate_cost(document, problems)
    _validate_constraints(document, N, problems)
    _validate_delay(document, problems)
    _validate_disturbance(document, problems)
    _validate_fusion_and_solver(document, problems)
    _validate_simulation(document, problems)
    if problems:
        raise ConfigValidationError(problems)


# === Construção ===

@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Experimento resolvido com todos os objetos do domínio prontos"""
    name: str
    document: Dict[str, Any]
    model: AnyModel
    cost: CostSpec
    constraints: Tuple[PolytopeConstraint, ...]
    control_box: Optional[ControlBox]
    gauge_poly: UnitBallPolytope
    x0: np.ndarray
    delay: DelaySpec
    disturbance: DisturbanceSpec
    fusion: FusionPolicy
    solver: SolverOptions
    ctx: BoundContext
    mode: SimMode = SimMode.FUSED
    seeds: Tuple[int, ...] = (0,)
    relax_local_on_failure: bool = True
    verify_trials: int = 0
    terminal_threshold: Optional[float] = None
    output_dir: Optional[str] = None

    @property
    def N(self) -> int:
        return self.cost.N

    @property
    def config_hash(self) -> str:
        return config_hash(self.document)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.document)


def _build_cost(section: Dict[str, Any], norm_kind: NormKind) -> CostSpec:
    if section.get('type', 'weighted_norm') == 'quadratic_weights':
        structure = WeightedNormCost.from_quadratic_weights(section['Q'], section['R'], section.get('Q_f'))
    else:
        structure = WeightedNormCost(section['S_x'], section['S_u'], section['S_f'], int(section.get('p', 2)))
    return CostSpec.from_weighted_norms(structure, int(section['N']), norm_kind,
                                        name=section.get('name', section.get('type', 'weighted_norm')))


def _build_constraints(items: Sequence[Dict[str, Any]]) -> Tuple[PolytopeConstraint, ...]:
    constraints = []
    for item in items:
        if 'box' in item:
            constraints.append(PolytopeConstraint.symmetric_box(item['T'], item['box']))
        else:
            constraints.append(PolytopeConstraint(item['T'], item['G'], item['g']))
    return tuple(sorted(constraints, key=lambda c: c.T))


def _build_control_box(value: Any) -> Optional[ControlBox]:
    if value is None:
        return None
    if isinstance(value, dict):
        return ControlBox(value['low'], value['high'])
    return ControlBox.symmetric(value)


def _build_gauge(section: Dict[str, Any], n: int, m: int, norm_kind: NormKind) -> UnitBallPolytope:
    kind = section.get('type', 'default')
    if kind == 'box':
        return UnitBallPolytope.box(section['state_half_widths'], section['control_half_widths'], norm_kind)
    if kind == 'explicit':
        return UnitBallPolytope(section['G_bar'], section['g_bar'], section['H_bar'], section['h_bar'], norm_kind)
    if kind != 'default':
        raise ConfigValidationError([f"gauge.type: '{kind}' inválido ({', '.join(ConfigConstants.GAUGE_TYPES)})"])
    return UnitBallPolytope.default(n, m, norm_kind)


def build_experiment(document: Dict[str, Any]) -> ExperimentConfig:
    """
    Valida o documento resolvido e constrói o ExperimentConfig.

    Raises:
        ConfigValidationError: violações de schema
        ConfigurationError: inconsistências detectadas na construção
    """
    validate_document(document)
    norm_kind = NormKind.parse(document.get('norm', 'two'))
    cost = _build_cost(document['cost'], norm_kind)
    N = cost.N
    model = build_model(document['model'], N, norm_kind)
    if isinstance(model, TimeVaryingModel) and model.horizon < N:
        raise ConfigurationError(f"Modelo variante no tempo com {model.horizon} estágios para N={N}")
    if cost.structure is not None and (cost.structure.n != model.n or cost.structure.m != model.m):
        raise ConfigValidationError([f"cost: dimensões ({cost.structure.n}, {cost.structure.m}) "
                                     f"diferem do modelo ({model.n}, {model.m})"])

    constraints = _build_constraints(document.get('constraints', []))
    for constraint in constraints:
        if constraint.n != model.n:
            raise ConfigValidationError([f"constraints: T={constraint.T} com {constraint.n} colunas, esperado {model.n}"])

    control_box = _build_control_box(document.get('control_bound'))
    if control_box is not None and control_box.m != model.m:
        raise ConfigValidationError([f"control_bound: dimensão {control_box.m}, esperado {model.m}"])

    delay_section = dict(document.get('delay', {}))
    delay = DelaySpec(**delay_section)
    disturbance_section = dict(document['disturbance'])
    disturbance = DisturbanceSpec(
        omega=float(disturbance_section['omega']), dim=model.n, norm_kind=norm_kind,
        kind=disturbance_section.get('kind', 'uniform'), amplitude=disturbance_section.get('amplitude'),
    )
    fusion_section = document.get('fusion', {})
    simulation = document.get('simulation', {})
    threshold = simulation.get('terminal_threshold')

    config = ExperimentConfig(
        name=str(document.get('name', document.get('preset', 'custom'))),
        document=copy.deepcopy(document),
        model=model,
        cost=cost,
        constraints=constraints,
        control_box=control_box,
        gauge_poly=_build_gauge(document.get('gauge', {}), model.n, model.m, norm_kind),
        x0=as_vector(document['x0'], model.n, "x0"),
        delay=delay,
        disturbance=disturbance,
        fusion=FusionPolicy(fusion_section.get('policy', 'constrained'), fusion_section.get('eps_mode', 'measured')),
        solver=SolverOptions.from_dict(document.get('solver', {})),
        ctx=BoundContext.from_problem(model, cost, disturbance),
        mode=SimMode.parse(simulation.get('mode', 'fused')),
        seeds=tuple(simulation.get('seeds', [0])),
        relax_local_on_failure=bool(simulation.get('relax_local_on_failure', True)),
        verify_trials=int(simulation.get('verify_trials', 0)),
        terminal_threshold=float(threshold) if threshold is not None else None,
        output_dir=document.get('output_dir'),
    )
    logger.info("Experimento '%s' resolvido (N=%d, n=%d, m=%d, hash=%s)",
                config.name, N, model.n, model.m, config.config_hash[:12])
    return config


def resolve_config(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    overrides: Sequence[str] = ()
) -> ExperimentConfig:
    """Atalho: resolve o documento e constrói o experimento."""
    return build_experiment(resolve_document(preset, config_path, overrides))
