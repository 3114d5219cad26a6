#!/usr/bin/env python3
"""
Modelos do sistema
Planta real, modelo de alta fidelidade (nuvem), modelo linear (local),
perturbações limitadas e metadados de Lipschitz
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigurationError, DimensionError, NumericError

logger = logging.getLogger(__name__)

Nonlinearity = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ModelConstants:
    """Constantes para construção e validação de modelos."""
    A_NORM_TOLERANCE = 1e-9
    LIPSCHITZ_TOLERANCE = 1e-9

    DEFAULT_LIPSCHITZ_SAMPLES = 500
    DEFAULT_BOX_HALF_WIDTH = 10.0
    DEFAULT_ESTIMATE_SAMPLES = 2000
    FD_RELATIVE_STEP = 1e-6


class NormKind(Enum):
    """Norma vetorial (e norma matricial induzida) usada em todos os limites"""
    ONE = "one"
    TWO = "two"
    INF = "inf"

    @property
    def ord(self) -> float:
        """Argumento `ord` equivalente do numpy"""
        return {NormKind.ONE: 1, NormKind.TWO: 2, NormKind.INF: np.inf}[self]

    @property
    def dual(self) -> 'NormKind':
        """Norma dual (função suporte da bola unitária)"""
        return {NormKind.ONE: NormKind.INF, NormKind.TWO: NormKind.TWO, NormKind.INF: NormKind.ONE}[self]

    @classmethod
    def parse(cls, value: Union[str, 'NormKind']) -> 'NormKind':
        if isinstance(value, NormKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(f"Norma desconhecida: {value!r} (use one, two ou inf)")


class Stepper(Enum):
    """Qual modelo propaga o estado"""
    TRUE = "true"
    CLOUD = "cloud"
    LOCAL = "local"


def as_vector(value: Any, dim: Optional[int] = None, name: str = "vetor") -> np.ndarray:
    """
    Converte escalar/lista/array em vetor float 1-D.

    Args:
        value: Valor de entrada
        dim: Dimensão esperada (None não verifica)
        name: Nome usado na mensagem de erro

    Returns:
        Vetor numpy 1-D
    """
    vec = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if dim is not None and vec.shape[0] != dim:
        raise DimensionError(f"{name} com dimensão {vec.shape[0]}, esperado {dim}")
    return vec


def vector_norm(v: Any, kind: NormKind) -> float:
    """Norma vetorial ‖v‖ do tipo configurado"""
    return float(np.linalg.norm(as_vector(v), ord=kind.ord))


def induced_norm(matrix: Any, kind: NormKind) -> float:
    """Norma matricial induzida pela norma vetorial `kind`"""
    return float(np.linalg.norm(np.atleast_2d(np.asarray(matrix, dtype=float)), ord=kind.ord))


def dual_norm(v: Any, kind: NormKind) -> float:
    """Norma dual de v (igual a max vᵀx sobre a bola unitária de `kind`)"""
    return vector_norm(v, kind.dual)


@dataclass(frozen=True)
class SampleBox:
    """Caixa simétrica de amostragem |x_i| ≤ x_bound_i, |u_j| ≤ u_bound_j"""
    x_bound: np.ndarray
    u_bound: np.ndarray

    def __post_init__(self):
        x_bound = as_vector(self.x_bound, name="x_bound")
        u_bound = as_vector(self.u_bound, name="u_bound")
        if np.any(x_bound < 0) or np.any(u_bound < 0):
            raise ConfigurationError("Caixa de amostragem com semi-largura negativa")
        object.__setattr__(self, 'x_bound', x_bound)
        object.__setattr__(self, 'u_bound', u_bound)

    def sample(self, rng: np.random.Generator, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Amostra `count` pares (x, u) uniformes na caixa"""
        xs = rng.uniform(-1.0, 1.0, size=(count, self.x_bound.size)) * self.x_bound
        us = rng.uniform(-1.0, 1.0, size=(count, self.u_bound.size)) * self.u_bound
        return xs, us

    def contains(self, x: Any, u: Any, tol: float = 0.0) -> bool:
        """(x, u) dentro da caixa, com folga absoluta `tol`"""
        x = as_vector(x, self.x_bound.size, "estado")
        u = as_vector(u, self.u_bound.size, "controle")
        return bool(np.all(np.abs(x) <= self.x_bound + tol) and np.all(np.abs(u) <= self.u_bound + tol))

    @classmethod
    def default(cls, n: int, m: int) -> 'SampleBox':
        """Caixa padrão de verificação quando o modelo não declara a sua"""
        half = ModelConstants.DEFAULT_BOX_HALF_WIDTH
        return cls(np.full(n, half), np.full(m, half))


@dataclass(frozen=True, eq=False)
class SystemModel:
    """
    Modelo x⁺ = A x + B u + f(x, u) (+ w na planta real).

    A norma induzida `a` é calculada se omitida e verificada se informada.
    As constantes de Lipschitz são entradas do usuário e são verificadas
    por amostragem na construção: em `lipschitz_box` quando fornecida,
    senão na caixa padrão SampleBox.default. `verify_lipschitz=False`
    desliga a verificação (modelos deliberadamente mal configurados).
    """
    A: np.ndarray
    B: np.ndarray
    f: Nonlinearity
    L_f: float
    M_f: float
    a: Optional[float] = None
    norm_kind: NormKind = NormKind.TWO
    name: str = "custom"
    lipschitz_box: Optional[SampleBox] = None
    verify_lipschitz: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim < 2:
            B = B.reshape(A.shape[0], -1)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'B', B)
        object.__setattr__(self, 'norm_kind', NormKind.parse(self.norm_kind))

        self._validate_shapes()
        self._validate_constants()
        self._validate_origin()

        if self.verify_lipschitz:
            check_lipschitz(self, self.check_box)

    @property
    def check_box(self) -> SampleBox:
        """Caixa em que L_f e M_f foram declarados válidos"""
        return self.lipschitz_box if self.lipschitz_box is not None else SampleBox.default(self.n, self.m)

    def _validate_shapes(self) -> None:
        """Valida dimensões de A e B."""
        if self.A.shape[0] != self.A.shape[1]:
            raise DimensionError(f"A deve ser quadrada, recebido {self.A.shape}")
        if self.B.shape[0] != self.A.shape[0]:
            raise DimensionError(f"B tem {self.B.shape[0]} linhas, esperado {self.A.shape[0]}")

    def _validate_constants(self) -> None:
        """Valida L_f, M_f e a = ‖A‖."""
        if self.L_f < 0 or self.M_f < 0:
            raise ConfigurationError("Constantes de Lipschitz L_f e M_f devem ser não negativas")

        computed = induced_norm(self.A, self.norm_kind)
        if self.a is None:
            object.__setattr__(self, 'a', computed)
        elif abs(float(self.a) - computed) > ModelConstants.A_NORM_TOLERANCE:
            raise ConfigurationError(
                f"a = {self.a} difere de ‖A‖ ({self.norm_kind.value}) = {computed:.12g}"
            )
        else:
            object.__setattr__(self, 'a', float(self.a))

    def _validate_origin(self) -> None:
        """f(0, 0) deve ser exatamente zero."""
        value = self.nonlinearity(np.zeros(self.n), np.zeros(self.m))
        if np.any(value != 0.0):
            raise ConfigurationError(f"f(0,0) deve ser exatamente 0, obtido {value}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def stage(self, t: int) -> 'SystemModel':
        """Modelo invariante no tempo: o estágio t é o próprio modelo"""
        return self

    def nonlinearity(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Avalia f(x, u) com verificação de forma."""
        value = as_vector(self.f(x, u), self.n, "f(x,u)")
        return value


@dataclass(frozen=True, eq=False)
class TimeVaryingModel:
    """Sequência de estágios (A_t, B_t, f_t) com constantes agregadas pelo máximo"""
    steps: Tuple[SystemModel, ...]
    name: str = "time_varying"

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps:
            raise ConfigurationError("Modelo variante no tempo sem estágios")
        first = steps[0]
        for index, step in enumerate(steps):
            if step.n != first.n or step.m != first.m:
                raise DimensionError(f"Estágio {index} com dimensões diferentes do estágio 0")
            if step.norm_kind is not first.norm_kind:
                raise ConfigurationError(f"Estágio {index} usa norma diferente do estágio 0")
        object.__setattr__(self, 'steps', steps)

    @property
    def n(self) -> int:
        return self.steps[0].n

    @property
    def m(self) -> int:
        return self.steps[0].m

    @property
    def norm_kind(self) -> NormKind:
        return self.steps[0].norm_kind

    @property
    def a(self) -> float:
        return max(step.a for step in self.steps)

    @property
    def L_f(self) -> float:
        return max(step.L_f for step in self.steps)

    @property
    def M_f(self) -> float:
        return max(step.M_f for step in self.steps)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def stage(self, t: int) -> SystemModel:
        """Estágio t (saturado no último estágio disponível)"""
        return self.steps[min(max(int(t), 0), len(self.steps) - 1)]


AnyModel = Union[SystemModel, TimeVaryingModel]


def _coerce_state_control(stage: SystemModel, x: Any, u: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Converte e valida (x, u) para o estágio."""
    return as_vector(x, stage.n, "estado"), as_vector(u, stage.m, "controle")


def step_true(model: AnyModel, x: Any, u: Any, w: Any, t: int = 0) -> np.ndarray:
    """Planta real: A x + B u + f(x, u) + w"""
    stage = model.stage(t)
    x, u = _coerce_state_control(stage, x, u)
    w = as_vector(w, stage.n, "perturbação")
    return stage.A @ x + stage.B @ u + stage.nonlinearity(x, u) + w


def step_cloud(model: AnyModel, x: Any, u: Any, t: int = 0) -> np.ndarray:
    """Modelo de alta fidelidade da nuvem: A x + B u + f(x, u)"""
    stage = model.stage(t)
    x, u = _coerce_state_control(stage, x, u)
    return stage.A @ x + stage.B @ u + stage.nonlinearity(x, u)


def step_local(model: AnyModel, x: Any, u: Any, t: int = 0) -> np.ndarray:
    """Modelo linear local: A x + B u"""
    stage = model.stage(t)
    x, u = _coerce_state_control(stage, x, u)
    return stage.A @ x + stage.B @ u


def rollout(
    model: AnyModel,
    stepper: Union[Stepper, str],
    x0: Any,
    controls: Sequence[Any],
    disturbances: Optional[Sequence[Any]] = None,
    t0: int = 0
) -> np.ndarray:
    """
    Propaga o estado por vários passos.

    Args:
        model: Modelo do sistema
        stepper: true, cloud ou local
        x0: Estado inicial
        controls: Sequência de controles (comprimento ≥ 1)
        disturbances: Perturbações (obrigatórias só para a planta real)
        t0: Índice de tempo do primeiro passo (modelos variantes no tempo)

    Returns:
        Array (len(controls)+1, n) começando em x0
    """
    stepper = Stepper(stepper) if not isinstance(stepper, Stepper) else stepper
    controls = list(controls)
    if len(controls) < 1:
        raise DimensionError("rollout requer pelo menos um controle")
    if stepper is Stepper.TRUE:
        if disturbances is None:
            raise DimensionError("Planta real requer a sequência de perturbações")
        disturbances = list(disturbances)
        if len(disturbances) != len(controls):
            raise DimensionError(
                f"{len(controls)} controles e {len(disturbances)} perturbações"
            )
    elif disturbances is not None:
        raise DimensionError(f"Perturbações só se aplicam à planta real, não a '{stepper.value}'")

    states = [as_vector(x0, model.n, "estado inicial")]
    for offset, u in enumerate(controls):
        t = t0 + offset
        if stepper is Stepper.TRUE:
            nxt = step_true(model, states[-1], u, disturbances[offset], t)
        elif stepper is Stepper.CLOUD:
            nxt = step_cloud(model, states[-1], u, t)
        else:
            nxt = step_local(model, states[-1], u, t)
        if not np.all(np.isfinite(nxt)):
            raise NumericError(f"Estado não finito no passo {t}: {nxt}")
        states.append(nxt)
    return np.vstack(states)


def finite_difference_jacobians(
    f: Nonlinearity, x: np.ndarray, u: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Jacobianos (∂f/∂x, ∂f/∂u) por diferenças centrais."""
    x = as_vector(x)
    u = as_vector(u)
    base = as_vector(f(x, u))
    jac_x = np.zeros((base.size, x.size))
    jac_u = np.zeros((base.size, u.size))

    for i in range(x.size):
        h = ModelConstants.FD_RELATIVE_STEP * max(1.0, abs(x[i]))
        step = np.zeros_like(x)
        step[i] = h
        jac_x[:, i] = (as_vector(f(x + step, u)) - as_vector(f(x - step, u))) / (2.0 * h)
    for j in range(u.size):
        h = ModelConstants.FD_RELATIVE_STEP * max(1.0, abs(u[j]))
        step = np.zeros_like(u)
        step[j] = h
        jac_u[:, j] = (as_vector(f(x, u + step)) - as_vector(f(x, u - step))) / (2.0 * h)
    return jac_x, jac_u


def jacobian_bound(
    f: Nonlinearity,
    box: SampleBox,
    norm_kind: NormKind,
    n_samples: int = ModelConstants.DEFAULT_ESTIMATE_SAMPLES,
    seed: int = 0,
    margin: float = 1.0
) -> Tuple[float, float]:
    """
    Supremo amostral das normas induzidas dos Jacobianos de f na caixa.

    Numa caixa convexa esse supremo é a constante de Lipschitz local; a
    amostragem só dá cota inferior, daí a margem multiplicativa.

    Returns:
        (L, M) multiplicados por `margin`
    """
    rng = np.random.default_rng(seed)
    xs, us = box.sample(rng, n_samples)
    sup_x = 0.0
    sup_u = 0.0
    for x, u in zip(xs, us):
        jac_x, jac_u = finite_difference_jacobians(f, x, u)
        sup_x = max(sup_x, induced_norm(jac_x, norm_kind))
        sup_u = max(sup_u, induced_norm(jac_u, norm_kind))
    return margin * sup_x, margin * sup_u


def _model_stages(model: AnyModel) -> List[SystemModel]:
    """Lista de estágios distintos do modelo."""
    if isinstance(model, TimeVaryingModel):
        return list(model.steps)
    return [model]


def estimate_lipschitz(
    model: AnyModel,
    sample_box: SampleBox,
    n_samples: int = ModelConstants.DEFAULT_ESTIMATE_SAMPLES,
    seed: int = 0
) -> Tuple[float, float]:
    """
    Estima cotas inferiores amostrais de L_f e M_f.

    Nunca substitui as constantes configuradas; apenas avisa quando a
    estimativa as excede.

    Returns:
        (L_f_est, M_f_est)
    """
    if n_samples < 2:
        raise ConfigurationError("estimate_lipschitz requer n_samples ≥ 2")

    L_est = 0.0
    M_est = 0.0
    for stage in _model_stages(model):
        L_jac, M_jac = jacobian_bound(stage.nonlinearity, sample_box, stage.norm_kind, n_samples, seed)
        L_pair, M_pair = _pairwise_ratios(stage, sample_box, n_samples, seed + 1)
        L_est = max(L_est, L_jac, L_pair)
        M_est = max(M_est, M_jac, M_pair)

    tol = ModelConstants.LIPSCHITZ_TOLERANCE
    if L_est > model.L_f + tol:
        logger.warning("L_f estimado (%.6g) excede o configurado (%.6g) em %s", L_est, model.L_f, model.name)
    if M_est > model.M_f + tol:
        logger.warning("M_f estimado (%.6g) excede o configurado (%.6g) em %s", M_est, model.M_f, model.name)
    return L_est, M_est


def _pairwise_ratios(stage: SystemModel, box: SampleBox, n_samples: int, seed: int) -> Tuple[float, float]:
    """Razões ‖Δf‖/‖Δx‖ e ‖Δf‖/‖Δu‖ em pares aleatórios."""
    rng = np.random.default_rng(seed)
    xs, us = box.sample(rng, n_samples)
    xs2, us2 = box.sample(rng, n_samples)
    kind = stage.norm_kind
    best_x = 0.0
    best_u = 0.0
    for x, u, x2, u2 in zip(xs, us, xs2, us2):
        dx = vector_norm(x - x2, kind)
        if dx > 0:
            best_x = max(best_x, vector_norm(stage.nonlinearity(x, u) - stage.nonlinearity(x2, u), kind) / dx)
        du = vector_norm(u - u2, kind)
        if du > 0:
            best_u = max(best_u, vector_norm(stage.nonlinearity(x, u) - stage.nonlinearity(x, u2), kind) / du)
    return best_x, best_u


def check_lipschitz(
    model: SystemModel,
    box: SampleBox,
    n_samples: int = ModelConstants.DEFAULT_LIPSCHITZ_SAMPLES,
    seed: int = 0
) -> None:
    """
    Verifica ‖f(x,u) − f(x',u')‖ ≤ L_f‖x−x'‖ + M_f‖u−u'‖ + tol em pares aleatórios.

    Raises:
        ConfigurationError: se algum par violar a desigualdade
    """
    rng = np.random.default_rng(seed)
    xs, us = box.sample(rng, n_samples)
    xs2, us2 = box.sample(rng, n_samples)
    kind = model.norm_kind
    for x, u, x2, u2 in zip(xs, us, xs2, us2):
        lhs = vector_norm(model.nonlinearity(x, u) - model.nonlinearity(x2, u2), kind)
        rhs = model.L_f * vector_norm(x - x2, kind) + model.M_f * vector_norm(u - u2, kind)
        if lhs > rhs + ModelConstants.LIPSCHITZ_TOLERANCE:
            raise ConfigurationError(
                f"Constantes de Lipschitz de '{model.name}' violadas: "
                f"‖Δf‖ = {lhs:.6g} > {rhs:.6g} em x={x}, u={u}"
            )


# === Perturbações ===

class DisturbanceKind(Enum):
    """Como as perturbações são amostradas dentro da bola de raio ω"""
    UNIFORM = "uniform"
    VERTEX = "vertex"
    ZERO = "zero"


@dataclass(frozen=True)
class DisturbanceSpec:
    """
    Conjunto de perturbações W com sup ‖w‖ = ω.

    `amplitude` é o raio efetivamente amostrado; fica igual a ω salvo
    em testes de injeção de falha.
    """
    omega: float
    dim: int
    norm_kind: NormKind = NormKind.TWO
    kind: DisturbanceKind = DisturbanceKind.UNIFORM
    amplitude: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.omega < 0:
            raise ConfigurationError("ω deve ser não negativo")
        object.__setattr__(self, 'norm_kind', NormKind.parse(self.norm_kind))
        if not isinstance(self.kind, DisturbanceKind):
            object.__setattr__(self, 'kind', DisturbanceKind(self.kind))
        if self.amplitude is None:
            object.__setattr__(self, 'amplitude', float(self.omega))
        elif self.amplitude < 0:
            raise ConfigurationError("Amplitude de amostragem deve ser não negativa")

    def sampler(self, seed: Optional[int] = None) -> 'DisturbanceSampler':
        """Cria um amostrador com semente própria"""
        return DisturbanceSampler(self, self.seed if seed is None else seed)


class DisturbanceSampler:
    """Gerador semeado de w com ‖w‖ ≤ amplitude; uso por um único dono"""

    def __init__(self, spec: DisturbanceSpec, seed: int):
        self.spec = spec
        self._rng = np.random.default_rng(seed)

    def sample(self) -> np.ndarray:
        """Amostra uma perturbação."""
        spec = self.spec
        radius = float(spec.amplitude)
        if spec.kind is DisturbanceKind.ZERO or radius == 0.0:
            return np.zeros(spec.dim)
        if spec.kind is DisturbanceKind.VERTEX:
            w = self._boundary_point(radius)
        else:
            w = self._uniform_point(radius)
        norm = vector_norm(w, spec.norm_kind)
        if norm > radius:
            w = w * (radius / norm)
        return w

    def sample_sequence(self, count: int) -> np.ndarray:
        """Amostra `count` perturbações em ordem (array count × dim)."""
        if count <= 0:
            return np.zeros((0, self.spec.dim))
        return np.vstack([self.sample() for _ in range(count)])

    def _uniform_point(self, radius: float) -> np.ndarray:
        """Ponto uniforme na bola da norma configurada."""
        dim = self.spec.dim
        kind = self.spec.norm_kind
        if kind is NormKind.INF:
            return self._rng.uniform(-radius, radius, size=dim)
        if kind is NormKind.TWO:
            direction = self._unit_direction()
            return radius * self._rng.uniform() ** (1.0 / dim) * direction
        # bola l1: coordenadas de Dirichlet(1,...,1) com sinais aleatórios
        weights = self._rng.exponential(size=dim + 1)
        signs = self._rng.choice([-1.0, 1.0], size=dim)
        return radius * signs * weights[:dim] / weights.sum()

    def _boundary_point(self, radius: float) -> np.ndarray:
        """Ponto extremo aleatório na fronteira da bola."""
        dim = self.spec.dim
        kind = self.spec.norm_kind
        if kind is NormKind.INF:
            return radius * self._rng.choice([-1.0, 1.0], size=dim)
        if kind is NormKind.TWO:
            return radius * self._unit_direction()
        w = np.zeros(dim)
        w[self._rng.integers(dim)] = radius * self._rng.choice([-1.0, 1.0])
        return w

    def _unit_direction(self) -> np.ndarray:
        """Direção uniforme na esfera euclidiana."""
        while True:
            g = self._rng.standard_normal(self.spec.dim)
            norm = np.linalg.norm(g)
            if norm > 0:
                return g / norm


# === Discretização e não linearidades ===

class DiscretizationScheme(Enum):
    """Esquema de discretização de presets em tempo contínuo"""
    EULER = "euler"
    RK4 = "rk4"


ContinuousRhs = Callable[[np.ndarray, np.ndarray], np.ndarray]


def discretize(
    rhs: ContinuousRhs,
    A_c: np.ndarray,
    B_c: np.ndarray,
    dt: float,
    scheme: Union[DiscretizationScheme, str] = DiscretizationScheme.EULER
) -> Tuple[np.ndarray, np.ndarray, Nonlinearity]:
    """
    Discretiza ẋ = rhs(x, u), com parte linear (A_c, B_c), em x⁺ = A x + B u + f(x, u).

    Euler: A = I + dt·A_c, B = dt·B_c e f = dt·(rhs − A_c x − B_c u).
    RK4: (A, B) é a linearização exata do passo RK4 na origem e f é o resto.
    """
    scheme = DiscretizationScheme(scheme) if not isinstance(scheme, DiscretizationScheme) else scheme
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    B_c = np.asarray(B_c, dtype=float).reshape(A_c.shape[0], -1)
    n = A_c.shape[0]
    eye = np.eye(n)

    if scheme is DiscretizationScheme.EULER:
        A = eye + dt * A_c
        B = dt * B_c

        def euler_remainder(x: np.ndarray, u: np.ndarray) -> np.ndarray:
            return dt * (as_vector(rhs(x, u)) - A_c @ x - B_c @ u)

        return A, B, euler_remainder

    hA = dt * A_c
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    A = eye + hA + hA2 / 2.0 + hA3 / 6.0 + hA3 @ hA / 24.0
    B = dt * (eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B_c

    def rk4_remainder(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        k1 = as_vector(rhs(x, u))
        k2 = as_vector(rhs(x + 0.5 * dt * k1, u))
        k3 = as_vector(rhs(x + 0.5 * dt * k2, u))
        k4 = as_vector(rhs(x + dt * k3, u))
        nxt = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return nxt - A @ x - B @ u

    return A, B, rk4_remainder


def zero_nonlinearity(n: int) -> Nonlinearity:
    """f ≡ 0"""
    def f(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.zeros(n)
    return f


def scalar_sine_nonlinearity(gain: float = 0.1) -> Nonlinearity:
    """f(x, u) = g·x − sin(g·x), escalar"""
    def f(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = as_vector(x)
        return gain * x - np.sin(gain * x)
    return f


class ExpressionNonlinearity:
    """
    Não linearidade definida por tabela de termos.

    Cada termo é um dict com `row` (componente de saída), `var` ("x0", "u1", ...),
    `kind` ∈ {linear, power, sin, cos}, `coef`, e opcionalmente `scale`
    e `power`. cos entra como coef·(cos(scale·v) − 1), preservando f(0,0) = 0.
    """

    KINDS = ('linear', 'power', 'sin', 'cos')

    def __init__(self, terms: Sequence[Dict[str, Any]], n: int, m: int):
        self.n = n
        self.m = m
        self.terms = [self._parse_term(term, index) for index, term in enumerate(terms)]

    def _parse_term(self, term: Dict[str, Any], index: int) -> Dict[str, Any]:
        """Valida e normaliza um termo da tabela."""
        kind = term.get('kind', 'linear')
        if kind not in self.KINDS:
            raise ConfigurationError(f"terms[{index}].kind: tipo '{kind}' desconhecido")
        var = str(term.get('var', ''))
        source, idx = var[:1], var[1:]
        if source not in ('x', 'u') or not idx.isdigit():
            raise ConfigurationError(f"terms[{index}].var: variável '{var}' inválida")
        idx = int(idx)
        limit = self.n if source == 'x' else self.m
        row = int(term.get('row', 0))
        if idx >= limit or not 0 <= row < self.n:
            raise DimensionError(f"terms[{index}]: índice fora da dimensão")
        power = float(term.get('power', 1.0))
        if kind == 'power' and power < 1.0:
            raise ConfigurationError(f"terms[{index}].power deve ser ≥ 1")
        return {
            'row': row, 'source': source, 'index': idx, 'kind': kind,
            'coef': float(term.get('coef', 1.0)), 'scale': float(term.get('scale', 1.0)),
            'power': power,
        }

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = as_vector(x)
        u = as_vector(u)
        out = np.zeros(self.n)
        for term in self.terms:
            v = x[term['index']] if term['source'] == 'x' else u[term['index']]
            kind = term['kind']
            if kind == 'linear':
                value = term['scale'] * v
            elif kind == 'power':
                value = np.sign(v) * abs(term['scale'] * v) ** term['power']
            elif kind == 'sin':
                value = np.sin(term['scale'] * v)
            else:
                value = np.cos(term['scale'] * v) - 1.0
            out[term['row']] += term['coef'] * value
        return out


NONLINEARITIES: Dict[str, Callable[..., Nonlinearity]] = {
    'zero': lambda n, m, **params: zero_nonlinearity(n),
    'scalar_sine': lambda n, m, **params: scalar_sine_nonlinearity(float(params.get('gain', 0.1))),
}


def build_nonlinearity(spec: Union[str, Dict[str, Any]], n: int, m: int) -> Nonlinearity:
    """
    Constrói f a partir do nome de um builtin ou de uma tabela de termos.

    Args:
        spec: "zero", {"builtin": "scalar_sine", "gain": 0.1} ou {"terms": [...]}
        n: Dimensão de estado
        m: Dimensão de controle
    """
    if isinstance(spec, str):
        spec = {'builtin': spec}
    if 'terms' in spec:
        return ExpressionNonlinearity(spec['terms'], n, m)
    name = spec.get('builtin', 'zero')
    if name not in NONLINEARITIES:
        raise ConfigurationError(f"model.nonlinearity: builtin '{name}' desconhecido")
    params = {key: value for key, value in spec.items() if key != 'builtin'}
    return NONLINEARITIES[name](n, m, **params)
