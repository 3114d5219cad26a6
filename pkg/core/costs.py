#!/usr/bin/env python3
"""
Custos de estágio e terminal
Avaliação de custo total e custo-a-ir com metadados de Lipschitz
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DimensionError, NumericError
from .models import NormKind, SampleBox, as_vector, induced_norm, vector_norm

logger = logging.getLogger(__name__)

StageCost = Callable[[np.ndarray, np.ndarray], float]
TerminalCost = Callable[[np.ndarray], float]


class CostConstants:
    """Constantes de verificação de custos."""
    LIPSCHITZ_TOLERANCE = 1e-9
    DEFAULT_LIPSCHITZ_SAMPLES = 500
    SUPPORTED_P = (1, 2)


def _norm_ratio(source: NormKind, p: int, dim: int) -> float:
    """Menor c com ‖v‖_p ≤ c·‖v‖_source em dimensão dim."""
    inv_p = 1.0 / p
    inv_q = 0.0 if source is NormKind.INF else 1.0 / source.ord
    return float(dim ** max(0.0, inv_p - inv_q))


def weighted_norm_lipschitz(S: np.ndarray, p: int, state_norm: NormKind) -> float:
    """
    Constante de Lipschitz de x ↦ ‖S x‖_p medida na norma de estado.

    Exata quando a norma de estado é a própria p; caso contrário usa a
    equivalência de normas, que dá uma cota superior válida.
    """
    S = np.atleast_2d(S)
    p_kind = NormKind.ONE if p == 1 else NormKind.TWO
    return induced_norm(S, p_kind) * _norm_ratio(state_norm, p, S.shape[1])


@dataclass(frozen=True, eq=False)
class WeightedNormCost:
    """
    Estrutura φ(x,u) = ‖S_x x‖_p + ‖S_u u‖_p e ψ(x) = ‖S_f x‖_p.

    Os otimizadores usam essa estrutura para formulações convexas
    (cvxpy) e de epígrafo (SLSQP).
    """
    S_x: np.ndarray
    S_u: np.ndarray
    S_f: np.ndarray
    p: int = 2

    def __post_init__(self):
        if self.p not in CostConstants.SUPPORTED_P:
            raise ConfigurationError(f"cost.p deve ser 1 ou 2, recebido {self.p}")
        for name in ('S_x', 'S_u', 'S_f'):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.S_x.shape[1] != self.S_f.shape[1]:
            raise DimensionError("S_x e S_f devem ter o mesmo número de colunas (dimensão de estado)")

    @classmethod
    def from_quadratic_weights(cls, Q: Any, R: Any, Q_f: Optional[Any] = None) -> 'WeightedNormCost':
        """
        Normas ‖x‖_Q = ‖Q^{1/2} x‖_2 (não elevadas ao quadrado).

        Args:
            Q, R, Q_f: Matrizes simétricas semidefinidas ou diagonais como listas
        """
        def root(M: Any) -> np.ndarray:
            M = np.asarray(M, dtype=float)
            if M.ndim < 2:
                M = np.diag(np.atleast_1d(M))
            if np.any(np.linalg.eigvalsh((M + M.T) / 2.0) < -1e-12):
                raise ConfigurationError("Pesos quadráticos devem ser semidefinidos positivos")
            return np.real(scipy.linalg.sqrtm(M))

        return cls(root(Q), root(R), root(Q if Q_f is None else Q_f), p=2)

    @property
    def n(self) -> int:
        return self.S_x.shape[1]

    @property
    def m(self) -> int:
        return self.S_u.shape[1]

    def stage(self, x: np.ndarray, u: np.ndarray) -> float:
        return float(np.linalg.norm(self.S_x @ x, ord=self.p) + np.linalg.norm(self.S_u @ u, ord=self.p))

    def terminal(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.S_f @ x, ord=self.p))


@dataclass(frozen=True, eq=False)
class CostSpec:
    """
    Custo J = Σ φ(x_t, u_t) + ψ(x_N) com horizonte N.

    L_phi e L_psi são Lipschitz em x na norma de estado configurada.
    """
    phi: StageCost
    psi: TerminalCost
    L_phi: float
    L_psi: float
    N: int
    norm_kind: NormKind = NormKind.TWO
    name: str = "custom"
    structure: Optional[WeightedNormCost] = None
    lipschitz_box: Optional[SampleBox] = None

    def __post_init__(self):
        if int(self.N) < 1:
            raise ConfigurationError(f"Horizonte N deve ser ≥ 1, recebido {self.N}")
        object.__setattr__(self, 'N', int(self.N))
        if self.L_phi < 0 or self.L_psi < 0:
            raise ConfigurationError("L_phi e L_psi devem ser não negativos")
        object.__setattr__(self, 'norm_kind', NormKind.parse(self.norm_kind))
        if self.lipschitz_box is not None:
            check_lipschitz(self, self.lipschitz_box)

    @classmethod
    def from_weighted_norms(
        cls,
        structure: WeightedNormCost,
        N: int,
        norm_kind: NormKind = NormKind.TWO,
        name: str = "weighted_norm",
        lipschitz_box: Optional[SampleBox] = None
    ) -> 'CostSpec':
        """Constrói φ, ψ e as constantes L_φ, L_ψ a partir da estrutura de normas."""
        norm_kind = NormKind.parse(norm_kind)
        return cls(
            phi=structure.stage,
            psi=structure.terminal,
            L_phi=weighted_norm_lipschitz(structure.S_x, structure.p, norm_kind),
            L_psi=weighted_norm_lipschitz(structure.S_f, structure.p, norm_kind),
            N=N,
            norm_kind=norm_kind,
            name=name,
            structure=structure,
            lipschitz_box=lipschitz_box,
        )

    def stage_cost(self, x: Any, u: Any) -> float:
        """φ(x, u) com verificação de finitude"""
        value = float(self.phi(as_vector(x), as_vector(u)))
        if not np.isfinite(value):
            raise NumericError(f"Custo de estágio não finito: {value}")
        return value

    def terminal_cost(self, x: Any) -> float:
        """ψ(x) com verificação de finitude"""
        value = float(self.psi(as_vector(x)))
        if not np.isfinite(value):
            raise NumericError(f"Custo terminal não finito: {value}")
        return value


def _backward_sums(cost: CostSpec, states: Sequence[Any], controls: Sequence[Any]) -> List[float]:
    """Acumulação de trás para frente: [J_k, ..., J_N] para a cauda dada."""
    if len(states) != len(controls) + 1:
        raise DimensionError(
            f"Cauda inconsistente: {len(states)} estados para {len(controls)} controles"
        )
    sums = [cost.terminal_cost(states[-1])]
    for x, u in zip(reversed(states[:-1]), reversed(controls)):
        sums.append(cost.stage_cost(x, u) + sums[-1])
    sums.reverse()
    return sums


def total_cost(cost: CostSpec, states: Sequence[Any], controls: Sequence[Any]) -> float:
    """
    Custo total Σ_{t=0}^{N−1} φ(x_t, u_t) + ψ(x_N).

    Args:
        cost: Especificação de custo
        states: N+1 estados
        controls: N controles
    """
    states = list(states)
    controls = list(controls)
    if len(controls) != cost.N or len(states) != cost.N + 1:
        raise DimensionError(
            f"total_cost requer {cost.N + 1} estados e {cost.N} controles, "
            f"recebido {len(states)} e {len(controls)}"
        )
    return _backward_sums(cost, states, controls)[0]


def cost_to_go(cost: CostSpec, states: Sequence[Any], controls: Sequence[Any], k: Optional[int] = None) -> float:
    """
    Custo-a-ir Σ_{τ=k}^{N−1} φ + ψ(x_N) sobre uma cauda que termina em N.

    Args:
        cost: Especificação de custo
        states: Estados x_k..x_N
        controls: Controles u_k..u_{N−1}
        k: Índice inicial (verifica o comprimento da cauda se informado)
    """
    states = list(states)
    controls = list(controls)
    if k is not None and len(controls) != cost.N - k:
        raise DimensionError(f"Cauda a partir de k={k} deve ter {cost.N - k} controles, recebido {len(controls)}")
    if len(controls) > cost.N:
        raise DimensionError(f"Cauda com {len(controls)} controles excede N={cost.N}")
    return _backward_sums(cost, states, controls)[0]


def cost_to_go_sequence(cost: CostSpec, states: Sequence[Any], controls: Sequence[Any]) -> np.ndarray:
    """Sequência [J_0, ..., J_N] por acumulação reversa."""
    states = list(states)
    controls = list(controls)
    if len(controls) != cost.N:
        raise DimensionError(f"Sequência de custo-a-ir requer {cost.N} controles, recebido {len(controls)}")
    return np.asarray(_backward_sums(cost, states, controls))


def check_lipschitz(
    cost: CostSpec,
    box: SampleBox,
    n_samples: int = CostConstants.DEFAULT_LIPSCHITZ_SAMPLES,
    seed: int = 0
) -> None:
    """
    Verifica Lipschitz em x de φ e ψ em pares amostrados na caixa.

    Raises:
        ConfigurationError: se |φ(x,u)−φ(x',u)| > L_φ‖x−x'‖ + tol (ou análogo para ψ)
    """
    rng = np.random.default_rng(seed)
    xs, us = box.sample(rng, n_samples)
    xs2, _ = box.sample(rng, n_samples)
    tol = CostConstants.LIPSCHITZ_TOLERANCE
    for x, u, x2 in zip(xs, us, xs2):
        dx = vector_norm(x - x2, cost.norm_kind)
        if abs(cost.stage_cost(x, u) - cost.stage_cost(x2, u)) > cost.L_phi * dx + tol:
            raise ConfigurationError(f"L_phi de '{cost.name}' violado em x={x}, x'={x2}")
        if abs(cost.terminal_cost(x) - cost.terminal_cost(x2)) > cost.L_psi * dx + tol:
            raise ConfigurationError(f"L_psi de '{cost.name}' violado em x={x}, x'={x2}")
