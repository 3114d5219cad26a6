#!/usr/bin/env python3
"""
Limites de erro de Lipschitz
Propagação do erro de estado e do erro de custo-a-ir para o plano da
nuvem e para os planos locais, recursão δ_k e agregação ξ_{T|t}
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Optional, Sequence, Union

import numpy as np

from .costs import CostSpec
from .errors import ConfigurationError, DimensionError
from .models import AnyModel, DisturbanceSpec, NormKind

logger = logging.getLogger(__name__)

Gauges = Union[Sequence[Sequence[float]], np.ndarray]


@dataclass(frozen=True)
class BoundContext:
    """Pacote de constantes (a, L_f, M_f, ω, L_φ, L_ψ, N) numa única norma"""
    a: float
    L_f: float
    M_f: float
    omega: float
    L_phi: float
    L_psi: float
    N: int
    norm_kind: NormKind = NormKind.TWO

    def __post_init__(self):
        for name in ('a', 'L_f', 'M_f', 'omega', 'L_phi', 'L_psi'):
            value = float(getattr(self, name))
            if value < 0 or not np.isfinite(value):
                raise ConfigurationError(f"Constante {name} deve ser finita e não negativa, recebido {value}")
            object.__setattr__(self, name, value)
        if int(self.N) < 1:
            raise ConfigurationError(f"Horizonte N deve ser ≥ 1, recebido {self.N}")
        object.__setattr__(self, 'N', int(self.N))

    @property
    def rate(self) -> float:
        """Taxa de propagação a + L_f"""
        return self.a + self.L_f

    @classmethod
    def from_problem(cls, model: AnyModel, cost: CostSpec, disturbance: DisturbanceSpec) -> 'BoundContext':
        """
        Reúne as constantes do modelo, do custo e da perturbação.

        Modelos variantes no tempo já expõem os máximos por estágio.
        """
        kinds = {model.norm_kind, cost.norm_kind, disturbance.norm_kind}
        if len(kinds) != 1:
            raise ConfigurationError(
                "Normas misturadas entre modelo, custo e perturbação: "
                + ", ".join(sorted(kind.value for kind in kinds))
            )
        return cls(
            a=model.a, L_f=model.L_f, M_f=model.M_f, omega=disturbance.omega,
            L_phi=cost.L_phi, L_psi=cost.L_psi, N=cost.N, norm_kind=model.norm_kind
        )

    def with_changes(self, **changes: Any) -> 'BoundContext':
        return replace(self, **changes)


def propagate_error(ctx: BoundContext, eps: float, steps: int) -> float:
    """r^s·ε + ω·Σ_{j<s} r^j com r = a + L_f; steps = 0 devolve ε."""
    if steps < 0:
        raise ConfigurationError(f"Número de passos negativo: {steps}")
    if eps < 0:
        raise ConfigurationError(f"Erro inicial deve ser não negativo, recebido {eps}")
    powers = ctx.rate ** np.arange(steps, dtype=float)
    return float(ctx.rate ** steps * eps + ctx.omega * np.sum(powers))


def cloud_state_bound(ctx: BoundContext, eps_k: float, k: int, tau: int) -> float:
    """
    Limite de ‖x̂_τ − x_τ‖ dado ε_k = ‖x̂_k − x_k‖.

    Args:
        ctx: Constantes
        eps_k: Erro no instante k
        k: Instante de partida
        tau: Instante alvo (k < τ ≤ N)
    """
    if tau <= k:
        raise ConfigurationError(f"cloud_state_bound requer τ > k, recebido k={k}, τ={tau}")
    if tau > ctx.N:
        raise ConfigurationError(f"τ={tau} excede o horizonte N={ctx.N}")
    return propagate_error(ctx, eps_k, tau - k)


def delta_sequence(ctx: BoundContext, delta0: float, T: int) -> np.ndarray:
    """[δ_0, ..., δ_T] com δ_k = r^k δ_0 + ω Σ_{l<k} r^l"""
    if T > ctx.N:
        raise ConfigurationError(f"T={T} excede o horizonte N={ctx.N}")
    return np.array([propagate_error(ctx, delta0, k) for k in range(T + 1)])


def cloud_cost_bound(ctx: BoundContext, eps_k: float, k: int) -> float:
    """
    η̂_k: limite de |Ĵ_k − J_k^c| pela forma somada.

    Σ_{τ=k}^{N−1} L_φ·e_τ + L_ψ·e_N, com e_τ o erro propagado de ε_k.
    """
    if not 0 <= k <= ctx.N:
        raise ConfigurationError(f"k={k} fora de [0, {ctx.N}]")
    stage = sum(ctx.L_phi * propagate_error(ctx, eps_k, tau - k) for tau in range(k, ctx.N))
    return float(stage + ctx.L_psi * propagate_error(ctx, eps_k, ctx.N - k))


def _as_gauge_array(gauges: Gauges, expected: Optional[int] = None) -> np.ndarray:
    """Normaliza pares (α_l, β_l) num array (expected × 2)."""
    array = np.asarray(gauges, dtype=float).reshape(-1, 2) if len(gauges) else np.zeros((0, 2))
    if expected is not None and array.shape[0] != expected:
        raise DimensionError(f"Esperados {expected} pares de gauge, recebido {array.shape[0]}")
    if np.any(array < 0):
        raise ConfigurationError("Gauges α, β devem ser não negativos")
    return array


def local_state_bounds(ctx: BoundContext, gauges: Gauges, t: int) -> np.ndarray:
    """
    [ξ_{t|t}, ξ_{t+1|t}, ..., ξ_{t+len|t}] pela recursão
    ξ_{τ+1} = r·ξ_τ + L_f α_τ + M_f β_τ + ω, com ξ_{t|t} = 0.
    """
    array = _as_gauge_array(gauges)
    xi = np.zeros(array.shape[0] + 1)
    for i, (alpha, beta) in enumerate(array):
        xi[i + 1] = ctx.rate * xi[i] + ctx.L_f * alpha + ctx.M_f * beta + ctx.omega
    return xi


def local_state_bound(ctx: BoundContext, gauges: Gauges, t: int, tau: int) -> float:
    """
    Limite de ‖x̄_{τ|t} − x_τ‖: Σ_{l=t}^{τ−1} r^{τ−l−1}(L_f α_l + M_f β_l + ω).

    Args:
        gauges: Pares (α_l, β_l) para l = t..τ−1
    """
    if tau <= t:
        raise ConfigurationError(f"local_state_bound requer τ > t, recebido t={t}, τ={tau}")
    array = _as_gauge_array(gauges, tau - t)
    return float(local_state_bounds(ctx, array, t)[-1])


def local_cost_bound(ctx: BoundContext, gauges: Gauges, t: int) -> float:
    """
    η̄_t = L_φ Σ_{τ=t+1}^{N−1} ξ_{τ|t} + L_ψ ξ_{N|t}.

    A soma de estágio começa em t+1 porque x̄_{t|t} = x_t.
    """
    if not 0 <= t < ctx.N:
        raise ConfigurationError(f"t={t} fora de [0, {ctx.N})")
    array = _as_gauge_array(gauges, ctx.N - t)
    xi = local_state_bounds(ctx, array, t)
    return float(ctx.L_phi * np.sum(xi[1:-1]) + ctx.L_psi * xi[-1])
