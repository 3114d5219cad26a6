#!/usr/bin/env python3
"""
Fusão nuvem/local
Políticas de chaveamento por custo de pior caso
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from .controllers import CloudPlan, LocalPlan
from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class Choice(Enum):
    CLOUD = "cloud"
    LOCAL = "local"


class SwitchPolicy(Enum):
    """Regra de chaveamento aplicada a cada passo"""
    CONSTRAINED = "constrained"
    UNCONSTRAINED = "unconstrained"
    ALWAYS_CLOUD = "always_cloud"
    ALWAYS_LOCAL = "always_local"


class EpsMode(Enum):
    """Em qual ε_t o limite η̂_t é avaliado"""
    MEASURED = "measured"
    DELTA = "delta"


def switch_unconstrained(j_hat: float, eta_hat: float, j_bar: float, eta_bar: float) -> Choice:
    """Nuvem se Ĵ_t + η̂_t ≤ J̄_t + η̄_t (empate vai para a nuvem)."""
    return Choice.CLOUD if j_hat + eta_hat <= j_bar + eta_bar else Choice.LOCAL


def switch_constrained(
    j_hat: float,
    eta_hat: float,
    j_bar: float,
    eta_bar: float,
    eps_meas: float,
    delta_t: float
) -> Choice:
    """
    Nuvem somente se o custo de pior caso favorece a nuvem e a condição de
    confiança ‖x̂_t − x_t‖ ≤ δ_t vale.

    Args:
        j_hat, eta_hat: Custo-a-ir previsto pela nuvem e seu limite
        j_bar, eta_bar: Idem para o plano local (J̄ pode ser +∞)
        eps_meas: Erro de predição medido
        delta_t: Orçamento δ_t
    """
    if eps_meas > delta_t:
        return Choice.LOCAL
    return switch_unconstrained(j_hat, eta_hat, j_bar, eta_bar)


def optimal_switch_oracle(J_l_t: float, J_c_t: float) -> Choice:
    """Oráculo a posteriori: nuvem se J^c_t ≤ J^l_t."""
    return Choice.CLOUD if J_c_t <= J_l_t else Choice.LOCAL


@dataclass(frozen=True)
class SwitchDecision:
    """Registro de uma decisão de chaveamento"""
    t: int
    choice: Choice
    j_cloud_wc: float
    j_local_wc: float
    eps_meas: float
    delta_t: float
    trust_ok: bool
    eta_hat: float = 0.0

    @property
    def cost_sign(self) -> int:
        """sign((J̄ + η̄) − (Ĵ + η̂)), com +1 quando o lado local é infinito"""
        if np.isinf(self.j_local_wc):
            return 1
        return int(np.sign(self.j_local_wc - self.j_cloud_wc))

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['choice'] = self.choice.value
        return data


class FusionPolicy:
    """
    Política configurável que produz uma SwitchDecision por passo.

    `always_cloud` e `always_local` servem para os testes de degenerescência
    entre modos e para isolar cada controlador.
    """

    def __init__(self, policy: Any = SwitchPolicy.CONSTRAINED, eps_mode: Any = EpsMode.MEASURED):
        try:
            self.policy = SwitchPolicy(policy)
            self.eps_mode = EpsMode(eps_mode)
        except ValueError as e:
            raise ConfigurationError(f"Política de fusão inválida: {e}") from e

    def cloud_worst_case(self, cloud: CloudPlan, t: int, eps_meas: float) -> float:
        """Ĵ_t + η̂_t com ε escolhido pelo modo configurado"""
        delta_t = float(cloud.deltas[t])
        if self.eps_mode is EpsMode.MEASURED and eps_meas <= delta_t:
            eta = cloud.eta_at(eps_meas, t)
        else:
            eta = float(cloud.eta[t])
        return float(cloud.cost_to_go[t] + eta)

    def decide(self, t: int, cloud: CloudPlan, local: Optional[LocalPlan], eps_meas: float) -> SwitchDecision:
        """
        Decide entre û_t e ū_{t|t}.

        Sem plano local com controles a decisão é sempre a nuvem.
        """
        delta_t = float(cloud.deltas[t])
        trust_ok = eps_meas <= delta_t
        j_cloud_wc = self.cloud_worst_case(cloud, t, eps_meas)
        eta_hat = j_cloud_wc - float(cloud.cost_to_go[t])
        j_local_wc = local.worst_case if local is not None else float('inf')

        if local is None or not local.has_controls:
            choice = Choice.CLOUD
        elif self.policy is SwitchPolicy.ALWAYS_CLOUD:
            choice = Choice.CLOUD
        elif self.policy is SwitchPolicy.ALWAYS_LOCAL:
            choice = Choice.LOCAL
        elif self.policy is SwitchPolicy.UNCONSTRAINED:
            choice = switch_unconstrained(float(cloud.cost_to_go[t]), eta_hat, local.J_bar, local.eta_bar)
        else:
            choice = switch_constrained(float(cloud.cost_to_go[t]), eta_hat, local.J_bar, local.eta_bar,
                                        eps_meas, delta_t)

        logger.debug("t=%d: nuvem %.6g vs local %.6g, ε=%.3g, δ=%.3g → %s",
                     t, j_cloud_wc, j_local_wc, eps_meas, delta_t, choice.value)
        return SwitchDecision(t, choice, j_cloud_wc, j_local_wc, float(eps_meas), delta_t, trust_ok, eta_hat)
