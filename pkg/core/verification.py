#!/usr/bin/env python3
"""
Verificação de limites e lotes Monte Carlo
Auditoria dos limites de erro de estado e de custo ao longo de cada
cauda contrafactual, execução de lotes semeados e agregação por modo
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .bounds import cloud_state_bound
from .errors import BoundViolationError, ConfigurationError
from .experiment_config import ExperimentConfig, SimMode
from .models import vector_norm
from .simulation import (ClosedLoopSimulator, Counterfactuals, MetricsReport, SimTrace, counterfactual_costs,
                         metrics)

logger = logging.getLogger(__name__)


class AuditConstants:
    """Tolerância relativa das auditorias: medido ≤ limite + tol·(1 + limite)."""
    RELATIVE_TOL = 1e-6
    KINDS = ('cloud_state', 'cloud_cost', 'local_state', 'local_cost')


@dataclass(frozen=True)
class BoundViolation:
    """Uma desigualdade violada"""
    kind: str
    seed: int
    step: int
    tau: int
    measured: float
    bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, 'seed': self.seed, 'step': self.step, 'tau': self.tau,
                'measured': self.measured, 'bound': self.bound}


@dataclass
class BoundAudit:
    """Resultado da auditoria: violações e pior razão medido/limite por tipo"""
    checks: int = 0
    diverged: int = 0
    violations: List[BoundViolation] = field(default_factory=list)
    worst_ratio: Dict[str, float] = field(default_factory=lambda: {kind: 0.0 for kind in AuditConstants.KINDS})

    @property
    def ok(self) -> bool:
        return not self.violations

    def _check(self, kind: str, seed: int, step: int, tau: int, measured: float, bound: float) -> None:
        self.checks += 1
        if bound > 0:
            self.worst_ratio[kind] = max(self.worst_ratio[kind], measured / bound)
        elif measured > 0:
            self.worst_ratio[kind] = float('inf')
        if measured > bound + AuditConstants.RELATIVE_TOL * (1.0 + bound):
            self.violations.append(BoundViolation(kind, seed, step, tau, float(measured), float(bound)))

    def merge(self, other: 'BoundAudit') -> None:
        self.checks += other.checks
        self.diverged += other.diverged
        self.violations.extend(other.violations)
        for kind, ratio in other.worst_ratio.items():
            self.worst_ratio[kind] = max(self.worst_ratio.get(kind, 0.0), ratio)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'checks': self.checks,
            'diverged': self.diverged,
            'violations': [violation.to_dict() for violation in self.violations],
            'worst_ratio': dict(self.worst_ratio),
        }


def audit_bounds(trace: SimTrace, config: ExperimentConfig,
                 counterfactuals: Optional[Counterfactuals] = None) -> BoundAudit:
    """
    Confere, em cada t, os limites da nuvem avaliados no ε_t medido e os
    limites ξ_{τ|t}, η̄_t do plano local contra as trajetórias contrafactuais.

    Planos de carryover e inviáveis não têm limites e são ignorados. Caudas
    cujo contrafactual divergiu saíram da caixa de validade de L_f/M_f: são
    contadas em `diverged` e não auditadas.
    """
    if counterfactuals is None:
        counterfactuals = counterfactual_costs(trace, config)
    audit = BoundAudit()
    kind = config.model.norm_kind
    ctx = config.ctx
    cloud = trace.cloud_plan
    N = trace.N

    for t in range(N):
        x_t = trace.states[t]
        if cloud is not None:
            eps = vector_norm(cloud.states[t] - x_t, kind)
            path = counterfactuals.cloud_paths[t]
            if _diverged(path):
                audit.diverged += 1
            else:
                for tau in range(t + 1, N + 1):
                    audit._check('cloud_state', trace.seed, t, tau,
                                 vector_norm(cloud.states[tau] - path[tau - t], kind),
                                 cloud_state_bound(ctx, eps, t, tau))
                audit._check('cloud_cost', trace.seed, t, N,
                             abs(cloud.cost_to_go[t] - counterfactuals.J_c[t]), cloud.eta_at(eps, t))

        plan = trace.local_plans.get(t)
        if plan is None or not np.isfinite(plan.J_bar):
            continue
        path = counterfactuals.local_paths[t]
        if _diverged(path):
            audit.diverged += 1
            continue
        for tau in range(t + 1, N + 1):
            audit._check('local_state', trace.seed, t, tau,
                         vector_norm(plan.states[tau - t] - path[tau - t], kind), float(plan.xi_path[tau - t]))
        audit._check('local_cost', trace.seed, t, N, abs(plan.J_bar - counterfactuals.J_l[t]), plan.eta_bar)

    if audit.diverged:
        logger.warning("Semente %d: %d cauda(s) contrafactual(is) divergente(s) fora da auditoria",
                       trace.seed, audit.diverged)
    return audit


def _diverged(path: np.ndarray) -> bool:
    return not np.all(np.isfinite(path))


@dataclass
class BatchResult:
    """Métricas por semente e agregados por modo"""
    runs: List[MetricsReport] = field(default_factory=list)
    audit: BoundAudit = field(default_factory=BoundAudit)

    def by_mode(self) -> Dict[str, List[MetricsReport]]:
        grouped: Dict[str, List[MetricsReport]] = {}
        for report in self.runs:
            grouped.setdefault(report.mode, []).append(report)
        return grouped

    def aggregates(self) -> Dict[str, Dict[str, Any]]:
        """Média, desvio, mínimo e máximo das métricas numéricas por modo."""
        result: Dict[str, Dict[str, Any]] = {}
        for mode, reports in self.by_mode().items():
            summary: Dict[str, Any] = {'runs': len(reports),
                                       'terminal_ok_rate': float(np.mean([r.terminal_ok for r in reports]))}
            thresholds = [r.threshold_ok for r in reports if r.threshold_ok is not None]
            if thresholds:
                summary['threshold_ok_rate'] = float(np.mean(thresholds))
            summary['box_exit_runs'] = sum(1 for r in reports if r.box_exits)
            for name in ('mre', 'total_cost', 'terminal_norm', 'rms_position_error', 'switch_match', 'cloud_share'):
                values = [getattr(r, name) for r in reports if getattr(r, name) is not None]
                if values:
                    summary[name] = {'mean': float(np.mean(values)), 'std': float(np.std(values)),
                                     'min': float(np.min(values)), 'max': float(np.max(values))}
            result[mode] = summary
        return result

    def to_dict(self) -> Dict[str, Any]:
        return {
            'runs': [report.to_dict() for report in self.runs],
            'aggregates': self.aggregates(),
            'audit': self.audit.to_dict(),
        }


def run_batch(
    config: ExperimentConfig,
    seeds: Sequence[int],
    modes: Sequence[Any] = (SimMode.FUSED,),
    audit: bool = False,
    progress: Optional[Callable[[float, str], None]] = None,
    on_trace: Optional[Callable[[SimTrace, MetricsReport], None]] = None
) -> BatchResult:
    """
    Executa cada modo para cada semente com um único simulador (caches
    compartilhados entre sementes).
    """
    simulator = ClosedLoopSimulator(config)
    result = BatchResult()
    modes = [SimMode.parse(mode) for mode in modes]
    total = max(1, len(seeds) * len(modes))
    done = 0
    for mode in modes:
        for seed in seeds:
            trace = simulator.run(seed, mode)
            counterfactuals = counterfactual_costs(trace, config)
            report = metrics(trace, config, counterfactuals)
            result.runs.append(report)
            if audit:
                result.audit.merge(audit_bounds(trace, config, counterfactuals))
            if on_trace is not None:
                on_trace(trace, report)
            done += 1
            if progress is not None:
                progress(100.0 * done / total, f"{mode.value} semente {seed}")
    return result


def verify_bounds(config: ExperimentConfig, trials: int, start_seed: int = 0,
                  raise_on_violation: bool = False) -> BoundAudit:
    """
    Auditoria Monte Carlo no modo fused sobre `trials` sementes consecutivas.

    trials = 0 passa trivialmente com aviso.

    Raises:
        BoundViolationError: na primeira violação, se raise_on_violation
    """
    if trials < 0:
        raise ConfigurationError(f"trials deve ser ≥ 0, recebido {trials}")
    if trials == 0:
        logger.warning("verify_bounds com 0 tentativas: aprovação vazia")
        return BoundAudit()

    simulator = ClosedLoopSimulator(config)
    total = BoundAudit()
    for seed in range(start_seed, start_seed + trials):
        trace = simulator.run(seed, SimMode.FUSED)
        audit = audit_bounds(trace, config)
        total.merge(audit)
        if audit.violations and raise_on_violation:
            first = audit.violations[0]
            raise BoundViolationError(
                f"Limite {first.kind} violado: {first.measured:.6g} > {first.bound:.6g} "
                f"(semente {first.seed}, passo {first.step}, τ={first.tau})",
                seed=first.seed, step=first.step,
            )
    logger.info("Auditoria: %d verificações, %d violações", total.checks, len(total.violations))
    return total
