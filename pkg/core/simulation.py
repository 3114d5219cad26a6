#!/usr/bin/env python3
"""
Simulador em malha fechada
Executa os modos fused / cloud / local sobre a planta real com perturbações
semeadas, registra o traço completo e calcula custos contrafactuais e métricas
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .controllers import CloudPlan, LocalPlan, LocalStatus, predict_initial_state, solve_cloud, solve_local
from .costs import cost_to_go, total_cost
from .errors import DimensionError, NumericError
from .experiment_config import ExperimentConfig, SimMode
from .fusion import Choice, SwitchDecision, optimal_switch_oracle
from .models import AnyModel, Stepper, rollout, step_true, vector_norm
from .trajopt import ProgramCache

logger = logging.getLogger(__name__)


class SimulationConstants:
    """Constantes do simulador."""
    CLOUD_PROGRESS = 10
    LOOP_PROGRESS = 90
    COMPLETE_PROGRESS = 100
    POSITION_COMPONENTS = 2


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Linha do traço no instante t"""
    t: int
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    choice: str
    x_hat: Optional[np.ndarray]
    j_hat: float
    eta_hat: float
    j_bar: float
    eta_bar: float
    eps_meas: float
    delta_t: float
    trust_ok: bool
    local_status: str
    cost_sign: int

    def to_row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {'t': self.t}
        row.update({f'x{i}': float(v) for i, v in enumerate(self.x)})
        row.update({f'u{j}': float(v) for j, v in enumerate(self.u)})
        row.update({f'w{i}': float(v) for i, v in enumerate(self.w)})
        if self.x_hat is not None:
            row.update({f'x_hat{i}': float(v) for i, v in enumerate(self.x_hat)})
        row.update({
            'choice': self.choice, 'j_hat': self.j_hat, 'eta_hat': self.eta_hat,
            'j_bar': self.j_bar, 'eta_bar': self.eta_bar, 'eps_meas': self.eps_meas,
            'delta_t': self.delta_t, 'trust_ok': int(self.trust_ok), 'local_status': self.local_status,
            'cost_sign': self.cost_sign,
        })
        return row


@dataclass(eq=False)
class SimTrace:
    """
    Traço de uma execução: estados, controles aplicados, perturbações
    realizadas (inclusive as do atraso) e os planos usados a cada passo.
    """
    config_name: str
    mode: SimMode
    seed: int
    x_request: np.ndarray
    pre_controls: np.ndarray
    pre_disturbances: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    disturbances: np.ndarray
    records: List[StepRecord]
    cloud_plan: Optional[CloudPlan] = None
    local_plans: Dict[int, LocalPlan] = field(default_factory=dict)
    decisions: List[SwitchDecision] = field(default_factory=list)
    terminal_flags: Dict[int, bool] = field(default_factory=dict)
    terminal_violations: Dict[int, float] = field(default_factory=dict)
    box_exits: List[int] = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.controls.shape[0]

    @property
    def x_N(self) -> np.ndarray:
        return self.states[-1]

    @property
    def constraints_satisfied(self) -> bool:
        return all(self.terminal_flags.values())

    @property
    def choices(self) -> List[str]:
        return [record.choice for record in self.records]

    def replay(self, model: AnyModel) -> np.ndarray:
        """Reintegra controles e perturbações registrados desde o estado da requisição."""
        x0 = self.x_request
        if self.pre_controls.shape[0]:
            x0 = rollout(model, Stepper.TRUE, x0, self.pre_controls, self.pre_disturbances,
                         t0=-self.pre_controls.shape[0])[-1]
        return rollout(model, Stepper.TRUE, x0, self.controls, self.disturbances, t0=0)

    def to_rows(self) -> List[Dict[str, Any]]:
        """Linhas do CSV do traço, incluindo a linha terminal t = N."""
        rows = [record.to_row() for record in self.records]
        terminal: Dict[str, Any] = {'t': self.N}
        terminal.update({f'x{i}': float(v) for i, v in enumerate(self.x_N)})
        terminal['terminal_ok'] = int(self.constraints_satisfied)
        rows.append(terminal)
        return rows


@dataclass(frozen=True, eq=False)
class Counterfactuals:
    """
    J^c_t e J^l_t: custos reais ao aplicar a cauda da nuvem (ou do plano
    local de t) a partir do x_t registrado com as mesmas perturbações.
    """
    J_c: np.ndarray
    J_l: np.ndarray
    cloud_paths: Dict[int, np.ndarray]
    local_paths: Dict[int, np.ndarray]

    def oracle_choices(self) -> List[Choice]:
        return [optimal_switch_oracle(float(jl), float(jc)) for jl, jc in zip(self.J_l[:-1], self.J_c[:-1])]

    @property
    def diverged(self) -> int:
        """Caudas cuja reaplicação divergiu (custo +∞, caminho NaN)"""
        paths = list(self.cloud_paths.values()) + list(self.local_paths.values())
        return sum(1 for path in paths if not np.all(np.isfinite(path)))


@dataclass(frozen=True)
class MetricsReport:
    """Métricas de uma execução"""
    mode: str
    seed: int
    mre: float
    total_cost: float
    terminal_ok: bool
    terminal_norm: float
    rms_position_error: float
    switch_match: Optional[float]
    cloud_share: Optional[float]
    local_status_counts: Dict[str, int]
    threshold_ok: Optional[bool] = None
    box_exits: int = 0
    diverged_counterfactuals: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mode': self.mode, 'seed': self.seed, 'mre': self.mre, 'total_cost': self.total_cost,
            'terminal_ok': self.terminal_ok, 'terminal_norm': self.terminal_norm,
            'threshold_ok': self.threshold_ok,
            'rms_position_error': self.rms_position_error, 'switch_match': self.switch_match,
            'cloud_share': self.cloud_share, 'local_status_counts': dict(self.local_status_counts),
            'box_exits': self.box_exits, 'diverged_counterfactuals': self.diverged_counterfactuals,
        }


class ClosedLoopSimulator:
    """
    Simulador de um experimento.

    Mantém caches próprios: o plano da nuvem por (x̂_0, δ_0) e os programas
    cvxpy do MPC local por instante. Não compartilhar entre threads.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.progress_callback: Optional[Callable[[float, str], None]] = None
        self._program_cache = ProgramCache()
        self._cloud_cache: Dict[Tuple[bytes, float], CloudPlan] = {}

    def set_progress_callback(self, callback: Callable[[float, str], None]):
        """Define callback para atualização de progresso"""
        self.progress_callback = callback

    def _update_progress(self, value: float, message: str = ""):
        """Atualiza progresso se callback estiver definido"""
        if self.progress_callback:
            self.progress_callback(value, message)

    def cloud_plan(self, x_hat0: np.ndarray, delta0: float) -> CloudPlan:
        """Plano da nuvem, reaproveitado entre sementes com o mesmo (x̂_0, δ_0)."""
        key = (np.asarray(x_hat0, dtype=float).tobytes(), float(delta0))
        plan = self._cloud_cache.get(key)
        if plan is None:
            cfg = self.config
            plan = solve_cloud(cfg.model, cfg.cost, cfg.constraints, cfg.delay, x_hat0, delta0, cfg.ctx,
                               cfg.control_box, cfg.solver)
            self._cloud_cache[key] = plan
        return plan

    def _draw_disturbances(self, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """Realização completa: primeiro o atraso, depois os N passos."""
        sampler = self.config.disturbance.sampler(seed)
        pre = sampler.sample_sequence(self.config.delay.delta_t)
        main = sampler.sample_sequence(self.config.N)
        return pre.reshape(-1, self.config.model.n), main

    def _local_plan(self, t: int, x_t: np.ndarray, previous: Optional[LocalPlan], relax: bool) -> LocalPlan:
        cfg = self.config
        return solve_local(cfg.model, cfg.cost, cfg.constraints, cfg.gauge_poly, t, x_t, previous, cfg.ctx,
                           cfg.control_box, cfg.solver, self._program_cache, relax_on_failure=relax)

    def run(self, seed: int = 0, mode: Optional[Any] = None) -> SimTrace:
        """
        Executa uma realização em malha fechada.

        Args:
            seed: Semente das perturbações
            mode: fused, cloud ou local (padrão: o do experimento)

        Returns:
            SimTrace completo

        Raises:
            InfeasibleCloudError: nuvem inviável em t = 0 (modos fused e cloud)
            NumericError: estado não finito
        """
        cfg = self.config
        mode = SimMode.parse(mode) if mode is not None else cfg.mode
        model, N = cfg.model, cfg.N
        self._update_progress(0, f"Iniciando {mode.value} (semente {seed})...")

        pre_w, ws = self._draw_disturbances(seed)
        steps = cfg.delay.delta_t
        pre_u = np.zeros((steps, model.m))
        x0 = cfg.x0.copy()
        if steps:
            x0 = rollout(model, Stepper.TRUE, cfg.x0, pre_u, pre_w, t0=-steps)[-1]

        cloud: Optional[CloudPlan] = None
        if mode is not SimMode.LOCAL_ONLY:
            x_hat0, delta0 = predict_initial_state(model, cfg.x0, cfg.delay, pre_u if steps else None, cfg.ctx)
            cloud = self.cloud_plan(x_hat0, delta0)
        self._update_progress(SimulationConstants.CLOUD_PROGRESS, "Plano da nuvem pronto")

        states = [x0]
        controls: List[np.ndarray] = []
        records: List[StepRecord] = []
        local_plans: Dict[int, LocalPlan] = {}
        decisions: List[SwitchDecision] = []
        previous: Optional[LocalPlan] = None
        box_exits: List[int] = []

        for t in range(N):
            x_t = states[-1]
            local: Optional[LocalPlan] = None
            if mode is not SimMode.CLOUD_ONLY:
                relax = mode is SimMode.LOCAL_ONLY and cfg.relax_local_on_failure
                local = self._local_plan(t, x_t, previous, relax)
                local_plans[t] = local
                if local.has_controls:
                    previous = local

            x_hat = cloud.states[t] if cloud is not None else None
            eps = vector_norm(x_hat - x_t, model.norm_kind) if x_hat is not None else float('nan')
            decision = cloud is not None and local is not None
            if decision:
                switch = cfg.fusion.decide(t, cloud, local, eps)
                decisions.append(switch)
                choice = switch.choice
            else:
                switch = None
                choice = Choice.CLOUD if mode is SimMode.CLOUD_ONLY else Choice.LOCAL

            u = self._applied_control(t, choice, cloud, local)
            records.append(self._record(t, x_t, u, ws[t], choice, cloud, local, eps, switch))
            if not model.stage(t).check_box.contains(x_t, u, tol=cfg.solver.feasibility_tol):
                box_exits.append(t)
            nxt = step_true(model, x_t, u, ws[t], t)
            if not np.all(np.isfinite(nxt)):
                raise NumericError(f"Estado não finito em t={t + 1} (semente {seed}): {nxt}")
            controls.append(u)
            states.append(nxt)
            self._update_progress(
                SimulationConstants.CLOUD_PROGRESS + SimulationConstants.LOOP_PROGRESS * (t + 1) / N,
                f"Passo {t + 1}/{N}"
            )

        trace = SimTrace(
            config_name=cfg.name, mode=mode, seed=seed, x_request=cfg.x0.copy(), pre_controls=pre_u,
            pre_disturbances=pre_w, states=np.vstack(states), controls=np.vstack(controls), disturbances=ws,
            records=records, cloud_plan=cloud, local_plans=local_plans, decisions=decisions,
            box_exits=box_exits,
        )
        if box_exits:
            logger.warning("(x_t, u_t) fora da caixa de validade de L_f/M_f em %d passo(s) (primeiro t=%d), "
                           "modo %s, semente %d: limites não garantidos", len(box_exits), box_exits[0],
                           mode.value, seed)
        tol = cfg.solver.feasibility_tol
        for constraint in cfg.constraints:
            violation = constraint.max_violation(trace.states[constraint.T])
            trace.terminal_violations[constraint.T] = violation
            trace.terminal_flags[constraint.T] = violation <= tol
            if violation > tol:
                logger.warning("Restrição em T=%d violada (%.3e) no modo %s, semente %d",
                               constraint.T, violation, mode.value, seed)
        self._update_progress(SimulationConstants.COMPLETE_PROGRESS, "Simulação concluída")
        return trace

    def _applied_control(self, t: int, choice: Choice, cloud: Optional[CloudPlan],
                         local: Optional[LocalPlan]) -> np.ndarray:
        if choice is Choice.CLOUD and cloud is not None:
            return cloud.control_at(t).copy()
        if local is not None and local.has_controls:
            return local.control_at(t).copy()
        logger.warning("t=%d: nenhum plano disponível, aplicando controle nulo", t)
        u = np.zeros(self.config.model.m)
        return self.config.control_box.clip(u) if self.config.control_box is not None else u

    @staticmethod
    def _record(t: int, x_t: np.ndarray, u: np.ndarray, w: np.ndarray, choice: Choice,
                cloud: Optional[CloudPlan], local: Optional[LocalPlan], eps: float,
                switch: Optional[SwitchDecision]) -> StepRecord:
        nan = float('nan')
        if switch is not None:
            j_hat, eta_hat = float(cloud.cost_to_go[t]), switch.eta_hat
            delta_t, trust_ok, sign = switch.delta_t, switch.trust_ok, switch.cost_sign
        elif cloud is not None:
            j_hat, eta_hat = float(cloud.cost_to_go[t]), float(cloud.eta[t])
            delta_t = float(cloud.deltas[t])
            trust_ok, sign = eps <= delta_t, 0
        else:
            j_hat = eta_hat = delta_t = nan
            trust_ok, sign = False, 0
        return StepRecord(
            t=t, x=x_t.copy(), u=u, w=np.asarray(w, dtype=float).copy(), choice=choice.value,
            x_hat=cloud.states[t].copy() if cloud is not None else None,
            j_hat=j_hat, eta_hat=eta_hat,
            j_bar=local.J_bar if local is not None else nan,
            eta_bar=local.eta_bar if local is not None else nan,
            eps_meas=eps, delta_t=delta_t, trust_ok=trust_ok,
            local_status=local.status.value if local is not None else "", cost_sign=sign,
        )


def run_closed_loop(config: ExperimentConfig, mode: Optional[Any] = None, seed: int = 0) -> SimTrace:
    """Executa uma realização com um simulador descartável."""
    return ClosedLoopSimulator(config).run(seed, mode)


def _true_tail_cost(config: ExperimentConfig, trace: SimTrace, t: int,
                    tail: np.ndarray) -> Tuple[float, np.ndarray]:
    """Custo real da cauda; trajetória divergente vale +∞ com caminho NaN."""
    try:
        path = rollout(config.model, Stepper.TRUE, trace.states[t], tail, trace.disturbances[t:], t0=t)
    except NumericError as e:
        logger.warning("Contrafactual divergente em t=%d (semente %d): %s", t, trace.seed, e)
        return float('inf'), np.full((tail.shape[0] + 1, trace.states.shape[1]), np.nan)
    return cost_to_go(config.cost, path, tail, k=t), path


def counterfactual_costs(trace: SimTrace, config: ExperimentConfig) -> Counterfactuals:
    """
    Reaplica a cauda do plano da nuvem e de cada plano local a partir do
    estado registrado em t, com a mesma cauda de perturbações.

    Planos locais ausentes ou sem controles dão J^l_t = +∞; sem plano da
    nuvem J^c_t = +∞. Em t = N ambos valem ψ(x_N).
    """
    N = trace.N
    if trace.disturbances.shape[0] != N:
        raise DimensionError("Traço sem a realização completa das perturbações")
    J_c = np.full(N + 1, np.inf)
    J_l = np.full(N + 1, np.inf)
    cloud_paths: Dict[int, np.ndarray] = {}
    local_paths: Dict[int, np.ndarray] = {}

    for t in range(N):
        if trace.cloud_plan is not None:
            J_c[t], cloud_paths[t] = _true_tail_cost(config, trace, t, trace.cloud_plan.tail_controls(t))
        plan = trace.local_plans.get(t)
        if plan is not None and plan.has_controls:
            J_l[t], local_paths[t] = _true_tail_cost(config, trace, t, plan.tail_controls(t))

    terminal = config.cost.terminal_cost(trace.x_N)
    J_c[N] = terminal
    J_l[N] = terminal
    return Counterfactuals(J_c=J_c, J_l=J_l, cloud_paths=cloud_paths, local_paths=local_paths)


def metrics(trace: SimTrace, config: ExperimentConfig,
            counterfactuals: Optional[Counterfactuals] = None) -> MetricsReport:
    """
    MRE = média de ‖x_t‖ em t = 0..N, custo real total, restrições
    terminais, ‖x_N‖, erro RMS das duas primeiras componentes (posição)
    e, no modo fused, a concordância com o oráculo de chaveamento. Com
    `terminal_threshold` configurado, informa se ‖x_N‖ ficou abaixo dele.
    """
    kind = config.model.norm_kind
    norms = np.array([vector_norm(x, kind) for x in trace.states])
    positions = trace.states[:, :min(SimulationConstants.POSITION_COMPONENTS, trace.states.shape[1])]
    rms = float(np.sqrt(np.mean(np.sum(positions ** 2, axis=1))))

    switch_match = None
    cloud_share = None
    if trace.decisions:
        if counterfactuals is None:
            counterfactuals = counterfactual_costs(trace, config)
        oracle = counterfactuals.oracle_choices()
        hits = [decision.choice is oracle[decision.t] for decision in trace.decisions]
        switch_match = float(np.mean(hits))
        cloud_share = float(np.mean([decision.choice is Choice.CLOUD for decision in trace.decisions]))

    counts: Dict[str, int] = {}
    for plan in trace.local_plans.values():
        counts[plan.status.value] = counts.get(plan.status.value, 0) + 1

    threshold = config.terminal_threshold
    threshold_ok = bool(norms[-1] <= threshold) if threshold is not None else None

    return MetricsReport(
        mode=trace.mode.value, seed=trace.seed, mre=float(np.mean(norms)),
        total_cost=total_cost(config.cost, trace.states, trace.controls),
        terminal_ok=trace.constraints_satisfied, terminal_norm=float(norms[-1]),
        rms_position_error=rms, switch_match=switch_match, cloud_share=cloud_share,
        local_status_counts=counts, threshold_ok=threshold_ok, box_exits=len(trace.box_exits),
        diverged_counterfactuals=counterfactuals.diverged if counterfactuals is not None else 0,
    )


def fail_safe_steps(trace: SimTrace) -> List[int]:
    """Instantes em que o MPC local recorreu ao plano anterior"""
    return [t for t, plan in sorted(trace.local_plans.items()) if plan.status is LocalStatus.FAIL_SAFE_CARRYOVER]
