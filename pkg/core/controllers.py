#!/usr/bin/env python3
"""
Controladores MPC
MPC da nuvem (uma vez, com incerteza inicial induzida pelo atraso e
restrições apertadas) e MPC local de horizonte decrescente (a cada passo,
com variáveis de gauge e aperto robusto), incluindo a regra de fail-safe
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bounds import (BoundContext, cloud_cost_bound, delta_sequence, local_cost_bound,
                     local_state_bounds, propagate_error)
from .costs import CostSpec, cost_to_go_sequence
from .errors import ConfigurationError, InfeasibleCloudError, NumericError
from .geometry import (ControlBox, PolytopeConstraint, UnitBallPolytope, support_ball,
                       tighten_by_ball)
from .models import AnyModel, Stepper, as_vector, rollout, vector_norm
from .trajopt import (LinearRow, ProgramCache, RowKind, SolveStatus, SolverOptions, TrajOptProblem,
                      TrajOptSolution, evaluate_controls, solve)

logger = logging.getLogger(__name__)


class PredictionMode(Enum):
    """Como a nuvem antecipa o estado ao fim do atraso"""
    HOLD_STATE = "hold_state"
    FORWARD_SIMULATE = "forward_simulate"


class LocalStatus(Enum):
    """Situação de um plano local"""
    FRESH = "fresh"
    FAIL_SAFE_CARRYOVER = "fail_safe_carryover"
    INFEASIBLE = "infeasible"
    RELAXED = "relaxed"


@dataclass(frozen=True, eq=False)
class DelaySpec:
    """
    Atraso requisição-resposta Δt (em passos) e orçamento δ_0.

    `explicit_eps0` tem precedência sobre o δ_0 calculado.
    `injected_error` é o erro ε_0 = x̂_0 − x_0 imposto em experimentos.
    """
    delta_t: int = 0
    prediction_mode: PredictionMode = PredictionMode.HOLD_STATE
    explicit_eps0: Optional[float] = None
    injected_error: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.delta_t) < 0:
            raise ConfigurationError(f"delay.delta_t deve ser ≥ 0, recebido {self.delta_t}")
        object.__setattr__(self, 'delta_t', int(self.delta_t))
        object.__setattr__(self, 'prediction_mode', PredictionMode(self.prediction_mode))
        if self.explicit_eps0 is not None and self.explicit_eps0 < 0:
            raise ConfigurationError("delay.explicit_eps0 deve ser não negativo")
        if self.injected_error is not None:
            object.__setattr__(self, 'injected_error', as_vector(self.injected_error, name="injected_error"))


def predict_initial_state(
    model: AnyModel,
    x_measured: Any,
    delay: DelaySpec,
    assumed_controls: Optional[Sequence[Any]] = None,
    ctx: Optional[BoundContext] = None
) -> Tuple[np.ndarray, float]:
    """
    Estado inicial previsto pela nuvem e orçamento δ_0.

    Args:
        model: Modelo do sistema
        x_measured: Estado medido no instante da requisição
        delay: Especificação do atraso
        assumed_controls: Controles supostos durante o atraso (modo forward_simulate)
        ctx: Constantes de limite (ω = 0 se omitido)

    Returns:
        (x̂_0, δ_0)
    """
    x_measured = as_vector(x_measured, model.n, "estado medido")
    steps = delay.delta_t

    if steps == 0:
        x_hat0 = x_measured.copy()
        delta0 = 0.0
    else:
        if assumed_controls is None:
            if delay.prediction_mode is PredictionMode.FORWARD_SIMULATE:
                raise ConfigurationError("forward_simulate requer os controles supostos durante o atraso")
            assumed_controls = np.zeros((steps, model.m))
        assumed_controls = np.asarray(assumed_controls, dtype=float).reshape(-1, model.m)
        if assumed_controls.shape[0] != steps:
            raise ConfigurationError(
                f"assumed_controls tem {assumed_controls.shape[0]} passos, esperado Δt={steps}"
            )
        nominal = rollout(model, Stepper.CLOUD, x_measured, assumed_controls, t0=-steps)[-1]
        unmodeled = propagate_error(ctx, 0.0, steps) if ctx is not None else 0.0
        if delay.prediction_mode is PredictionMode.FORWARD_SIMULATE:
            x_hat0 = nominal
            delta0 = unmodeled
        else:
            x_hat0 = x_measured.copy()
            delta0 = vector_norm(nominal - x_measured, model.norm_kind) + unmodeled

    if delay.explicit_eps0 is not None:
        delta0 = float(delay.explicit_eps0)
    if delay.injected_error is not None:
        injected = as_vector(delay.injected_error, model.n, "injected_error")
        x_hat0 = x_hat0 + injected
        if vector_norm(injected, model.norm_kind) > delta0:
            logger.warning("Erro injetado ‖ε_0‖ = %.6g excede δ_0 = %.6g",
                           vector_norm(injected, model.norm_kind), delta0)
    return x_hat0, float(delta0)


@dataclass(frozen=True, eq=False)
class CloudPlan:
    """Plano em malha aberta da nuvem com custo-a-ir e limites de erro"""
    controls: np.ndarray
    states: np.ndarray
    cost_to_go: np.ndarray
    deltas: np.ndarray
    eta: np.ndarray
    ctx: BoundContext
    tightened: Tuple[PolytopeConstraint, ...]
    status: SolveStatus
    delta0: float

    @property
    def N(self) -> int:
        return self.controls.shape[0]

    def eta_at(self, eps: float, k: int) -> float:
        """η̂_k avaliado num ε_k arbitrário (p.ex. o erro medido)"""
        return cloud_cost_bound(self.ctx, eps, k)

    def control_at(self, t: int) -> np.ndarray:
        return self.controls[t]

    def tail_controls(self, t: int) -> np.ndarray:
        return self.controls[t:]


def solve_cloud(
    model: AnyModel,
    cost: CostSpec,
    constraints: Sequence[PolytopeConstraint],
    delay: DelaySpec,
    x_hat0: Any,
    delta0: float,
    ctx: BoundContext,
    control_box: Optional[ControlBox] = None,
    options: Optional[SolverOptions] = None,
    warm_controls: Optional[np.ndarray] = None
) -> CloudPlan:
    """
    Resolve o MPC da nuvem com x̂_T ∈ X_T ∼ B_{δ_T} para cada instante restrito.

    Raises:
        InfeasibleCloudError: problema apertado inviável
    """
    deltas = delta_sequence(ctx, delta0, cost.N)
    tightened = tuple(tighten_by_ball(c, deltas[c.T], ctx.norm_kind) for c in constraints)
    for original, tight in zip(constraints, tightened):
        logger.debug("Restrição T=%d apertada por δ_T=%.6g: g=%s", original.T, deltas[original.T], tight.g)

    rows = [
        LinearRow(c.T, RowKind.STATE, G, g, label=f"nuvem T={c.T} linha {j}")
        for c in tightened for j, (G, g) in enumerate(c.rows)
    ]
    problem = TrajOptProblem(
        model=model, stepper=Stepper.CLOUD, cost=cost, x0=as_vector(x_hat0, model.n, "x̂_0"), t0=0,
        rows=tuple(rows), control_box=control_box,
        warm_controls=warm_controls if warm_controls is not None else _linear_seed(
            model, cost, rows, x_hat0, control_box, options),
    )
    solution = _keep_better(problem, solve(problem, options), options)
    if not solution.feasible:
        raise InfeasibleCloudError(
            f"Problema da nuvem inviável com δ_0={delta0:.6g} (violação {solution.violation:.3e})",
            solution.violation,
        )

    J_hat = cost_to_go_sequence(cost, solution.states, solution.controls)
    eta = np.array([cloud_cost_bound(ctx, deltas[k], k) for k in range(cost.N + 1)])
    logger.info("Plano da nuvem: Ĵ_0=%.6g, η̂_0=%.6g, status=%s (Δt=%d)",
                J_hat[0], eta[0], solution.status.value, delay.delta_t)
    return CloudPlan(
        controls=solution.controls, states=solution.states, cost_to_go=J_hat, deltas=deltas, eta=eta,
        ctx=ctx, tightened=tightened, status=solution.status, delta0=float(delta0),
    )


def _linear_seed(model: AnyModel, cost: CostSpec, rows: Sequence[LinearRow], x_hat0: Any,
                 control_box: Optional[ControlBox], options: Optional[SolverOptions]) -> Optional[np.ndarray]:
    """Plano convexo no modelo linear, ponto de partida do SLSQP da nuvem."""
    if cost.structure is None:
        return None
    seed = solve(TrajOptProblem(model=model, stepper=Stepper.LOCAL, cost=cost,
                                x0=as_vector(x_hat0, model.n, "x̂_0"), t0=0, rows=tuple(rows),
                                control_box=control_box), options)
    return seed.controls if seed.feasible else None


def _keep_better(problem: TrajOptProblem, solution: TrajOptSolution,
                 options: Optional[SolverOptions]) -> TrajOptSolution:
    """O SLSQP nunca devolve plano pior que o seu ponto de partida viável."""
    if problem.warm_controls is None:
        return solution
    try:
        start = evaluate_controls(problem, problem.warm_controls, options)
    except NumericError:
        return solution
    if start.feasible and (not solution.feasible or start.objective < solution.objective):
        logger.info("Nuvem: ponto de partida (J=%.6g) melhor que o SLSQP (J=%.6g, %s)",
                    start.objective, solution.objective, solution.status.value)
        return start
    return solution


@dataclass(frozen=True, eq=False)
class LocalPlan:
    """
    Plano local no instante t.

    `gauges` guarda os pares (α, β) efetivos usados em η̄ para l = t..N−1:
    as escalas resolvidas dentro da janela de gauge e as normas de
    x̄, ū fora dela. Planos de carryover ou inviáveis têm J̄ = η̄ = +∞.
    """
    t: int
    status: LocalStatus
    controls: Optional[np.ndarray]
    states: Optional[np.ndarray]
    alphas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    betas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gauges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    J_bar: float = float('inf')
    eta_bar: float = float('inf')
    xi: Dict[int, float] = field(default_factory=dict)
    effective_bounds: Dict[int, np.ndarray] = field(default_factory=dict)
    xi_path: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def has_controls(self) -> bool:
        return self.controls is not None

    @property
    def worst_case(self) -> float:
        """J̄_t + η̄_t"""
        return self.J_bar + self.eta_bar

    @property
    def decision_size(self) -> int:
        return 0 if self.controls is None else self.controls.shape[0]

    def control_at(self, tau: int) -> np.ndarray:
        """ū_{τ|t}"""
        if self.controls is None:
            raise ConfigurationError(f"Plano local de t={self.t} sem controles")
        return self.controls[tau - self.t]

    def tail_controls(self, tau: int) -> np.ndarray:
        """ū_{τ..N−1|t}"""
        if self.controls is None:
            raise ConfigurationError(f"Plano local de t={self.t} sem controles")
        return self.controls[tau - self.t:]


def build_local_rows(
    ctx: BoundContext,
    constraints: Sequence[PolytopeConstraint],
    gauge_poly: UnitBallPolytope,
    t: int
) -> Tuple[List[LinearRow], int]:
    """
    Linhas de gauge (Ḡx̄_τ − α_τḡ ≤ 0, H̄ū_τ − β_τh̄ ≤ 0) e linhas terminais
    apertadas G x̄_T + h_B(G) ξ_{T|t} ≤ g para cada T > t.

    Returns:
        (linhas, número de passos de gauge)
    """
    active = [c for c in constraints if c.T > t]
    if not active:
        return [], 0
    horizon_end = max(c.T for c in active)
    gauge_steps = horizon_end - t
    rows: List[LinearRow] = []

    for tau in range(t, horizon_end):
        for i, (G_i, g_i) in enumerate(zip(gauge_poly.G_bar, gauge_poly.g_bar)):
            rows.append(LinearRow(tau, RowKind.STATE, G_i, 0.0, alpha_terms=((tau, -g_i),),
                                  label=f"gauge x τ={tau} linha {i}"))
        for i, (H_i, h_i) in enumerate(zip(gauge_poly.H_bar, gauge_poly.h_bar)):
            rows.append(LinearRow(tau, RowKind.CONTROL, H_i, 0.0, beta_terms=((tau, -h_i),),
                                  label=f"gauge u τ={tau} linha {i}"))

    for c in active:
        weights = ctx.rate ** np.arange(c.T - t - 1, -1, -1, dtype=float)
        for j, (G, g) in enumerate(c.rows):
            h = support_ball(ctx.norm_kind, G)
            alpha_terms = tuple((t + l, h * weights[l] * ctx.L_f) for l in range(c.T - t) if ctx.L_f > 0)
            beta_terms = tuple((t + l, h * weights[l] * ctx.M_f) for l in range(c.T - t) if ctx.M_f > 0)
            rhs = g - h * ctx.omega * float(np.sum(weights))
            rows.append(LinearRow(c.T, RowKind.STATE, G, rhs, alpha_terms, beta_terms,
                                  label=f"local T={c.T} linha {j}"))
    return rows, gauge_steps


def _effective_gauges(model: AnyModel, solution: TrajOptSolution, gauge_steps: int) -> np.ndarray:
    """Pares (α, β) para l = t..N−1: max(escala resolvida, norma) na janela e norma fora."""
    H = solution.controls.shape[0]
    gauges = np.zeros((H, 2))
    for i in range(H):
        x_norm = vector_norm(solution.states[i], model.norm_kind)
        u_norm = vector_norm(solution.controls[i], model.norm_kind)
        if i < gauge_steps:
            gauges[i] = (max(solution.alphas[i], x_norm), max(solution.betas[i], u_norm))
        else:
            gauges[i] = (x_norm, u_norm)
    return gauges


def _bounds_from_gauges(ctx: BoundContext, constraints: Sequence[PolytopeConstraint], gauges: np.ndarray,
                        t: int) -> Tuple[float, np.ndarray, Dict[int, float], Dict[int, np.ndarray]]:
    """η̄_t, caminho ξ_{·|t} e limites efetivos g − h_B(G)ξ_{T|t}."""
    eta_bar = local_cost_bound(ctx, gauges, t)
    xi_path = local_state_bounds(ctx, gauges, t)
    xi: Dict[int, float] = {}
    effective: Dict[int, np.ndarray] = {}
    for c in constraints:
        if c.T > t:
            xi[c.T] = float(xi_path[c.T - t])
            support = np.array([support_ball(ctx.norm_kind, G) for G in c.G])
            effective[c.T] = c.g - support * xi[c.T]
    return eta_bar, xi_path, xi, effective


def solve_local(
    model: AnyModel,
    cost: CostSpec,
    constraints: Sequence[PolytopeConstraint],
    gauge_poly: UnitBallPolytope,
    t: int,
    x_t: Any,
    previous: Optional[LocalPlan] = None,
    ctx: Optional[BoundContext] = None,
    control_box: Optional[ControlBox] = None,
    options: Optional[SolverOptions] = None,
    cache: Optional[ProgramCache] = None,
    relax_on_failure: bool = False
) -> LocalPlan:
    """
    Resolve o MPC local de horizonte decrescente no instante t.

    Em caso de inviabilidade aplica o fail-safe: mantém a cauda do plano
    anterior com J̄_t = +∞. Sem plano anterior o status é infeasible
    (ou relaxed, sem linhas de estado, quando relax_on_failure).
    """
    if not 0 <= t < cost.N:
        raise ConfigurationError(f"solve_local requer 0 ≤ t < N, recebido t={t}")
    if ctx is None:
        raise ConfigurationError("solve_local requer o BoundContext")
    x_t = as_vector(x_t, model.n, "x_t")
    options = options or SolverOptions()

    rows, gauge_steps = build_local_rows(ctx, constraints, gauge_poly, t)
    warm = previous.tail_controls(t) if previous is not None and previous.has_controls else None
    problem = TrajOptProblem(
        model=model, stepper=Stepper.LOCAL, cost=cost, x0=x_t, t0=t, rows=tuple(rows),
        control_box=control_box, gauge_steps=gauge_steps, gauge_poly=gauge_poly,
        warm_controls=warm, structure_key=('local', t),
    )
    solution = solve(problem, options, cache)

    if solution.feasible:
        return _fresh_plan(model, ctx, constraints, t, solution, gauge_steps, LocalStatus.FRESH)

    if previous is not None and previous.has_controls:
        logger.warning("MPC local inviável em t=%d: fail-safe com a cauda do plano de t=%d", t, previous.t)
        controls = previous.tail_controls(t).copy()
        states = rollout(model, Stepper.LOCAL, x_t, controls, t0=t)
        return LocalPlan(t=t, status=LocalStatus.FAIL_SAFE_CARRYOVER, controls=controls, states=states)

    if relax_on_failure:
        logger.warning("MPC local inviável em t=%d sem plano anterior: resolvendo sem restrições de estado", t)
        relaxed = TrajOptProblem(
            model=model, stepper=Stepper.LOCAL, cost=cost, x0=x_t, t0=t, control_box=control_box,
            structure_key=('relaxed', t),
        )
        solution = solve(relaxed, options, cache)
        if solution.feasible:
            return _fresh_plan(model, ctx, constraints, t, solution, 0, LocalStatus.RELAXED)

    logger.warning("MPC local inviável em t=%d sem plano anterior", t)
    return LocalPlan(t=t, status=LocalStatus.INFEASIBLE, controls=None, states=None)


def _fresh_plan(model: AnyModel, ctx: BoundContext, constraints: Sequence[PolytopeConstraint], t: int,
                solution: TrajOptSolution, gauge_steps: int, status: LocalStatus) -> LocalPlan:
    """Monta o plano com J̄_t, η̄_t e ξ a partir da solução."""
    gauges = _effective_gauges(model, solution, gauge_steps)
    eta_bar, xi_path, xi, effective = _bounds_from_gauges(ctx, constraints, gauges, t)
    logger.debug("MPC local t=%d: J̄=%.6g, η̄=%.6g, ξ=%s", t, solution.objective, eta_bar, xi)
    return LocalPlan(
        t=t, status=status, controls=solution.controls, states=solution.states,
        alphas=solution.alphas, betas=solution.betas, gauges=gauges,
        J_bar=solution.objective, eta_bar=eta_bar, xi=xi, effective_bounds=effective, xi_path=xi_path,
    )
