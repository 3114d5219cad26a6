#!/usr/bin/env python3
"""
Otimização de trajetória
Contrato comum dos dois MPCs: minimizar o custo-a-ir sobre a sequência
de controles (single shooting) com restrições lineares em estados,
controles e variáveis auxiliares de escala (α, β)

Dois backends:
- convexo (cvxpy) para o modelo local com custo em normas ponderadas
- single shooting com SLSQP (scipy) para o modelo não linear da nuvem
"""

import logging
from dataclasses import dataclass, fields
from enum import Enum
from typing import Any, Dict, Hashable, List, Optional, Tuple

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from .costs import CostSpec, cost_to_go
from .errors import ConfigurationError, DimensionError, NumericError
from .geometry import ControlBox, GaugeSide, UnitBallPolytope, minimal_gauge
from .models import AnyModel, Stepper, as_vector, finite_difference_jacobians, rollout

logger = logging.getLogger(__name__)


class SolveStatus(Enum):
    """Resultado de uma chamada a solve"""
    OPTIMAL = "optimal"
    FEASIBLE_SUBOPTIMAL = "feasible_suboptimal"
    INFEASIBLE = "infeasible"


class RowKind(Enum):
    """Variável restringida por uma linha"""
    STATE = "state"
    CONTROL = "control"


@dataclass(frozen=True, eq=False)
class LinearRow:
    """
    Linha c·x_τ (ou c·u_τ) + Σ a_l α_l + Σ b_l β_l ≤ rhs.

    `alpha_terms` e `beta_terms` são pares (instante l, coeficiente).
    """
    time: int
    kind: RowKind
    coeffs: np.ndarray
    rhs: float
    alpha_terms: Tuple[Tuple[int, float], ...] = ()
    beta_terms: Tuple[Tuple[int, float], ...] = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, 'kind', RowKind(self.kind))
        object.__setattr__(self, 'coeffs', as_vector(self.coeffs, name="coeficientes"))
        object.__setattr__(self, 'rhs', float(self.rhs))
        object.__setattr__(self, 'alpha_terms', tuple((int(l), float(c)) for l, c in self.alpha_terms))
        object.__setattr__(self, 'beta_terms', tuple((int(l), float(c)) for l, c in self.beta_terms))


@dataclass
class SolverOptions:
    """Tolerâncias e limites dos otimizadores"""
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iter: int = 5000
    gauge_weight: float = 1e-6
    warm_start: bool = True
    convex_backend: bool = True
    cvxpy_solver: Optional[str] = None

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ConfigurationError("Tolerâncias do solver devem ser positivas")
        if int(self.max_iter) < 1:
            raise ConfigurationError("solver.max_iter deve ser ≥ 1")
        if self.gauge_weight < 0:
            raise ConfigurationError("solver.gauge_weight deve ser não negativo")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SolverOptions':
        known = {f.name for f in fields(cls)}
        return cls(**{key: value for key, value in data.items() if key in known})

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class TrajOptProblem:
    """
    Problema sobre a janela [t0, N].

    Variáveis de decisão: u_{t0..N−1} e, se gauge_steps > 0, escalas
    α_τ, β_τ para τ = t0..t0+gauge_steps−1.
    """
    model: AnyModel
    stepper: Stepper
    cost: CostSpec
    x0: np.ndarray
    t0: int = 0
    rows: Tuple[LinearRow, ...] = ()
    control_box: Optional[ControlBox] = None
    gauge_steps: int = 0
    gauge_poly: Optional[UnitBallPolytope] = None
    warm_controls: Optional[np.ndarray] = None
    structure_key: Optional[Hashable] = None

    def __post_init__(self):
        object.__setattr__(self, 'stepper', Stepper(self.stepper))
        if self.stepper is Stepper.TRUE:
            raise ConfigurationError("Otimização usa o modelo da nuvem ou o local, nunca a planta real")
        object.__setattr__(self, 'x0', as_vector(self.x0, self.model.n, "estado inicial"))
        object.__setattr__(self, 'rows', tuple(self.rows))
        if self.horizon < 1:
            raise ConfigurationError(f"Janela vazia: t0={self.t0}, N={self.N}")
        if self.gauge_steps < 0 or self.gauge_steps > self.horizon:
            raise ConfigurationError(f"gauge_steps={self.gauge_steps} fora da janela")
        if self.control_box is not None and self.control_box.m != self.model.m:
            raise DimensionError("Limites de controle com dimensão diferente de m")
        self._validate_rows()

    def _validate_rows(self) -> None:
        """Linhas só referenciam instantes dentro da janela."""
        for row in self.rows:
            if row.kind is RowKind.STATE:
                valid = self.t0 <= row.time <= self.N
                dim = self.model.n
            else:
                valid = self.t0 <= row.time < self.N
                dim = self.model.m
            if not valid:
                raise ConfigurationError(f"Linha '{row.label}' referencia instante {row.time} fora da janela")
            if row.coeffs.size != dim:
                raise DimensionError(f"Linha '{row.label}' com {row.coeffs.size} coeficientes, esperado {dim}")
            for l, _ in row.alpha_terms + row.beta_terms:
                if not self.t0 <= l < self.t0 + self.gauge_steps:
                    raise ConfigurationError(f"Linha '{row.label}' referencia escala no instante {l} inexistente")

    @property
    def N(self) -> int:
        return self.cost.N

    @property
    def horizon(self) -> int:
        return self.N - self.t0

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def m(self) -> int:
        return self.model.m


@dataclass(frozen=True, eq=False)
class TrajOptSolution:
    """Solução imutável; estados sempre recalculados pelo modelo a partir de x0"""
    status: SolveStatus
    controls: np.ndarray
    states: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    objective: float
    violation: float
    iterations: int = 0
    backend: str = ""
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is not SolveStatus.INFEASIBLE


def row_violation(problem: TrajOptProblem, controls: np.ndarray, alphas: np.ndarray, betas: np.ndarray,
                  states: Optional[np.ndarray] = None) -> float:
    """
    Avaliador independente: maior violação entre linhas, limites de
    controle e não negatividade das escalas (0 se tudo é satisfeito).
    """
    controls = np.asarray(controls, dtype=float).reshape(problem.horizon, problem.m)
    if states is None:
        states = rollout(problem.model, problem.stepper, problem.x0, controls, t0=problem.t0)
    worst = 0.0
    for row in problem.rows:
        index = row.time - problem.t0
        vector = states[index] if row.kind is RowKind.STATE else controls[index]
        lhs = float(row.coeffs @ vector)
        lhs += sum(c * alphas[l - problem.t0] for l, c in row.alpha_terms)
        lhs += sum(c * betas[l - problem.t0] for l, c in row.beta_terms)
        worst = max(worst, lhs - row.rhs)
    if problem.control_box is not None:
        for u in controls:
            worst = max(worst, problem.control_box.violation(u))
    if len(alphas):
        worst = max(worst, float(-np.min(alphas)), float(-np.min(betas)))
    return float(worst)


def _finish(problem: TrajOptProblem, opts: SolverOptions, controls: np.ndarray, alphas: np.ndarray,
            betas: np.ndarray, status: SolveStatus, iterations: int, backend: str, message: str) -> TrajOptSolution:
    """Recalcula estados, custo e violação de forma independente."""
    controls = np.asarray(controls, dtype=float).reshape(problem.horizon, problem.m)
    if problem.control_box is not None:
        controls = np.vstack([problem.control_box.clip(u) for u in controls])
    alphas = np.maximum(np.asarray(alphas, dtype=float), 0.0)
    betas = np.maximum(np.asarray(betas, dtype=float), 0.0)
    states = rollout(problem.model, problem.stepper, problem.x0, controls, t0=problem.t0)
    objective = cost_to_go(problem.cost, states, controls, k=problem.t0)
    violation = row_violation(problem, controls, alphas, betas, states)
    if status is not SolveStatus.INFEASIBLE and violation > opts.feasibility_tol:
        status = SolveStatus.INFEASIBLE
        message = f"{message}; violação residual {violation:.3e}"
    return TrajOptSolution(status, controls, states, alphas, betas, objective, violation, iterations, backend, message)


def evaluate_controls(problem: TrajOptProblem, controls: Any,
                      opts: Optional[SolverOptions] = None) -> TrajOptSolution:
    """
    Avalia uma sequência de controles fixa no modelo do problema, sem otimizar.

    As escalas ficam nulas: serve para problemas sem gauge (gauge_steps = 0).

    Raises:
        NumericError: trajetória não finita
    """
    if problem.gauge_steps:
        raise ConfigurationError("evaluate_controls não avalia problemas com escalas de gauge")
    empty = np.zeros(0)
    return _finish(problem, opts or SolverOptions(), controls, empty, empty, SolveStatus.FEASIBLE_SUBOPTIMAL,
                   0, "fixed", "controles fornecidos")


def _warm_start(problem: TrajOptProblem, opts: SolverOptions) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Controles de partida (cauda anterior ou zeros) e escalas mínimas correspondentes."""
    controls = np.zeros((problem.horizon, problem.m))
    if opts.warm_start and problem.warm_controls is not None:
        warm = np.asarray(problem.warm_controls, dtype=float).reshape(-1, problem.m)
        count = min(warm.shape[0], problem.horizon)
        controls[:count] = warm[:count]
    if problem.control_box is not None:
        controls = np.vstack([problem.control_box.clip(u) for u in controls])

    K = problem.gauge_steps
    alphas = np.zeros(K)
    betas = np.zeros(K)
    if K and problem.gauge_poly is not None:
        states = rollout(problem.model, problem.stepper, problem.x0, controls, t0=problem.t0)
        for i in range(K):
            alphas[i] = minimal_gauge(problem.gauge_poly, GaugeSide.STATE, states[i])
            betas[i] = minimal_gauge(problem.gauge_poly, GaugeSide.CONTROL, controls[i])
    return controls, alphas, betas


# === Backend convexo (cvxpy) ===

class _ConvexProgram:
    """Programa cvxpy parametrizado pelo estado inicial (reutilizável entre sementes)"""

    def __init__(self, problem: TrajOptProblem, opts: SolverOptions, feasibility: bool):
        H, m, K = problem.horizon, problem.m, problem.gauge_steps
        self.feasibility = feasibility
        self.x0 = cp.Parameter(problem.n)
        self.U = cp.Variable((H, m))
        self.alpha = cp.Variable(K, nonneg=True) if K else None
        self.beta = cp.Variable(K, nonneg=True) if K else None
        self.slack = cp.Variable(nonneg=True) if feasibility else None

        states = [self.x0]
        for i in range(H):
            stage = problem.model.stage(problem.t0 + i)
            states.append(stage.A @ states[-1] + stage.B @ self.U[i])

        constraints = []
        if problem.control_box is not None:
            constraints.append(self.U <= np.tile(problem.control_box.high, (H, 1)))
            constraints.append(self.U >= np.tile(problem.control_box.low, (H, 1)))
        for row in problem.rows:
            index = row.time - problem.t0
            lhs = row.coeffs @ (states[index] if row.kind is RowKind.STATE else self.U[index])
            for l, c in row.alpha_terms:
                lhs = lhs + c * self.alpha[l - problem.t0]
            for l, c in row.beta_terms:
                lhs = lhs + c * self.beta[l - problem.t0]
            rhs = row.rhs + self.slack if feasibility else row.rhs
            constraints.append(lhs <= rhs)

        if feasibility:
            objective = self.slack
        else:
            structure = problem.cost.structure
            p = structure.p
            terms = [cp.norm(structure.S_x @ states[i], p) + cp.norm(structure.S_u @ self.U[i], p) for i in range(H)]
            terms.append(cp.norm(structure.S_f @ states[H], p))
            objective = cp.sum(cp.hstack(terms))
            if K and opts.gauge_weight > 0:
                objective = objective + opts.gauge_weight * (cp.sum(self.alpha) + cp.sum(self.beta))
        self.program = cp.Problem(cp.Minimize(objective), constraints)

    def solve(self, x0: np.ndarray, opts: SolverOptions) -> Optional[Dict[str, Any]]:
        """Resolve para um estado inicial; None se o solver falhar ou declarar inviável."""
        self.x0.value = x0
        try:
            if opts.cvxpy_solver:
                self.program.solve(solver=opts.cvxpy_solver)
            else:
                self.program.solve()
        except cp.error.SolverError as e:
            logger.debug("cvxpy falhou: %s", e)
            return None
        status = self.program.status
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self.U.value is None:
            logger.debug("cvxpy terminou com status %s", status)
            return None
        K = 0 if self.alpha is None else self.alpha.shape[0]
        return {
            'controls': np.array(self.U.value),
            'alphas': np.array(self.alpha.value) if K else np.zeros(0),
            'betas': np.array(self.beta.value) if K else np.zeros(0),
            'slack': float(self.slack.value) if self.slack is not None else 0.0,
            'exact': status == cp.OPTIMAL,
        }


class ProgramCache:
    """Cache de programas cvxpy por chave estrutural (dono único: um simulador)"""

    MAX_ENTRIES = 512

    def __init__(self):
        self._programs: Dict[Hashable, _ConvexProgram] = {}

    def get(self, problem: TrajOptProblem, opts: SolverOptions, feasibility: bool) -> _ConvexProgram:
        if problem.structure_key is None:
            return _ConvexProgram(problem, opts, feasibility)
        key = (problem.structure_key, feasibility)
        program = self._programs.get(key)
        if program is None:
            if len(self._programs) >= self.MAX_ENTRIES:
                self._programs.clear()
            program = _ConvexProgram(problem, opts, feasibility)
            self._programs[key] = program
        return program

    def __len__(self) -> int:
        return len(self._programs)


def _solve_convex(problem: TrajOptProblem, opts: SolverOptions, cache: ProgramCache) -> TrajOptSolution:
    """Backend convexo: ótimo global do problema local."""
    main = cache.get(problem, opts, feasibility=False).solve(problem.x0, opts)
    if main is not None:
        status = SolveStatus.OPTIMAL if main['exact'] else SolveStatus.FEASIBLE_SUBOPTIMAL
        solution = _finish(problem, opts, main['controls'], main['alphas'], main['betas'],
                           status, 0, "cvxpy", "ótimo convexo")
        if solution.feasible:
            return solution

    feasible = cache.get(problem, opts, feasibility=True).solve(problem.x0, opts)
    if feasible is None or feasible['slack'] > opts.feasibility_tol:
        controls, alphas, betas = (
            (feasible['controls'], feasible['alphas'], feasible['betas']) if feasible is not None
            else _warm_start(problem, opts)
        )
        solution = _finish(problem, opts, controls, alphas, betas, SolveStatus.INFEASIBLE, 0, "cvxpy",
                           "fase de viabilidade acima da tolerância")
        violation = feasible['slack'] if feasible is not None else solution.violation
        logger.debug("Problema convexo inviável (violação mínima %.3e)", violation)
        return TrajOptSolution(SolveStatus.INFEASIBLE, solution.controls, solution.states, solution.alphas,
                               solution.betas, float('inf'), max(violation, solution.violation), 0, "cvxpy",
                               solution.message)

    return _finish(problem, opts, feasible['controls'], feasible['alphas'], feasible['betas'],
                   SolveStatus.FEASIBLE_SUBOPTIMAL, 0, "cvxpy", "ponto da fase de viabilidade")


# === Backend single shooting (SLSQP) ===

@dataclass
class _EpigraphTerm:
    """Termo ‖S v‖_p substituído por variáveis de epígrafo"""
    source: RowKind
    index: int
    S: np.ndarray
    p: int
    offset: int
    count: int


class _ShootingProblem:
    """Avaliação de custo, restrições e sensibilidades para SLSQP"""

    def __init__(self, problem: TrajOptProblem, opts: SolverOptions):
        self.problem = problem
        self.opts = opts
        self.H = problem.horizon
        self.m = problem.m
        self.n = problem.n
        self.K = problem.gauge_steps
        self.nu = self.H * self.m
        self.structured = problem.cost.structure is not None
        self.terms: List[_EpigraphTerm] = self._epigraph_terms() if self.structured else []
        self.n_epi = sum(term.count for term in self.terms)
        self.size = self.nu + 2 * self.K + self.n_epi
        self._cached_key: Optional[bytes] = None
        self._cached: Tuple[np.ndarray, List[np.ndarray]] = (np.zeros(0), [])

    def _epigraph_terms(self) -> List[_EpigraphTerm]:
        """Um bloco de folgas por norma não nula da estrutura de custo."""
        structure = self.problem.cost.structure
        terms: List[_EpigraphTerm] = []
        offset = self.nu + 2 * self.K

        def add(source: RowKind, index: int, S: np.ndarray) -> None:
            nonlocal offset
            if not np.any(S):
                return
            count = S.shape[0] if structure.p == 1 else 1
            terms.append(_EpigraphTerm(source, index, S, structure.p, offset, count))
            offset += count

        for i in range(self.H):
            add(RowKind.STATE, i, structure.S_x)
            add(RowKind.CONTROL, i, structure.S_u)
        add(RowKind.STATE, self.H, structure.S_f)
        return terms

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        controls = z[:self.nu].reshape(self.H, self.m)
        alphas = z[self.nu:self.nu + self.K]
        betas = z[self.nu + self.K:self.nu + 2 * self.K]
        return controls, alphas, betas

    def trajectory(self, z: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Estados e sensibilidades ∂x_i/∂U por propagação direta (com cache do último z)."""
        key = z[:self.nu].tobytes()
        if key == self._cached_key:
            return self._cached
        controls = z[:self.nu].reshape(self.H, self.m)
        problem = self.problem
        states = rollout(problem.model, problem.stepper, problem.x0, controls, t0=problem.t0)
        sens = [np.zeros((self.n, self.nu))]
        for i in range(self.H):
            stage = problem.model.stage(problem.t0 + i)
            if problem.stepper is Stepper.LOCAL:
                jac_x, jac_u = stage.A, stage.B
            else:
                fx, fu = finite_difference_jacobians(stage.nonlinearity, states[i], controls[i])
                jac_x, jac_u = stage.A + fx, stage.B + fu
            nxt = jac_x @ sens[-1]
            nxt[:, i * self.m:(i + 1) * self.m] += jac_u
            sens.append(nxt)
        if not np.all(np.isfinite(states)):
            raise NumericError("Estado não finito durante a otimização")
        self._cached_key = key
        self._cached = (states, sens)
        return self._cached

    def _vector_and_jacobian(self, z: np.ndarray, source: RowKind, index: int, coeffs: np.ndarray
                             ) -> Tuple[np.ndarray, np.ndarray]:
        """(coeffs·v, ∂(coeffs·v)/∂U) para v = x_index ou u_index."""
        states, sens = self.trajectory(z)
        if source is RowKind.STATE:
            return coeffs @ states[index], coeffs @ sens[index]
        controls = z[:self.nu].reshape(self.H, self.m)
        jac = np.zeros(np.shape(coeffs)[:-1] + (self.nu,))
        jac[..., index * self.m:(index + 1) * self.m] = coeffs
        return coeffs @ controls[index], jac

    # --- objetivo ---

    def objective(self, z: np.ndarray) -> float:
        value = float(np.sum(z[self.nu + 2 * self.K:]))
        if not self.structured:
            states, _ = self.trajectory(z)
            value = cost_to_go(self.problem.cost, states, z[:self.nu].reshape(self.H, self.m), k=self.problem.t0)
        value += self.opts.gauge_weight * float(np.sum(z[self.nu:self.nu + 2 * self.K]))
        if not np.isfinite(value):
            raise NumericError(f"Objetivo não finito: {value}")
        return value

    def objective_gradient(self, z: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.size)
        grad[self.nu:self.nu + 2 * self.K] = self.opts.gauge_weight
        grad[self.nu + 2 * self.K:] = 1.0
        return grad

    # --- restrições (forma g(z) ≥ 0) ---

    def constraints(self, z: np.ndarray, slack: float = 0.0, rows_only: bool = False
                    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Valores e Jacobiano das restrições de desigualdade.

        Com rows_only, só as linhas do problema (sem epígrafo), folgadas
        por `slack`; o Jacobiano cobre apenas (U, α, β).
        """
        width = self.nu + 2 * self.K if rows_only else self.size
        values: List[float] = []
        jac_rows: List[np.ndarray] = []
        _, alphas, betas = self.split(z)
        t0 = self.problem.t0

        for row in self.problem.rows:
            value, jac_u = self._vector_and_jacobian(z, row.kind, row.time - t0, row.coeffs)
            lhs = float(value)
            jac = np.zeros(width)
            jac[:self.nu] = -jac_u
            for l, c in row.alpha_terms:
                lhs += c * alphas[l - t0]
                jac[self.nu + l - t0] -= c
            for l, c in row.beta_terms:
                lhs += c * betas[l - t0]
                jac[self.nu + self.K + l - t0] -= c
            values.append(row.rhs - lhs + slack)
            jac_rows.append(jac)

        for term in ([] if rows_only else self.terms):
            sv, jac_sv = self._vector_and_jacobian(z, term.source, term.index, term.S)
            e = z[term.offset:term.offset + term.count]
            if term.p == 1:
                for j in range(term.count):
                    for sign in (1.0, -1.0):
                        jac = np.zeros(self.size)
                        jac[term.offset + j] = 1.0
                        jac[:self.nu] = -sign * jac_sv[j]
                        values.append(e[j] - sign * sv[j])
                        jac_rows.append(jac)
            else:
                jac = np.zeros(self.size)
                jac[term.offset] = 2.0 * e[0]
                jac[:self.nu] = -2.0 * sv @ jac_sv
                values.append(e[0] ** 2 - float(sv @ sv))
                jac_rows.append(jac)

        if not values:
            return np.zeros(0), np.zeros((0, width))
        return np.asarray(values, dtype=float), np.vstack(jac_rows)

    def initial_point(self, controls: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
        """Ponto inicial com folgas de epígrafo no valor de cada termo."""
        z = np.zeros(self.size)
        z[:self.nu] = controls.ravel()
        z[self.nu:self.nu + self.K] = alphas
        z[self.nu + self.K:self.nu + 2 * self.K] = betas
        for term in self.terms:
            sv, _ = self._vector_and_jacobian(z, term.source, term.index, term.S)
            if term.p == 1:
                z[term.offset:term.offset + term.count] = np.abs(sv)
            else:
                z[term.offset] = float(np.linalg.norm(sv)) + self.opts.feasibility_tol
        return z

    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        box = self.problem.control_box
        if box is None:
            control_bounds = [(None, None)] * self.nu
        else:
            control_bounds = [(float(box.low[j]), float(box.high[j])) for _ in range(self.H) for j in range(self.m)]
        return control_bounds + [(0.0, None)] * (2 * self.K + self.n_epi)


def _run_slsqp(shooting: _ShootingProblem, z0: np.ndarray, opts: SolverOptions) -> Any:
    """Fase de otimização principal."""
    constraints = []
    if shooting.problem.rows or shooting.terms:
        constraints.append({
            'type': 'ineq',
            'fun': lambda z: shooting.constraints(z)[0],
            'jac': lambda z: shooting.constraints(z)[1],
        })
    jac = shooting.objective_gradient if shooting.structured else None
    return minimize(
        shooting.objective, z0, jac=jac, method='SLSQP', bounds=shooting.bounds(),
        constraints=constraints,
        options={'maxiter': int(opts.max_iter), 'ftol': opts.optimality_tol}
    )


def _run_feasibility(shooting: _ShootingProblem, controls: np.ndarray, alphas: np.ndarray, betas: np.ndarray,
                     opts: SolverOptions) -> Tuple[np.ndarray, float, Any]:
    """Minimiza a violação máxima s das linhas: row ≤ rhs + s."""
    base = shooting.nu + 2 * shooting.K
    z0 = np.zeros(base + 1)
    z0[:shooting.nu] = controls.ravel()
    z0[shooting.nu:shooting.nu + shooting.K] = alphas
    z0[shooting.nu + shooting.K:base] = betas

    values, _ = shooting.constraints(z0[:base], rows_only=True)
    z0[base] = max(0.0, float(-np.min(values))) if values.size else 0.0

    def fun(z: np.ndarray) -> float:
        return float(z[base])

    def grad(z: np.ndarray) -> np.ndarray:
        g = np.zeros(base + 1)
        g[base] = 1.0
        return g

    def cons(z: np.ndarray) -> np.ndarray:
        return shooting.constraints(z[:base], slack=z[base], rows_only=True)[0]

    def cons_jac(z: np.ndarray) -> np.ndarray:
        jac = shooting.constraints(z[:base], slack=z[base], rows_only=True)[1]
        return np.hstack([jac, np.ones((jac.shape[0], 1))])

    bounds = shooting.bounds()[:base] + [(0.0, None)]
    constraints = [{'type': 'ineq', 'fun': cons, 'jac': cons_jac}] if shooting.problem.rows else []
    result = minimize(fun, z0, jac=grad, method='SLSQP', bounds=bounds, constraints=constraints,
                      options={'maxiter': int(opts.max_iter), 'ftol': opts.optimality_tol * 1e-3})
    return result.x[:base], float(result.x[base]), result


def _solve_shooting(problem: TrajOptProblem, opts: SolverOptions) -> TrajOptSolution:
    """Backend SLSQP com epígrafo para custos estruturados."""
    shooting = _ShootingProblem(problem, opts)
    controls, alphas, betas = _warm_start(problem, opts)

    result = _run_slsqp(shooting, shooting.initial_point(controls, alphas, betas), opts)
    logger.debug("SLSQP: %s (%d iterações)", result.message, result.nit)
    u, a, b = shooting.split(result.x)
    status = SolveStatus.OPTIMAL if result.success else SolveStatus.FEASIBLE_SUBOPTIMAL
    main = _finish(problem, opts, u, a, b, status, int(result.nit), "slsqp", str(result.message))
    if main.feasible:
        return main

    z_feas, s_star, feas_result = _run_feasibility(shooting, main.controls, main.alphas, main.betas, opts)
    u, a, b = shooting.split(np.concatenate([z_feas, np.zeros(shooting.n_epi)]))
    feasible_point = _finish(problem, opts, u, a, b, SolveStatus.FEASIBLE_SUBOPTIMAL,
                             int(feas_result.nit), "slsqp", "ponto da fase de viabilidade")
    if not feasible_point.feasible:
        logger.debug("Fase de viabilidade terminou com s* = %.3e", s_star)
        return TrajOptSolution(SolveStatus.INFEASIBLE, feasible_point.controls, feasible_point.states,
                               feasible_point.alphas, feasible_point.betas, float('inf'),
                               max(s_star, feasible_point.violation), int(feas_result.nit), "slsqp",
                               f"inviável: violação mínima {s_star:.3e}")

    retry = _run_slsqp(shooting, shooting.initial_point(feasible_point.controls, feasible_point.alphas,
                                                        feasible_point.betas), opts)
    u, a, b = shooting.split(retry.x)
    status = SolveStatus.OPTIMAL if retry.success else SolveStatus.FEASIBLE_SUBOPTIMAL
    second = _finish(problem, opts, u, a, b, status, int(retry.nit), "slsqp", str(retry.message))
    if second.feasible and second.objective <= feasible_point.objective:
        return second
    return feasible_point


def solve(problem: TrajOptProblem, opts: Optional[SolverOptions] = None,
          cache: Optional[ProgramCache] = None) -> TrajOptSolution:
    """
    Resolve o problema de trajetória.

    Inviável só depois de uma fase de viabilidade dedicada (minimizar a
    violação máxima) terminar acima da tolerância.

    Args:
        problem: Problema na janela [t0, N]
        opts: Opções do solver
        cache: Cache de programas convexos (opcional)

    Returns:
        TrajOptSolution com estados recalculados pelo modelo
    """
    opts = opts or SolverOptions()
    use_convex = (
        opts.convex_backend
        and problem.stepper is Stepper.LOCAL
        and problem.cost.structure is not None
    )
    if use_convex:
        return _solve_convex(problem, opts, cache or ProgramCache())
    return _solve_shooting(problem, opts)
