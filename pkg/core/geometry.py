#!/usr/bin/env python3
"""
Geometria de restrições
Politopos em semiespaços, função suporte da bola unitária, aproximações
poliédricas da bola (gauges) e aperto por diferença de Pontryagin
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigurationError
from .models import NormKind, as_vector, dual_norm, vector_norm

logger = logging.getLogger(__name__)


class GeometryConstants:
    """Tolerâncias de geometria."""
    GAUGE_RELATIVE_TOL = 1e-12
    CONTAINMENT_TOL = 1e-9
    EMPTINESS_TOL = 1e-9


class GaugeSide(Enum):
    """Qual politopo de gauge: estado (X̄) ou controle (Ū)"""
    STATE = "state"
    CONTROL = "control"


def support_ball(norm_kind: NormKind, direction: Any) -> float:
    """
    Função suporte h_B(G) = max Gᵀx sobre a bola unitária.

    Args:
        norm_kind: Norma da bola
        direction: Direção G (não nula)

    Returns:
        Norma dual de G
    """
    direction = as_vector(direction, name="direção")
    if not np.any(direction):
        raise ConfigurationError("Função suporte requer direção não nula")
    return dual_norm(direction, NormKind.parse(norm_kind))


@dataclass(frozen=True, eq=False)
class PolytopeConstraint:
    """Conjunto X_T = {x : G_j x ≤ g_j, j = 1..p_T} imposto no instante T"""
    T: int
    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        g = as_vector(self.g, G.shape[0], "g")
        if int(self.T) < 1:
            raise ConfigurationError(f"Instante de restrição T deve ser ≥ 1, recebido {self.T}")
        if np.any(np.all(G == 0.0, axis=1)):
            raise ConfigurationError(f"Restrição em T={self.T} tem linha G nula")
        object.__setattr__(self, 'T', int(self.T))
        object.__setattr__(self, 'G', G)
        object.__setattr__(self, 'g', g)

    @classmethod
    def from_rows(cls, T: int, rows: Sequence[Tuple[Any, float]]) -> 'PolytopeConstraint':
        """Cria a partir de uma lista de pares (G_j, g_j)."""
        if not rows:
            raise ConfigurationError(f"Restrição em T={T} sem linhas")
        G = np.vstack([as_vector(row[0]) for row in rows])
        g = np.array([float(row[1]) for row in rows])
        return cls(T, G, g)

    @classmethod
    def symmetric_box(cls, T: int, bounds: Any) -> 'PolytopeConstraint':
        """Caixa |x_i| ≤ b_i."""
        bounds = as_vector(bounds, name="semi-larguras")
        eye = np.eye(bounds.size)
        return cls(T, np.vstack([eye, -eye]), np.concatenate([bounds, bounds]))

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def rows(self) -> List[Tuple[np.ndarray, float]]:
        return [(self.G[j], float(self.g[j])) for j in range(self.G.shape[0])]

    def max_violation(self, x: Any) -> float:
        """max_j (G_j x − g_j); ≤ 0 significa pertinência"""
        x = as_vector(x, self.n, "estado")
        return float(np.max(self.G @ x - self.g))

    def contains(self, x: Any, tol: float = 0.0) -> bool:
        """Teste exato de pertinência (com tolerância opcional)"""
        return self.max_violation(x) <= tol

    def is_empty(self) -> bool:
        """Sonda de viabilidade por programação linear"""
        result = linprog(
            np.zeros(self.n), A_ub=self.G, b_ub=self.g + GeometryConstants.EMPTINESS_TOL,
            bounds=[(None, None)] * self.n, method='highs'
        )
        return result.status == 2

    def to_dict(self) -> dict:
        return {'T': self.T, 'G': self.G.tolist(), 'g': self.g.tolist()}


def tighten_by_ball(constraint: PolytopeConstraint, radius: float, norm_kind: NormKind) -> PolytopeConstraint:
    """
    Diferença de Pontryagin X_T ∼ B_r, linha a linha: g_j − r·h_B(G_j).

    O resultado pode ser vazio; isso é um valor válido.
    """
    if radius < 0:
        raise ConfigurationError(f"Raio de aperto deve ser não negativo, recebido {radius}")
    if radius == 0:
        return constraint
    norm_kind = NormKind.parse(norm_kind)
    support = np.array([support_ball(norm_kind, row) for row in constraint.G])
    return PolytopeConstraint(constraint.T, constraint.G, constraint.g - radius * support)


@dataclass(frozen=True, eq=False)
class ControlBox:
    """Restrição de controle U = {low ≤ u ≤ high}"""
    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = as_vector(self.low, name="u_low")
        high = as_vector(self.high, low.size, "u_high")
        if np.any(low > high):
            raise ConfigurationError(f"Limites de controle inconsistentes: low={low}, high={high}")
        object.__setattr__(self, 'low', low)
        object.__setattr__(self, 'high', high)

    @classmethod
    def symmetric(cls, bound: Any) -> 'ControlBox':
        bound = as_vector(bound, name="limite de controle")
        return cls(-bound, bound)

    @property
    def m(self) -> int:
        return self.low.size

    def violation(self, u: Any) -> float:
        """Maior excesso sobre os limites (0 se u ∈ U)"""
        u = as_vector(u, self.m, "controle")
        return float(max(0.0, np.max(u - self.high), np.max(self.low - u)))

    def clip(self, u: Any) -> np.ndarray:
        return np.clip(as_vector(u, self.m, "controle"), self.low, self.high)


@dataclass(frozen=True, eq=False)
class UnitBallPolytope:
    """
    Aproximações poliédricas internas X̄ = {Ḡx ≤ ḡ} e Ū = {H̄u ≤ h̄} da bola unitária.

    A inclusão na bola é verificada na construção: programas lineares
    dão a caixa envolvente de cada politopo e a norma do canto dessa
    caixa deve ser ≤ 1.
    """
    G_bar: np.ndarray
    g_bar: np.ndarray
    H_bar: np.ndarray
    h_bar: np.ndarray
    norm_kind: NormKind = NormKind.TWO

    def __post_init__(self):
        G_bar = np.atleast_2d(np.asarray(self.G_bar, dtype=float))
        H_bar = np.atleast_2d(np.asarray(self.H_bar, dtype=float))
        object.__setattr__(self, 'G_bar', G_bar)
        object.__setattr__(self, 'H_bar', H_bar)
        object.__setattr__(self, 'g_bar', as_vector(self.g_bar, G_bar.shape[0], "ḡ"))
        object.__setattr__(self, 'h_bar', as_vector(self.h_bar, H_bar.shape[0], "h̄"))
        object.__setattr__(self, 'norm_kind', NormKind.parse(self.norm_kind))

        if np.any(self.g_bar <= 0) or np.any(self.h_bar <= 0):
            raise ConfigurationError("ḡ e h̄ devem ser estritamente positivos (0 no interior)")
        self._validate_inside_unit_ball(self.G_bar, self.g_bar, "X̄")
        self._validate_inside_unit_ball(self.H_bar, self.h_bar, "Ū")

    def _validate_inside_unit_ball(self, M: np.ndarray, b: np.ndarray, label: str) -> None:
        """Caixa envolvente via 2n LPs e teste da norma do canto."""
        dim = M.shape[1]
        extent = np.zeros(dim)
        for i in range(dim):
            for sign in (1.0, -1.0):
                c = np.zeros(dim)
                c[i] = -sign
                result = linprog(c, A_ub=M, b_ub=b, bounds=[(None, None)] * dim, method='highs')
                if result.status == 3:
                    raise ConfigurationError(f"Politopo de gauge {label} é ilimitado")
                if result.status != 0:
                    raise ConfigurationError(f"Falha ao verificar {label}: {result.message}")
                extent[i] = max(extent[i], -result.fun)
        radius = vector_norm(extent, self.norm_kind)
        if radius > 1.0 + GeometryConstants.CONTAINMENT_TOL:
            raise ConfigurationError(
                f"Politopo de gauge {label} não está contido na bola unitária ({radius:.6g} > 1)"
            )

    @classmethod
    def box(cls, state_half_widths: Any, control_half_widths: Any, norm_kind: NormKind = NormKind.TWO) -> 'UnitBallPolytope':
        """Gauges em forma de caixa com semi-larguras dadas."""
        sx = as_vector(state_half_widths, name="semi-larguras de estado")
        su = as_vector(control_half_widths, name="semi-larguras de controle")
        ex = np.eye(sx.size)
        eu = np.eye(su.size)
        return cls(
            np.vstack([ex, -ex]), np.concatenate([sx, sx]),
            np.vstack([eu, -eu]), np.concatenate([su, su]),
            norm_kind
        )

    @classmethod
    def default(cls, n: int, m: int, norm_kind: NormKind = NormKind.TWO) -> 'UnitBallPolytope':
        """Caixas de semi-largura 1/n (one), 1/√n (two) ou 1 (inf)."""
        norm_kind = NormKind.parse(norm_kind)

        def half_width(dim: int) -> float:
            if norm_kind is NormKind.ONE:
                return 1.0 / dim
            if norm_kind is NormKind.TWO:
                return 1.0 / np.sqrt(dim)
            return 1.0

        return cls.box(np.full(n, half_width(n)), np.full(m, half_width(m)), norm_kind)

    @property
    def n(self) -> int:
        return self.G_bar.shape[1]

    @property
    def m(self) -> int:
        return self.H_bar.shape[1]

    def rows_for(self, which: GaugeSide) -> Tuple[np.ndarray, np.ndarray]:
        """(Ḡ, ḡ) ou (H̄, h̄)"""
        which = GaugeSide(which)
        if which is GaugeSide.STATE:
            return self.G_bar, self.g_bar
        return self.H_bar, self.h_bar


def gauge_membership(poly: UnitBallPolytope, which: GaugeSide, v: Any, scale: float) -> bool:
    """
    Testa v ∈ scale·X̄ (ou scale·Ū): Ḡv ≤ scale·ḡ linha a linha.

    Args:
        poly: Politopos de gauge
        which: state ou control
        v: Vetor
        scale: Escala α (ou β) não negativa
    """
    if scale < 0:
        raise ConfigurationError(f"Escala de gauge deve ser não negativa, recebido {scale}")
    M, b = poly.rows_for(which)
    v = as_vector(v, M.shape[1], "vetor de gauge")
    rhs = scale * b
    tol = GeometryConstants.GAUGE_RELATIVE_TOL * (1.0 + np.abs(rhs))
    return bool(np.all(M @ v <= rhs + tol))


def minimal_gauge(poly: UnitBallPolytope, which: GaugeSide, v: Any) -> float:
    """Menor α ≥ 0 com v ∈ α·X̄: max_i (Ḡv)_i / ḡ_i, saturado em 0."""
    M, b = poly.rows_for(which)
    if np.any(b <= 0):
        raise ConfigurationError("minimal_gauge requer ḡ estritamente positivo")
    v = as_vector(v, M.shape[1], "vetor de gauge")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError("minimal_gauge requer vetor finito")
    return float(max(0.0, np.max((M @ v) / b)))
