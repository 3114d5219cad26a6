#!/usr/bin/env python3
"""
Exceções da aplicação
Hierarquia única para que a CLI traduza falhas em códigos de saída
"""

from typing import Iterable, List


class CloudMPCError(Exception):
    """Erro base do framework de MPC assistido por nuvem"""


class ConfigurationError(CloudMPCError, ValueError):
    """Configuração inválida (dimensões, constantes, presets)"""


class ConfigValidationError(ConfigurationError):
    """Documento de configuração viola o schema"""

    def __init__(self, problems: Iterable[str]):
        self.keys: List[str] = []
        self.problems: List[str] = list(problems)
        for problem in self.problems:
            self.keys.append(problem.split(':', 1)[0].strip())
        super().__init__(
            "Configuração inválida:\n  " + "\n  ".join(self.problems)
        )


class DimensionError(ConfigurationError):
    """Dimensões inconsistentes entre vetores e matrizes"""


class InfeasibleCloudError(CloudMPCError, RuntimeError):
    """Problema da nuvem inviável no instante inicial"""

    def __init__(self, message: str, max_violation: float = float('nan')):
        self.max_violation = max_violation
        super().__init__(message)


class NumericError(CloudMPCError, ArithmeticError):
    """NaN/inf em custo, dinâmica ou estado"""


class BoundViolationError(CloudMPCError, AssertionError):
    """Limite de erro de Lipschitz violado numa auditoria"""

    def __init__(self, message: str, seed: int = -1, step: int = -1):
        self.seed = seed
        self.step = step
        super().__init__(message)
