#!/usr/bin/env python3
"""
Ponto de entrada do Cloud MPC Sim
Verifica dependências, configura o logging e delega para a CLI
"""

import logging
import sys
from typing import List, Optional, Sequence

from config import EXIT_CODES, MESSAGES

# Constantes para dependências
REQUIRED_DEPENDENCIES = [
    ('numpy', 'numpy não encontrado.\nExecute: pip install numpy'),
    ('scipy', 'scipy não encontrado. Necessário para linprog e SLSQP.\nExecute: pip install scipy'),
    ('cvxpy', 'cvxpy não encontrado. Necessário para o MPC local convexo.\nExecute: pip install cvxpy'),
]

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _check_dependency(module_name: str) -> bool:
    """Verifica se um módulo específico está disponível."""
    try:
        __import__(module_name)
        return True
    except ImportError:
        return False


def check_dependencies() -> List[str]:
    """Verifica se as dependências necessárias estão instaladas.

    Returns:
        Lista de mensagens para as dependências ausentes
    """
    return [error_msg for module, error_msg in REQUIRED_DEPENDENCIES if not _check_dependency(module)]


def configure_logging(verbose: bool = False) -> None:
    """Configura o logger raiz uma única vez."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT, force=True)
    if not verbose:
        # cvxpy e os solvers são verbosos em INFO
        logging.getLogger('cvxpy').setLevel(logging.WARNING)


def _print_startup_message() -> None:
    """Imprime mensagem de inicialização."""
    print(MESSAGES['startup'])


def _handle_import_error(error: ImportError) -> int:
    """Trata erros de importação de módulos."""
    print(f"❌ Erro ao importar módulos da aplicação:\n{str(error)}\n\nVerifique se todos os arquivos estão presentes.")
    return EXIT_CODES['error']


def _handle_unexpected_error(error: Exception) -> int:
    """Trata erros inesperados."""
    logging.getLogger(__name__).exception("Erro inesperado")
    print(f"❌ Erro inesperado: {str(error)}")
    return EXIT_CODES['error']


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Função principal da aplicação."""
    argv = list(sys.argv[1:] if argv is None else argv)
    _print_startup_message()

    missing_deps = check_dependencies()
    if missing_deps:
        print(MESSAGES['missing_deps'] + "\n\n" + "\n\n".join(missing_deps))
        return EXIT_CODES['error']

    configure_logging('-v' in argv or '--verbose' in argv)
    try:
        from cli import main as cli_main
        return cli_main(argv)
    except ImportError as e:
        return _handle_import_error(e)
    except Exception as e:
        return _handle_unexpected_error(e)


if __name__ == "__main__":
    sys.exit(main())
