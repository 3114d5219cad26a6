#!/usr/bin/env python3
"""
Configurações e constantes do Cloud MPC Sim
"""

import os

# Configurações da aplicação
APP_NAME = "Cloud MPC Sim - Fusão de MPC da nuvem e local"
APP_VERSION = "1.0.0"

# Variável de ambiente com o diretório de saída padrão
OUTPUT_DIR_ENV = "CLOUDMPC_OUTPUT_DIR"
DEFAULT_OUTPUT_DIRNAME = "results"

# Colunas do trace.csv; x, u, w e x_hat são expandidas por componente antes destas
TRACE_VECTOR_PREFIXES = ('x', 'u', 'w', 'x_hat')
TRACE_COLUMNS = (
    'choice', 'j_hat', 'eta_hat', 'j_bar', 'eta_bar', 'eps_meas', 'delta_t',
    'trust_ok', 'local_status', 'cost_sign', 'terminal_ok',
)
COUNTERFACTUAL_COLUMNS = (
    't', 'choice', 'oracle', 'J_c', 'J_l', 'cloud_worst_case', 'local_worst_case',
    'sign_worst_case', 'sign_actual',
)

# Arquivos de saída
OUTPUT_FILES = {
    'trace': 'trace.csv',
    'summary': 'summary.json',
    'batch': 'batch.json',
    'manifest': 'manifest.json',
    'counterfactuals': 'counterfactuals.csv',
    'verification': 'verification.json',
}

# Códigos de saída da CLI
EXIT_CODES = {
    'ok': 0,
    'error': 1,
    'config': 2,
    'infeasible_cloud': 3,
    'bound_violation': 4,
}


def get_default_output_dir():
    """Diretório de saída: variável de ambiente ou ./results"""
    return os.environ.get(OUTPUT_DIR_ENV) or os.path.join(os.getcwd(), DEFAULT_OUTPUT_DIRNAME)


# Mensagens da aplicação
MESSAGES = {
    'startup': "🚀 Iniciando Cloud MPC Sim...",
    'config_error': "❌ Configuração inválida:",
    'infeasible_cloud': "❌ Problema da nuvem inviável no instante inicial:",
    'numeric_error': "❌ Erro numérico durante a simulação:",
    'bound_violation': "❌ Limites de erro violados:",
    'bounds_ok': "✅ Nenhuma violação de limites",
    'vacuous_pass': "⚠️ Nenhuma tentativa executada: aprovação vazia",
    'run_done': "✅ Simulação concluída",
    'files_written': "📁 Arquivos gravados em",
    'missing_deps': "❌ Dependências obrigatórias não encontradas:",
}
