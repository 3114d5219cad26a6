#!/usr/bin/env python3
"""
Gerenciador de saídas
Responsável por gravar traço, resumo, lote, manifesto e dados contrafactuais
"""

import csv
import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config import (APP_VERSION, COUNTERFACTUAL_COLUMNS, OUTPUT_FILES, TRACE_COLUMNS, TRACE_VECTOR_PREFIXES)

from .experiment_config import ExperimentConfig
from .simulation import Counterfactuals, MetricsReport, SimTrace
from .verification import BatchResult, BoundAudit

logger = logging.getLogger(__name__)


def json_safe(value: Any) -> Any:
    """Converte arrays, enums e não finitos (→ null) para JSON padrão."""
    if isinstance(value, dict):
        return {str(key): json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return json_safe(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if hasattr(value, 'value') and not isinstance(value, (str, int)):
        return value.value
    return value


def trace_columns(trace: SimTrace) -> List[str]:
    """Ordem fixa: t, componentes vetoriais por prefixo e depois TRACE_COLUMNS."""
    n = trace.states.shape[1]
    m = trace.controls.shape[1]
    sizes = {'x': n, 'u': m, 'w': n, 'x_hat': n if trace.cloud_plan is not None else 0}
    columns = ['t']
    for prefix in TRACE_VECTOR_PREFIXES:
        columns.extend(f'{prefix}{i}' for i in range(sizes[prefix]))
    columns.extend(TRACE_COLUMNS)
    return columns


def _format_cell(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


class OutputManager:
    """Gerenciador do diretório de saída de um experimento"""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self._written: List[str] = []
        os.makedirs(output_dir, exist_ok=True)

    @property
    def written_files(self) -> List[str]:
        """Caminhos gravados até agora"""
        return list(self._written)

    def path_for(self, key: str, suffix: str = "") -> str:
        name = OUTPUT_FILES[key]
        if suffix:
            stem, ext = os.path.splitext(name)
            name = f"{stem}_{suffix}{ext}"
        return os.path.join(self.output_dir, name)

    def _write_json(self, path: str, data: Dict[str, Any]) -> str:
        with open(path, 'w', encoding='utf-8', newline='\n') as file:
            json.dump(json_safe(data), file, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
            file.write('\n')
        self._written.append(path)
        logger.debug("Gravado %s", path)
        return path

    def _write_csv(self, path: str, columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
        with open(path, 'w', encoding='utf-8', newline='') as file:
            writer = csv.writer(file, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format_cell(row.get(column)) for column in columns])
        self._written.append(path)
        logger.debug("Gravado %s", path)
        return path

    def write_trace(self, trace: SimTrace, suffix: str = "") -> str:
        """trace.csv com uma linha por passo e a linha terminal"""
        return self._write_csv(self.path_for('trace', suffix), trace_columns(trace), trace.to_rows())

    def write_counterfactuals(self, trace: SimTrace, counterfactuals: Counterfactuals, suffix: str = "") -> str:
        """
        counterfactuals.csv com J^c, J^l, custos de pior caso e os sinais
        sign((J̄+η̄)−(Ĵ+η̂)) e sign(J^l−J^c) por passo.
        """
        decisions = {decision.t: decision for decision in trace.decisions}
        oracle = counterfactuals.oracle_choices()
        rows = []
        for t in range(trace.N + 1):
            J_c, J_l = float(counterfactuals.J_c[t]), float(counterfactuals.J_l[t])
            row: Dict[str, Any] = {'t': t, 'J_c': J_c, 'J_l': J_l}
            if np.isfinite(J_c) and np.isfinite(J_l):
                row['sign_actual'] = int(np.sign(J_l - J_c))
            if t < trace.N:
                row['choice'] = trace.records[t].choice
                row['oracle'] = oracle[t].value
            decision = decisions.get(t)
            if decision is not None:
                row['cloud_worst_case'] = decision.j_cloud_wc
                row['local_worst_case'] = decision.j_local_wc
                row['sign_worst_case'] = decision.cost_sign
            rows.append(row)
        return self._write_csv(self.path_for('counterfactuals', suffix), COUNTERFACTUAL_COLUMNS, rows)

    def write_summary(self, config: ExperimentConfig, trace: SimTrace, report: MetricsReport,
                      audit: Optional[BoundAudit] = None, suffix: str = "") -> str:
        """summary.json de uma execução"""
        cloud = trace.cloud_plan
        data: Dict[str, Any] = {
            'experiment': config.name,
            'config_hash': config.config_hash,
            'mode': trace.mode.value,
            'seed': trace.seed,
            'metrics': report.to_dict(),
            'terminal': {
                'x_N': trace.x_N,
                'flags': {str(T): ok for T, ok in trace.terminal_flags.items()},
                'violations': {str(T): v for T, v in trace.terminal_violations.items()},
            },
        }
        if cloud is not None:
            data['cloud'] = {
                'delta0': cloud.delta0,
                'deltas': cloud.deltas,
                'J_hat0': float(cloud.cost_to_go[0]),
                'eta_hat0': float(cloud.eta[0]),
                'tightened': [constraint.to_dict() for constraint in cloud.tightened],
                'status': cloud.status.value,
            }
        first_local = trace.local_plans.get(0)
        if first_local is not None:
            data['local_t0'] = {
                'status': first_local.status.value,
                'J_bar': first_local.J_bar,
                'eta_bar': first_local.eta_bar,
                'xi': {str(T): value for T, value in first_local.xi.items()},
                'effective_bounds': {str(T): value for T, value in first_local.effective_bounds.items()},
            }
        if audit is not None:
            data['audit'] = audit.to_dict()
        return self._write_json(self.path_for('summary', suffix), data)

    def write_batch(self, config: ExperimentConfig, batch: BatchResult, seeds: Sequence[int]) -> str:
        """batch.json com linhas por semente e agregados por modo"""
        data = {'experiment': config.name, 'config_hash': config.config_hash, 'seeds': list(seeds)}
        data.update(batch.to_dict())
        return self._write_json(self.path_for('batch'), data)

    def write_verification(self, config: ExperimentConfig, audit: BoundAudit, trials: int) -> str:
        data = {'experiment': config.name, 'config_hash': config.config_hash, 'trials': trials,
                'ok': audit.ok}
        data.update(audit.to_dict())
        return self._write_json(self.path_for('verification'), data)

    def write_manifest(self, config: ExperimentConfig, seeds: Sequence[int], config_path: Optional[str]) -> str:
        """manifest.json com hash da configuração resolvida, sementes, saídas e versão."""
        outputs = {}
        for path in self._written:
            with open(path, 'rb') as file:
                outputs[os.path.basename(path)] = hashlib.sha256(file.read()).hexdigest()
        data = {
            'config_path': config_path,
            'config_hash': config.config_hash,
            'resolved_config': config.to_dict(),
            'seeds': list(seeds),
            'outputs': outputs,
            'tool_version': APP_VERSION,
        }
        return self._write_json(self.path_for('manifest'), data)
