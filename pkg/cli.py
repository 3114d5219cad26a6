#!/usr/bin/env python3
"""
Interface de linha de comando
Subcomandos run e verify-bounds sobre presets ou documentos JSON
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from config import APP_NAME, APP_VERSION, EXIT_CODES, MESSAGES, get_default_output_dir
from core.errors import (BoundViolationError, ConfigurationError, ConfigValidationError, InfeasibleCloudError,
                         NumericError)
from core.experiment_config import ExperimentConfig, SimMode, resolve_config
from core.output_manager import OutputManager
from core.presets import PresetLibrary
from core.simulation import ClosedLoopSimulator, counterfactual_costs, metrics
from core.verification import audit_bounds, run_batch, verify_bounds

logger = logging.getLogger(__name__)


def parse_seeds(text: str) -> List[int]:
    """
    Aceita "7", "0..19" (inclusivo) ou "1,4,9".

    Raises:
        ConfigValidationError: formato inválido
    """
    text = text.strip()
    try:
        if '..' in text:
            start, end = text.split('..', 1)
            first, last = int(start), int(end)
            if last < first:
                raise ValueError
            return list(range(first, last + 1))
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError as e:
        raise ConfigValidationError([f"seeds: '{text}' inválido (use 7, 0..19 ou 1,4,9)"]) from e


class CloudMPCCli:
    """Aplicação de linha de comando"""

    def __init__(self):
        self.parser = self._build_parser()
        self._last_progress = -1

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog='cloudmpc', description=APP_NAME)
        parser.add_argument('--version', action='version', version=f'%(prog)s {APP_VERSION}')
        parser.add_argument('-v', '--verbose', action='store_true', help='Log em nível DEBUG')
        subparsers = parser.add_subparsers(dest='command', required=True)

        run = subparsers.add_parser('run', help='Executa experimentos em malha fechada')
        self._add_config_arguments(run)
        run.add_argument('--mode', choices=['fused', 'cloud', 'local', 'all'], default=None,
                         help='Modo de operação (padrão: o do experimento)')
        run.add_argument('--seed', type=int, default=None, help='Semente única')
        run.add_argument('--seeds', default=None, help='Sementes: 0..19 ou 1,4,9')
        run.add_argument('--verify-bounds-trials', type=int, default=None,
                         help='Também audita os limites com N tentativas')
        run.set_defaults(handler=self.cmd_run)

        verify = subparsers.add_parser('verify-bounds', help='Auditoria Monte Carlo dos limites de erro')
        self._add_config_arguments(verify)
        verify.add_argument('--trials', type=int, default=None, help='Número de sementes (padrão: do experimento)')
        verify.add_argument('--start-seed', type=int, default=0)
        verify.set_defaults(handler=self.cmd_verify_bounds)
        return parser

    @staticmethod
    def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
        parser.add_argument('--preset', choices=PresetLibrary.names(), default=None)
        parser.add_argument('--config', default=None, help='Documento JSON do experimento')
        parser.add_argument('--override', action='append', default=[], metavar='CHAVE=VALOR',
                            help='Override pontuado, p.ex. disturbance.omega=0.01')
        parser.add_argument('--out', default=None, help='Diretório de saída')

    def _on_progress(self, value: float, message: str) -> None:
        step = int(value) // 25
        if step != self._last_progress:
            self._last_progress = step
            logger.info("%3.0f%% %s", value, message)

    def _show_status(self, message: str) -> None:
        print(message)

    def _resolve(self, args: argparse.Namespace) -> ExperimentConfig:
        if not args.preset and not args.config:
            raise ConfigValidationError(["preset: informe --preset ou --config"])
        return resolve_config(args.preset, args.config, args.override)

    def _output_manager(self, args: argparse.Namespace, config: ExperimentConfig) -> OutputManager:
        return OutputManager(args.out or config.output_dir or get_default_output_dir())

    def cmd_run(self, args: argparse.Namespace) -> int:
        """Executa uma simulação ou um lote e grava os arquivos de saída."""
        config = self._resolve(args)
        if args.seeds is not None:
            seeds = parse_seeds(args.seeds)
        elif args.seed is not None:
            seeds = [args.seed]
        else:
            seeds = list(config.seeds)
        if args.mode == 'all':
            modes = list(SimMode)
        else:
            modes = [SimMode.parse(args.mode) if args.mode else config.mode]
        output = self._output_manager(args, config)

        if len(seeds) == 1 and len(modes) == 1:
            simulator = ClosedLoopSimulator(config)
            simulator.set_progress_callback(self._on_progress)
            trace = simulator.run(seeds[0], modes[0])
            counterfactuals = counterfactual_costs(trace, config)
            report = metrics(trace, config, counterfactuals)
            audit = audit_bounds(trace, config, counterfactuals) if trace.cloud_plan is not None else None
            output.write_trace(trace)
            output.write_counterfactuals(trace, counterfactuals)
            output.write_summary(config, trace, report, audit)
            self._show_status(
                f"{MESSAGES['run_done']}: modo {report.mode}, semente {report.seed}, "
                f"custo {report.total_cost:.4f}, MRE {report.mre:.4f}, "
                f"restrições {'✅' if report.terminal_ok else '❌'}"
            )
        else:
            batch = run_batch(config, seeds, modes, progress=self._on_progress)
            output.write_batch(config, batch, seeds)
            for mode, summary in batch.aggregates().items():
                cost = summary.get('total_cost', {}).get('mean', float('nan'))
                mre = summary.get('mre', {}).get('mean', float('nan'))
                self._show_status(f"📊 {mode}: custo médio {cost:.4f}, MRE médio {mre:.4f} ({summary['runs']} execuções)")

        code = EXIT_CODES['ok']
        if args.verify_bounds_trials is not None:
            code = self._verify(config, output, args.verify_bounds_trials, 0)
        output.write_manifest(config, seeds, args.config)
        self._show_status(f"{MESSAGES['files_written']} {output.output_dir}")
        return code

    def cmd_verify_bounds(self, args: argparse.Namespace) -> int:
        """Auditoria dos limites; código 4 se houver violação."""
        config = self._resolve(args)
        trials = args.trials if args.trials is not None else config.verify_trials
        output = self._output_manager(args, config)
        code = self._verify(config, output, trials, args.start_seed)
        output.write_manifest(config, list(range(args.start_seed, args.start_seed + trials)), args.config)
        return code

    def _verify(self, config: ExperimentConfig, output: OutputManager, trials: int, start_seed: int) -> int:
        audit = verify_bounds(config, trials, start_seed)
        output.write_verification(config, audit, trials)
        if trials == 0:
            self._show_status(MESSAGES['vacuous_pass'])
            return EXIT_CODES['ok']
        ratios = ", ".join(f"{kind}={ratio:.3f}" for kind, ratio in audit.worst_ratio.items())
        if audit.ok:
            self._show_status(f"{MESSAGES['bounds_ok']} ({audit.checks} verificações; piores razões: {ratios})")
            return EXIT_CODES['ok']
        first = audit.violations[0]
        self._show_status(
            f"{MESSAGES['bound_violation']} {len(audit.violations)} violações; primeira: {first.kind} "
            f"na semente {first.seed}, passo {first.step} (τ={first.tau}): "
            f"{first.measured:.6g} > {first.bound:.6g}"
        )
        return EXIT_CODES['bound_violation']

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """Interpreta os argumentos e traduz exceções em códigos de saída."""
        args = self.parser.parse_args(argv)
        try:
            return args.handler(args)
        except ConfigurationError as e:
            self._show_status(f"{MESSAGES['config_error']}\n{e}")
            return EXIT_CODES['config']
        except InfeasibleCloudError as e:
            self._show_status(f"{MESSAGES['infeasible_cloud']} {e}")
            return EXIT_CODES['infeasible_cloud']
        except BoundViolationError as e:
            self._show_status(f"{MESSAGES['bound_violation']} {e}")
            return EXIT_CODES['bound_violation']
        except NumericError as e:
            self._show_status(f"{MESSAGES['numeric_error']} {e}")
            return EXIT_CODES['error']


def main(argv: Optional[Sequence[str]] = None) -> int:
    return CloudMPCCli().run(argv)


if __name__ == "__main__":
    sys.exit(main())
