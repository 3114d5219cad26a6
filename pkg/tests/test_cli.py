"""
Testes da linha de comando e dos arquivos de saída
"""

import csv
import json

import numpy as np
import pytest

from cli import main, parse_seeds
from config import EXIT_CODES
from core.errors import ConfigValidationError
from core.experiment_config import SimMode
from core.output_manager import json_safe


def read_json(path):
    with open(path, 'r', encoding='utf-8') as file:
        return json.load(file)


class TestParseSeeds:
    def test_formats(self):
        assert parse_seeds("7") == [7]
        assert parse_seeds("0..3") == [0, 1, 2, 3]
        assert parse_seeds("1,4,9") == [1, 4, 9]

    def test_invalid(self):
        with pytest.raises(ConfigValidationError):
            parse_seeds("3..1")
        with pytest.raises(ConfigValidationError):
            parse_seeds("a,b")


class TestRunCommand:
    def test_single_run_writes_files(self, tmp_path):
        code = main(['run', '--preset', 'example1', '--seed', '3', '--out', str(tmp_path)])
        assert code == EXIT_CODES['ok']
        for name in ('trace.csv', 'counterfactuals.csv', 'summary.json', 'manifest.json'):
            assert (tmp_path / name).exists()

        with open(tmp_path / 'trace.csv', newline='', encoding='utf-8') as file:
            rows = list(csv.DictReader(file))
        assert len(rows) == 11
        assert float(rows[0]['x0']) == -10.0
        assert rows[-1]['terminal_ok'] == '1'

        summary = read_json(tmp_path / 'summary.json')
        assert summary['seed'] == 3 and summary['mode'] == 'fused'
        assert summary['cloud']['tightened'][0]['g'][0] == pytest.approx(2.040126, abs=1e-6)
        assert summary['audit']['violations'] == []

        manifest = read_json(tmp_path / 'manifest.json')
        assert manifest['seeds'] == [3]
        assert manifest['config_hash'] == summary['config_hash']
        assert set(manifest['outputs']) == {'trace.csv', 'counterfactuals.csv', 'summary.json'}

    def test_batch_over_modes(self, tmp_path):
        code = main(['run', '--preset', 'degenerate', '--mode', 'all', '--seeds', '0..1', '--out', str(tmp_path)])
        assert code == EXIT_CODES['ok']
        batch = read_json(tmp_path / 'batch.json')
        assert batch['seeds'] == [0, 1]
        assert len(batch['runs']) == 6
        assert set(batch['aggregates']) == {'fused', 'cloud', 'local'}
        assert not (tmp_path / 'trace.csv').exists()

    def test_override_changes_hash(self, tmp_path):
        main(['run', '--preset', 'degenerate', '--out', str(tmp_path / 'a')])
        main(['run', '--preset', 'degenerate', '--override', 'x0=[2.0, 0.0]', '--out', str(tmp_path / 'b')])
        first = read_json(tmp_path / 'a' / 'manifest.json')
        second = read_json(tmp_path / 'b' / 'manifest.json')
        assert first['config_hash'] != second['config_hash']
        assert second['resolved_config']['x0'] == [2.0, 0.0]

    def test_config_file(self, tmp_path):
        path = tmp_path / 'exp.json'
        path.write_text(json.dumps({'preset': 'degenerate', 'name': 'meu-teste'}))
        code = main(['run', '--config', str(path), '--mode', 'cloud', '--out', str(tmp_path / 'out')])
        assert code == EXIT_CODES['ok']
        assert read_json(tmp_path / 'out' / 'summary.json')['experiment'] == 'meu-teste'


class TestExitCodes:
    def test_missing_preset_and_config(self, tmp_path):
        assert main(['run', '--out', str(tmp_path)]) == EXIT_CODES['config']

    def test_invalid_override(self, tmp_path):
        code = main(['run', '--preset', 'example1', '--override', 'disturbance.omega=-1', '--out', str(tmp_path)])
        assert code == EXIT_CODES['config']

    def test_unknown_preset_rejected_by_parser(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(['run', '--preset', 'example9', '--out', str(tmp_path)])
        assert info.value.code == 2

    def test_infeasible_cloud(self, tmp_path):
        code = main(['run', '--preset', 'example1', '--override', 'delay.explicit_eps0=10.0',
                     '--out', str(tmp_path)])
        assert code == EXIT_CODES['infeasible_cloud']

    def test_verify_bounds_zero_trials(self, tmp_path):
        code = main(['verify-bounds', '--preset', 'example1', '--trials', '0', '--out', str(tmp_path)])
        assert code == EXIT_CODES['ok']
        verification = read_json(tmp_path / 'verification.json')
        assert verification['trials'] == 0 and verification['ok']

    def test_verify_bounds_passes(self, tmp_path):
        code = main(['verify-bounds', '--preset', 'example1', '--trials', '2', '--out', str(tmp_path)])
        assert code == EXIT_CODES['ok']
        assert read_json(tmp_path / 'manifest.json')['seeds'] == [0, 1]

    def test_verify_bounds_detects_fault(self, tmp_path):
        code = main(['verify-bounds', '--preset', 'example1', '--trials', '3',
                     '--override', 'disturbance.kind=vertex', '--override', 'disturbance.amplitude=0.5',
                     '--out', str(tmp_path)])
        assert code == EXIT_CODES['bound_violation']
        verification = read_json(tmp_path / 'verification.json')
        assert not verification['ok'] and verification['violations']


class TestOutputHelpers:
    def test_json_safe(self):
        data = json_safe({'a': np.array([1.0, np.inf]), 'b': np.int64(3), 'c': SimMode.CLOUD_ONLY, 1: (np.nan,)})
        assert data == {'a': [1.0, None], 'b': 3, 'c': 'cloud', '1': [None]}

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv('CLOUDMPC_OUTPUT_DIR', str(tmp_path / 'env'))
        code = main(['verify-bounds', '--preset', 'degenerate', '--trials', '0'])
        assert code == EXIT_CODES['ok']
        assert (tmp_path / 'env' / 'verification.json').exists()
