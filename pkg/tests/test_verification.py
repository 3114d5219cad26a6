"""
Testes da auditoria de limites e dos lotes Monte Carlo
"""

import pytest

from core.errors import BoundViolationError, ConfigurationError
from core.experiment_config import resolve_config
from core.simulation import run_closed_loop
from core.verification import AuditConstants, BoundAudit, audit_bounds, run_batch, verify_bounds

FAULT_OVERRIDES = ['disturbance.kind="vertex"', 'disturbance.amplitude=0.5']


@pytest.fixture(scope='module')
def faulty_config():
    return resolve_config('example1', overrides=FAULT_OVERRIDES)


class TestAuditBounds:
    def test_example1_has_no_violations(self, example1_config):
        for seed in range(3):
            audit = audit_bounds(run_closed_loop(example1_config, 'fused', seed), example1_config)
            assert audit.ok, audit.violations[:3]
            assert audit.checks > 0

    def test_cloud_only_trace_audits_cloud_bounds(self, example1_config):
        audit = audit_bounds(run_closed_loop(example1_config, 'cloud', 0), example1_config)
        assert audit.ok
        # 10 passos com τ = t+1..N mais um custo por passo
        assert audit.checks == sum(10 - t for t in range(10)) + 10
        assert audit.worst_ratio['local_state'] == 0.0

    def test_degenerate_bounds_are_tight(self, degenerate_config):
        audit = audit_bounds(run_closed_loop(degenerate_config, 'fused', 0), degenerate_config)
        assert audit.ok

    def test_disturbance_above_omega_is_detected(self, faulty_config):
        audit = verify_bounds(faulty_config, trials=3)
        assert not audit.ok
        assert {violation.kind for violation in audit.violations} & {'local_state', 'cloud_state'}
        first = audit.violations[0]
        assert first.measured > first.bound

    def test_raise_on_violation(self, faulty_config):
        with pytest.raises(BoundViolationError) as info:
            verify_bounds(faulty_config, trials=3, raise_on_violation=True)
        assert info.value.seed >= 0 and info.value.step >= 0


class TestVerifyBounds:
    def test_zero_trials_passes(self, example1_config, caplog):
        audit = verify_bounds(example1_config, trials=0)
        assert audit.ok and audit.checks == 0
        assert caplog.records

    def test_negative_trials_rejected(self, example1_config):
        with pytest.raises(ConfigurationError):
            verify_bounds(example1_config, trials=-1)

    def test_example1_few_trials(self, example1_config):
        audit = verify_bounds(example1_config, trials=2, start_seed=10)
        assert audit.ok
        assert set(audit.to_dict()) == {'checks', 'diverged', 'violations', 'worst_ratio'}
        assert audit.diverged == 0


class TestBoundAudit:
    def test_tolerance_is_relative(self):
        audit = BoundAudit()
        audit._check('cloud_cost', 0, 0, 10, 100.0 + 0.5 * AuditConstants.RELATIVE_TOL * 101.0, 100.0)
        assert audit.ok
        audit._check('cloud_cost', 0, 1, 10, 100.0 + 2.0 * AuditConstants.RELATIVE_TOL * 101.0, 100.0)
        assert len(audit.violations) == 1

    def test_zero_bound_with_error_has_infinite_ratio(self):
        audit = BoundAudit()
        audit._check('local_state', 0, 0, 1, 1e-3, 0.0)
        assert audit.worst_ratio['local_state'] == float('inf')
        assert not audit.ok

    def test_merge(self):
        first, second = BoundAudit(), BoundAudit()
        first._check('cloud_state', 0, 0, 1, 0.5, 1.0)
        second._check('cloud_state', 1, 0, 1, 2.0, 1.0)
        first.merge(second)
        assert first.checks == 2
        assert len(first.violations) == 1
        assert first.worst_ratio['cloud_state'] == 2.0


class TestRunBatch:
    def test_aggregates_per_mode(self, example1_config):
        progress = []
        seen = []
        result = run_batch(example1_config, seeds=[0, 1], modes=['fused', 'local'], audit=True,
                           progress=lambda value, message: progress.append(value),
                           on_trace=lambda trace, report: seen.append((trace.mode.value, trace.seed)))
        assert len(result.runs) == 4
        assert seen == [('fused', 0), ('fused', 1), ('local', 0), ('local', 1)]
        assert progress[-1] == pytest.approx(100.0)
        aggregates = result.aggregates()
        assert set(aggregates) == {'fused', 'local'}
        assert aggregates['fused']['runs'] == 2
        assert aggregates['fused']['terminal_ok_rate'] == 1.0
        assert 'switch_match' in aggregates['fused']
        assert 'switch_match' not in aggregates['local']
        assert result.audit.ok

    def test_to_dict(self, degenerate_config):
        data = run_batch(degenerate_config, seeds=[0], modes=['cloud']).to_dict()
        assert len(data['runs']) == 1
        assert data['runs'][0]['mode'] == 'cloud'
        assert data['audit']['checks'] == 0


@pytest.mark.slow
class TestExample1Batches:
    def test_terminal_constraint_over_thousand_seeds(self, example1_config):
        result = run_batch(example1_config, seeds=range(1000), modes=['fused'])
        assert result.aggregates()['fused']['terminal_ok_rate'] == 1.0
        assert all(abs(report.terminal_norm) <= 2.5 + 1e-6 for report in result.runs)

    def test_bounds_hold_over_thousand_trials(self, example1_config):
        audit = verify_bounds(example1_config, trials=1000)
        assert audit.ok
        assert audit.diverged == 0
        assert audit.checks > 0

    def test_fused_not_worse_than_cloud_only(self, example1_config):
        """Média de 20 sementes: custo fused ≤ cloud e MRE fused na faixa ±15% de 1.5822"""
        aggregates = run_batch(example1_config, seeds=range(20), modes=['fused', 'cloud']).aggregates()
        assert aggregates['fused']['total_cost']['mean'] <= aggregates['cloud']['total_cost']['mean']
        assert aggregates['fused']['mre']['mean'] == pytest.approx(1.5822, rel=0.15)


@pytest.mark.slow
class TestLargerPresetBatches:
    def test_cart_pole_fused_metrics(self):
        config = resolve_config('example2')
        result = run_batch(config, seeds=[0], modes=['fused'], audit=True)
        report = result.runs[0]
        assert report.threshold_ok is not None
        assert 0.0 <= report.switch_match <= 1.0
        assert report.box_exits >= 0

    def test_vehicle_fused_rms_within_sole_modes(self):
        config = resolve_config('example3')
        result = run_batch(config, seeds=[0], modes=['fused', 'cloud', 'local'])
        rms = {report.mode: report.rms_position_error for report in result.runs}
        assert rms['fused'] <= max(rms['cloud'], rms['local']) + 1e-9
