"""
End to end behaviour of the store: coexistence with DHR-free data, hop counts, crash tolerance and the
built-in experiments at small scale
"""

import csv
import itertools
import os

import pytest

from const import AGGREGATE_COLUMNS, FAULT_CRASH, OP_CREATE, OP_DELETE, OP_READ, OP_UPDATE
from dhr import DhrRequest
from errors import ConfigError, ParamError
from experiments import (EXPERIMENTS, ExperimentSpec, derive_seeds, fault_scenario, faults_run, fig6_run,
                         fig7_run, hopcount_run, run_experiment)
from faults import FaultRule
from items import RelayEntry
from query import Insert, Select
from settings import FIG6_RATES, FIG7_SHIFTS
from strategies.balanced import BalancedStrategy
from strategies.baseline import BaselineStrategy
from workload import payload_columns, uniform_crud


def test_seeds_are_derived_from_the_master_seed():
    assert derive_seeds(42, 3) == derive_seeds(42, 3)
    assert len(set(derive_seeds(42, 10))) == 10
    assert derive_seeds(42, 3) != derive_seeds(43, 3)


@pytest.mark.parametrize('kw', [{'name': 'fig8'}, {'name': 'fig6', 'repeats': 0},
                                {'name': 'fig6', 'repeats': 3, 'seeds': [1]}, {'name': 'fig6', 'jobs': 0}])
def test_invalid_experiment_specs(kw):
    with pytest.raises(ParamError):
        ExperimentSpec(**kw)


def test_spec_defaults():
    spec = ExperimentSpec('fig6', repeats=2)
    assert spec.sweep == {'rate': FIG6_RATES}
    assert len(spec.seeds) == 2


############## Coexistence ##############

def test_data_without_requirements_ignores_the_strategy(make_sim):
    arrivals = list(uniform_crud(30, seed=8, rate=2))
    balanced = make_sim(['DE', 'FR', 'UK', 'US'], replication=2, strategy=BalancedStrategy(), trace=True)
    baseline = make_sim(['DE', 'FR', 'UK', 'US'], replication=2, strategy=BaselineStrategy(), trace=True)
    balanced.run(arrivals)
    baseline.run(arrivals)
    assert balanced.trace == baseline.trace
    assert balanced.loads() == baseline.loads()
    assert not any(state.relay_store for state in balanced.nodes.values())


def test_relay_overhead_does_not_grow_with_the_payload(make_sim):
    overhead = []
    for size in (10, 10_000):
        sim = make_sim(['DE', 'FR', 'UK', 'US'])
        sim.execute(Insert('k', {'c0': b'x' * size}, DhrRequest({'location': {'US'}})))
        overhead.append(sum(state.relay_bytes() for state in sim.nodes.values()))
    assert overhead[0] == overhead[1] > 0


def test_coexistence_on_ten_nodes(make_sim):
    arrivals = list(uniform_crud(10_000, seed=9, rate=100))
    locations = ['DE', 'FR', 'UK', 'US'] * 2 + ['DE', 'FR']
    balanced = make_sim(locations, replication=3, strategy=BalancedStrategy(), trace=True)
    baseline = make_sim(locations, replication=3, strategy=BaselineStrategy(), trace=True)
    balanced.run(arrivals)
    baseline.run(arrivals)
    assert len(balanced.replies) == 10_000
    assert balanced.trace == baseline.trace
    assert balanced.loads() == baseline.loads()


@pytest.mark.parametrize('replication', [1, 2, 3])
def test_relay_overhead_is_the_same_for_both_payload_sizes(make_sim, replication):
    overhead = []
    for payload in (200, 400):
        sim = make_sim(['DE', 'DE', 'DE', 'US', 'US', 'US'], replication=replication)
        sim.execute(Insert('k', payload_columns(payload), DhrRequest({'location': {'US'}})))
        overhead.append([state.relay_bytes() for state in sim.nodes.values()])
    assert overhead[0] == overhead[1]
    assert sum(1 for size in overhead[0] if size) == replication


def test_relay_entry_grows_linearly_with_the_targets():
    dhr = DhrRequest({'location': {'US'}})
    sizes = [RelayEntry('k', tuple(range(r)), dhr, version=1, origin=0, op='c1/0').size() for r in range(1, 8)]
    steps = {b - a for a, b in zip(sizes, sizes[1:])}
    assert len(steps) == 1 and steps.pop() > 0


############## Hop counts ##############

def test_hop_counts_on_a_uniform_network():
    rows = hopcount_run('balanced', seed=5, ops=3)
    qct = {(row['op'], row['dhr']): row['mean_qct_ms'] for row in rows}
    assert qct == pytest.approx({
        (OP_CREATE, 0): 100, (OP_READ, 0): 100, (OP_UPDATE, 0): 100, (OP_DELETE, 0): 100,
        (OP_CREATE, 1): 100, (OP_READ, 1): 150, (OP_UPDATE, 1): 200, (OP_DELETE, 1): 150,
    })
    hops = {(row['op'], row['dhr']): row['hops'] for row in rows}
    assert hops[(OP_READ, 1)] == pytest.approx(3)
    assert all(row['n'] == 3 for row in rows)


def test_hopcount_experiment_files(tmp_path):
    spec = ExperimentSpec('hopcount', repeats=2, sweep={'ops': [2]}, out=str(tmp_path))
    rows, aggregated = run_experiment(spec)
    assert len(rows) == 2 * 8
    assert len(aggregated) == 8 * 2
    with open(tmp_path / 'hopcount_aggregate.csv', encoding='utf-8') as f:
        assert next(csv.reader(f)) == AGGREGATE_COLUMNS
    with open(tmp_path / 'hopcount_runs.csv', encoding='utf-8') as f:
        assert next(csv.reader(f)) == EXPERIMENTS['hopcount'].columns


############## Crash tolerance ##############

@pytest.mark.parametrize('replication', [1, 3])
def test_a_crash_at_any_step_leaves_no_inconsistency(replication):
    rows = faults_run(seed=11, replication=replication)
    assert {row['op'] for row in rows} == {OP_CREATE, OP_READ, OP_UPDATE, OP_DELETE}
    assert all(row['violations'] == 0 for row in rows)
    assert all(row['role'] != 'none' for row in rows)


@pytest.mark.parametrize('kind, side', [('UpdateAck', 'src'), ('MoveInstruct', 'src'), ('ReplicaAck', 'dst')])
def test_update_leaves_no_old_copies_when_the_mover_crashes(kind, side):
    sim, ticket, _ = fault_scenario(OP_UPDATE, 11, 3, FaultRule(FAULT_CRASH, kind=kind, victim=side))
    assert sim.down
    assert ticket in sim.replies
    assert sim.scan() == []


def test_replicas_survive_crashes(make_sim):
    sim = make_sim(['DE', 'DE', 'DE', 'FR'], replication=3)
    created = sim.execute(Insert('k', {'c0': b'v'}, DhrRequest({'location': {'DE'}})))
    assert sorted(created.targets) == [0, 1, 2]
    sim.crash(0)
    sim.crash(1)
    assert sim.execute(Select('k'), coordinator=3).columns == {'c0': b'v'}


def test_reads_survive_any_two_crashes(make_sim):
    locations = ['DE', 'DE', 'DE', 'FR', 'FR', 'FR']
    insert = Insert('k', {'c0': b'v'}, DhrRequest({'location': {'FR'}}))

    def cluster():
        sim = make_sim(locations, replication=3)
        return sim, sim.execute(insert).targets

    sim, targets = cluster()
    responsible = sim.nodes[0].responsible('k')
    pairs = set(itertools.combinations(sorted(responsible), 2)) | set(itertools.combinations(sorted(targets), 2))
    for pair in sorted(pairs):
        sim, _ = cluster()
        for node in pair:
            sim.crash(node)
        coordinator = min(set(sim.nodes) - set(pair))
        reply = sim.execute(Select('k'), coordinator=coordinator)
        assert reply.columns == {'c0': b'v'}, pair


############## Load balance ##############

def test_fit_run_reports_the_gap_to_the_optimum():
    row = fig7_run('balanced', 0.5, seed=1, inserts=2000)
    assert row['optimum'] >= 0
    assert row['gap'] == pytest.approx(row['balance'] - row['optimum'])


def test_failed_runs_are_logged_with_their_point(caplog):
    with pytest.raises(ConfigError):
        fig6_run('nearest', 100, 3, 10)
    with pytest.raises(ConfigError):
        fig7_run('nearest', 0.5, 4, 10)
    messages = [record.getMessage() for record in caplog.records if record.levelname == 'ERROR']
    assert messages[0].startswith('fig6 nearest rate=100 seed 3: ')
    assert messages[1].startswith('fig7 nearest shift=0.50 seed 4: ')


def desk_scale(tmp_path, name):
    spec = ExperimentSpec(name, repeats=3, out=str(tmp_path), jobs=os.cpu_count() or 1)
    _, aggregated = run_experiment(spec, full_scale=False)
    assert os.path.exists(tmp_path / f'{name}_aggregate.csv')
    by_metric = {}
    for _, strategy, point, metric, n, mean, low, high in aggregated:
        assert strategy == 'balanced' and n == 3
        assert low <= mean <= high
        by_metric.setdefault(metric, {})[point] = (mean, low, high)
    return by_metric


@pytest.mark.slow
def test_desk_scale_balance_over_throughput(tmp_path):
    balance = desk_scale(tmp_path, 'fig6')['balance']
    assert sorted(balance) == FIG6_RATES
    for rate, (mean, _, _) in balance.items():
        assert mean < 0.005, rate


@pytest.mark.slow
def test_desk_scale_gap_to_the_optimum(tmp_path):
    metrics = desk_scale(tmp_path, 'fig7')
    assert sorted(metrics['gap']) == FIG7_SHIFTS
    for shift, (mean, _, _) in metrics['gap'].items():
        assert -1e-9 <= mean < 0.0003, shift
    balance = [metrics['balance'][shift] for shift in FIG7_SHIFTS]
    for (_, low, _), (_, _, high) in zip(balance, balance[1:]):
        assert high >= low
