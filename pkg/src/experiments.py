"""
Built-in experiments

Includes:

- ```ExperimentSpec```: what to run (sweep, repeats, seeds, strategies, output directory)
- ```fig6```: load balance over insert throughput on the 2x2 DHR grid
- ```fig7```: load balance over the shift of regional demand, next to the a posteriori optimum
- ```hopcount```: query completion times of every operation with and without DHRs (uniform RTT)
- ```faults```: a crash at every protocol step of every operation, followed by a consistency scan
- ```run_experiment```: sweep x repeats (optionally in parallel), per-run and aggregate CSV files

Independent runs never share state, so a sweep can run in worker processes (```--jobs```).
"""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from config import ClusterConfig, make_strategy
from const import (AGGREGATE_COLUMNS, FAULT_CRASH, FAULTS_RUN_COLUMNS, FIG6_RUN_COLUMNS, FIG7_RUN_COLUMNS,
                   FIT_REGIONS, HOPCOUNT_RUN_COLUMNS, KIND_EQUALITY, OP_CREATE, OP_DELETE, OP_READ, OP_UPDATE)
from dhr import DhrRequest, DhrType, Registry
from errors import DhrkvError, ParamError
from faults import FaultRule
from loadsim import simulate_placement
from oracle import optimal_balance
from query import Delete, Insert, Select, Update
from recovery import op_matches
from settings import (DEFAULT_RTT_MS, FIG6_INSERTS, FIG6_RATES, FIG7_INSERTS, FIG7_RATE, FIG7_SHIFTS,
                      FULL_SCALE_INSERTS, HOPCOUNT_OPS, NS_PER_MS, REPEATS, SEED)
from simulator import Simulator
from stats import aggregate
from topology import NodeSpec, Topology
from workload import (fig6_throughput, fig7_fit, fit_capabilities, fit_node_counts, fit_registry,
                      grid_capabilities, grid_registry, item_key, payload_columns)

logger = logging.getLogger(__name__)


def derive_seeds(master, repeats):
    """```repeats``` independent seeds spawned from one master seed"""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master).spawn(repeats)]


@dataclass
class ExperimentSpec:
    """
    Attributes:
        name (str): fig6, fig7, hopcount or faults
        config (ClusterConfig): Cluster for the protocol level experiments (None: the experiment's own setup)
        sweep (dict): parameter -> values (None: the experiment's defaults)
        repeats (int): Runs per sweep point
        seeds (list): One seed per repeat (derived from ```master_seed``` when empty)
        strategies (list): Placement strategies to compare
        inserts (int): Inserts per run of the load balance experiments
        out (str): Output directory
        jobs (int): Worker processes
    """
    name: str
    config: ClusterConfig | None = None
    sweep: dict | None = None
    repeats: int = REPEATS
    seeds: list = field(default_factory=list)
    strategies: list = field(default_factory=lambda: ['balanced'])
    inserts: int | None = None
    out: str = 'results'
    jobs: int = 1
    master_seed: int = SEED

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ParamError(f'unknown experiment {self.name!r}, choose one of {sorted(EXPERIMENTS)}')
        if self.repeats < 1:
            raise ParamError('repeats must be at least 1')
        if self.seeds and len(self.seeds) < self.repeats:
            raise ParamError(f'{len(self.seeds)} seeds given for {self.repeats} repeats')
        if not self.seeds:
            self.seeds = derive_seeds(self.master_seed, self.repeats)
        self.seeds = list(self.seeds)[:self.repeats]
        if self.sweep is None:
            self.sweep = dict(EXPERIMENTS[self.name].sweep)
        if self.jobs < 1:
            raise ParamError('jobs must be at least 1')


############## fig6 / fig7 ##############

def fig6_run(strategy, rate, seed, inserts):
    try:
        result = simulate_placement(grid_capabilities(), grid_registry(), fig6_throughput(rate, inserts, seed),
                                    make_strategy(strategy), seed=seed)
    except DhrkvError as e:
        logger.error('fig6 %s rate=%d seed %d: %s', strategy, rate, seed, e)
        raise
    return {'experiment': 'fig6', 'strategy': strategy, 'rate': rate, 'seed': seed, 'inserts': inserts,
            'balance': result.balance}


def fig7_run(strategy, shift, seed, inserts):
    try:
        result = simulate_placement(fit_capabilities(), fit_registry(), fig7_fit(shift, inserts, seed, FIG7_RATE),
                                    make_strategy(strategy), seed=seed)
    except DhrkvError as e:
        logger.error('fig7 %s shift=%.2f seed %d: %s', strategy, shift, seed, e)
        raise
    per_region = {region: 0 for region in FIT_REGIONS}
    for req, count in result.demanded.items():
        for region in req.demands['location']:
            per_region[region] += count
    optimum = optimal_balance(fit_node_counts(), [per_region[r] for r in FIT_REGIONS])
    return {'experiment': 'fig7', 'strategy': strategy, 'shift': shift, 'seed': seed, 'inserts': inserts,
            'balance': result.balance, 'optimum': optimum, 'gap': result.balance - optimum}


############## hopcount ##############

def property_config(nodes=10, rtt_ms=DEFAULT_RTT_MS, replication=1):
    """Uniform RTT cluster where every node supports one distinct property"""
    registry = Registry([DhrType('property', KIND_EQUALITY, [f'p{i}' for i in range(nodes)])])
    topology = Topology.uniform([NodeSpec(i, 'uniform', {'property': f'p{i}'}) for i in range(nodes)], rtt_ms)
    return ClusterConfig(registry, topology, replication=replication)


def demand_of(nodes):
    return DhrRequest({'property': [f'p{n}' for n in nodes]})


def hopcount_run(strategy, seed, ops=HOPCOUNT_OPS, config=None):
    """
    Create, read, update and delete ```ops``` keys with and without DHRs

    The coordinator is neither responsible for the key nor eligible, so every hop crosses the network.
    DHR items demand three properties.
    """
    config = config or property_config()
    sim = Simulator(config, seed, make_strategy(strategy))
    sim.bootstrap()
    rng = np.random.default_rng(seed)
    one_way = config.topology.max_one_way_ns()
    columns = payload_columns()
    node_ids = config.topology.node_ids

    qcts = {}
    for dhr in (False, True):
        for i in range(ops):
            key = item_key(i, prefix='dhr-' if dhr else 'plain-')
            responsible = sim.ring.responsible_nodes(key, config.replication)
            others = [n for n in node_ids if n not in responsible]
            picks = [others[int(j)] for j in rng.choice(len(others), size=4, replace=False)]
            coordinator, eligible = picks[0], picks[1:]
            req = demand_of(eligible) if dhr else DhrRequest()
            for stmt in (Insert(key, columns, req), Select(key), Update(key, {'c0': b'y' * 20}), Delete(key)):
                reply = sim.execute(stmt, coordinator=coordinator)
                if not reply.ok:
                    raise DhrkvError(f'hopcount {stmt.op} of {key!r} failed: {reply.status} {reply.error}')
                qcts.setdefault((stmt.op, dhr), []).append(reply.qct)

    rows = []
    for op in (OP_CREATE, OP_READ, OP_UPDATE, OP_DELETE):
        for dhr in (False, True):
            values = qcts[(op, dhr)]
            mean = float(np.mean(values))
            rows.append({'experiment': 'hopcount', 'strategy': strategy, 'seed': seed, 'op': op, 'dhr': int(dhr),
                         'n': len(values), 'mean_qct_ms': mean / NS_PER_MS, 'hops': mean / one_way,
                         'point': f'{op}/{"dhr" if dhr else "plain"}'})
    return rows


############## faults ##############

FAULT_KEY = 'fault-key'


def fault_setup(seed, replication):
    """
    Cluster of ten single-property nodes and the demands of the tracked key

    Returns (simulator, coordinator, create demand, update demand)
    """
    config = property_config(replication=replication)
    sim = Simulator(config, seed, trace=True)
    sim.bootstrap()
    responsible = sim.ring.responsible_nodes(FAULT_KEY, replication)
    others = [n for n in config.topology.node_ids if n not in responsible]
    coordinator = others[0]
    rest = others[1:]
    width = replication + 1
    create_nodes = rest[:width]
    update_nodes = rest[width - 1:2 * width - 1]
    return sim, coordinator, demand_of(create_nodes), demand_of(update_nodes)


def fault_statement(op, create_req, update_req):
    columns = payload_columns()
    return {
        OP_CREATE: Insert(FAULT_KEY, columns, create_req),
        OP_READ: Select(FAULT_KEY),
        OP_UPDATE: Update(FAULT_KEY, {'c0': b'z' * 20}, update_req),
        OP_DELETE: Delete(FAULT_KEY),
    }[op]


def fault_scenario(op, seed, replication, rule=None):
    """
    Run ```op``` on the tracked key, optionally with a fault rule scoped to that operation

    Returns (simulator, ticket, coordinator)
    """
    sim, coordinator, create_req, update_req = fault_setup(seed, replication)
    if op != OP_CREATE:
        sim.execute(fault_statement(OP_CREATE, create_req, update_req), coordinator=coordinator)
    ticket = sim.submit(fault_statement(op, create_req, update_req), coordinator=coordinator)
    if rule is not None:
        rule.op = ticket
        sim.faults.add(rule)
    sim.settle()
    return sim, ticket, coordinator


def role_of(node, sim, coordinator, eligible):
    if node == coordinator:
        return 'coordinator'
    if node in sim.ring.responsible_nodes(FAULT_KEY, sim.config.replication):
        return 'responsible'
    if node in eligible:
        return 'target'
    return 'other'


def faults_run(seed, replication):
    """Crash the sender and the receiver of every message kind each operation exchanges"""
    rows = []
    for op in (OP_CREATE, OP_READ, OP_UPDATE, OP_DELETE):
        clean, ticket, coordinator = fault_scenario(op, seed, replication)
        kinds = list(dict.fromkeys(kind for _, kind, _, _, tag in clean.trace if op_matches(tag, ticket)))
        _, _, create_req, update_req = fault_setup(seed, replication)
        eligible = set(clean.client.capabilities.eligible_nodes(create_req))
        eligible |= set(clean.client.capabilities.eligible_nodes(update_req))

        for kind in kinds:
            for side in ('src', 'dst'):
                rule = FaultRule(FAULT_CRASH, kind=kind, victim=side)
                try:
                    sim, ticket, _ = fault_scenario(op, seed, replication, rule)
                except DhrkvError as e:
                    logger.error('faults %s %s@%s r=%d seed %d: %s', op, kind, side, replication, seed, e)
                    raise
                victims = sorted(sim.down, key=str)
                reply = sim.replies.get(ticket)
                status = 'none' if reply is None else (reply.error or reply.status)
                violations = sim.scan()
                if violations:
                    logger.warning('faults %s %s@%s r=%d: %d violations', op, kind, side, replication,
                                   len(violations))
                rows.append({
                    'experiment': 'faults', 'seed': seed, 'op': op,
                    'role': ','.join(role_of(v, sim, coordinator, eligible) for v in victims) or 'none',
                    'step': f'{kind}@{side}', 'replication': replication, 'status': status,
                    'violations': len(violations), 'strategy': 'balanced', 'point': f'{op}/r{replication}',
                })
    return rows


############## Orchestration ##############

@dataclass(frozen=True)
class Experiment:
    columns: list
    sweep: dict
    point: str
    metrics: list


EXPERIMENTS = {
    'fig6': Experiment(FIG6_RUN_COLUMNS, {'rate': FIG6_RATES}, 'rate', ['balance']),
    'fig7': Experiment(FIG7_RUN_COLUMNS, {'shift': FIG7_SHIFTS}, 'shift', ['balance', 'optimum', 'gap']),
    'hopcount': Experiment(HOPCOUNT_RUN_COLUMNS, {}, 'point', ['mean_qct_ms', 'hops']),
    'faults': Experiment(FAULTS_RUN_COLUMNS, {'replication': [1, 3]}, 'point', ['violations']),
}


def tasks(spec, full_scale=False):
    """(function, args) of every independent run"""
    if spec.name == 'fig6':
        inserts = spec.inserts or (FULL_SCALE_INSERTS if full_scale else FIG6_INSERTS)
        return [(fig6_run, (s, rate, seed, inserts))
                for s in spec.strategies for rate in spec.sweep['rate'] for seed in spec.seeds]
    if spec.name == 'fig7':
        inserts = spec.inserts or (FULL_SCALE_INSERTS if full_scale else FIG7_INSERTS)
        return [(fig7_run, (s, shift, seed, inserts))
                for s in spec.strategies for shift in spec.sweep['shift'] for seed in spec.seeds]
    if spec.name == 'hopcount':
        ops = spec.sweep.get('ops', [HOPCOUNT_OPS])[0]
        return [(hopcount_run, (s, seed, ops, spec.config)) for s in spec.strategies for seed in spec.seeds]
    return [(faults_run, (seed, r)) for r in spec.sweep['replication'] for seed in spec.seeds]


def call(task):
    func, args = task
    return func(*args)


def write_csv(path, columns, rows):
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns] if isinstance(row, dict) else row)


def run_experiment(spec, full_scale=False):
    """
    Run every task of ```spec``` and write '<name>_runs.csv' and '<name>_aggregate.csv' to ```spec.out```

    Returns (per-run rows, aggregate rows)
    """
    experiment = EXPERIMENTS[spec.name]
    work = tasks(spec, full_scale)
    logger.info('%s: %d runs, %d worker(s)', spec.name, len(work), spec.jobs)

    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(call, work))
    else:
        results = [call(task) for task in work]

    rows = []
    for result in results:
        rows += result if isinstance(result, list) else [result]

    aggregated = aggregate(rows, spec.name, experiment.point, experiment.metrics)
    os.makedirs(spec.out, exist_ok=True)
    write_csv(os.path.join(spec.out, f'{spec.name}_runs.csv'), experiment.columns, rows)
    write_csv(os.path.join(spec.out, f'{spec.name}_aggregate.csv'), AGGREGATE_COLUMNS, aggregated)
    return rows, aggregated
