"""
Cluster configuration

Includes:

- ```CLUSTER_SCHEMA```: the JSON schema every cluster config is validated against
- ```ClusterConfig```: validated config with defaults from ```settings.py```
- ```STRATEGIES``` / ```make_strategy```: placement strategies by name
- ```resolve_seed```: --seed, else the PRADA_SEED environment variable, else ```settings.SEED```

A config file looks like

    {
        "registry": "registry.json",
        "topology": {"nodes": [{"id": 0, "region": "eu-west", "capabilities": {"location": "DE"}}], "rtt": "azure10"},
        "replication": 1,
        "gossip": {"sync_interval_ms": 1000, "load_refresh_ms": 60000},
        "recovery": {"ack_timeout_ms": 2000, "retries": 3, "expiry_sweep_ms": 1000},
        "strategy": "balanced",
        "faults": [],
        "jitter_ms": 0
    }

Relative registry paths are resolved against the config file's directory.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace

import jsonschema

from balance import GossipConfig
from dhr import Registry
from errors import ConfigError, InvalidReplicationFactor, RegistryError
from faults import FAULT_SCHEMA, FaultPlan
from settings import (ACK_TIMEOUT_MS, DEADLINE_GROWTH, DEFAULT_REGISTRY, DEFAULT_STRATEGY, EXPIRY_SWEEP_MS,
                      JITTER_MS, LOAD_REFRESH_MS, NS_PER_MS, REPLICATION, RETRIES, SEED, SEED_ENV,
                      SYNC_INTERVAL_MS, VNODES)
from strategies.balanced import BalancedStrategy
from strategies.baseline import BaselineStrategy
from strategies.random import RandomStrategy
from topology import Topology

logger = logging.getLogger(__name__)

STRATEGIES = {s.name: s for s in (BalancedStrategy, RandomStrategy, BaselineStrategy)}

CLUSTER_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'registry': {'type': ['string', 'array', 'object']},
        'topology': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'nodes': {
                    'oneOf': [
                        {'type': 'integer', 'minimum': 1},
                        {'type': 'array', 'minItems': 1, 'items': {
                            'type': 'object',
                            'required': ['id'],
                            'additionalProperties': False,
                            'properties': {
                                'id': {'type': ['string', 'integer']},
                                'region': {'type': 'string'},
                                'capabilities': {'type': 'object'},
                            },
                        }},
                    ],
                },
                'rtt': {
                    'oneOf': [
                        {'enum': ['uniform', 'azure10']},
                        {'type': 'object', 'required': ['regions', 'matrix'], 'additionalProperties': False,
                         'properties': {
                             'regions': {'type': 'array', 'minItems': 1, 'items': {'type': 'string'}},
                             'matrix': {'type': 'array', 'items': {'type': 'array', 'items': {'type': 'number'}}},
                         }},
                    ],
                },
                'rtt_ms': {'type': 'number', 'minimum': 0},
                'symmetric': {'type': 'boolean'},
            },
        },
        'replication': {'type': 'integer', 'minimum': 1},
        'vnodes': {'type': 'integer', 'minimum': 1},
        'gossip': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'sync_interval_ms': {'type': 'number', 'exclusiveMinimum': 0},
                'load_refresh_ms': {'type': 'number', 'exclusiveMinimum': 0},
            },
        },
        'recovery': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'ack_timeout_ms': {'type': 'number', 'exclusiveMinimum': 0},
                'retries': {'type': 'integer', 'minimum': 0},
                'expiry_sweep_ms': {'type': 'number', 'exclusiveMinimum': 0},
            },
        },
        'strategy': {'enum': sorted(STRATEGIES)},
        'faults': FAULT_SCHEMA,
        'jitter_ms': {'type': 'number', 'minimum': 0},
    },
}


def make_strategy(name):
    try:
        return STRATEGIES[name]()
    except KeyError:
        raise ConfigError(f'unknown strategy {name!r}, choose one of {sorted(STRATEGIES)}') from None


def resolve_seed(seed=None):
    """Master seed: explicit value, else the environment, else the default"""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f'{SEED_ENV}={env!r} is not an integer') from None
    return SEED


def ms(value):
    return int(round(value * NS_PER_MS))


@dataclass
class ClusterConfig:
    """
    Everything needed to build a simulated cluster (times in ns)

    Attributes:
        registry (Registry): DHR types
        topology (Topology): Nodes, regions and RTTs
        replication (int): Replication factor r
        vnodes (int): Tokens per node
        strategy (str): Placement strategy name
        gossip (GossipConfig): Gossip cadence
        ack_timeout (int): First deadline of an operation
        retries (int): Reissues before an operation fails
        expiry_sweep (int): Period of the expiry sweep
        jitter (int): Extra uniform one-way delay in [0, jitter)
        faults (list): Fault rules in JSON form
    """
    registry: Registry
    topology: Topology
    replication: int = REPLICATION
    vnodes: int = VNODES
    strategy: str = DEFAULT_STRATEGY
    gossip: GossipConfig = field(default_factory=GossipConfig)
    ack_timeout: int = ACK_TIMEOUT_MS * NS_PER_MS
    retries: int = RETRIES
    growth: int = DEADLINE_GROWTH
    expiry_sweep: int = EXPIRY_SWEEP_MS * NS_PER_MS
    jitter: int = ms(JITTER_MS)
    faults: list = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.replication <= len(self.topology):
            raise InvalidReplicationFactor(
                f'replication factor {self.replication} outside 1..{len(self.topology)}')
        if self.strategy not in STRATEGIES:
            raise ConfigError(f'unknown strategy {self.strategy!r}')

    @classmethod
    def from_json(cls, doc, base_dir=None):
        try:
            jsonschema.validate(instance=doc, schema=CLUSTER_SCHEMA)
        except jsonschema.ValidationError as e:
            path = '/'.join(str(p) for p in e.absolute_path) or '<root>'
            raise ConfigError(f'config invalid at {path}: {e.message}') from None

        registry_doc = doc.get('registry', DEFAULT_REGISTRY)
        try:
            if isinstance(registry_doc, str):
                if base_dir is not None and not os.path.isabs(registry_doc):
                    registry_doc = os.path.join(base_dir, registry_doc)
                registry = Registry.load(registry_doc)
            else:
                registry = Registry.from_json(registry_doc)
        except (OSError, RegistryError) as e:
            raise ConfigError(f'registry: {e}') from None

        gossip = doc.get('gossip', {})
        recovery = doc.get('recovery', {})
        return cls(
            registry=registry,
            topology=Topology.from_json(doc.get('topology', {})),
            replication=doc.get('replication', REPLICATION),
            vnodes=doc.get('vnodes', VNODES),
            strategy=doc.get('strategy', DEFAULT_STRATEGY),
            gossip=GossipConfig(ms(gossip.get('sync_interval_ms', SYNC_INTERVAL_MS)),
                                ms(gossip.get('load_refresh_ms', LOAD_REFRESH_MS))),
            ack_timeout=ms(recovery.get('ack_timeout_ms', ACK_TIMEOUT_MS)),
            retries=recovery.get('retries', RETRIES),
            expiry_sweep=ms(recovery.get('expiry_sweep_ms', EXPIRY_SWEEP_MS)),
            jitter=ms(doc.get('jitter_ms', JITTER_MS)),
            faults=list(doc.get('faults', [])),
        )

    @classmethod
    def load(cls, path, **overrides):
        """Read a config file; keyword arguments that are not None override its values"""
        try:
            with open(path, encoding='utf-8') as f:
                doc = json.load(f)
        except OSError as e:
            raise ConfigError(f'cannot read config {path}: {e.strerror}') from None
        except json.JSONDecodeError as e:
            raise ConfigError(f'{path}: {e}') from None
        config = cls.from_json(doc, os.path.dirname(os.path.abspath(path)))
        logger.info('loaded %s: %d nodes, r=%d, strategy %s', path, len(config.topology), config.replication,
                    config.strategy)
        return config.with_overrides(**overrides)

    def with_overrides(self, **overrides):
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    def fault_plan(self):
        return FaultPlan.from_json(self.faults)
