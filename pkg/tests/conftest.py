"""
Shared fixtures: registries, small clusters and seeds
"""

import numpy as np
import pytest

from config import ClusterConfig
from dhr import DhrType, NodeCapabilities, Registry
from experiments import property_config
from simulator import Simulator
from topology import NodeSpec, Topology

SEED = 7


@pytest.fixture(scope='session')
def registry():
    return Registry([
        DhrType('location', 'equality', ['DE', 'FR', 'UK', 'US']),
        DhrType('encryption', 'threshold', [0, 128, 192, 256], aliases={'AES-128': 128, 'AES-256': 256}),
        DhrType('max-lifetime', 'threshold', [60, 3600, 86400], unit='s', expires=True),
        DhrType('medium', 'equality', ['hdd', 'ssd']),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope='session')
def caps(registry):
    """Build capabilities from plain dicts"""
    def build(node_id, **supported):
        return NodeCapabilities.build(node_id, {k.replace('_', '-'): v for k, v in supported.items()}, registry)
    return build


def location_config(registry, locations, replication=1, rtt_ms=100, **kw):
    """One node per entry of ```locations``` (a str or a dict of capabilities)"""
    nodes = []
    for i, loc in enumerate(locations):
        capabilities = loc if isinstance(loc, dict) else {'location': loc, 'encryption': 256, 'max-lifetime': 86400}
        nodes.append(NodeSpec(i, 'uniform', capabilities))
    return ClusterConfig(registry, Topology.uniform(nodes, rtt_ms), replication=replication, **kw)


@pytest.fixture
def make_sim(registry):
    """Bootstrapped simulator over nodes with the given locations"""
    def make(locations, replication=1, seed=SEED, strategy=None, trace=False, **kw):
        sim = Simulator(location_config(registry, locations, replication, **kw), seed, strategy, trace=trace)
        sim.bootstrap()
        return sim
    return make


@pytest.fixture
def property_sim():
    """Bootstrapped simulator over ten nodes that each support one distinct property"""
    def make(replication=1, seed=SEED, strategy=None, trace=False):
        sim = Simulator(property_config(replication=replication), seed, strategy, trace=trace)
        sim.bootstrap()
        return sim
    return make
