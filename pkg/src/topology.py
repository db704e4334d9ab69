"""
Network topology of a simulated cluster

Includes:

- ```NodeSpec```: id, region and advertised capabilities of one node
- ```Topology```: the nodes plus an RTT matrix between regions, with the ```uniform``` and ```azure10``` presets

Messages between two nodes take RTT / 2 of their regions, a node reaches itself instantly.
Nodes sharing a region see the matrix diagonal (0 for azure10, the configured RTT for uniform).
"""

from dataclasses import dataclass, field

import numpy as np

from const import AZURE10_REGIONS, AZURE10_RTT
from errors import ConfigError
from settings import DEFAULT_RTT_MS, NS_PER_MS


@dataclass(frozen=True)
class NodeSpec:
    """
    Attributes:
        node_id: Node identifier
        region (str): Region, a row of the RTT matrix
        capabilities (dict): type id -> supported literal(s), as in the config file
    """
    node_id: object
    region: str
    capabilities: dict = field(default_factory=dict, hash=False)


class Topology:
    """
    Attributes:
        nodes (list): ```NodeSpec``` per node
        regions (list): Region names, in matrix order
        rtt (numpy.ndarray): Round trip times in ms between regions
    """

    def __init__(self, nodes, regions, rtt, symmetric=True):
        self.nodes = list(nodes)
        self.regions = list(regions)
        self.rtt = np.asarray(rtt, dtype=float)

        if not self.nodes:
            raise ConfigError('topology has no nodes')
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError('duplicate node ids in topology')
        if self.rtt.shape != (len(self.regions), len(self.regions)):
            raise ConfigError(f'rtt matrix is {self.rtt.shape}, expected {len(self.regions)}x{len(self.regions)}')
        if (self.rtt < 0).any():
            raise ConfigError('negative rtt in topology')
        if symmetric and not np.array_equal(self.rtt, self.rtt.T):
            raise ConfigError('rtt matrix declared symmetric but is not')

        index = {r: i for i, r in enumerate(self.regions)}
        for n in self.nodes:
            if n.region not in index:
                raise ConfigError(f'node {n.node_id} in unknown region {n.region!r}')
        self._row = {n.node_id: index[n.region] for n in self.nodes}

    def __len__(self):
        return len(self.nodes)

    @property
    def node_ids(self):
        return [n.node_id for n in self.nodes]

    def region_of(self, node_id):
        return self.regions[self._row[node_id]]

    def one_way_ns(self, src, dst):
        if src == dst:
            return 0
        return int(round(self.rtt[self._row[src], self._row[dst]] / 2 * NS_PER_MS))

    def max_one_way_ns(self):
        return int(round(self.rtt.max() / 2 * NS_PER_MS))

    def max_rtt_ms(self):
        return float(self.rtt.max())

    ############## Presets ##############

    @classmethod
    def uniform(cls, nodes, rtt_ms=DEFAULT_RTT_MS):
        """
        Every pair of nodes is ```rtt_ms``` apart

        Attributes:
            nodes (int | list): Node count (ids 0..n-1) or ```NodeSpec``` list
        """
        if isinstance(nodes, int):
            nodes = [NodeSpec(i, 'uniform') for i in range(nodes)]
        else:
            nodes = [NodeSpec(n.node_id, 'uniform', n.capabilities) for n in nodes]
        return cls(nodes, ['uniform'], [[rtt_ms]])

    @classmethod
    def azure10(cls, nodes=10):
        """Ten cloud regions, nodes assigned round robin unless they name their region"""
        if isinstance(nodes, int):
            nodes = [NodeSpec(i, AZURE10_REGIONS[i % len(AZURE10_REGIONS)]) for i in range(nodes)]
        else:
            nodes = [n if n.region in AZURE10_REGIONS
                     else NodeSpec(n.node_id, AZURE10_REGIONS[i % len(AZURE10_REGIONS)], n.capabilities)
                     for i, n in enumerate(nodes)]
        return cls(nodes, AZURE10_REGIONS, AZURE10_RTT)

    @classmethod
    def from_json(cls, doc):
        """
        Build a topology from the 'topology' section of a cluster config

        'nodes' is a count or a list of {id, region, capabilities}; 'rtt' is 'uniform', 'azure10' or
        {'regions': [...], 'matrix': [[...]]}
        """
        raw = doc.get('nodes', 10)
        if isinstance(raw, int):
            specs = raw
        else:
            specs = [NodeSpec(n['id'], n.get('region', 'uniform'), n.get('capabilities', {})) for n in raw]

        rtt = doc.get('rtt', 'uniform')
        if rtt == 'uniform':
            return cls.uniform(specs, doc.get('rtt_ms', DEFAULT_RTT_MS))
        if rtt == 'azure10':
            return cls.azure10(specs)
        if isinstance(rtt, dict):
            if isinstance(specs, int):
                regions = rtt['regions']
                specs = [NodeSpec(i, regions[i % len(regions)]) for i in range(specs)]
            return cls(specs, rtt['regions'], rtt['matrix'], doc.get('symmetric', True))
        raise ConfigError(f'unknown rtt preset {rtt!r}')

    def to_json(self):
        return {
            'nodes': [{'id': n.node_id, 'region': n.region, 'capabilities': n.capabilities} for n in self.nodes],
            'rtt': {'regions': self.regions, 'matrix': self.rtt.tolist()},
        }
