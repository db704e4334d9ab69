"""
Consistent hash ring of the partitioner

Keys are hashed with murmur3 (64 bit, unsigned) and owned by the first token clockwise at or after their hash
"""

import mmh3
from sortedcontainers import SortedList

from errors import ConfigError, InvalidReplicationFactor

RING_SIZE = 2**64


def hash_key(key):
    """64 bit unsigned murmur3 hash of a key (str keys are hashed as UTF-8)"""
    if isinstance(key, str):
        key = key.encode('utf-8')
    return mmh3.hash64(key, signed=False)[0]


class TokenRing:
    """
    Sorted (token, node) pairs

    Attributes:
        tokens (SortedList): (token, node_id) pairs sorted by token
        nodes (list): Distinct node ids in the order they were added
    """

    def __init__(self, pairs=()):
        self.tokens = SortedList()
        self.nodes = []
        self._seen = set()
        for token, node_id in pairs:
            self.add(token, node_id)

    def add(self, token, node_id):
        if not 0 <= token < RING_SIZE:
            raise ConfigError(f'token {token} outside the 64 bit ring')
        if token in self._seen:
            raise ConfigError(f'duplicate token {token}')
        self._seen.add(token)
        self.tokens.add((token, node_id))
        if node_id not in self.nodes:
            self.nodes.append(node_id)

    def __len__(self):
        return len(self.tokens)

    @classmethod
    def evenly_spaced(cls, node_ids, vnodes=1):
        """Tokens equally distributed over the key space, node positions interleaved round robin"""
        node_ids = list(node_ids)
        if not node_ids:
            raise ConfigError('a ring needs at least one node')
        count = len(node_ids) * vnodes
        return cls((i * RING_SIZE // count, node_ids[i % len(node_ids)]) for i in range(count))

    @classmethod
    def hashed(cls, node_ids, vnodes=1):
        """Tokens placed by hashing '<node>-<i>' (the usual virtual node scheme)"""
        return cls((hash_key(f'{node_id}-{i}'), node_id) for node_id in node_ids for i in range(vnodes))

    def responsible_for_token(self, token, r=1):
        """The ```r``` distinct nodes met walking clockwise from ```token```"""
        if not 1 <= r <= len(self.nodes):
            raise InvalidReplicationFactor(f'replication factor {r} outside 1..{len(self.nodes)}')
        idx = self.tokens.bisect_left((token,))
        result = []
        for step in range(len(self.tokens)):
            node_id = self.tokens[(idx + step) % len(self.tokens)][1]
            if node_id not in result:
                result.append(node_id)
                if len(result) == r:
                    break
        return result

    def responsible_nodes(self, key, r=1):
        """
        Responsible nodes of a key, in clockwise ring order

        The result for ```r``` is always a prefix of the result for any larger ```r```
        """
        return self.responsible_for_token(hash_key(key), r)

    def to_json(self):
        return [[token, node_id] for token, node_id in self.tokens]

    @classmethod
    def from_json(cls, doc):
        return cls((token, node_id) for token, node_id in doc)
