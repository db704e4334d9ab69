"""
Records kept in the node stores

Includes:

- ```DataItem```: a row with its version stamp, DHR copy and expiry
- ```RelayEntry```: key -> target nodes + DHR copy, held by responsible nodes (never any column data)
"""

import json
from dataclasses import dataclass, field, replace
from types import MappingProxyType

from dhr import DhrRequest


def encode_bytes(value):
    return value.decode('utf-8', 'surrogateescape')


def decode_bytes(text):
    return text.encode('utf-8', 'surrogateescape')


@dataclass(frozen=True)
class DataItem:
    """
    One stored row

    Attributes:
        key (str): Primary key
        columns (dict): column name -> bytes
        version (int): Write time of the coordinator in ns (monotonic per coordinator)
        origin: Coordinator that stamped the version (last-writer-wins tiebreak)
        dhr (DhrRequest): Copy of the item's requirements
        expiry (int): Absolute simulated time (ns) after which the item must be gone, None if it never expires
        op (str): Operation attempt that wrote this copy (used by rollbacks)
    """
    key: str
    columns: MappingProxyType = field(default_factory=dict, hash=False)
    version: int = 0
    origin: object = 0
    dhr: DhrRequest = field(default_factory=DhrRequest)
    expiry: int | None = None
    op: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'columns', MappingProxyType(dict(self.columns)))

    @property
    def stamp(self):
        return (self.version, str(self.origin))

    def newer_than(self, other):
        return other is None or self.stamp > other.stamp

    def size(self):
        """Payload bytes (key + column values), the unit of node load"""
        return len(self.key.encode('utf-8')) + sum(len(v) for v in self.columns.values())

    def merged(self, columns, version, origin, op, dhr=None, expiry=None):
        """A newer copy with ```columns``` written over the existing ones"""
        updated = dict(self.columns)
        updated.update(columns)
        return replace(self, columns=updated, version=version, origin=origin, op=op,
                       dhr=self.dhr if dhr is None else dhr,
                       expiry=self.expiry if dhr is None else expiry)

    def to_json(self):
        doc = {'key': self.key,
               'columns': {c: encode_bytes(v) for c, v in self.columns.items()},
               'version': self.version, 'origin': self.origin,
               'dhr': self.dhr.to_json(), 'op': self.op}
        if self.expiry is not None:
            doc['expiry'] = self.expiry
        return doc

    @classmethod
    def from_json(cls, doc):
        return cls(key=doc['key'],
                   columns={c: decode_bytes(v) for c, v in doc['columns'].items()},
                   version=doc['version'], origin=doc['origin'],
                   dhr=DhrRequest.from_json(doc.get('dhr')),
                   expiry=doc.get('expiry'), op=doc.get('op', ''))


@dataclass(frozen=True)
class RelayEntry:
    """
    Indirection record on a responsible node

    Attributes:
        key (str): Key of the redirected item
        targets (tuple): Nodes actually storing the item (non-empty, duplicate-free, ordered)
        dhr (DhrRequest): Copy of the item's requirements
        version (int): Version of the write that installed the entry
        origin: Coordinator of that write
        op (str): Operation attempt that installed the entry
    """
    key: str
    targets: tuple
    dhr: DhrRequest = field(default_factory=DhrRequest)
    version: int = 0
    origin: object = 0
    op: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'targets', tuple(self.targets))
        if not self.targets:
            raise ValueError(f'relay entry for {self.key!r} without targets')
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f'relay entry for {self.key!r} lists a target twice')

    @property
    def stamp(self):
        return (self.version, str(self.origin))

    def newer_than(self, other):
        return other is None or self.stamp > other.stamp

    def size(self):
        """Serialized bytes; depends on key, targets and DHRs only"""
        return len(json.dumps(self.to_json(), separators=(',', ':')).encode('utf-8'))

    def to_json(self):
        return {'key': self.key, 'targets': list(self.targets), 'dhr': self.dhr.to_json(),
                'version': self.version, 'origin': self.origin, 'op': self.op}

    @classmethod
    def from_json(cls, doc):
        return cls(key=doc['key'], targets=tuple(doc['targets']),
                   dhr=DhrRequest.from_json(doc.get('dhr')),
                   version=doc['version'], origin=doc['origin'], op=doc.get('op', ''))
