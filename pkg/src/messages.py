"""
Typed protocol messages exchanged between node state machines

Every message names its sender (```src```), receiver (```dst```) and the operation attempt it belongs to (```op```).
Messages answering a coordinator also carry its id in ```coordinator```.

Includes:

- create: ```Write``` / ```WriteAck``` (standard path), ```TargetWrite``` / ```TargetAck```, ```RelayWrite``` / ```RelayAck```
- read: ```Read```, ```ForwardRead```, ```ReadReply```
- update: ```Update``` / ```UpdateAck```, ```TargetUpdate```, ```MoveInstruct```, ```MoveData```, ```ReplicaAck```
- delete: ```Delete``` / ```DeleteAck```, ```TargetDelete``` / ```TargetDeleteAck```
- repair: ```Rollback```, ```Cleanup```, ```Prune```, ```BroadcastDelete```, ```DelegatedDelete```
- background: ```CapabilityAnnounce```, ```GossipSyn```, ```GossipAck```
- local effects that are not messages: ```Timer``` and ```ClientReply```
"""

import json
from dataclasses import dataclass, field, fields
from functools import cached_property
from types import MappingProxyType

from items import encode_bytes


def encode(value):
    """JSON-ready form of a message field"""
    if hasattr(value, 'to_json'):
        return value.to_json()
    if isinstance(value, bytes):
        return encode_bytes(value)
    if isinstance(value, (dict, MappingProxyType)):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted((encode(v) for v in value), key=str)
    return value


@dataclass(frozen=True, kw_only=True)
class Message:
    src: object
    dst: object
    op: str = ''

    background = False  # gossip and announcements, not part of any operation

    @property
    def kind(self):
        return type(self).__name__

    def to_json(self):
        return {'kind': self.kind, **{f.name: encode(getattr(self, f.name)) for f in fields(self)}}

    @cached_property
    def nbytes(self):
        """Serialized size in bytes"""
        return len(json.dumps(self.to_json(), separators=(',', ':')).encode('utf-8'))


############## Create ##############

@dataclass(frozen=True, kw_only=True)
class Write(Message):
    item: object
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class WriteAck(Message):
    key: str


@dataclass(frozen=True, kw_only=True)
class TargetWrite(Message):
    """```relay``` is set when the target is also responsible and keeps the entry itself"""
    item: object
    relay: object = None
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class TargetAck(Message):
    key: str
    ok: bool = True


@dataclass(frozen=True, kw_only=True)
class RelayWrite(Message):
    entry: object
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class RelayAck(Message):
    key: str
    targets: tuple = ()
    released: tuple = ()


############## Read ##############

@dataclass(frozen=True, kw_only=True)
class Read(Message):
    key: str
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class ForwardRead(Message):
    key: str
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class ReadReply(Message):
    key: str
    found: bool
    item: object = None
    from_responsible: bool = True


############## Update ##############

@dataclass(frozen=True, kw_only=True)
class Update(Message):
    """
    Sent to every responsible node

    ```dhr``` is None when the existing requirements are kept, ```proposal``` holds the targets the coordinator
    selected for the new requirements
    """
    key: str
    columns: MappingProxyType = field(default_factory=dict)
    dhr: object = None
    proposal: tuple | None = None
    version: int
    origin: object
    mover: object
    responsible: tuple
    attempt: int = 0
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class UpdateAck(Message):
    key: str
    found: bool
    targets: tuple | None = None  # None on the standard path
    moved: tuple = ()


@dataclass(frozen=True, kw_only=True)
class TargetUpdate(Message):
    key: str
    columns: MappingProxyType = field(default_factory=dict)
    dhr: object
    expiry: int | None = None
    version: int
    origin: object
    responsible: tuple
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class MoveInstruct(Message):
    """Asks an old target to apply the update and copy the item to the fresh targets"""
    key: str
    columns: MappingProxyType = field(default_factory=dict)
    dhr: object
    expiry: int | None = None
    version: int
    origin: object
    fresh: tuple
    keep: bool  # the source stays a target
    responsible: tuple
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class MoveData(Message):
    item: object
    responsible: tuple
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class ReplicaAck(Message):
    key: str
    version: int


############## Delete ##############

@dataclass(frozen=True, kw_only=True)
class Delete(Message):
    key: str
    version: int
    coordinator: object


@dataclass(frozen=True, kw_only=True)
class DeleteAck(Message):
    key: str
    found: bool
    forwarded: tuple = ()


@dataclass(frozen=True, kw_only=True)
class TargetDelete(Message):
    """```coordinator``` is None when nobody waits for the outcome (superseded or released copies)"""
    key: str
    version: int
    coordinator: object = None


@dataclass(frozen=True, kw_only=True)
class TargetDeleteAck(Message):
    key: str
    found: bool


############## Repair ##############

@dataclass(frozen=True, kw_only=True)
class Rollback(Message):
    """Drop every copy and relay entry written by ```op``` (or any attempt of it)"""
    key: str


@dataclass(frozen=True, kw_only=True)
class Cleanup(Message):
    """Abort or settle an interrupted update at a responsible node"""
    key: str
    version: int
    candidates: tuple = ()


@dataclass(frozen=True, kw_only=True)
class Prune(Message):
    """Drop an unreferenced copy unless this node is in ```keep``` or the copy is newer than ```version```"""
    key: str
    keep: tuple
    version: int


@dataclass(frozen=True, kw_only=True)
class BroadcastDelete(Message):
    key: str
    version: int


@dataclass(frozen=True, kw_only=True)
class DelegatedDelete(Message):
    """A node asks another one to coordinate the delete of an expired item"""
    key: str


############## Background ##############

@dataclass(frozen=True, kw_only=True)
class CapabilityAnnounce(Message):
    caps: object
    seq: int

    background = True


@dataclass(frozen=True, kw_only=True)
class GossipSyn(Message):
    reported: MappingProxyType = field(default_factory=dict)

    background = True


@dataclass(frozen=True, kw_only=True)
class GossipAck(Message):
    reported: MappingProxyType = field(default_factory=dict)

    background = True


# replies a node hands over to its coordinator role
COORDINATOR_BOUND = (WriteAck, TargetAck, RelayAck, ReadReply, UpdateAck, DeleteAck, TargetDeleteAck)


############## Local effects ##############

@dataclass(frozen=True)
class Timer:
    """
    A timer set by a node (or by the client when ```node``` is None)

    Attributes:
        node: Owner of the timer
        kind (str): One of the ```TIMER_*``` constants
        fire_at (int): Absolute simulated time in ns
        data: Kind specific payload (e.g. the op id of a deadline)
    """
    node: object
    kind: str
    fire_at: int
    data: object = None


@dataclass(frozen=True)
class ClientReply:
    """A finished operation on its way back to the client attached to ```coordinator```"""
    coordinator: object
    ticket: object
    reply: object
