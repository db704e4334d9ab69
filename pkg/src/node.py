"""
Per-node state machine of the store

Includes:

- ```NodeState```: ring view, data / relay / target stores, capability replica and load view of one node
- ```local_apply```: the transition of a node on an incoming message
- ```on_timer```: periodic gossip, load refresh and expiry sweeps
- ```capability_bootstrap``` and ```snapshot```

A ```NodeState``` has a single owner. Transitions mutate it in place and return the outbound effects
(messages, timers, client replies); nothing else touches it.
"""

import logging
from dataclasses import dataclass

from balance import GossipConfig, LoadView, gossip_round, on_gossip_ack, on_gossip_syn
from const import TIMER_DEADLINE, TIMER_EXPIRY, TIMER_GOSSIP, TIMER_LOAD_REFRESH
from dhr import CapabilityStore, node_is_eligible
from items import RelayEntry
from messages import (COORDINATOR_BOUND, BroadcastDelete, CapabilityAnnounce, Cleanup, Delete, DeleteAck,
                      DelegatedDelete, ForwardRead, GossipAck, GossipSyn, MoveData, MoveInstruct, Prune,
                      Read, ReadReply, RelayAck, RelayWrite, ReplicaAck, Rollback, TargetAck, TargetDelete,
                      TargetDeleteAck, TargetUpdate, TargetWrite, Timer, Update, UpdateAck, Write, WriteAck)
from recovery import expire_items, op_matches
from settings import EXPIRY_SWEEP_MS, NS_PER_MS, NS_PER_S

logger = logging.getLogger(__name__)


@dataclass
class PendingMove:
    """
    An update a responsible node waits to commit

    Attributes:
        op (str): Update attempt
        version (int): Version written by the update
        origin: Coordinator of the update
        coordinator: Where to send the relay ack
        targets (tuple): Targets after the update
        previous (tuple): Targets before the update (empty when the item lived in the data store)
        dhr (DhrRequest): Requirements after the update
        mover (bool): This node drives the data movement
    """
    op: str
    version: int
    origin: object
    coordinator: object
    targets: tuple
    previous: tuple
    dhr: object
    mover: bool

    @property
    def released(self):
        return tuple(t for t in self.previous if t not in self.targets)


class NodeState:
    """
    Everything one node knows and stores

    Attributes:
        node_id: This node
        ring (TokenRing): Partitioner view
        registry (Registry): Known DHR types
        replication (int): Replication factor r
        capabilities (NodeCapabilities): What this node supports
        capability_replica (CapabilityStore): Local replica of the cluster's capability store
        load_view (LoadView): Gossiped loads + estimators
        data_store (dict): key -> DataItem held as responsible node (no DHRs)
        relay_store (dict): key -> RelayEntry
        target_store (dict): key -> DataItem redirected to this node
        pending_moves (dict): key -> PendingMove
        released (dict): key -> old targets of the last committed update, pruned by a later cleanup
        coordinator (Coordinator): The coordinator role of this node (attached by the simulator)
        rng (numpy.random.Generator): This node's random source
    """

    def __init__(self, node_id, ring, registry, replication, capabilities, rng=None,
                 gossip=None, expiry_sweep=EXPIRY_SWEEP_MS * NS_PER_MS, expiry_retry=None):
        self.node_id = node_id
        self.ring = ring
        self.registry = registry
        self.replication = replication
        self.capabilities = capabilities
        self.capability_replica = CapabilityStore(registry)
        self.load_view = LoadView(node_id)
        self.gossip = gossip or GossipConfig()
        self.expiry_sweep = expiry_sweep
        self.expiry_retry = expiry_retry if expiry_retry is not None else 30 * expiry_sweep

        self.data_store = {}
        self.relay_store = {}
        self.target_store = {}
        self.pending_moves = {}
        self.replica_acks = {}  # (key, op) -> targets that confirmed
        self.released = {}  # key -> targets the last committed update left behind
        self.expiry_sent = {}  # key -> time of the last delegated delete
        self.announce_seq = 0

        self.coordinator = None
        self.rng = rng

    def __str__(self):
        return (f'Node {self.node_id}: {len(self.data_store)} data, {len(self.relay_store)} relay, '
                f'{len(self.target_store)} target')

    def responsible(self, key):
        return self.ring.responsible_nodes(key, self.replication)

    def complies(self, dhr):
        return node_is_eligible(self.capabilities, dhr, self.registry)

    def eligible(self, dhr, among=None):
        return self.capability_replica.eligible_nodes(dhr, among)

    def load(self):
        """Stored payload bytes"""
        return (sum(item.size() for item in self.data_store.values())
                + sum(item.size() for item in self.target_store.values()))

    def relay_bytes(self):
        """Bytes spent on indirection"""
        return sum(entry.size() for entry in self.relay_store.values())


############## Store helpers ##############

def store_target_copy(state, item):
    current = state.target_store.get(item.key)
    if item.newer_than(current):
        state.target_store[item.key] = item
        return True
    return False


def install_relay(state, entry):
    """
    Keep ```entry``` if it is newer than the current one

    A data copy of the key is dropped, and targets the older entry pointed to are told to delete
    """
    current = state.relay_store.get(entry.key)
    if not entry.newer_than(current):
        return []
    state.relay_store[entry.key] = entry

    data = state.data_store.get(entry.key)
    if data is not None and data.version <= entry.version:
        del state.data_store[entry.key]

    if current is None:
        return []
    return [TargetDelete(src=state.node_id, dst=t, op=entry.op, key=entry.key, version=entry.version)
            for t in current.targets if t not in entry.targets]


def to_responsible(state, msg, key, version, responsible):
    return [ReplicaAck(src=state.node_id, dst=n, op=msg.op, key=key, version=version) for n in responsible]


def target_ack(state, msg, key, ok=True):
    return TargetAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, ok=ok)


############## Create ##############

def on_write(state, msg, now):
    item = msg.item
    effects = []

    entry = state.relay_store.get(item.key)
    if entry is not None and item.newer_than(entry):
        # a plain write supersedes an earlier redirected one
        del state.relay_store[item.key]
        effects += [TargetDelete(src=state.node_id, dst=t, op=msg.op, key=item.key, version=item.version)
                    for t in entry.targets]

    if item.newer_than(state.data_store.get(item.key)):
        state.data_store[item.key] = item
    effects.append(WriteAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=item.key))
    return effects


def on_target_write(state, msg, now):
    item = msg.item
    if not state.complies(item.dhr):
        logger.warning('%.1fms node %s refuses %r: requirements not supported', now / NS_PER_MS,
                       state.node_id, item.key)
        return [target_ack(state, msg, item.key, ok=False)]

    store_target_copy(state, item)
    effects = []
    if msg.relay is not None:
        effects += install_relay(state, msg.relay)
    data = state.data_store.get(item.key)
    if data is not None and data.version <= item.version:
        del state.data_store[item.key]
    effects.append(target_ack(state, msg, item.key))
    return effects


def on_relay_write(state, msg, now):
    entry = msg.entry
    effects = install_relay(state, entry)
    copy = state.target_store.get(entry.key)
    if copy is not None and state.node_id not in entry.targets and copy.version <= entry.version:
        del state.target_store[entry.key]
    effects.append(RelayAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=entry.key,
                            targets=entry.targets))
    return effects


############## Read ##############

def on_read(state, msg, now):
    key = msg.key
    item = state.data_store.get(key) or state.target_store.get(key)
    if item is not None:
        return [ReadReply(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=True, item=item)]

    entry = state.relay_store.get(key)
    if entry is not None:
        return [ForwardRead(src=state.node_id, dst=t, op=msg.op, key=key, coordinator=msg.coordinator)
                for t in entry.targets]

    return [ReadReply(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=False)]


def on_forward_read(state, msg, now):
    item = state.target_store.get(msg.key)
    return [ReadReply(src=state.node_id, dst=msg.coordinator, op=msg.op, key=msg.key,
                      found=item is not None, item=item, from_responsible=False)]


############## Update ##############

def expiry_of(state, dhr, version):
    lifetime = dhr.lifetime(state.registry)
    return None if lifetime is None else version + lifetime * NS_PER_S


def on_update(state, msg, now):
    key = msg.key
    data = state.data_store.get(key)
    entry = state.relay_store.get(key)
    if data is None and entry is None:
        return [UpdateAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=False)]

    if entry is None and msg.dhr is None:
        # standard path: in place, no requirements involved
        if msg.version > data.version:
            state.data_store[key] = data.merged(msg.columns, msg.version, msg.origin, msg.op)
        return [UpdateAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=True)]

    if entry is None:
        previous = ()
        dhr = msg.dhr
        targets = tuple(msg.proposal)
    else:
        previous = entry.targets
        dhr = entry.dhr if msg.dhr is None else msg.dhr
        still_fine = all(state.capability_replica.get(t) is not None
                         and node_is_eligible(state.capability_replica.get(t), dhr, state.registry)
                         for t in previous)
        targets = previous if msg.dhr is None or still_fine or not msg.proposal else tuple(msg.proposal)

    mover = msg.mover == state.node_id
    state.pending_moves[key] = PendingMove(op=msg.op, version=msg.version, origin=msg.origin,
                                           coordinator=msg.coordinator, targets=targets, previous=previous,
                                           dhr=dhr, mover=mover)
    fresh = tuple(t for t in targets if t not in previous)
    effects = [UpdateAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=True,
                         targets=targets, moved=fresh)]

    if mover:
        new_dhr = msg.dhr  # None keeps the requirements (and expiry) of the copies
        expiry = expiry_of(state, msg.dhr, msg.version) if msg.dhr is not None else None
        common = dict(src=state.node_id, op=msg.op, key=key, columns=msg.columns, version=msg.version,
                      origin=msg.origin, responsible=msg.responsible, coordinator=msg.coordinator)

        if entry is None:
            item = data.merged(msg.columns, msg.version, msg.origin, msg.op, dhr=dhr,
                               expiry=expiry_of(state, dhr, msg.version))
            effects += [MoveData(src=state.node_id, dst=t, op=msg.op, item=item, responsible=msg.responsible,
                                 coordinator=msg.coordinator) for t in targets]
        else:
            kept = [t for t in targets if t in previous]
            source = None
            if fresh:
                pool = kept or list(previous)
                source = pool[msg.attempt % len(pool)]
                effects.append(MoveInstruct(dst=source, dhr=new_dhr, expiry=expiry, fresh=fresh,
                                            keep=source in targets, **common))
            effects += [TargetUpdate(dst=t, dhr=new_dhr, expiry=expiry, **common)
                        for t in kept if t != source]

    return effects + check_commit(state, key)


def on_target_update(state, msg, now):
    copy = state.target_store.get(msg.key)
    if copy is None:
        return [target_ack(state, msg, msg.key, ok=False)]
    if msg.version > copy.version:
        state.target_store[msg.key] = copy.merged(msg.columns, msg.version, msg.origin, msg.op,
                                                  dhr=msg.dhr, expiry=msg.expiry)
    return [target_ack(state, msg, msg.key)] + to_responsible(state, msg, msg.key, msg.version, msg.responsible)


def on_move_instruct(state, msg, now):
    copy = state.target_store.get(msg.key)
    if copy is None:
        logger.warning('%.1fms node %s asked to move %r but holds no copy', now / NS_PER_MS,
                       state.node_id, msg.key)
        return [target_ack(state, msg, msg.key, ok=False)]

    item = copy.merged(msg.columns, msg.version, msg.origin, msg.op, dhr=msg.dhr, expiry=msg.expiry)
    effects = []
    if msg.keep:
        store_target_copy(state, item)
        effects.append(target_ack(state, msg, msg.key))
        effects += to_responsible(state, msg, msg.key, msg.version, msg.responsible)
    effects += [MoveData(src=state.node_id, dst=t, op=msg.op, item=item, responsible=msg.responsible,
                         coordinator=msg.coordinator) for t in msg.fresh]
    return effects


def on_move_data(state, msg, now):
    item = msg.item
    if not state.complies(item.dhr):
        return [target_ack(state, msg, item.key, ok=False)]
    store_target_copy(state, item)
    return [target_ack(state, msg, item.key)] + to_responsible(state, msg, item.key, item.version, msg.responsible)


def on_replica_ack(state, msg, now):
    state.replica_acks.setdefault((msg.key, msg.op), set()).add(msg.src)
    return check_commit(state, msg.key)


def check_commit(state, key):
    """Install the new relay entry once every target of a pending update confirmed"""
    pending = state.pending_moves.get(key)
    if pending is None:
        return []
    acked = state.replica_acks.get((key, pending.op), set())
    if not set(pending.targets) <= acked:
        return []

    del state.pending_moves[key]
    state.replica_acks.pop((key, pending.op), None)
    entry = RelayEntry(key, pending.targets, pending.dhr, pending.version, pending.origin, pending.op)
    if entry.newer_than(state.relay_store.get(key)):
        state.relay_store[key] = entry
    state.data_store.pop(key, None)
    if pending.released:
        state.released[key] = pending.released
    else:
        state.released.pop(key, None)

    effects = [RelayAck(src=state.node_id, dst=pending.coordinator, op=pending.op, key=key,
                        targets=pending.targets, released=pending.released)]
    if pending.mover:
        effects += [TargetDelete(src=state.node_id, dst=t, op=pending.op, key=key, version=pending.version)
                    for t in pending.released]
    return effects


############## Delete ##############

def on_delete(state, msg, now):
    key = msg.key
    found = False
    forwarded = ()
    effects = []

    data = state.data_store.get(key)
    if data is not None and data.version <= msg.version:
        del state.data_store[key]
        found = True

    entry = state.relay_store.get(key)
    if entry is not None and entry.version <= msg.version:
        del state.relay_store[key]
        found = True
        forwarded = entry.targets
        effects += [TargetDelete(src=state.node_id, dst=t, op=msg.op, key=key, version=msg.version,
                                 coordinator=msg.coordinator) for t in entry.targets]

    state.pending_moves.pop(key, None)
    state.released.pop(key, None)
    effects.append(DeleteAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=key, found=found,
                             forwarded=forwarded))
    return effects


def on_target_delete(state, msg, now):
    copy = state.target_store.get(msg.key)
    found = copy is not None and copy.version <= msg.version
    if found:
        del state.target_store[msg.key]
        state.expiry_sent.pop(msg.key, None)
    if msg.coordinator is None:
        return []
    return [TargetDeleteAck(src=state.node_id, dst=msg.coordinator, op=msg.op, key=msg.key, found=found)]


############## Repair ##############

def on_rollback(state, msg, now):
    dropped = 0
    for store in (state.data_store, state.target_store, state.relay_store):
        record = store.get(msg.key)
        if record is not None and op_matches(record.op, msg.op):
            del store[msg.key]
            dropped += 1
    pending = state.pending_moves.get(msg.key)
    if pending is not None and op_matches(pending.op, msg.op):
        del state.pending_moves[msg.key]
    if dropped:
        logger.info('%.1fms node %s rolled back %r of %s', now / NS_PER_MS, state.node_id, msg.key, msg.op)
    return []


def on_cleanup(state, msg, now):
    key = msg.key
    candidates = set(msg.candidates)

    pending = state.pending_moves.get(key)
    if pending is not None and op_matches(pending.op, msg.op):
        del state.pending_moves[key]
        candidates |= set(pending.targets) | set(pending.previous)
    for ack_key in [k for k in state.replica_acks if k[0] == key and op_matches(k[1], msg.op)]:
        del state.replica_acks[ack_key]
    # the mover may have crashed before telling the old targets to delete
    candidates |= set(state.released.pop(key, ()))

    entry = state.relay_store.get(key)
    keep = entry.targets if entry is not None else ()
    if entry is not None:
        candidates |= set(entry.targets)
    return [Prune(src=state.node_id, dst=n, op=msg.op, key=key, keep=keep, version=msg.version)
            for n in sorted(candidates, key=str) if n not in keep]


def on_prune(state, msg, now):
    copy = state.target_store.get(msg.key)
    if copy is not None and state.node_id not in msg.keep and copy.version <= msg.version:
        del state.target_store[msg.key]
        logger.info('%.1fms node %s pruned unreferenced %r', now / NS_PER_MS, state.node_id, msg.key)
    return []


def on_broadcast_delete(state, msg, now):
    for store in (state.data_store, state.target_store, state.relay_store):
        record = store.get(msg.key)
        if record is not None and record.version <= msg.version:
            del store[msg.key]
    state.pending_moves.pop(msg.key, None)
    state.expiry_sent.pop(msg.key, None)
    state.released.pop(msg.key, None)
    return []


def on_delegated_delete(state, msg, now):
    logger.info('%.1fms node %s deletes expired %r for node %s', now / NS_PER_MS, state.node_id, msg.key, msg.src)
    return state.coordinator.submit_delete(msg.key, now)


############## Background ##############

def on_announce(state, msg, now):
    state.capability_replica.announce(msg.caps, msg.seq)
    return []


def on_syn(state, msg, now):
    return [on_gossip_syn(state, msg)]


def on_ack(state, msg, now):
    on_gossip_ack(state, msg)
    return []


HANDLERS = {
    Write: on_write,
    TargetWrite: on_target_write,
    RelayWrite: on_relay_write,
    Read: on_read,
    ForwardRead: on_forward_read,
    Update: on_update,
    TargetUpdate: on_target_update,
    MoveInstruct: on_move_instruct,
    MoveData: on_move_data,
    ReplicaAck: on_replica_ack,
    Delete: on_delete,
    TargetDelete: on_target_delete,
    Rollback: on_rollback,
    Cleanup: on_cleanup,
    Prune: on_prune,
    BroadcastDelete: on_broadcast_delete,
    DelegatedDelete: on_delegated_delete,
    CapabilityAnnounce: on_announce,
    GossipSyn: on_syn,
    GossipAck: on_ack,
}


def local_apply(state, msg, now):
    """
    Apply a message addressed to this node

    Returns (state, effects) where effects are outbound messages, timers and client replies.
    A read for a key without data or reference is answered with a not-found reply.
    """
    if isinstance(msg, COORDINATOR_BOUND):
        return state, state.coordinator.on_reply(msg, now)
    return state, HANDLERS[type(msg)](state, msg, now)


def on_timer(state, timer, now):
    """Fire a timer of this node, periodic timers re-arm themselves"""
    if timer.kind == TIMER_DEADLINE:
        return state.coordinator.on_deadline(timer.data, now)

    if timer.kind == TIMER_GOSSIP:
        msg = gossip_round(state, now, state.rng)
        rearm = Timer(state.node_id, TIMER_GOSSIP, now + state.gossip.sync_interval)
        return [rearm] if msg is None else [msg, rearm]

    if timer.kind == TIMER_LOAD_REFRESH:
        state.load_view.refresh_own(state.load(), now)
        return [Timer(state.node_id, TIMER_LOAD_REFRESH, now + state.gossip.load_refresh)]

    if timer.kind == TIMER_EXPIRY:
        return expire_items(state, now) + [Timer(state.node_id, TIMER_EXPIRY, now + state.expiry_sweep)]

    raise ValueError(f'unknown timer kind {timer.kind!r}')


def capability_bootstrap(state, caps):
    """
    Install (or replace) this node's capabilities and announce them to every other node

    Announcements carry an increasing sequence number, the newest one wins everywhere
    """
    state.capabilities = caps
    state.announce_seq += 1
    state.capability_replica.announce(caps, state.announce_seq)
    return [CapabilityAnnounce(src=state.node_id, dst=n, caps=caps, seq=state.announce_seq)
            for n in state.ring.nodes if n != state.node_id]


def snapshot(state):
    """JSON dump of the stores (input of the global scan)"""
    return {
        'node': state.node_id,
        'replication': state.replication,
        'ring': state.ring.to_json(),
        'capabilities': state.capabilities.to_json(),
        'load': state.load(),
        'relay_bytes': state.relay_bytes(),
        'data_store': [state.data_store[k].to_json() for k in sorted(state.data_store)],
        'relay_store': [state.relay_store[k].to_json() for k in sorted(state.relay_store)],
        'target_store': [state.target_store[k].to_json() for k in sorted(state.target_store)],
    }
